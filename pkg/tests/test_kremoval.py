from __future__ import annotations

import math

import numpy as np
import pytest

from fairgen.errors import EmptyGroup, NegativeK, ZeroVector
from fairgen.kremoval import (
    GROUP_PRIVILEGED_FAVOURABLE,
    GROUP_UNPRIVILEGED_UNFAVOURABLE,
    KRemovalDebiaser,
    cosine_similarity,
    form_groups,
    remove_top_k,
    score_groups,
)
from fairgen.tabular import (
    CATEGORICAL,
    NUMERIC,
    ROLE_LABEL,
    ROLE_PROTECTED,
    ColumnSpec,
    DataTable,
    Schema,
)

# ---------------------------------------------------------------------------
# Independent oracle: pure-Python encoding + O(|G1|*|G2|) similarity loop.
# Shares nothing with the implementation except the documented contracts.
# ---------------------------------------------------------------------------


def oracle_encode(table):
    vectors = {rid: [] for rid in table.row_ids}
    for spec in table.schema.columns:
        if spec.role in ("protected", "label"):
            continue
        column = table.column(spec.name)
        if spec.kind == "numeric":
            lo, hi = min(column), max(column)
            for rid, v in zip(table.row_ids, column):
                vectors[rid].append(0.0 if hi == lo else (v - lo) / (hi - lo))
        else:
            for rid, v in zip(table.row_ids, column):
                vectors[rid].extend(1.0 if v == c else 0.0 for c in spec.categories)
    return vectors


def oracle_cosine(a, b):
    dot = math.fsum(x * y for x, y in zip(a, b))
    na = math.sqrt(math.fsum(x * x for x in a))
    nb = math.sqrt(math.fsum(y * y for y in b))
    if na == 0.0 or nb == 0.0:
        return None
    return dot / (na * nb)


def oracle_scores(table, g1, g2):
    """Max similarity + smallest-argmax match per row, by exhaustive loops.

    Iterating opposite rows in ascending row_id order and updating only on a
    strict improvement realizes the documented tie-break (smallest row_id
    among equal scores). Rows with no defined similarity score -1 / no match.
    """
    vectors = oracle_encode(table)
    out = {}
    for own, opp, group in ((g1, g2, GROUP_PRIVILEGED_FAVOURABLE),
                            (g2, g1, GROUP_UNPRIVILEGED_UNFAVOURABLE)):
        for rid in own:
            best, match = None, None
            for oid in sorted(opp):
                sim = oracle_cosine(vectors[rid], vectors[oid])
                if sim is None:
                    continue
                sim = max(-1.0, min(1.0, sim))
                if best is None or sim > best:
                    best, match = sim, oid
            if best is None:
                best, match = -1.0, None
            out[rid] = (group, best, match)
    return out


# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------


def two_feature_schema():
    return Schema(
        columns=(
            ColumnSpec("x1", NUMERIC),
            ColumnSpec("x2", NUMERIC),
            ColumnSpec("sex", CATEGORICAL, ROLE_PROTECTED, ("male", "female")),
            ColumnSpec("y", CATEGORICAL, ROLE_LABEL, ("no", "yes")),
        ),
        label_column="y",
        favourable_label="yes",
        privileged_values={"sex": "male"},
    )


def random_table(rng, n, with_categorical=False):
    columns = [
        ColumnSpec("x1", NUMERIC),
        ColumnSpec("x2", NUMERIC),
    ]
    if with_categorical:
        columns.append(ColumnSpec("kind", CATEGORICAL, categories=("a", "b", "c")))
    columns += [
        ColumnSpec("sex", CATEGORICAL, ROLE_PROTECTED, ("male", "female")),
        ColumnSpec("y", CATEGORICAL, ROLE_LABEL, ("no", "yes")),
    ]
    schema = Schema(
        columns=tuple(columns),
        label_column="y",
        favourable_label="yes",
        privileged_values={"sex": "male"},
    )
    rows = []
    for _ in range(n):
        row = [float(rng.uniform(0, 10)), float(rng.uniform(-3, 3))]
        if with_categorical:
            row.append(str(rng.choice(["a", "b", "c"])))
        row += [str(rng.choice(["male", "female"])), str(rng.choice(["no", "yes"]))]
        rows.append(tuple(row))
    return DataTable.build(schema, rows)


def groups_or_none(table):
    try:
        return form_groups(table, "sex")
    except EmptyGroup:
        return None


# ---------------------------------------------------------------------------
# form_groups
# ---------------------------------------------------------------------------


class TestFormGroups:
    def test_four_row_example(self):
        table = DataTable.build(
            two_feature_schema(),
            [(1, 1, "male", "yes"), (1, 1, "male", "no"),
             (1, 1, "female", "yes"), (1, 1, "female", "no")],
        )
        g1, g2 = form_groups(table, "sex")
        assert g1 == (0,)
        assert g2 == (3,)

    def test_empty_group_raises(self):
        table = DataTable.build(
            two_feature_schema(), [(1, 1, "male", "yes"), (2, 2, "male", "yes")]
        )
        with pytest.raises(EmptyGroup):
            form_groups(table, "sex")

    def test_groups_do_not_cover_everything(self, adult_table):
        g1, g2 = form_groups(adult_table, "sex")
        assert len(g1) + len(g2) < adult_table.n_rows

    def test_multivalued_protected_pools_unprivileged(self, adult_table):
        g1, g2 = form_groups(adult_table, "race")
        races = dict(zip(adult_table.row_ids, adult_table.column("race")))
        assert all(races[r] == "White" for r in g1)
        assert all(races[r] != "White" for r in g2)


# ---------------------------------------------------------------------------
# cosine_similarity
# ---------------------------------------------------------------------------


class TestCosine:
    def test_identical_vectors(self):
        assert cosine_similarity([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)

    def test_orthogonal_vectors(self):
        assert cosine_similarity([1, 0], [0, 1]) == pytest.approx(0.0)

    def test_known_value_one_over_sqrt_two(self):
        assert cosine_similarity([1, 0], [1, 1]) == pytest.approx(1 / math.sqrt(2), abs=1e-9)

    def test_zero_vector_raises(self):
        with pytest.raises(ZeroVector):
            cosine_similarity([0, 0], [1, 1])


# ---------------------------------------------------------------------------
# score_groups
# ---------------------------------------------------------------------------


class TestScoreGroups:
    def test_duplicate_across_groups_scores_one(self):
        table = DataTable.build(
            two_feature_schema(),
            [(5, 1, "male", "yes"), (5, 1, "female", "no"), (0, 0.5, "female", "no")],
        )
        g1, g2 = form_groups(table, "sex")
        records = {r.row_id: r for r in score_groups(table, g1, g2)}
        assert records[0].score == pytest.approx(1.0)
        assert records[0].matched_row_id == 1

    def test_single_pair_orthogonal(self):
        table = DataTable.build(
            two_feature_schema(), [(1, 0, "male", "yes"), (0, 1, "female", "no")]
        )
        g1, g2 = form_groups(table, "sex")
        records = score_groups(table, g1, g2)
        assert all(r.score == pytest.approx(0.0) for r in records)

    def test_matches_brute_force_oracle_on_random_tables(self):
        rng = np.random.default_rng(42)
        checked = 0
        while checked < 12:
            table = random_table(rng, int(rng.integers(8, 30)), with_categorical=True)
            groups = groups_or_none(table)
            if groups is None:
                continue
            checked += 1
            expected = oracle_scores(table, *groups)
            for record in score_groups(table, *groups):
                group, score, match = expected[record.row_id]
                assert record.group == group
                assert record.score == pytest.approx(score, abs=1e-9)
                assert record.matched_row_id == match

    def test_mean_statistic_matches_oracle(self):
        rng = np.random.default_rng(5)
        table = random_table(rng, 20)
        groups = groups_or_none(table)
        assert groups is not None
        vectors = oracle_encode(table)
        g1, g2 = groups
        for record in score_groups(table, g1, g2, statistic="mean"):
            opp = g2 if record.group == GROUP_PRIVILEGED_FAVOURABLE else g1
            sims = [oracle_cosine(vectors[record.row_id], vectors[o]) for o in opp]
            sims = [s for s in sims if s is not None]
            assert record.score == pytest.approx(sum(sims) / len(sims), abs=1e-9)


# ---------------------------------------------------------------------------
# remove_top_k
# ---------------------------------------------------------------------------


def scored_table(rng, n=20):
    table = random_table(rng, n)
    groups = groups_or_none(table)
    if groups is None:
        return None
    return table, score_groups(table, *groups), groups


class TestRemoveTopK:
    def test_k_zero_is_identity(self):
        rng = np.random.default_rng(0)
        table, scores, _ = scored_table(rng)
        outcome = remove_top_k(table, scores, 0.0)
        assert outcome.kept.rows == table.rows
        assert outcome.removed_ids == ()

    def test_exact_count_for_three_percent_of_hundred(self):
        # 100-row G1: ceil(3% of 100) must be exactly 3.
        rows = [(i, i % 7, "male", "yes") for i in range(100)]
        rows += [(200 + i, i % 5, "female", "no") for i in range(50)]
        table = DataTable.build(two_feature_schema(), rows)
        g1, g2 = form_groups(table, "sex")
        outcome = remove_top_k(table, score_groups(table, g1, g2), 3.0)
        removed_g1 = [r for r in outcome.removed_ids if r in set(g1)]
        removed_g2 = [r for r in outcome.removed_ids if r in set(g2)]
        assert len(removed_g1) == 3  # ceil(0.03 * 100)
        assert len(removed_g2) == 2  # ceil(0.03 * 50)

    def test_crafted_duplicates_removed_first(self):
        # Rows 2 and 7 are exact cross-group feature duplicates; under the
        # brute-force oracle they score 1.0, strictly above the others, so
        # k=10% over these group sizes removes exactly that pair. The one-hot
        # feature block pins the vector scale, so only true duplicates can
        # reach cosine 1.0 (proportional numeric pairs cannot).
        schema = Schema(
            columns=(
                ColumnSpec("x1", NUMERIC),
                ColumnSpec("x2", NUMERIC),
                ColumnSpec("kind", CATEGORICAL, categories=("a", "b", "c")),
                ColumnSpec("sex", CATEGORICAL, ROLE_PROTECTED, ("male", "female")),
                ColumnSpec("y", CATEGORICAL, ROLE_LABEL, ("no", "yes")),
            ),
            label_column="y",
            favourable_label="yes",
            privileged_values={"sex": "male"},
        )
        rows = [
            (1.0, 0.0, "b", "male", "yes"),   # 0
            (2.0, 1.0, "c", "male", "yes"),   # 1
            (3.5, 2.0, "a", "male", "yes"),   # 2  duplicate of 7
            (4.0, 9.0, "b", "male", "yes"),   # 3
            (5.0, 4.0, "c", "male", "yes"),   # 4
            (9.0, 5.0, "c", "female", "no"),  # 5
            (8.0, 7.0, "b", "female", "no"),  # 6
            (3.5, 2.0, "a", "female", "no"),  # 7  duplicate of 2
            (7.0, 8.0, "c", "female", "no"),  # 8
            (6.0, 6.0, "b", "female", "no"),  # 9
        ]
        table = DataTable.build(schema, rows)
        g1, g2 = form_groups(table, "sex")
        scores = score_groups(table, g1, g2)
        by_id = {r.row_id: r.score for r in scores}
        assert by_id[2] == pytest.approx(1.0)
        assert by_id[7] == pytest.approx(1.0)
        assert all(by_id[r] < 1.0 for r in by_id if r not in (2, 7))
        outcome = remove_top_k(table, scores, 10.0)
        assert set(outcome.removed_ids) == {2, 7}

    def test_negative_k_rejected(self):
        rng = np.random.default_rng(1)
        table, scores, _ = scored_table(rng)
        with pytest.raises(NegativeK):
            remove_top_k(table, scores, -1.0)

    def test_monotone_in_k_and_never_touches_ungrouped_rows(self):
        rng = np.random.default_rng(9)
        done = 0
        while done < 10:
            result = scored_table(rng, int(rng.integers(10, 40)))
            if result is None:
                continue
            done += 1
            table, scores, (g1, g2) = result
            grouped = set(g1) | set(g2)
            previous: set = set()
            for k in (1.0, 2.0, 3.0):
                outcome = remove_top_k(table, scores, k)
                current = set(outcome.removed_ids)
                assert previous <= current
                assert current <= grouped
                previous = current

    def test_permutation_robustness(self):
        rng = np.random.default_rng(13)
        table = random_table(rng, 24)
        groups = groups_or_none(table)
        assert groups is not None
        outcome = remove_top_k(table, score_groups(table, *groups), 5.0)

        perm = rng.permutation(table.n_rows)
        shuffled = DataTable(
            table.schema,
            tuple(table.rows[i] for i in perm),
            tuple(table.row_ids[i] for i in perm),
        )
        groups2 = form_groups(shuffled, "sex")
        outcome2 = remove_top_k(shuffled, score_groups(shuffled, *groups2), 5.0)
        assert set(outcome.removed_ids) == set(outcome2.removed_ids)
        assert set(outcome.kept.row_ids) == set(outcome2.kept.row_ids)


class TestKRemovalDebiaser:
    def test_fit_transform_and_audit_surface(self):
        rng = np.random.default_rng(21)
        table = random_table(rng, 30)
        assert groups_or_none(table) is not None
        debiaser = KRemovalDebiaser("sex", k_percent=2.0)
        kept = debiaser.fit_transform(table)
        assert kept.n_rows == table.n_rows - len(debiaser.outcome_.removed_ids)
        doc = debiaser.outcome_.to_json_dict()
        assert doc["k_percent"] == 2.0
        assert doc["removed_ids"] == sorted(doc["removed_ids"])

    def test_transform_rejects_other_table(self):
        rng = np.random.default_rng(22)
        table = random_table(rng, 30)
        assert groups_or_none(table) is not None
        debiaser = KRemovalDebiaser("sex", 1.0).fit(table)
        with pytest.raises(ValueError):
            debiaser.transform(table.filter_ids(table.row_ids[:10]))
