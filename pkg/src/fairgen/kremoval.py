"""K% removal: delete the most bias-inducing rows before synthesis.

Two groups are formed from the training table: rows that are privileged
*and* favourably labelled, and rows that are unprivileged *and* unfavourably
labelled. Rows whose (protected- and label-free) feature vector closely
matches an opposite-group row act as pseudo label noise; each group's top
K% by cross-group similarity is removed.

All steps are pure functions of immutable inputs; ties are broken on
original row_ids so results are invariant to input row order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import BaseEstimator, ceil_count, check_is_fitted
from .encoding import TableEncoder
from .errors import EmptyGroup, NegativeK, ZeroVector
from .tabular import DataTable

GROUP_PRIVILEGED_FAVOURABLE = "privileged_favourable"
GROUP_UNPRIVILEGED_UNFAVOURABLE = "unprivileged_unfavourable"

#: Score assigned to rows whose encoded feature vector has zero norm; cosine
#: similarity is undefined there, so they rank as least similar.
ZERO_VECTOR_SCORE = -1.0


@dataclass(frozen=True)
class BiasScoreRecord:
    row_id: int
    group: str
    score: float
    matched_row_id: "int | None"


@dataclass(frozen=True)
class RemovalOutcome:
    kept: DataTable
    removed_ids: tuple[int, ...]
    k_percent: float
    scores: tuple[BiasScoreRecord, ...]

    def to_json_dict(self) -> dict:
        return {
            "k_percent": self.k_percent,
            "removed_ids": list(self.removed_ids),
            "scores": [
                {
                    "row_id": r.row_id,
                    "group": r.group,
                    "score": r.score,
                    "matched_row_id": r.matched_row_id,
                }
                for r in self.scores
            ],
        }


def form_groups(table: DataTable, protected_column: str) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Split rows into the two cross-group comparison sets.

    G1 holds rows with the privileged protected value and the favourable
    label; G2 holds rows with any other protected value and a non-favourable
    label. Rows matching neither predicate (e.g. privileged + unfavourable)
    belong to no group and are never removal candidates.
    """
    schema = table.schema
    privileged = schema.privileged_value(protected_column)
    favourable = schema.favourable_label
    prot = table.column(protected_column)
    labels = table.labels()

    g1, g2 = [], []
    for rid, s, y in zip(table.row_ids, prot, labels):
        if s == privileged and y == favourable:
            g1.append(rid)
        elif s != privileged and y != favourable:
            g2.append(rid)
    if not g1:
        raise EmptyGroup(GROUP_PRIVILEGED_FAVOURABLE)
    if not g2:
        raise EmptyGroup(GROUP_UNPRIVILEGED_UNFAVOURABLE)
    return tuple(sorted(g1)), tuple(sorted(g2))


def cosine_similarity(a, b) -> float:
    """Plain cosine similarity, clipped into [-1, 1].

    Raises ZeroVector when either input has zero norm; the scoring loop maps
    such rows to ``ZERO_VECTOR_SCORE`` instead of propagating the error.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine similarity undefined for a zero vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def _normalized(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(matrix, axis=1)
    nonzero = norms > 0.0
    unit = np.zeros_like(matrix)
    unit[nonzero] = matrix[nonzero] / norms[nonzero, None]
    return unit, nonzero


def _best_matches(
    own_unit: np.ndarray,
    own_nonzero: np.ndarray,
    opp_unit: np.ndarray,
    opp_nonzero: np.ndarray,
    opp_ids: np.ndarray,
    statistic: str,
    block: int = 2048,
) -> tuple[np.ndarray, list]:
    """Per own-row score against the opposite group, blocked to bound memory.

    With ``statistic='max'`` the score is the best cosine similarity and the
    match is the smallest opposite row_id attaining it (opp rows are ordered
    by ascending row_id, so the first argmax is the tie-break winner). With
    ``'mean'`` the score is the average similarity and no single match is
    reported.
    """
    n = own_unit.shape[0]
    scores = np.full(n, ZERO_VECTOR_SCORE)
    matches: list = [None] * n
    usable_opp = opp_unit[opp_nonzero]
    usable_ids = opp_ids[opp_nonzero]
    if usable_opp.shape[0] == 0:
        return scores, matches
    for start in range(0, n, block):
        stop = min(start + block, n)
        sims = np.clip(own_unit[start:stop] @ usable_opp.T, -1.0, 1.0)
        if statistic == "max":
            best = np.argmax(sims, axis=1)
            for i in range(stop - start):
                if own_nonzero[start + i]:
                    scores[start + i] = float(sims[i, best[i]])
                    matches[start + i] = int(usable_ids[best[i]])
        else:
            means = sims.mean(axis=1)
            for i in range(stop - start):
                if own_nonzero[start + i]:
                    scores[start + i] = float(means[i])
    return scores, matches


def score_groups(
    table: DataTable,
    g1: tuple[int, ...],
    g2: tuple[int, ...],
    statistic: str = "max",
) -> list[BiasScoreRecord]:
    """Score every grouped row by cross-group cosine similarity.

    Encoding excludes protected and label columns, with min-max statistics
    taken from the full table. Records come back ordered G1 then G2, each by
    ascending row_id. Zero-norm rows score ``ZERO_VECTOR_SCORE`` with no
    match.
    """
    if statistic not in ("max", "mean"):
        raise ValueError(f"unknown similarity statistic {statistic!r}")
    if not g1 or not g2:
        raise EmptyGroup(GROUP_PRIVILEGED_FAVOURABLE if not g1 else GROUP_UNPRIVILEGED_UNFAVOURABLE)

    encoded = TableEncoder(include_protected=False, include_label=False).fit_transform(table)
    position = {rid: i for i, rid in enumerate(encoded.row_ids)}
    g1 = tuple(sorted(g1))
    g2 = tuple(sorted(g2))
    m1 = encoded.values[[position[r] for r in g1]]
    m2 = encoded.values[[position[r] for r in g2]]
    u1, nz1 = _normalized(m1)
    u2, nz2 = _normalized(m2)

    records: list[BiasScoreRecord] = []
    for own_ids, own_u, own_nz, opp_u, opp_nz, opp_ids, group in (
        (g1, u1, nz1, u2, nz2, np.asarray(g2), GROUP_PRIVILEGED_FAVOURABLE),
        (g2, u2, nz2, u1, nz1, np.asarray(g1), GROUP_UNPRIVILEGED_UNFAVOURABLE),
    ):
        scores, matches = _best_matches(own_u, own_nz, opp_u, opp_nz, opp_ids, statistic)
        records.extend(
            BiasScoreRecord(rid, group, float(s), m)
            for rid, s, m in zip(own_ids, scores, matches)
        )
    return records


def remove_top_k(
    table: DataTable, scores: list[BiasScoreRecord], k_percent: float
) -> RemovalOutcome:
    """Drop each group's top ``ceil(k% of group size)`` rows by score.

    Sorting is score-descending with ties broken by ascending row_id, which
    makes removal sets monotone in K and independent of input row order.
    ``k_percent == 0`` returns the table unchanged.
    """
    if k_percent < 0:
        raise NegativeK(f"k_percent must be >= 0, got {k_percent}")
    removed: list[int] = []
    for group in (GROUP_PRIVILEGED_FAVOURABLE, GROUP_UNPRIVILEGED_UNFAVOURABLE):
        members = [r for r in scores if r.group == group]
        members.sort(key=lambda r: (-r.score, r.row_id))
        take = ceil_count(k_percent, len(members))
        removed.extend(r.row_id for r in members[:take])
    removed_ids = tuple(sorted(removed))
    return RemovalOutcome(
        kept=table.drop_ids(removed_ids),
        removed_ids=removed_ids,
        k_percent=float(k_percent),
        scores=tuple(scores),
    )


class KRemovalDebiaser(BaseEstimator):
    """Estimator wrapper around the group/score/remove steps.

    fit() scores the table; transform() must receive the same table (checked
    via row_ids) and returns it with the top-K rows removed. The full
    RemovalOutcome is exposed as ``outcome_`` for auditing.
    """

    def __init__(self, protected_column: str, k_percent: float = 1.0, statistic: str = "max"):
        self.protected_column = protected_column
        self.k_percent = k_percent
        self.statistic = statistic
        self.groups_: tuple[tuple[int, ...], tuple[int, ...]] | None = None
        self.scores_: list[BiasScoreRecord] | None = None
        self.outcome_: RemovalOutcome | None = None

    def fit(self, table: DataTable) -> "KRemovalDebiaser":
        g1, g2 = form_groups(table, self.protected_column)
        scores = score_groups(table, g1, g2, self.statistic)
        self.groups_ = (g1, g2)
        self.scores_ = scores
        self.outcome_ = remove_top_k(table, scores, self.k_percent)
        self._fitted_row_ids = table.row_ids
        return self

    def transform(self, table: DataTable) -> DataTable:
        check_is_fitted(self, "outcome_")
        if tuple(table.row_ids) != self._fitted_row_ids:
            raise ValueError("transform() expects the exact table passed to fit()")
        return self.outcome_.kept

    def fit_transform(self, table: DataTable) -> DataTable:
        return self.fit(table).transform(table)
