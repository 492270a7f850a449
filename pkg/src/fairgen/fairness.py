"""Fairness metrics: balanced accuracy, DPR, EOddR, intersectional subgroups.

Both ratios follow the min/max-over-subgroups form. The equalized-odds ratio
takes a *joint* min/max over all (subgroup, true label) cells, both rates of
every subgroup pooled together, which differs from the common per-label
ratio; ``eoddr_variant='standard'`` exposes the conventional
min(TPR-ratio, FPR-ratio) reading instead.

Convention: when no subgroup has any favourable prediction, the ratio is 1.0
(no disparity to measure) and the report carries an explicit
``all_negative_predictions`` flag so a degenerate predictor cannot pass as
fair unnoticed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

from .errors import SingleClassTruth, TooFewSubgroups, UndefinedRate
from .tabular import DataTable

SubgroupKey = tuple  # tuple[(column, value), ...]

REASON_LOW_SUPPORT = "low_support"
REASON_UNDEFINED_RATE = "undefined_rate"

DEFAULT_MIN_SUPPORT = 10


@dataclass(frozen=True)
class SubgroupStats:
    key: SubgroupKey
    n: int
    n_true_favourable: int
    n_true_unfavourable: int
    n_pred_favourable: int
    positive_rate: float
    tpr: "float | None"
    fpr: "float | None"
    lattice: str = "intersectional"

    def to_json_dict(self) -> dict:
        return {
            "key": [[c, v] for c, v in self.key],
            "lattice": self.lattice,
            "n": self.n,
            "support_true_favourable": self.n_true_favourable,
            "support_true_unfavourable": self.n_true_unfavourable,
            "n_pred_favourable": self.n_pred_favourable,
            "positive_rate": self.positive_rate,
            "tpr": self.tpr,
            "fpr": self.fpr,
        }


@dataclass(frozen=True)
class ExcludedSubgroup:
    key: SubgroupKey
    lattice: str
    reason: str

    def to_json_dict(self) -> dict:
        return {"key": [[c, v] for c, v in self.key], "lattice": self.lattice, "reason": self.reason}


@dataclass(frozen=True)
class FairnessReport:
    bca: float
    per_attribute: dict
    intersectional: dict
    subgroups: tuple[SubgroupStats, ...]
    excluded: tuple[ExcludedSubgroup, ...]
    all_negative_predictions: bool
    eoddr_variant: str = "joint"
    min_support: int = DEFAULT_MIN_SUPPORT

    def to_json_dict(self) -> dict:
        return {
            "bca": self.bca,
            "per_attribute": {
                attr: dict(metrics) for attr, metrics in sorted(self.per_attribute.items())
            },
            "intersectional": dict(self.intersectional),
            "subgroups": [s.to_json_dict() for s in self.subgroups],
            "excluded_subgroups": [e.to_json_dict() for e in self.excluded],
            "all_negative_predictions": self.all_negative_predictions,
            "eoddr_variant": self.eoddr_variant,
            "min_support": self.min_support,
        }


def balanced_accuracy(y_true: Sequence, y_pred: Sequence) -> float:
    """Mean per-class recall; (TPR + TNR) / 2 in the binary case."""
    if len(y_true) != len(y_pred) or not y_true:
        raise ValueError("y_true and y_pred must be equal-length and non-empty")
    classes = sorted(set(y_true))
    if len(classes) < 2:
        raise SingleClassTruth("balanced accuracy needs both classes in y_true")
    recalls = []
    for c in classes:
        total = sum(1 for t in y_true if t == c)
        correct = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        recalls.append(correct / total)
    return sum(recalls) / len(recalls)


def build_subgroups(
    table: DataTable, attributes: Sequence[str], min_support: int = DEFAULT_MIN_SUPPORT
) -> tuple[list[SubgroupKey], list[tuple[SubgroupKey, str]]]:
    """Cross-product of observed attribute values, support-filtered.

    Returns (included keys, [(key, reason), ...] excluded). Value order
    follows the schema's declared categories so output is deterministic.
    """
    if not attributes:
        raise ValueError("attributes must be non-empty")
    observed: list[list[str]] = []
    for attr in attributes:
        spec = table.schema.column(attr)
        seen = set(table.column(attr))
        observed.append([c for c in spec.categories if c in seen])

    columns = {attr: table.column(attr) for attr in attributes}
    included: list[SubgroupKey] = []
    excluded: list[tuple[SubgroupKey, str]] = []
    for combo in itertools.product(*observed):
        key = tuple(zip(attributes, combo))
        n = sum(
            1
            for i in range(table.n_rows)
            if all(columns[a][i] == v for a, v in key)
        )
        if n < min_support:
            excluded.append((key, REASON_LOW_SUPPORT))
        else:
            included.append(key)
    return included, excluded


def subgroup_stats(
    key: SubgroupKey,
    y_true: Sequence,
    y_pred: Sequence,
    table: DataTable,
    lattice: str = "intersectional",
) -> SubgroupStats:
    favourable = table.schema.favourable_label
    columns = {attr: table.column(attr) for attr, _ in key}
    rows = [
        i for i in range(table.n_rows) if all(columns[a][i] == v for a, v in key)
    ]
    n = len(rows)
    pred_fav = sum(1 for i in rows if y_pred[i] == favourable)
    true_fav = [i for i in rows if y_true[i] == favourable]
    true_unfav = [i for i in rows if y_true[i] != favourable]
    tpr = (
        sum(1 for i in true_fav if y_pred[i] == favourable) / len(true_fav)
        if true_fav
        else None
    )
    fpr = (
        sum(1 for i in true_unfav if y_pred[i] == favourable) / len(true_unfav)
        if true_unfav
        else None
    )
    return SubgroupStats(
        key=key,
        n=n,
        n_true_favourable=len(true_fav),
        n_true_unfavourable=len(true_unfav),
        n_pred_favourable=pred_fav,
        positive_rate=pred_fav / n,
        tpr=tpr,
        fpr=fpr,
        lattice=lattice,
    )


def demographic_parity_ratio(stats: Sequence[SubgroupStats]) -> float:
    """min/max of subgroup favourable-prediction rates; 1.0 when max is 0."""
    if len(stats) < 2:
        raise TooFewSubgroups("demographic parity ratio needs >= 2 subgroups")
    rates = [s.positive_rate for s in stats]
    top = max(rates)
    if top == 0.0:
        return 1.0
    return min(rates) / top


def equalized_odds_ratio(stats: Sequence[SubgroupStats], variant: str = "joint") -> float:
    """Ratio of extreme P(Ŷ=favourable | subgroup, Y=y) rates.

    ``'joint'`` pools every subgroup's TPR and FPR into one set and divides
    the global min by the global max. ``'standard'`` computes the min/max
    ratio separately per true label and returns the smaller. Either way an
    included subgroup missing one of the true-label cells is an error;
    filter those out (with a reported reason) before calling.
    """
    if variant not in ("joint", "standard"):
        raise ValueError(f"unknown eoddr variant {variant!r}")
    if len(stats) < 2:
        raise TooFewSubgroups("equalized odds ratio needs >= 2 subgroups")
    for s in stats:
        if s.tpr is None:
            raise UndefinedRate(s.key, "favourable")
        if s.fpr is None:
            raise UndefinedRate(s.key, "unfavourable")

    def ratio(values: list[float]) -> float:
        top = max(values)
        return 1.0 if top == 0.0 else min(values) / top

    if variant == "joint":
        return ratio([s.tpr for s in stats] + [s.fpr for s in stats])
    return min(ratio([s.tpr for s in stats]), ratio([s.fpr for s in stats]))


def _lattice_metrics(
    lattice: str,
    attributes: Sequence[str],
    y_true: Sequence,
    y_pred: Sequence,
    table: DataTable,
    min_support: int,
    eoddr_variant: str,
) -> tuple[dict, list[SubgroupStats], list[ExcludedSubgroup]]:
    included, low_support = build_subgroups(table, attributes, min_support)
    excluded = [ExcludedSubgroup(k, lattice, reason) for k, reason in low_support]
    stats = [subgroup_stats(k, y_true, y_pred, table, lattice) for k in included]

    metrics = {"dpr": None, "eoddr": None}
    if len(stats) >= 2:
        metrics["dpr"] = demographic_parity_ratio(stats)
    defined = [s for s in stats if s.tpr is not None and s.fpr is not None]
    excluded.extend(
        ExcludedSubgroup(s.key, lattice, REASON_UNDEFINED_RATE)
        for s in stats
        if s.tpr is None or s.fpr is None
    )
    if len(defined) >= 2:
        metrics["eoddr"] = equalized_odds_ratio(defined, eoddr_variant)
    return metrics, stats, excluded


def evaluate(
    y_true: Sequence,
    y_pred: Sequence,
    test: DataTable,
    protected: Sequence[str],
    min_support: int = DEFAULT_MIN_SUPPORT,
    eoddr_variant: str = "joint",
) -> FairnessReport:
    """Full report: BCA, per-attribute ratios, and the intersectional lattice.

    Subgroups below ``min_support`` rows (or, for EOddR, missing a true-label
    cell) are excluded from the ratios and listed with machine-readable
    reasons rather than silently dropped. With a single protected attribute
    the intersectional lattice coincides with the per-attribute one.
    """
    if len(y_true) != test.n_rows or len(y_pred) != test.n_rows:
        raise ValueError("prediction/label lengths must match the evaluation table")
    if not protected:
        raise ValueError("at least one protected attribute is required")

    bca = balanced_accuracy(y_true, y_pred)
    favourable = test.schema.favourable_label
    all_negative = not any(p == favourable for p in y_pred)

    per_attribute: dict = {}
    subgroups: list[SubgroupStats] = []
    excluded: list[ExcludedSubgroup] = []
    for attr in protected:
        metrics, stats, attr_excluded = _lattice_metrics(
            attr, [attr], y_true, y_pred, test, min_support, eoddr_variant
        )
        per_attribute[attr] = metrics
        subgroups.extend(stats)
        excluded.extend(attr_excluded)

    intersectional, inter_stats, inter_excluded = _lattice_metrics(
        "intersectional", list(protected), y_true, y_pred, test, min_support, eoddr_variant
    )
    subgroups.extend(inter_stats)
    excluded.extend(inter_excluded)

    return FairnessReport(
        bca=bca,
        per_attribute=per_attribute,
        intersectional=intersectional,
        subgroups=tuple(subgroups),
        excluded=tuple(excluded),
        all_negative_predictions=all_negative,
        eoddr_variant=eoddr_variant,
        min_support=min_support,
    )
