"""Protected-attribute-flip augmentation ranked by k-means realism.

Every training row spawns a synthetic twin with the protected value flipped
(binary columns swap; wider columns advance cyclically through the declared
categories). Twins are scored by how realistic they look relative to the raw
rows sharing their (protected value, label) cell (the inverse of the
distance to that cell's k-means centers) and the top slice is appended to
the real data.

Note the scoring rule is the *maximum* distance to any center of the cell,
taken verbatim from its source; ``realism_distance='min'`` switches to the
nearest-center reading, which is the more common realism proxy.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .base import BaseEstimator, check_is_fitted, round_half_up
from .encoding import TableEncoder
from .errors import MissingCellModel, TooFewPoints
from .tabular import DataTable

DEFAULT_EPSILON = 1e-9
DEFAULT_MAX_CLUSTERS = 8


@dataclass(frozen=True)
class ClusterModel:
    """k-means centers for one (protected value, label value) cell, in the
    encoded feature space of the raw table."""

    cell: tuple[str, str]
    centers: np.ndarray

    @property
    def k(self) -> int:
        return int(self.centers.shape[0])


@dataclass(frozen=True)
class ScoredSyntheticPoint:
    row: tuple
    source_row_id: int
    realism: "float | None" = None


def flip_protected(table: DataTable, protected_column: str) -> list[ScoredSyntheticPoint]:
    """One unscored synthetic point per row, protected cell flipped.

    Binary columns take the other value; columns with more categories take
    the next declared category cyclically.
    """
    spec = table.schema.column(protected_column)
    idx = table.schema.index_of(protected_column)
    successor = {
        cat: spec.categories[(i + 1) % len(spec.categories)]
        for i, cat in enumerate(spec.categories)
    }
    points = []
    for rid, row in zip(table.row_ids, table.rows):
        flipped = list(row)
        flipped[idx] = successor[row[idx]]
        points.append(ScoredSyntheticPoint(tuple(flipped), rid))
    return points


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centers[0] = points[first]
    closest_sq = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest_sq.sum()
        if total <= 0.0:
            # All remaining points coincide with a chosen center.
            centers[j:] = centers[0]
            return centers
        probs = closest_sq / total
        choice = int(rng.choice(n, p=probs))
        centers[j] = points[choice]
        closest_sq = np.minimum(closest_sq, ((points - centers[j]) ** 2).sum(axis=1))
    return centers


def fit_kmeans(
    points: np.ndarray,
    k: int,
    seed: int,
    max_iters: int = 100,
    tol: float = 1e-6,
) -> np.ndarray:
    """Lloyd's algorithm with k-means++ initialization.

    Deterministic for a fixed seed. An empty cluster is reseeded to the point
    farthest from its assigned center, so no stale center survives. Converges
    when the largest center movement drops below ``tol``.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n = points.shape[0]
    if k < 1 or n < k:
        raise TooFewPoints(f"need at least k={k} points, got {n}")

    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(points, k, rng)
    for _ in range(max_iters):
        # n x k squared distances without materializing the cubic tensor
        sq = (
            (points**2).sum(axis=1)[:, None]
            - 2.0 * points @ centers.T
            + (centers**2).sum(axis=1)[None, :]
        )
        assign = np.argmin(sq, axis=1)
        new_centers = centers.copy()
        for j in range(k):
            mask = assign == j
            if mask.any():
                new_centers[j] = points[mask].mean(axis=0)
            else:
                farthest = int(np.argmax(np.take_along_axis(sq, assign[:, None], 1)[:, 0]))
                new_centers[j] = points[farthest]
        movement = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        centers = new_centers
        if movement < tol:
            break
    return centers


def fit_cell_models(
    table: DataTable,
    protected_column: str,
    clusters_per_cell: "int | None" = None,
    seed: int = 0,
    max_iters: int = 100,
) -> tuple[dict[tuple[str, str], ClusterModel], TableEncoder]:
    """Fit one k-means model per observed (S, Y) cell of the raw table.

    k defaults to min(8, cell size); small cells cannot support more. Cells
    are visited in declared category order with per-cell derived seeds, so the
    result is independent of row order.
    """
    encoder = TableEncoder(include_protected=False, include_label=False).fit(table)
    encoded = encoder.transform(table)
    prot = table.column(protected_column)
    labels = table.labels()
    prot_spec = table.schema.column(protected_column)
    label_spec = table.schema.column(table.schema.label_column)

    models: dict[tuple[str, str], ClusterModel] = {}
    cell_index = 0
    for s_value in prot_spec.categories:
        for y_value in label_spec.categories:
            # Positions sorted by row_id make the fit independent of row order.
            rows = [
                pos
                for _, pos in sorted(
                    (rid, i)
                    for i, (rid, s, y) in enumerate(zip(table.row_ids, prot, labels))
                    if s == s_value and y == y_value
                )
            ]
            cell_index += 1
            if not rows:
                continue
            points = encoded.values[rows]
            k = min(clusters_per_cell or DEFAULT_MAX_CLUSTERS, len(rows))
            cell_seed = int(np.random.SeedSequence((seed, cell_index)).generate_state(1)[0])
            centers = fit_kmeans(points, k, cell_seed, max_iters=max_iters)
            models[(s_value, y_value)] = ClusterModel((s_value, y_value), centers)
    return models, encoder


def score_realism(
    synthetic: list[ScoredSyntheticPoint],
    models: Mapping[tuple[str, str], ClusterModel],
    encoder: TableEncoder,
    protected_column: str,
    epsilon: float = DEFAULT_EPSILON,
    distance: str = "max",
) -> list[ScoredSyntheticPoint]:
    """Score each synthetic point as 1 / (distance to its cell's centers + eps).

    ``distance='max'`` uses the farthest center of the matching (S, Y) cell;
    ``'min'`` uses the nearest. Distances are Euclidean in the raw table's
    encoded feature space. A point whose cell has no fitted model raises
    MissingCellModel.
    """
    if distance not in ("max", "min"):
        raise ValueError(f"unknown realism distance {distance!r}")
    if not synthetic:
        return []
    schema = encoder.schema_
    table = DataTable.build(schema, [p.row for p in synthetic])
    encoded = encoder.transform(table)
    label_idx = schema.index_of(schema.label_column)
    prot_idx = schema.index_of(protected_column)

    scored = []
    for pos, point in enumerate(synthetic):
        cell = (point.row[prot_idx], point.row[label_idx])
        model = models.get(cell)
        if model is None:
            raise MissingCellModel(str(cell[0]), str(cell[1]))
        dists = np.linalg.norm(model.centers - encoded.values[pos], axis=1)
        d = float(dists.max() if distance == "max" else dists.min())
        scored.append(replace(point, realism=1.0 / (d + epsilon)))
    return scored


def augment(table: DataTable, scored: list[ScoredSyntheticPoint], add_percent: float) -> DataTable:
    """Append the top ``add_percent%`` most realistic synthetic points.

    Points are sorted by realism descending (ties by source_row_id ascending)
    and the appended rows receive fresh row_ids above the existing maximum.
    """
    if not (0.0 <= add_percent <= 100.0):
        raise ValueError(f"add_percent must lie in [0, 100], got {add_percent}")
    take = round_half_up(add_percent * len(scored) / 100.0)
    if take == 0:
        return table
    ranked = sorted(scored, key=lambda p: (-(p.realism or 0.0), p.source_row_id))
    return table.append_rows([p.row for p in ranked[:take]])


class AugmentationDebiaser(BaseEstimator):
    """Estimator wrapper: flip, score against per-cell k-means, append top k%."""

    def __init__(
        self,
        protected_column: str,
        add_percent: float = 100.0,
        clusters_per_cell: "int | None" = None,
        realism_distance: str = "max",
        epsilon: float = DEFAULT_EPSILON,
        seed: int = 0,
        kmeans_max_iters: int = 100,
    ):
        self.protected_column = protected_column
        self.add_percent = add_percent
        self.clusters_per_cell = clusters_per_cell
        self.realism_distance = realism_distance
        self.epsilon = epsilon
        self.seed = seed
        self.kmeans_max_iters = kmeans_max_iters
        self.models_: dict[tuple[str, str], ClusterModel] | None = None
        self.encoder_: TableEncoder | None = None
        self.scored_: list[ScoredSyntheticPoint] | None = None

    def fit(self, table: DataTable) -> "AugmentationDebiaser":
        models, encoder = fit_cell_models(
            table,
            self.protected_column,
            clusters_per_cell=self.clusters_per_cell,
            seed=self.seed,
            max_iters=self.kmeans_max_iters,
        )
        synthetic = flip_protected(table, self.protected_column)
        self.models_ = models
        self.encoder_ = encoder
        self.scored_ = score_realism(
            synthetic,
            models,
            encoder,
            self.protected_column,
            epsilon=self.epsilon,
            distance=self.realism_distance,
        )
        self._fitted_row_ids = table.row_ids
        return self

    def transform(self, table: DataTable) -> DataTable:
        check_is_fitted(self, "scored_")
        if tuple(table.row_ids) != self._fitted_row_ids:
            raise ValueError("transform() expects the exact table passed to fit()")
        return augment(table, self.scored_, self.add_percent)

    def fit_transform(self, table: DataTable) -> DataTable:
        return self.fit(table).transform(table)
