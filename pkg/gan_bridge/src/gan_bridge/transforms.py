"""Column transforms: mode-specific normalization and copula normalization.

Numeric columns go through a Bayesian-GMM mode-specific normalizer (value ->
scalar offset within its mode plus a one-hot mode indicator). The copulagan
variant first maps numerics through their empirical CDF into standard-normal
space and applies the same machinery there. Categorical columns are one-hot.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from sklearn.exceptions import ConvergenceWarning
from sklearn.mixture import BayesianGaussianMixture

MAX_MODES = 10
MODE_WEIGHT_FLOOR = 5e-3


@dataclass
class CopulaNormalizer:
    """Empirical-CDF Gaussianizer: x -> Phi^-1(midrank CDF(x))."""

    sorted_values: np.ndarray = field(default=None)

    def fit(self, values: np.ndarray) -> "CopulaNormalizer":
        self.sorted_values = np.sort(values)
        return self

    def transform(self, values: np.ndarray) -> np.ndarray:
        m = len(self.sorted_values)
        # midrank positions; searchsorted gives the rank of each value
        ranks = np.searchsorted(self.sorted_values, values, side="left") + 0.5
        u = np.clip(ranks / m, 1e-6, 1 - 1e-6)
        return stats.norm.ppf(u)

    def inverse(self, z: np.ndarray) -> np.ndarray:
        u = stats.norm.cdf(z)
        m = len(self.sorted_values)
        grid = (np.arange(m) + 0.5) / m
        return np.interp(u, grid, self.sorted_values)


@dataclass
class ModeNormalizer:
    """Per-mode (alpha, one-hot mode) representation of one numeric column."""

    means: np.ndarray = None
    stds: np.ndarray = None

    @property
    def n_modes(self) -> int:
        return len(self.means)

    def fit(self, values: np.ndarray, seed: int) -> "ModeNormalizer":
        x = values.reshape(-1, 1)
        n_components = int(min(MAX_MODES, len(np.unique(values))))
        if n_components <= 1 or np.std(values) == 0.0:
            self.means = np.array([float(values.mean())])
            self.stds = np.array([max(float(values.std()), 1e-6)])
            return self
        gmm = BayesianGaussianMixture(
            n_components=n_components,
            weight_concentration_prior=1e-3,
            max_iter=200,
            random_state=seed,
        )
        with warnings.catch_warnings():
            # incomplete mixture convergence is fine for a normalizer
            warnings.simplefilter("ignore", ConvergenceWarning)
            gmm.fit(x)
        keep = gmm.weights_ > MODE_WEIGHT_FLOOR
        if not keep.any():
            keep = gmm.weights_ == gmm.weights_.max()
        self.means = gmm.means_.ravel()[keep]
        self.stds = np.maximum(np.sqrt(gmm.covariances_).ravel()[keep], 1e-6)
        return self

    def transform(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(alpha in [-1,1] approx, mode one-hot) with argmax mode assignment."""
        z = (values[:, None] - self.means[None, :]) / self.stds[None, :]
        mode = np.argmin(np.abs(z), axis=1)
        alpha = np.clip(z[np.arange(len(values)), mode] / 4.0, -0.99, 0.99)
        onehot = np.zeros((len(values), self.n_modes))
        onehot[np.arange(len(values)), mode] = 1.0
        return alpha, onehot

    def inverse(self, alpha: np.ndarray, mode_probs: np.ndarray) -> np.ndarray:
        mode = np.argmax(mode_probs, axis=1)
        return alpha * 4.0 * self.stds[mode] + self.means[mode]


@dataclass
class ColumnInfo:
    name: str
    kind: str  # "numeric" | "categorical"
    span: tuple[int, int]  # [start, end) in the transformed row
    categories: tuple[str, ...] = ()
    normalizer: ModeNormalizer = None
    copula: CopulaNormalizer = None


class TableTransformer:
    """Assembles the transformed training matrix and inverts samples."""

    def __init__(self, use_copula: bool):
        self.use_copula = use_copula
        self.columns: list[ColumnInfo] = []
        self.output_dim = 0

    def fit_transform(self, schema, numeric, categorical, seed: int) -> np.ndarray:
        blocks = []
        cursor = 0
        for i, col in enumerate(schema.columns):
            if col.kind == "numeric":
                values = numeric[col.name]
                copula = None
                if self.use_copula:
                    copula = CopulaNormalizer().fit(values)
                    values = copula.transform(values)
                norm = ModeNormalizer().fit(values, seed + i)
                alpha, onehot = norm.transform(values)
                width = 1 + norm.n_modes
                self.columns.append(
                    ColumnInfo(col.name, "numeric", (cursor, cursor + width),
                               normalizer=norm, copula=copula)
                )
                blocks.append(np.column_stack([alpha, onehot]))
            else:
                cats = col.categories
                index = {c: k for k, c in enumerate(cats)}
                onehot = np.zeros((len(categorical[col.name]), len(cats)))
                for r, v in enumerate(categorical[col.name]):
                    onehot[r, index[v]] = 1.0
                width = len(cats)
                self.columns.append(
                    ColumnInfo(col.name, "categorical", (cursor, cursor + width),
                               categories=tuple(cats))
                )
                blocks.append(onehot)
            cursor += width
        self.output_dim = cursor
        return np.hstack(blocks)

    def inverse(self, data: np.ndarray) -> dict:
        out = {}
        for info in self.columns:
            start, end = info.span
            block = data[:, start:end]
            if info.kind == "numeric":
                values = info.normalizer.inverse(block[:, 0], block[:, 1:])
                if info.copula is not None:
                    values = info.copula.inverse(values)
                out[info.name] = values
            else:
                idx = np.argmax(block, axis=1)
                out[info.name] = [info.categories[k] for k in idx]
        return out

    #: activation layout consumed by the generator head: a list of
    #: ("tanh", width) / ("softmax", width) segments in row order.
    def activation_layout(self) -> list[tuple[str, int]]:
        layout = []
        for info in self.columns:
            start, end = info.span
            if info.kind == "numeric":
                layout.append(("tanh", 1))
                layout.append(("softmax", end - start - 1))
            else:
                layout.append(("softmax", end - start))
        return layout

    def categorical_spans(self) -> list[ColumnInfo]:
        return [c for c in self.columns if c.kind == "categorical"]
