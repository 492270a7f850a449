"""One-hot + min-max encoding of tables into real feature matrices.

The encoded space is where cosine similarity, k-means realism scoring and
the classifier all operate. Protected and label columns are excluded by
default so that "similar features" never means "same group membership".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .base import BaseEstimator, check_is_fitted
from .errors import SchemaMismatch
from .tabular import NUMERIC, ROLE_LABEL, ROLE_PROTECTED, DataTable, Schema


@dataclass(frozen=True)
class DimInfo:
    """Provenance of one encoded dimension: source column and, for one-hot
    dimensions, the category it indicates."""

    column: str
    category: "str | None" = None


@dataclass(frozen=True)
class EncodedMatrix:
    values: np.ndarray
    dim_provenance: tuple[DimInfo, ...]
    scaling: Mapping[str, tuple[float, float]]
    row_ids: tuple[int, ...]

    @property
    def n_dims(self) -> int:
        return len(self.dim_provenance)


class TableEncoder(BaseEstimator):
    """Fit/transform encoder: numerics min-max scaled, categoricals one-hot.

    Scaling statistics come from the table passed to :meth:`fit`; applying
    :meth:`transform` to another table reuses them, so values outside the
    fitted range map outside [0, 1] (no clipping; downstream consumers are
    told the truth). One-hot layout uses the schema's declared categories,
    which keeps dimensionality identical across tables sharing a schema.
    Constant numeric columns encode to 0.0.
    """

    def __init__(self, include_protected: bool = False, include_label: bool = False):
        self.include_protected = include_protected
        self.include_label = include_label
        self.schema_: Schema | None = None
        self.scaling_: dict[str, tuple[float, float]] | None = None
        self.dims_: tuple[DimInfo, ...] | None = None

    def _included_columns(self, schema: Schema):
        out = []
        for spec in schema.columns:
            if spec.role == ROLE_PROTECTED and not self.include_protected:
                continue
            if spec.role == ROLE_LABEL and not self.include_label:
                continue
            out.append(spec)
        return out

    def fit(self, table: DataTable) -> "TableEncoder":
        if table.n_rows == 0:
            raise ValueError("cannot fit encoder on an empty table")
        scaling: dict[str, tuple[float, float]] = {}
        dims: list[DimInfo] = []
        for spec in self._included_columns(table.schema):
            if spec.kind == NUMERIC:
                col = np.asarray(table.column(spec.name), dtype=float)
                scaling[spec.name] = (float(col.min()), float(col.max()))
                dims.append(DimInfo(spec.name))
            else:
                dims.extend(DimInfo(spec.name, cat) for cat in spec.categories)
        self.schema_ = table.schema
        self.scaling_ = scaling
        self.dims_ = tuple(dims)
        return self

    @classmethod
    def from_scaling(
        cls,
        schema: Schema,
        scaling: Mapping[str, tuple[float, float]],
        include_protected: bool = False,
        include_label: bool = False,
    ) -> "TableEncoder":
        """Rebuild a fitted encoder from a stored scaling record."""
        enc = cls(include_protected, include_label)
        dims: list[DimInfo] = []
        for spec in enc._included_columns(schema):
            if spec.kind == NUMERIC:
                if spec.name not in scaling:
                    raise SchemaMismatch(f"scaling record missing column {spec.name!r}")
                dims.append(DimInfo(spec.name))
            else:
                dims.extend(DimInfo(spec.name, cat) for cat in spec.categories)
        enc.schema_ = schema
        enc.scaling_ = {k: (float(a), float(b)) for k, (a, b) in scaling.items()}
        enc.dims_ = tuple(dims)
        return enc

    def transform(self, table: DataTable) -> EncodedMatrix:
        check_is_fitted(self, "schema_")
        if table.schema != self.schema_:
            raise SchemaMismatch("table schema differs from the encoder's fitted schema")
        n = table.n_rows
        blocks: list[np.ndarray] = []
        for spec in self._included_columns(table.schema):
            col = table.column(spec.name)
            if spec.kind == NUMERIC:
                mn, mx = self.scaling_[spec.name]
                arr = np.asarray(col, dtype=float)
                if mx > mn:
                    blocks.append(((arr - mn) / (mx - mn)).reshape(n, 1))
                else:
                    blocks.append(np.zeros((n, 1)))
            else:
                index = {cat: j for j, cat in enumerate(spec.categories)}
                onehot = np.zeros((n, len(spec.categories)))
                rows = np.arange(n)
                cols = np.fromiter((index[v] for v in col), dtype=int, count=n)
                onehot[rows, cols] = 1.0
                blocks.append(onehot)
        values = np.hstack(blocks) if blocks else np.zeros((n, 0))
        return EncodedMatrix(values, self.dims_, dict(self.scaling_), tuple(table.row_ids))

    def fit_transform(self, table: DataTable) -> EncodedMatrix:
        return self.fit(table).transform(table)

    # -- decoding -------------------------------------------------------------

    def decode_row(self, vector: np.ndarray) -> dict[str, "float | str"]:
        """Recover the source cells of one encoded row via dim provenance.

        Categorical cells are exact (argmax of the one-hot block); numeric
        cells are unscaled, constant columns decode to their fitted value.
        """
        check_is_fitted(self, "schema_")
        out: dict[str, float | str] = {}
        j = 0
        for spec in self._included_columns(self.schema_):
            if spec.kind == NUMERIC:
                mn, mx = self.scaling_[spec.name]
                out[spec.name] = mn if mx == mn else float(vector[j]) * (mx - mn) + mn
                j += 1
            else:
                block = vector[j : j + len(spec.categories)]
                out[spec.name] = spec.categories[int(np.argmax(block))]
                j += len(spec.categories)
        return out

    def inverse_transform(self, matrix: EncodedMatrix) -> list[dict[str, "float | str"]]:
        return [self.decode_row(matrix.values[i]) for i in range(matrix.values.shape[0])]


def encode(
    table: DataTable, include_protected: bool = False, include_label: bool = False
) -> EncodedMatrix:
    """One-shot encoding using the table's own min-max statistics."""
    return TableEncoder(include_protected, include_label).fit_transform(table)
