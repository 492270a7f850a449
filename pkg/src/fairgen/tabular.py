"""Schema-aware tabular data: column specs, typed tables, CSV I/O, splitting.

A :class:`DataTable` is immutable after construction and safe to share across
threads. Every operation that filters or extends a table returns a new table;
``row_ids`` are stable original indices that survive filtering, which is what
lets the debiasing steps report exactly which rows they touched.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .base import check_fraction, round_half_up
from .errors import (
    DegenerateSplit,
    EmptyFile,
    MissingColumn,
    NonNumericCell,
    SchemaError,
    UnknownCategory,
)

logger = logging.getLogger(__name__)

NUMERIC = "numeric"
CATEGORICAL = "categorical"

ROLE_FEATURE = "feature"
ROLE_PROTECTED = "protected"
ROLE_LABEL = "label"

#: Cell values treated as missing at ingest; the whole row is dropped.
MISSING_MARKERS = frozenset({"", "?"})

Row = tuple
Cell = "float | str"


@dataclass(frozen=True)
class ColumnSpec:
    """One column: its name, kind, role, and (if categorical) the closed
    set of values that may appear."""

    name: str
    kind: str
    role: str = ROLE_FEATURE
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.role not in (ROLE_FEATURE, ROLE_PROTECTED, ROLE_LABEL):
            raise SchemaError(f"column {self.name!r}: unknown role {self.role!r}")
        if self.kind == NUMERIC and self.categories:
            raise SchemaError(f"numeric column {self.name!r} must not declare categories")
        if self.kind == CATEGORICAL:
            if not self.categories:
                raise SchemaError(f"categorical column {self.name!r} declares no categories")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"column {self.name!r}: duplicate categories")
        object.__setattr__(self, "categories", tuple(self.categories))


@dataclass(frozen=True)
class Schema:
    """Ordered columns plus the label/protected designations.

    Invariants enforced here: the label column and every protected column
    exist exactly once, the favourable label is a declared label category,
    protected columns are categorical with at least two categories, and
    privileged values (where given) are declared categories of their column.
    """

    columns: tuple[ColumnSpec, ...]
    label_column: str
    favourable_label: str
    privileged_values: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "privileged_values", dict(self.privileged_values))
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")
        by_name = {c.name: c for c in self.columns}

        label = by_name.get(self.label_column)
        if label is None or label.role != ROLE_LABEL:
            raise SchemaError(
                f"label column {self.label_column!r} must appear exactly once with role 'label'"
            )
        if sum(1 for c in self.columns if c.role == ROLE_LABEL) != 1:
            raise SchemaError("schema must declare exactly one label column")
        if label.kind != CATEGORICAL:
            raise SchemaError("label column must be categorical")
        if self.favourable_label not in label.categories:
            raise SchemaError(
                f"favourable label {self.favourable_label!r} not among label categories"
            )
        for c in self.columns:
            if c.role == ROLE_PROTECTED:
                if c.kind != CATEGORICAL or len(c.categories) < 2:
                    raise SchemaError(
                        f"protected column {c.name!r} must be categorical with >= 2 categories"
                    )
        for col, value in self.privileged_values.items():
            spec = by_name.get(col)
            if spec is None or spec.role != ROLE_PROTECTED:
                raise SchemaError(f"privileged value declared for non-protected column {col!r}")
            if value not in spec.categories:
                raise SchemaError(
                    f"privileged value {value!r} not a declared category of {col!r}"
                )

    @property
    def protected_columns(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns if c.role == ROLE_PROTECTED)

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def column(self, name: str) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def index_of(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise KeyError(name)

    def privileged_value(self, column: str) -> str:
        if column not in self.privileged_values:
            raise SchemaError(f"protected column {column!r} has no declared privileged value")
        return self.privileged_values[column]

    # -- JSON document form -------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "columns": [
                {
                    "name": c.name,
                    "kind": c.kind,
                    "categories": list(c.categories) if c.kind == CATEGORICAL else None,
                    "role": c.role,
                }
                for c in self.columns
            ],
            "label_column": self.label_column,
            "favourable_label": self.favourable_label,
            "privileged_values": dict(self.privileged_values),
        }

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "Schema":
        try:
            columns = tuple(
                ColumnSpec(
                    name=c["name"],
                    kind=c["kind"],
                    role=c.get("role", ROLE_FEATURE),
                    categories=tuple(c.get("categories") or ()),
                )
                for c in doc["columns"]
            )
            return cls(
                columns=columns,
                label_column=doc["label_column"],
                favourable_label=doc["favourable_label"],
                privileged_values=dict(doc.get("privileged_values") or {}),
            )
        except KeyError as exc:
            raise SchemaError(f"schema document missing key {exc}") from exc

    def save(self, path: "str | Path") -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: "str | Path") -> "Schema":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def _validate_cell(spec: ColumnSpec, value, row_id: int):
    if spec.kind == NUMERIC:
        try:
            v = float(value)
        except (TypeError, ValueError):
            raise NonNumericCell(row_id, spec.name, str(value)) from None
        if not math.isfinite(v):
            raise NonNumericCell(row_id, spec.name, str(value))
        return v
    value = str(value)
    if value not in spec.categories:
        raise UnknownCategory(row_id, spec.name, value)
    return value


@dataclass(frozen=True)
class DataTable:
    """Immutable typed table; cells are float (numeric) or str (categorical)."""

    schema: Schema
    rows: tuple[Row, ...]
    row_ids: tuple[int, ...]
    ingest_dropped_rows: int = field(default=0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "row_ids", tuple(self.row_ids))
        if len(self.rows) != len(self.row_ids):
            raise SchemaError("rows and row_ids length mismatch")
        if len(set(self.row_ids)) != len(self.row_ids):
            raise SchemaError("row_ids must be unique")

    @classmethod
    def build(
        cls,
        schema: Schema,
        rows: Iterable[Sequence],
        row_ids: "Sequence[int] | None" = None,
        ingest_dropped_rows: int = 0,
    ) -> "DataTable":
        """Validate and construct; each cell is coerced to its column kind."""
        materialized = []
        ids = list(row_ids) if row_ids is not None else None
        for i, raw in enumerate(rows):
            rid = ids[i] if ids is not None else i
            if len(raw) != len(schema.columns):
                raise SchemaError(
                    f"row {rid}: expected {len(schema.columns)} cells, got {len(raw)}"
                )
            materialized.append(
                tuple(_validate_cell(spec, v, rid) for spec, v in zip(schema.columns, raw))
            )
        if ids is None:
            ids = list(range(len(materialized)))
        return cls(schema, tuple(materialized), tuple(ids), ingest_dropped_rows)

    # -- accessors ----------------------------------------------------------

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list:
        idx = self.schema.index_of(name)
        return [row[idx] for row in self.rows]

    def labels(self) -> list[str]:
        return self.column(self.schema.label_column)

    def row_by_id(self, row_id: int) -> Row:
        return self.rows[self.row_ids.index(row_id)]

    # -- derived tables -----------------------------------------------------

    def filter_ids(self, keep: Iterable[int]) -> "DataTable":
        """Rows whose row_id is in ``keep``, original order preserved."""
        keep = set(keep)
        pairs = [(rid, row) for rid, row in zip(self.row_ids, self.rows) if rid in keep]
        return DataTable(self.schema, tuple(r for _, r in pairs), tuple(i for i, _ in pairs))

    def drop_ids(self, drop: Iterable[int]) -> "DataTable":
        drop = set(drop)
        return self.filter_ids(rid for rid in self.row_ids if rid not in drop)

    def append_rows(self, rows: Iterable[Sequence]) -> "DataTable":
        """Append validated rows with fresh row_ids above the current max."""
        start = (max(self.row_ids) + 1) if self.row_ids else 0
        extra = DataTable.build(
            self.schema, rows, row_ids=None
        )  # validates cells; ids reassigned below
        new_ids = tuple(range(start, start + extra.n_rows))
        return DataTable(
            self.schema, self.rows + extra.rows, self.row_ids + new_ids
        )

    # -- CSV ----------------------------------------------------------------

    def to_csv(self, path: "str | Path") -> None:
        write_csv(self, path)


def _format_cell(spec: ColumnSpec, value) -> str:
    if spec.kind == NUMERIC:
        return repr(float(value))
    return str(value)


def write_csv(table: DataTable, path: "str | Path") -> None:
    """Deterministic CSV: header row, repr-formatted numerics, UTF-8, LF."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.schema.column_names)
        for row in table.rows:
            writer.writerow(
                [_format_cell(spec, v) for spec, v in zip(table.schema.columns, row)]
            )


def load_csv(path: "str | Path", schema: Schema) -> DataTable:
    """Read and validate a CSV file against ``schema``.

    Header must contain every schema column (order-insensitive; extra columns
    are ignored). Cells are stripped of surrounding whitespace; a row with any
    missing marker ("" or "?") is dropped and counted in
    ``ingest_dropped_rows``. Surviving rows get row_ids 0..n-1 in file order.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyFile(f"{path} is empty") from None
        positions = {}
        for col in schema.column_names:
            if col not in header:
                raise MissingColumn(col)
            positions[col] = header.index(col)

        rows: list[tuple] = []
        dropped = 0
        for raw in reader:
            if not raw or all(not c.strip() for c in raw):
                continue
            cells = [raw[positions[col]].strip() for col in schema.column_names]
            if any(c in MISSING_MARKERS for c in cells):
                dropped += 1
                continue
            rows.append(tuple(cells))

    if not rows:
        raise EmptyFile(f"{path} contains no usable data rows")
    if dropped:
        logger.warning("load_csv(%s): dropped %d rows with missing values", path, dropped)
    return DataTable.build(schema, rows, ingest_dropped_rows=dropped)


# -- splitting ---------------------------------------------------------------


def _allocate_stratified(counts: list[int], test_fraction: float, total_test: int) -> list[int]:
    """Largest-remainder allocation of ``total_test`` across strata.

    Keeps every stratum within one row of ``test_fraction * stratum_size``
    while the overall test size stays exactly ``total_test``.
    """
    exact = [test_fraction * c for c in counts]
    base = [int(math.floor(e)) for e in exact]
    remainder = total_test - sum(base)
    order = sorted(range(len(counts)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:remainder]:
        base[i] += 1
    return [min(b, c) for b, c in zip(base, counts)]


def train_test_split(
    table: DataTable, test_fraction: float, seed: int
) -> tuple[DataTable, DataTable]:
    """Deterministic label-stratified split into (train, test).

    The test set holds ``round(test_fraction * n)`` rows, allocated across
    label strata by largest remainder, so per-label counts stay within one
    row of the exact fraction. Row order inside each part follows the input
    table.
    """
    check_fraction(test_fraction, "test_fraction")
    n = table.n_rows
    if n == 0:
        raise DegenerateSplit("cannot split an empty table")
    total_test = round_half_up(test_fraction * n)
    if total_test == 0 or total_test == n:
        raise DegenerateSplit(
            f"test_fraction={test_fraction} leaves an empty split for n={n}"
        )

    label_spec = table.schema.column(table.schema.label_column)
    labels = table.labels()
    # Strata iterated in declared category order for determinism.
    strata: dict[str, list[int]] = {c: [] for c in label_spec.categories}
    for rid, lab in zip(table.row_ids, labels):
        strata[lab].append(rid)
    present = [c for c in label_spec.categories if strata[c]]
    counts = [len(strata[c]) for c in present]
    per_stratum = _allocate_stratified(counts, test_fraction, total_test)

    rng = np.random.default_rng(seed)
    test_ids: set[int] = set()
    for label_value, take in zip(present, per_stratum):
        ids = sorted(strata[label_value])
        perm = rng.permutation(len(ids))
        test_ids.update(ids[i] for i in perm[:take])

    test = table.filter_ids(test_ids)
    train = table.drop_ids(test_ids)
    if train.n_rows == 0 or test.n_rows == 0:
        raise DegenerateSplit("stratified allocation produced an empty split")
    return train, test
