"""Reader for the pipeline's schema.json / train.csv wire formats."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Column:
    name: str
    kind: str  # "numeric" | "categorical"
    categories: tuple[str, ...] = ()


@dataclass(frozen=True)
class TableSchema:
    columns: tuple[Column, ...]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    @classmethod
    def load(cls, path: "str | Path") -> "TableSchema":
        doc = json.loads(Path(path).read_text())
        columns = tuple(
            Column(c["name"], c["kind"], tuple(c.get("categories") or ()))
            for c in doc["columns"]
        )
        return cls(columns)


def read_table(csv_path: "str | Path", schema: TableSchema):
    """Return (numeric_data, categorical_data) dicts keyed by column name.

    Rows containing missing markers are skipped, mirroring the caller's
    loader, so the bridge never trains on partial rows.
    """
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        positions = {}
        for col in schema.names:
            if col not in header:
                raise ValueError(f"train.csv is missing column {col!r}")
            positions[col] = header.index(col)
        raw_rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            cells = [row[positions[c]].strip() for c in schema.names]
            if any(cell in ("", "?") for cell in cells):
                continue
            raw_rows.append(cells)
    if not raw_rows:
        raise ValueError(f"{csv_path} contains no usable rows")

    numeric: dict[str, np.ndarray] = {}
    categorical: dict[str, list[str]] = {}
    for j, col in enumerate(schema.columns):
        cells = [r[j] for r in raw_rows]
        if col.kind == "numeric":
            numeric[col.name] = np.asarray([float(v) for v in cells])
        else:
            bad = next((v for v in cells if v not in col.categories), None)
            if bad is not None:
                raise ValueError(f"column {col.name!r}: unknown category {bad!r}")
            categorical[col.name] = cells
    return numeric, categorical


def write_table(path: "str | Path", schema: TableSchema, columns: dict) -> None:
    names = schema.names
    n = len(next(iter(columns.values())))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for i in range(n):
            row = []
            for col in schema.columns:
                v = columns[col.name][i]
                row.append(repr(float(v)) if col.kind == "numeric" else str(v))
            writer.writerow(row)
