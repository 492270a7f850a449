from __future__ import annotations

from pathlib import Path

import pytest

from fairgen.datasets import ensure_dataset_csv
from fairgen.tabular import (
    CATEGORICAL,
    NUMERIC,
    ROLE_LABEL,
    ROLE_PROTECTED,
    ColumnSpec,
    DataTable,
    Schema,
)

REPO_ROOT = Path(__file__).resolve().parent.parent


def toy_schema(protected=("sex",), extra_numeric=("age",), extra_categorical=()):
    """Small binary-label schema used across the unit tests."""
    columns = [ColumnSpec(name, NUMERIC) for name in extra_numeric]
    columns += [
        ColumnSpec(name, CATEGORICAL, categories=("a", "b", "c")) for name in extra_categorical
    ]
    for name in protected:
        columns.append(ColumnSpec(name, CATEGORICAL, ROLE_PROTECTED, ("male", "female")))
    columns.append(ColumnSpec("y", CATEGORICAL, ROLE_LABEL, ("no", "yes")))
    return Schema(
        columns=tuple(columns),
        label_column="y",
        favourable_label="yes",
        privileged_values={name: "male" for name in protected},
    )


def make_table(rows, schema=None):
    return DataTable.build(schema or toy_schema(), rows)


@pytest.fixture(scope="session")
def adult_csv(tmp_path_factory):
    """(csv_path, schema_path, source) for the Adult dataset.

    Uses the real data/adult.csv when it has been fetched; otherwise writes a
    deterministic full-size surrogate under data/. Either way tests exercise
    the same code paths at the same scale.
    """
    data_dir = REPO_ROOT / "data"
    csv_path, source = ensure_dataset_csv("adult", data_dir)
    schema_path = REPO_ROOT / "schemas" / "adult.json"
    assert schema_path.exists(), "run: python -m fairgen.datasets schemas --out schemas"
    return csv_path, schema_path, source


@pytest.fixture(scope="session")
def german_csv():
    data_dir = REPO_ROOT / "data"
    csv_path, source = ensure_dataset_csv("german", data_dir)
    schema_path = REPO_ROOT / "schemas" / "german.json"
    return csv_path, schema_path, source


@pytest.fixture(scope="session")
def adult_table(adult_csv):
    from fairgen.tabular import load_csv

    csv_path, schema_path, _ = adult_csv
    return load_csv(csv_path, Schema.load(schema_path))


def pytest_addoption(parser):
    parser.addoption(
        "--run-slow",
        action="store_true",
        default=False,
        help="also run the slow end-to-end tests outside the acceptance suite",
    )
