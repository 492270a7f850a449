from __future__ import annotations

import pytest

from fairgen.datasets import surrogate_adult
from fairgen.tabular import write_csv


@pytest.fixture(scope="session")
def adult_sample(tmp_path_factory):
    """500-row Adult-format sample plus its schema, on disk."""
    root = tmp_path_factory.mktemp("adult_sample")
    table = surrogate_adult(500, seed=3)
    csv_path = root / "train.csv"
    schema_path = root / "schema.json"
    write_csv(table, csv_path)
    table.schema.save(schema_path)
    return table, csv_path, schema_path
