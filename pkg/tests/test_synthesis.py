from __future__ import annotations

import sys
import textwrap

import numpy as np
import pytest

from fairgen.errors import CommandFailed, ProtocolViolation, SchemaMismatch, TooFewRows
from fairgen.synthesis import (
    ExternalSynthesizer,
    GaussianCopulaSynthesizer,
    SynthesizerSpec,
    fit_copula,
    nearest_psd,
    run_external,
    sample_copula,
)
from fairgen.tabular import (
    CATEGORICAL,
    NUMERIC,
    ROLE_LABEL,
    ROLE_PROTECTED,
    ColumnSpec,
    DataTable,
    Schema,
    write_csv,
)

from .conftest import make_table


def numeric_pair_schema():
    return Schema(
        columns=(
            ColumnSpec("x1", NUMERIC),
            ColumnSpec("x2", NUMERIC),
            ColumnSpec("y", CATEGORICAL, ROLE_LABEL, ("no", "yes")),
        ),
        label_column="y",
        favourable_label="yes",
    )


# ---------------------------------------------------------------------------
# Gaussian copula: fitting
# ---------------------------------------------------------------------------


class TestFitCopula:
    def test_duplicated_column_has_unit_latent_correlation(self):
        rng = np.random.default_rng(0)
        values = rng.normal(size=80)
        rows = [(float(v), float(v), "yes" if v > 0 else "no") for v in values]
        model = fit_copula(DataTable.build(numeric_pair_schema(), rows))
        assert model.latent_correlation[0, 1] == pytest.approx(1.0, abs=1e-6)

    def test_independent_uniform_columns_nearly_uncorrelated(self):
        rng = np.random.default_rng(1)
        n = 10_000
        rows = [
            (float(a), float(b), "no") for a, b in zip(rng.uniform(size=n), rng.uniform(size=n))
        ]
        # keep both label classes so the schema stays honest
        rows[0] = (rows[0][0], rows[0][1], "yes")
        model = fit_copula(DataTable.build(numeric_pair_schema(), rows))
        assert abs(model.latent_correlation[0, 1]) < 0.05  # sampling error ~ 2/sqrt(n)

    def test_constant_categorical_owns_unit_interval_with_zero_correlation(self):
        schema = Schema(
            columns=(
                ColumnSpec("x", NUMERIC),
                ColumnSpec("kind", CATEGORICAL, categories=("a", "b")),
                ColumnSpec("y", CATEGORICAL, ROLE_LABEL, ("no", "yes")),
            ),
            label_column="y",
            favourable_label="yes",
        )
        rng = np.random.default_rng(2)
        rows = [(float(rng.normal()), "a", "yes" if rng.random() < 0.5 else "no") for _ in range(50)]
        model = fit_copula(DataTable.build(schema, rows))
        kind_marginal = model.marginals[1]
        assert kind_marginal.frequencies.tolist() == [1.0, 0.0]
        assert kind_marginal.cumulative.tolist() == [1.0, 1.0]
        j = model.column_order.index("kind")
        off_diag = np.delete(model.latent_correlation[j], j)
        assert np.all(off_diag == 0.0)

    def test_too_few_rows(self):
        with pytest.raises(TooFewRows):
            fit_copula(DataTable.build(numeric_pair_schema(), [(1.0, 2.0, "yes")]))

    def test_jitter_mode_is_seeded_and_deterministic(self):
        table = make_table([(i, "male" if i % 2 else "female", "yes" if i % 3 else "no")
                            for i in range(30)])
        a = fit_copula(table, seed=5, categorical_latent="jitter")
        b = fit_copula(table, seed=5, categorical_latent="jitter")
        assert np.array_equal(a.latent_correlation, b.latent_correlation)


# ---------------------------------------------------------------------------
# Gaussian copula: sampling
# ---------------------------------------------------------------------------


class TestSampleCopula:
    def test_constant_column_samples_constant(self):
        rows = [(5.0, float(i), "yes" if i % 2 else "no") for i in range(20)]
        model = fit_copula(DataTable.build(numeric_pair_schema(), rows))
        result = sample_copula(model, 50, seed=0)
        assert set(result.table.column("x1")) == {5.0}

    def test_numeric_samples_stay_in_fitted_range(self):
        rng = np.random.default_rng(3)
        rows = [(float(v), 0.0, "no") for v in rng.uniform(10, 90, size=400)]
        rows[0] = (10.0, 0.0, "yes")
        rows[1] = (90.0, 1.0, "yes")
        model = fit_copula(DataTable.build(numeric_pair_schema(), rows))
        result = sample_copula(model, 5000, seed=1)
        values = result.table.column("x1")
        assert min(values) >= 10.0 and max(values) <= 90.0

    def test_correlated_pair_stays_correlated(self):
        rng = np.random.default_rng(4)
        base = rng.normal(size=500)
        rows = [(float(v), float(v) * 2.0 + 1.0, "yes" if v > 0 else "no") for v in base]
        model = fit_copula(DataTable.build(numeric_pair_schema(), rows))
        result = sample_copula(model, 5000, seed=2)
        x1 = np.asarray(result.table.column("x1"))
        x2 = np.asarray(result.table.column("x2"))
        assert np.corrcoef(x1, x2)[0, 1] > 0.95

    def test_bit_identical_for_fixed_seed(self, tmp_path):
        table = make_table([(i * 1.7, "male" if i % 2 else "female", "yes" if i % 3 else "no")
                            for i in range(40)])
        syn = GaussianCopulaSynthesizer(seed=9).fit(table)
        a = syn.sample(200, seed=33)
        b = syn.sample(200, seed=33)
        assert a.table.rows == b.table.rows
        assert a.model_fingerprint == b.model_fingerprint
        pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(a.table, pa)
        write_csv(b.table, pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_categorical_frequencies_tracked(self):
        rng = np.random.default_rng(5)
        rows = [(float(rng.normal()),
                 str(rng.choice(["male", "female"], p=[0.7, 0.3])),
                 str(rng.choice(["yes", "no"], p=[0.25, 0.75])))
                for _ in range(4000)]
        table = make_table(rows)
        model = fit_copula(table)
        result = sample_copula(model, 8000, seed=6)
        sex = result.table.column("sex")
        want = sum(1 for r in rows if r[1] == "male") / len(rows)
        got = sex.count("male") / len(sex)
        assert abs(got - want) < 0.03


class TestNearestPsd:
    def test_leaves_strictly_pd_matrix_untouched(self):
        m = np.array([[1.0, 0.3], [0.3, 1.0]])
        out = nearest_psd(m)
        assert out is m  # bitwise identical, Frobenius change exactly 0

    def test_repairs_indefinite_matrix(self):
        # An impossible "correlation" pattern: three variables pairwise
        # correlated at -0.9 cannot all coexist (eigenvalue -0.8 < 0).
        m = np.full((3, 3), -0.9)
        np.fill_diagonal(m, 1.0)
        out = nearest_psd(m)
        eigvals = np.linalg.eigvalsh(out)
        assert eigvals.min() >= 0.0
        assert np.allclose(np.diag(out), 1.0)
        np.linalg.cholesky(out)  # must be Cholesky-viable


# ---------------------------------------------------------------------------
# External synthesizer protocol
# ---------------------------------------------------------------------------

IDENTITY_STUB = """
import argparse, csv, shutil, sys
from pathlib import Path

MODE = {mode!r}

ap = argparse.ArgumentParser()
sub = ap.add_subparsers(dest="cmd", required=True)
f = sub.add_parser("fit")
f.add_argument("--data", required=True); f.add_argument("--schema", required=True)
f.add_argument("--model-dir", required=True); f.add_argument("--seed", type=int, required=True)
s = sub.add_parser("sample")
s.add_argument("--model-dir", required=True); s.add_argument("--n", type=int, required=True)
s.add_argument("--out", required=True); s.add_argument("--seed", type=int, required=True)
args = ap.parse_args()

if MODE == "fail":
    print("synthetic failure for testing", file=sys.stderr)
    sys.exit(3)

if args.cmd == "fit":
    md = Path(args.model_dir); md.mkdir(parents=True, exist_ok=True)
    shutil.copy(args.data, md / "train.csv")
else:
    if MODE == "no_output":
        sys.exit(0)
    with open(Path(args.model_dir) / "train.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    out_rows = [data[i % len(data)] for i in range(args.n)]
    if MODE == "bad_category":
        col = header.index("sex")
        for r in out_rows:
            r[col] = "Martian"
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\\n")
        w.writerow(header)
        w.writerows(out_rows)
"""


def stub_command(tmp_path, mode="identity"):
    path = tmp_path / f"stub_{mode}.py"
    path.write_text(textwrap.dedent(IDENTITY_STUB.format(mode=mode)))
    return f"{sys.executable} {path}"


def small_table():
    return make_table(
        [(float(i), "male" if i % 2 else "female", "yes" if i % 3 else "no") for i in range(12)]
    )


class TestExternalProtocol:
    def test_identity_stub_round_trips_training_rows(self, tmp_path):
        table = small_table()
        spec = SynthesizerSpec("external", seed=0, external_command=stub_command(tmp_path))
        result = run_external(spec, table, table.n_rows, tmp_path / "work")
        assert result.table.rows == table.rows
        assert result.rows_requested == table.n_rows

    def test_nonzero_exit_surfaces_diagnostics(self, tmp_path):
        table = small_table()
        spec = SynthesizerSpec("external", seed=0,
                               external_command=stub_command(tmp_path, "fail"))
        with pytest.raises(CommandFailed) as err:
            run_external(spec, table, 5, tmp_path / "work")
        assert err.value.exit_code == 3
        assert "synthetic failure" in err.value.diagnostics

    def test_unknown_category_output_is_schema_mismatch(self, tmp_path):
        table = small_table()
        spec = SynthesizerSpec("external", seed=0,
                               external_command=stub_command(tmp_path, "bad_category"))
        with pytest.raises(SchemaMismatch):
            run_external(spec, table, 5, tmp_path / "work")

    def test_missing_output_is_protocol_violation(self, tmp_path):
        table = small_table()
        spec = SynthesizerSpec("external", seed=0,
                               external_command=stub_command(tmp_path, "no_output"))
        with pytest.raises(ProtocolViolation):
            run_external(spec, table, 5, tmp_path / "work")

    def test_estimator_fit_once_sample_twice(self, tmp_path):
        table = small_table()
        syn = ExternalSynthesizer(stub_command(tmp_path), tmp_path / "work", seed=0)
        syn.fit(table)
        a = syn.sample(4)
        b = syn.sample(7)
        assert a.table.n_rows == 4
        assert b.table.n_rows == 7

    def test_spec_validation(self):
        with pytest.raises(Exception):
            SynthesizerSpec("external", seed=0, external_command=None)
        with pytest.raises(Exception):
            SynthesizerSpec("gaussian_copula", seed=0, external_command="x")
