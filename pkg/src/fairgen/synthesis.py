"""Tabular synthesizers: a native Gaussian copula and an external-process adapter.

The copula couples per-column empirical marginals through a latent
multivariate normal. Numeric columns keep their sorted sample values as the
marginal (sampling interpolates empirical quantiles); categorical columns map
to cumulative frequency intervals on [0, 1]. Deep generators are reached via
a file/subprocess protocol so the pipeline stays generator-agnostic:

    <command> fit    --data <dir>/train.csv --schema <dir>/schema.json \
                     --model-dir <dir>/model --seed <int>
    <command> sample --model-dir <dir>/model --n <int> \
                     --out <dir>/synth.csv --seed <int>

Exit code 0 means success; synth.csv must carry the schema's columns.
"""

from __future__ import annotations

import hashlib
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy import stats

from .base import BaseEstimator, check_is_fitted
from .errors import (
    CommandFailed,
    ConfigError,
    FairgenError,
    ProtocolViolation,
    SchemaMismatch,
    TooFewRows,
)
from .tabular import NUMERIC, DataTable, Schema, load_csv, write_csv

KIND_GAUSSIAN_COPULA = "gaussian_copula"
KIND_EXTERNAL = "external"

#: Eigenvalue floor for the latent correlation repair; keeps Cholesky viable.
PSD_EIGENVALUE_FLOOR = 1e-9


@dataclass(frozen=True)
class SynthesizerSpec:
    kind: str
    seed: int = 0
    external_command: "str | None" = None

    def __post_init__(self):
        if self.kind not in (KIND_GAUSSIAN_COPULA, KIND_EXTERNAL):
            raise ConfigError(f"unknown synthesizer kind {self.kind!r}")
        if (self.kind == KIND_EXTERNAL) != (self.external_command is not None):
            raise ConfigError("external_command must be given iff kind == 'external'")

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "external_command": self.external_command,
        }

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "SynthesizerSpec":
        return cls(
            kind=doc.get("kind", KIND_GAUSSIAN_COPULA),
            seed=int(doc.get("seed", 0)),
            external_command=doc.get("external_command"),
        )


@dataclass(frozen=True)
class NumericMarginal:
    sorted_values: np.ndarray


@dataclass(frozen=True)
class CategoricalMarginal:
    categories: tuple[str, ...]
    frequencies: np.ndarray  # aligned with declared category order
    cumulative: np.ndarray  # right edges, last entry exactly 1.0


@dataclass(frozen=True)
class CopulaModel:
    column_order: tuple[str, ...]
    marginals: tuple
    latent_correlation: np.ndarray
    schema: Schema


@dataclass(frozen=True)
class SynthesisResult:
    table: DataTable
    rows_requested: int
    model_fingerprint: str
    log: str = field(default="", compare=False)


def nearest_psd(matrix: np.ndarray, floor: float = PSD_EIGENVALUE_FLOOR) -> np.ndarray:
    """Clip eigenvalues up to ``floor`` and restore the unit diagonal.

    A matrix whose smallest eigenvalue already clears the floor is returned
    unchanged (bitwise), so the repair is idempotent on valid input.
    """
    sym = np.asarray(matrix, dtype=float)
    eigvals, eigvecs = np.linalg.eigh(sym)
    if eigvals.min() >= floor:
        return matrix
    clipped = np.maximum(eigvals, floor)
    repaired = (eigvecs * clipped) @ eigvecs.T
    d = np.sqrt(np.diag(repaired))
    repaired = repaired / np.outer(d, d)
    np.fill_diagonal(repaired, 1.0)
    return (repaired + repaired.T) / 2.0


def _latent_column(spec, values, rng: "np.random.Generator | None") -> tuple:
    """Marginal + standard-normal latent for one column.

    Numeric: empirical mid-rank CDF (average ranks under ties), then the
    normal quantile. Categorical: the midpoint of the category's cumulative
    interval (or a uniform draw inside it when jitter is enabled); a constant
    column owns the whole interval [0, 1], so its latent is exactly 0.
    """
    n = len(values)
    if spec.kind == NUMERIC:
        arr = np.asarray(values, dtype=float)
        ranks = stats.rankdata(arr, method="average")
        u = (ranks - 0.5) / n
        return NumericMarginal(np.sort(arr)), stats.norm.ppf(u)

    counts = np.array([sum(1 for v in values if v == cat) for cat in spec.categories], float)
    freqs = counts / n
    cumulative = np.cumsum(freqs)
    cumulative[-1] = 1.0
    left = cumulative - freqs
    cat_index = {c: i for i, c in enumerate(spec.categories)}
    idx = np.fromiter((cat_index[v] for v in values), dtype=int, count=n)
    if rng is None:
        u = left[idx] + freqs[idx] / 2.0
    else:
        u = left[idx] + freqs[idx] * rng.uniform(size=n)
    # Guard the open interval so the normal quantile stays finite.
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    marginal = CategoricalMarginal(spec.categories, freqs, cumulative)
    return marginal, stats.norm.ppf(u)


def fit_copula(train: DataTable, seed: int = 0, categorical_latent: str = "midpoint") -> CopulaModel:
    """Fit marginals and the latent Pearson correlation of a table.

    ``categorical_latent='midpoint'`` (default) keeps fitting deterministic;
    ``'jitter'`` spreads each categorical latent uniformly inside its
    interval using ``seed``. Correlations involving constant columns are
    defined as 0. The correlation matrix is PSD-repaired by eigenvalue
    clipping at 1e-9.
    """
    if train.n_rows < 2:
        raise TooFewRows("copula fitting needs at least 2 rows")
    if categorical_latent not in ("midpoint", "jitter"):
        raise ConfigError(f"unknown categorical_latent mode {categorical_latent!r}")
    rng = np.random.default_rng(seed) if categorical_latent == "jitter" else None

    marginals = []
    latents = []
    for spec in train.schema.columns:
        marginal, z = _latent_column(spec, train.column(spec.name), rng)
        marginals.append(marginal)
        latents.append(z)

    z = np.column_stack(latents)
    stds = z.std(axis=0)
    corr = np.eye(z.shape[1])
    varying = np.where(stds > 0.0)[0]
    if len(varying) >= 2:
        sub = np.corrcoef(z[:, varying], rowvar=False)
        corr[np.ix_(varying, varying)] = sub
    corr = nearest_psd(corr)

    return CopulaModel(
        column_order=train.schema.column_names,
        marginals=tuple(marginals),
        latent_correlation=corr,
        schema=train.schema,
    )


def copula_fingerprint(model: CopulaModel) -> str:
    h = hashlib.sha256()
    for name, marginal in zip(model.column_order, model.marginals):
        h.update(name.encode())
        if isinstance(marginal, NumericMarginal):
            h.update(b"num")
            h.update(np.ascontiguousarray(marginal.sorted_values).tobytes())
        else:
            h.update(b"cat")
            h.update("\x1f".join(marginal.categories).encode())
            h.update(np.ascontiguousarray(marginal.frequencies).tobytes())
    h.update(np.ascontiguousarray(model.latent_correlation).tobytes())
    return h.hexdigest()


def sample_copula(model: CopulaModel, n: int, seed: int) -> SynthesisResult:
    """Draw ``n`` rows: correlated normals -> uniforms -> marginal inverses.

    Numeric columns interpolate the empirical quantile function between
    sorted training values (samples never leave the fitted min/max range);
    categorical columns pick the category whose cumulative interval contains
    the uniform. Bit-identical for a fixed seed.
    """
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    d = len(model.column_order)
    rng = np.random.default_rng(seed)
    chol = np.linalg.cholesky(nearest_psd(model.latent_correlation))
    z = rng.standard_normal((n, d)) @ chol.T
    u = stats.norm.cdf(z)

    columns = []
    for j, marginal in enumerate(model.marginals):
        if isinstance(marginal, NumericMarginal):
            m = len(marginal.sorted_values)
            grid = (np.arange(m) + 0.5) / m
            columns.append(np.interp(u[:, j], grid, marginal.sorted_values))
        else:
            idx = np.searchsorted(marginal.cumulative, u[:, j], side="left")
            idx = np.minimum(idx, len(marginal.categories) - 1)
            columns.append([marginal.categories[i] for i in idx])

    rows = [tuple(col[i] for col in columns) for i in range(n)]
    table = DataTable.build(model.schema, rows)
    return SynthesisResult(table, n, copula_fingerprint(model))


class GaussianCopulaSynthesizer(BaseEstimator):
    """fit/sample estimator around :func:`fit_copula` / :func:`sample_copula`."""

    def __init__(self, seed: int = 0, categorical_latent: str = "midpoint"):
        self.seed = seed
        self.categorical_latent = categorical_latent
        self.model_: CopulaModel | None = None

    def fit(self, table: DataTable) -> "GaussianCopulaSynthesizer":
        self.model_ = fit_copula(table, seed=self.seed, categorical_latent=self.categorical_latent)
        return self

    def sample(self, n: int, seed: "int | None" = None) -> SynthesisResult:
        check_is_fitted(self, "model_")
        return sample_copula(self.model_, n, self.seed if seed is None else seed)


# -- external synthesizer protocol -------------------------------------------


def _run_phase(argv: list[str], log: list[str]) -> None:
    proc = subprocess.run(argv, capture_output=True, text=True)
    if proc.stdout:
        log.append(proc.stdout)
    if proc.stderr:
        log.append(proc.stderr)
    if proc.returncode != 0:
        raise CommandFailed(proc.returncode, (proc.stderr or proc.stdout or "").strip())


def _fingerprint_dir(path: Path) -> str:
    h = hashlib.sha256()
    if path.is_dir():
        for f in sorted(path.rglob("*")):
            if f.is_file():
                h.update(str(f.relative_to(path)).encode())
                h.update(f.read_bytes())
    return h.hexdigest()


def external_fit(spec: SynthesizerSpec, train: DataTable, workdir: "str | Path") -> tuple[Path, list[str]]:
    """Run the fit phase of the protocol; returns (model dir, log lines)."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    train_csv = workdir / "train.csv"
    schema_json = workdir / "schema.json"
    model_dir = workdir / "model"
    write_csv(train, train_csv)
    train.schema.save(schema_json)
    log: list[str] = []
    _run_phase(
        shlex.split(spec.external_command)
        + ["fit", "--data", str(train_csv), "--schema", str(schema_json),
           "--model-dir", str(model_dir), "--seed", str(spec.seed)],
        log,
    )
    return model_dir, log


def external_sample(
    spec: SynthesizerSpec,
    schema: Schema,
    model_dir: Path,
    n: int,
    workdir: "str | Path",
    seed: "int | None" = None,
    log: "list[str] | None" = None,
) -> SynthesisResult:
    """Run the sample phase and validate synth.csv against the schema."""
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    workdir = Path(workdir)
    out_csv = workdir / "synth.csv"
    log = log if log is not None else []
    _run_phase(
        shlex.split(spec.external_command)
        + ["sample", "--model-dir", str(model_dir), "--n", str(n),
           "--out", str(out_csv), "--seed", str(spec.seed if seed is None else seed)],
        log,
    )
    if not out_csv.exists():
        raise ProtocolViolation(f"sample phase did not produce {out_csv}")
    try:
        table = load_csv(out_csv, schema)
    except FairgenError as exc:
        raise SchemaMismatch(f"synth.csv violates the training schema: {exc}") from exc
    if table.n_rows != n:
        raise ProtocolViolation(
            f"synth.csv holds {table.n_rows} usable rows, expected exactly {n}"
        )
    return SynthesisResult(table, n, _fingerprint_dir(model_dir), "".join(log))


def run_external(
    spec: SynthesizerSpec, train: DataTable, n: int, workdir: "str | Path"
) -> SynthesisResult:
    """Full fit-then-sample round trip against an external generator."""
    model_dir, log = external_fit(spec, train, workdir)
    return external_sample(spec, train.schema, model_dir, n, workdir, log=log)


class ExternalSynthesizer(BaseEstimator):
    """Estimator facade over the subprocess protocol.

    fit() writes the training artifacts into ``workdir`` and runs the fit
    phase; sample() runs the sample phase against the persisted model dir.
    One workdir hosts one subprocess at a time; use distinct workdirs for
    concurrent runs.
    """

    def __init__(self, command: str, workdir: "str | Path", seed: int = 0):
        self.command = command
        self.workdir = workdir
        self.seed = seed
        self.model_dir_: Path | None = None
        self.schema_: Schema | None = None

    def _spec(self) -> SynthesizerSpec:
        return SynthesizerSpec(KIND_EXTERNAL, seed=self.seed, external_command=self.command)

    def fit(self, table: DataTable) -> "ExternalSynthesizer":
        self.model_dir_, self._log = external_fit(self._spec(), table, self.workdir)
        self.schema_ = table.schema
        return self

    def sample(self, n: int, seed: "int | None" = None) -> SynthesisResult:
        check_is_fitted(self, "model_dir_")
        return external_sample(
            self._spec(), self.schema_, self.model_dir_, n, self.workdir,
            seed=seed, log=list(self._log),
        )


def make_synthesizer(spec: SynthesizerSpec, workdir: "str | Path | None" = None):
    """Factory from a spec; external kinds need a workdir."""
    if spec.kind == KIND_GAUSSIAN_COPULA:
        return GaussianCopulaSynthesizer(seed=spec.seed)
    if workdir is None:
        raise ConfigError("external synthesizer requires a workdir")
    return ExternalSynthesizer(spec.external_command, workdir, seed=spec.seed)
