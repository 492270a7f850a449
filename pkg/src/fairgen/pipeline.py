"""End-to-end orchestration: split, debias, synthesize, train, score fairness.

One :class:`RunConfig` describes a single cell of the experiment grid:
dataset, preprocessing technique, synthesizer, classifier, seeds. Per seed
the pipeline splits the data, preprocesses only the training side, fits the
synthesizer on the preprocessed rows, trains the classifier on synthetic
rows, and evaluates on the untouched real test split. The test split depends
only on (dataset, seed, fraction), so it is byte-identical across techniques
within a seed.

Everything written under the output directory is deterministic for a fixed
config: reruns are byte-identical, and a RunRecord embeds the full config so
any run can be re-executed from its record alone.
"""

from __future__ import annotations

import concurrent.futures
import contextlib
import hashlib
import json
import logging
import os
import statistics
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .augment import AugmentationDebiaser
from .classifier import make_classifier
from .errors import ConfigError, PipelineStageError
from .fairness import DEFAULT_MIN_SUPPORT, FairnessReport, evaluate
from .kremoval import KRemovalDebiaser
from .synthesis import KIND_EXTERNAL, SynthesizerSpec, make_synthesizer
from .tabular import DataTable, Schema, load_csv, train_test_split, write_csv

logger = logging.getLogger(__name__)

TECHNIQUE_RAW = "raw"
TECHNIQUE_KREMOVAL = "kremoval"
TECHNIQUE_AUGMENTATION = "augmentation"

WORKERS_ENV = "FAIRGEN_WORKERS"


def _dump_json(doc, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(tuple(parts)).generate_state(1)[0])


@dataclass(frozen=True)
class TechniqueConfig:
    name: str
    k_percent: float = 0.0
    add_percent: float = 100.0
    protected_column: "str | None" = None
    statistic: str = "max"
    realism_distance: str = "max"
    clusters_per_cell: "int | None" = None

    def __post_init__(self):
        if self.name not in (TECHNIQUE_RAW, TECHNIQUE_KREMOVAL, TECHNIQUE_AUGMENTATION):
            raise ConfigError(f"unknown technique {self.name!r}")
        if self.name == TECHNIQUE_KREMOVAL and not (0.0 <= self.k_percent <= 100.0):
            raise ConfigError(f"k_percent must lie in [0, 100], got {self.k_percent}")
        if self.name == TECHNIQUE_AUGMENTATION and not (0.0 <= self.add_percent <= 100.0):
            raise ConfigError(f"add_percent must lie in [0, 100], got {self.add_percent}")
        if self.name != TECHNIQUE_RAW and not self.protected_column:
            raise ConfigError(f"technique {self.name!r} needs a protected_column")

    def display(self) -> str:
        if self.name == TECHNIQUE_RAW:
            return "Raw"
        if self.name == TECHNIQUE_KREMOVAL:
            k = self.k_percent
            return f"{k:g} % removal"
        return "Augmentation"

    def to_json_dict(self) -> dict:
        doc = {"name": self.name}
        if self.name == TECHNIQUE_KREMOVAL:
            doc.update(
                k_percent=self.k_percent,
                protected_column=self.protected_column,
                statistic=self.statistic,
            )
        elif self.name == TECHNIQUE_AUGMENTATION:
            doc.update(
                add_percent=self.add_percent,
                protected_column=self.protected_column,
                realism_distance=self.realism_distance,
                clusters_per_cell=self.clusters_per_cell,
            )
        return doc

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "TechniqueConfig":
        known = {
            "name", "k_percent", "add_percent", "protected_column",
            "statistic", "realism_distance", "clusters_per_cell",
        }
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown technique fields: {sorted(unknown)}")
        return cls(**{k: doc[k] for k in doc})


@dataclass(frozen=True)
class RunConfig:
    dataset: str
    schema_path: str
    technique: TechniqueConfig
    synthesizer: SynthesizerSpec
    evaluation_attributes: tuple[str, ...]
    seeds: tuple[int, ...]
    output_dir: str
    test_fraction: float = 0.2
    synthesis_size: "int | None" = None
    classifier: Mapping = field(default_factory=lambda: {"name": "logistic"})
    min_support: int = DEFAULT_MIN_SUPPORT
    eoddr_variant: str = "joint"
    save_removal_scores: bool = False

    def __post_init__(self):
        object.__setattr__(self, "evaluation_attributes", tuple(self.evaluation_attributes))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "classifier", dict(self.classifier))
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if not self.evaluation_attributes:
            raise ConfigError("evaluation_attributes must be non-empty")

    def to_json_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "schema": self.schema_path,
            "technique": self.technique.to_json_dict(),
            "synthesizer": self.synthesizer.to_json_dict(),
            "evaluation_attributes": list(self.evaluation_attributes),
            "seeds": list(self.seeds),
            "output_dir": self.output_dir,
            "test_fraction": self.test_fraction,
            "synthesis_size": self.synthesis_size,
            "classifier": dict(self.classifier),
            "min_support": self.min_support,
            "eoddr_variant": self.eoddr_variant,
            "save_removal_scores": self.save_removal_scores,
        }

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "RunConfig":
        try:
            return cls(
                dataset=doc["dataset"],
                schema_path=doc["schema"],
                technique=TechniqueConfig.from_json_dict(doc.get("technique", {"name": "raw"})),
                synthesizer=SynthesizerSpec.from_json_dict(doc.get("synthesizer", {})),
                evaluation_attributes=tuple(doc["evaluation_attributes"]),
                seeds=tuple(doc.get("seeds", [0])),
                output_dir=doc["output_dir"],
                test_fraction=float(doc.get("test_fraction", 0.2)),
                synthesis_size=doc.get("synthesis_size"),
                classifier=doc.get("classifier", {"name": "logistic"}),
                min_support=int(doc.get("min_support", DEFAULT_MIN_SUPPORT)),
                eoddr_variant=doc.get("eoddr_variant", "joint"),
                save_removal_scores=bool(doc.get("save_removal_scores", False)),
            )
        except KeyError as exc:
            raise ConfigError(f"run config missing key {exc}") from exc

    def fingerprint(self) -> str:
        canonical = json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


@dataclass(frozen=True)
class RunRecord:
    config: RunConfig
    per_seed: dict
    aggregate: dict

    def to_json_dict(self) -> dict:
        return {
            "config": self.config.to_json_dict(),
            "config_fingerprint": self.config.fingerprint(),
            "per_seed": {str(k): v for k, v in sorted(self.per_seed.items())},
            "aggregate": self.aggregate,
        }


@contextlib.contextmanager
def _stage(name: str):
    try:
        yield
    except PipelineStageError:
        raise
    except Exception as exc:
        raise PipelineStageError(name, exc) from exc


def _apply_technique(
    train: DataTable, technique: TechniqueConfig, seed: int, keep_scores: bool = False
) -> tuple[DataTable, dict]:
    if technique.name == TECHNIQUE_RAW:
        return train, {"removed_ids": [], "augmented_rows": 0}
    if technique.name == TECHNIQUE_KREMOVAL:
        debiaser = KRemovalDebiaser(
            technique.protected_column, technique.k_percent, technique.statistic
        )
        out = debiaser.fit_transform(train)
        prov = {
            "removed_ids": list(debiaser.outcome_.removed_ids),
            "augmented_rows": 0,
            "group_sizes": {
                "privileged_favourable": len(debiaser.groups_[0]),
                "unprivileged_unfavourable": len(debiaser.groups_[1]),
            },
        }
        if keep_scores:
            prov["scores"] = debiaser.outcome_.to_json_dict()["scores"]
        return out, prov
    debiaser = AugmentationDebiaser(
        technique.protected_column,
        add_percent=technique.add_percent,
        clusters_per_cell=technique.clusters_per_cell,
        realism_distance=technique.realism_distance,
        seed=_derive_seed(seed, 1),
    )
    out = debiaser.fit_transform(train)
    return out, {"removed_ids": [], "augmented_rows": out.n_rows - train.n_rows}


def _mean_or_none(values: list) -> "float | None":
    if any(v is None for v in values):
        return None
    return statistics.fmean(values)


def _aggregate(reports: dict[int, FairnessReport], attributes: Sequence[str]) -> dict:
    seeds = sorted(reports)
    agg = {"bca": statistics.fmean(reports[s].bca for s in seeds), "per_attribute": {}}
    for attr in attributes:
        agg["per_attribute"][attr] = {
            metric: _mean_or_none([reports[s].per_attribute[attr][metric] for s in seeds])
            for metric in ("dpr", "eoddr")
        }
    agg["intersectional"] = {
        metric: _mean_or_none([reports[s].intersectional[metric] for s in seeds])
        for metric in ("dpr", "eoddr")
    }
    return agg


def run_pipeline(config: RunConfig) -> RunRecord:
    """Execute one grid cell across its seeds and persist all artifacts."""
    out_root = Path(config.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)

    with _stage("load"):
        schema = Schema.load(config.schema_path)
        table = load_csv(config.dataset, schema)
        for attr in config.evaluation_attributes:
            if attr not in schema.protected_columns:
                raise ConfigError(f"evaluation attribute {attr!r} is not protected in the schema")

    reports: dict[int, FairnessReport] = {}
    per_seed: dict[int, dict] = {}
    for seed in config.seeds:
        seed_dir = out_root / f"seed_{seed}"
        seed_dir.mkdir(parents=True, exist_ok=True)

        with _stage("split"):
            train, test = train_test_split(table, config.test_fraction, seed)
            write_csv(test, seed_dir / "test.csv")

        with _stage("preprocess"):
            preprocessed, provenance = _apply_technique(
                train, config.technique, seed, keep_scores=config.save_removal_scores
            )
            if config.technique.name == TECHNIQUE_KREMOVAL:
                audit = {
                    "k_percent": config.technique.k_percent,
                    "protected_column": config.technique.protected_column,
                    "removed_ids": provenance["removed_ids"],
                    "group_sizes": provenance["group_sizes"],
                }
                if config.save_removal_scores:
                    audit["scores"] = provenance.pop("scores")
                _dump_json(audit, seed_dir / "removal.json")

        with _stage("synthesize"):
            spec = replace(
                config.synthesizer, seed=_derive_seed(seed, 2, config.synthesizer.seed)
            )
            workdir = seed_dir / "synth_work" if spec.kind == KIND_EXTERNAL else None
            synthesizer = make_synthesizer(spec, workdir)
            synthesizer.fit(preprocessed)
            n = config.synthesis_size or preprocessed.n_rows
            result = synthesizer.sample(n)

        with _stage("train_classifier"):
            clf = make_classifier(config.classifier)
            clf.fit(result.table)

        with _stage("evaluate"):
            y_pred = clf.predict(test)
            report = evaluate(
                test.labels(),
                y_pred,
                test,
                config.evaluation_attributes,
                min_support=config.min_support,
                eoddr_variant=config.eoddr_variant,
            )
            _dump_json(report.to_json_dict(), seed_dir / "report.json")

        reports[seed] = report
        per_seed[seed] = {
            "report": report.to_json_dict(),
            "provenance": provenance,
            "synthesizer_fingerprint": result.model_fingerprint,
            "synthetic_rows": result.table.n_rows,
            "train_rows": train.n_rows,
            "preprocessed_rows": preprocessed.n_rows,
            "test_rows": test.n_rows,
        }

    record = RunRecord(
        config=config,
        per_seed=per_seed,
        aggregate=_aggregate(reports, config.evaluation_attributes),
    )
    _dump_json(record.to_json_dict(), out_root / "run_record.json")
    return record


# -- grid ----------------------------------------------------------------------


@dataclass(frozen=True)
class GridCell:
    config: RunConfig
    synthesizer_label: str
    technique: TechniqueConfig


@dataclass
class GridResult:
    cells: list[GridCell]
    records: dict[str, RunRecord]  # keyed by cell output_dir
    failures: dict[str, str]
    intersectional_source: "str | None"

    @property
    def all_succeeded(self) -> bool:
        return not self.failures

    def exit_code(self) -> int:
        return 0 if self.all_succeeded else 2


def synthesizer_label(spec: SynthesizerSpec) -> str:
    if spec.kind != KIND_EXTERNAL:
        return "gaussian_copula"
    token = hashlib.sha256(spec.external_command.encode()).hexdigest()[:8]
    head = Path(spec.external_command.split()[0]).name
    return f"external_{head}_{token}"


def expand_grid(doc: Mapping) -> tuple[list[GridCell], "str | None"]:
    """Expand a grid document into concrete run configs.

    Techniques that act on a protected column but do not name one are run
    once per evaluation attribute, mirroring the per-attribute layout of the
    experiment tables. Cell output dirs are derived, collision-checked
    subdirectories of the base output dir.
    """
    try:
        base = dict(doc["base"])
    except KeyError:
        raise ConfigError("grid config must contain a 'base' run config") from None
    technique_docs = [dict(t) for t in doc.get("techniques", [{"name": "raw"}])]
    synth_docs = doc.get("synthesizers") or [base.get("synthesizer", {})]
    synthesizers = [SynthesizerSpec.from_json_dict(s) for s in synth_docs]
    attributes = tuple(base.get("evaluation_attributes", ()))
    intersectional_source = doc.get("intersectional_source") or (
        attributes[0] if attributes else None
    )
    out_root = Path(base.get("output_dir", "runs"))

    cells: list[GridCell] = []
    seen_dirs: set[str] = set()
    for spec in synthesizers:
        label = synthesizer_label(spec)
        for tdoc in technique_docs:
            if tdoc.get("name") == TECHNIQUE_RAW or tdoc.get("protected_column"):
                variant_docs = [tdoc]
            else:
                variant_docs = [dict(tdoc, protected_column=a) for a in attributes]
            for vdoc in variant_docs:
                variant = TechniqueConfig.from_json_dict(vdoc)
                suffix = variant.name
                if variant.name == TECHNIQUE_KREMOVAL:
                    suffix = f"kremoval_{variant.k_percent:g}pct_{variant.protected_column}"
                elif variant.name == TECHNIQUE_AUGMENTATION:
                    suffix = f"augment_{variant.add_percent:g}pct_{variant.protected_column}"
                cell_dir = str(out_root / label / suffix)
                if cell_dir in seen_dirs:
                    raise ConfigError(f"duplicate grid cell {cell_dir}")
                seen_dirs.add(cell_dir)
                cell_doc = dict(base)
                cell_doc["technique"] = variant.to_json_dict()
                cell_doc["synthesizer"] = spec.to_json_dict()
                cell_doc["output_dir"] = cell_dir
                cells.append(GridCell(RunConfig.from_json_dict(cell_doc), label, variant))
    return cells, intersectional_source


def run_grid(
    cells: list[GridCell],
    workers: "int | None" = None,
    intersectional_source: "str | None" = None,
) -> GridResult:
    """Execute every cell; failures are recorded and do not stop the rest."""
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    workers = max(1, workers)

    records: dict[str, RunRecord] = {}
    failures: dict[str, str] = {}

    def _one(cell: GridCell):
        return cell.config.output_dir, run_pipeline(cell.config)

    if workers == 1:
        for cell in cells:
            try:
                key, record = _one(cell)
                records[key] = record
            except Exception as exc:
                failures[cell.config.output_dir] = str(exc)
                logger.error("grid cell %s failed: %s", cell.config.output_dir, exc)
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_one, cell): cell for cell in cells}
            for fut in concurrent.futures.as_completed(futures):
                cell = futures[fut]
                try:
                    key, record = fut.result()
                    records[key] = record
                except Exception as exc:
                    failures[cell.config.output_dir] = str(exc)
                    logger.error("grid cell %s failed: %s", cell.config.output_dir, exc)

    return GridResult(cells, records, failures, intersectional_source)


# -- summary rendering -----------------------------------------------------------


def _fmt(value: "float | None") -> str:
    return "-" if value is None else f"{value:.2f}"


def render_grid_summary(result: GridResult, bold_best: bool = False) -> str:
    """Aligned-text table in the experiment-table layout.

    One row per (synthesizer, technique); per-attribute blocks of
    BCA/DPR/EOddR and, when more than one attribute is evaluated, an
    intersectional block taken from the run preprocessed on
    ``intersectional_source`` (recorded in the header). Augmentation rows
    show no intersectional values. ``bold_best`` marks, per synthesizer, the
    technique with the best mean fairness on the first attribute block.
    """
    if not result.cells:
        return "(empty grid)\n"
    attributes = result.cells[0].config.evaluation_attributes
    show_intersectional = len(attributes) > 1
    inter_source = result.intersectional_source or attributes[0]

    # (synth, technique display) -> attr -> aggregate dict
    table: dict[tuple[str, str], dict] = {}
    order: list[tuple[str, str]] = []
    for cell in result.cells:
        key = (cell.synthesizer_label, cell.technique.display())
        if key not in table:
            table[key] = {}
            order.append(key)
        record = result.records.get(cell.config.output_dir)
        fill_attrs = (
            attributes if cell.technique.name == TECHNIQUE_RAW
            else [cell.technique.protected_column]
        )
        for attr in fill_attrs:
            if record is None:
                table[key][attr] = None
            else:
                agg = record.aggregate
                entry = {
                    "bca": agg["bca"],
                    "dpr": agg["per_attribute"][attr]["dpr"],
                    "eoddr": agg["per_attribute"][attr]["eoddr"],
                }
                if attr == inter_source or cell.technique.name == TECHNIQUE_RAW:
                    entry["intersectional"] = agg["intersectional"]
                table[key][attr] = entry

    headers = ["Synthesizer", "Technique"]
    for attr in attributes:
        headers += [f"{attr}:BCA", f"{attr}:DPR", f"{attr}:EOddR"]
    if show_intersectional:
        headers += ["inter:BCA", "inter:DPR", "inter:EOddR"]

    best_rows: set[tuple[str, str]] = set()
    if bold_best:
        by_synth: dict[str, tuple[float, tuple[str, str]]] = {}
        for key in order:
            entry = table[key].get(attributes[0])
            if not entry or entry["dpr"] is None or entry["eoddr"] is None:
                continue
            score = (entry["dpr"] + entry["eoddr"]) / 2.0
            if key[0] not in by_synth or score > by_synth[key[0]][0]:
                by_synth[key[0]] = (score, key)
        best_rows = {key for _, key in by_synth.values()}

    rows = []
    for key in order:
        synth, tech = key
        marker = "*" if key in best_rows else ""
        row = [synth, tech + marker]
        for attr in attributes:
            entry = table[key].get(attr)
            if entry is None:
                row += ["failed" if table[key].get(attr, "absent") is None else "-"] * 3
            else:
                row += [_fmt(entry["bca"]), _fmt(entry["dpr"]), _fmt(entry["eoddr"])]
        if show_intersectional:
            inter = None
            for attr in attributes:
                entry = table[key].get(attr)
                if entry and "intersectional" in entry and tech != "Augmentation":
                    inter = entry
                    break
            if inter is None:
                row += ["-", "-", "-"]
            else:
                row += [
                    _fmt(inter["bca"]),
                    _fmt(inter["intersectional"]["dpr"]),
                    _fmt(inter["intersectional"]["eoddr"]),
                ]
        rows.append(row)

    widths = [max(len(headers[i]), *(len(r[i]) for r in rows)) for i in range(len(headers))]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in rows]
    if show_intersectional:
        lines.append(f"(intersectional block sourced from {inter_source!r}-preprocessed runs)")
    if result.failures:
        lines.append("")
        lines.append("failed cells:")
        lines += [f"  {k}: {v}" for k, v in sorted(result.failures.items())]
    return "\n".join(lines) + "\n"
