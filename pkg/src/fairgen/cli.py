"""Command-line entry points: ``fairgen run``, ``fairgen grid``, ``fairgen report``.

Configs are JSON documents mirroring RunConfig field-for-field (see README).
``FAIRGEN_WORKERS`` caps grid parallelism. Grid exit codes: 0 when every cell
succeeded, 2 when some cells failed (the rest still complete).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from .pipeline import (
    GridCell,
    GridResult,
    RunConfig,
    RunRecord,
    expand_grid,
    render_grid_summary,
    run_grid,
    run_pipeline,
    synthesizer_label,
)


def _load_json(path: str) -> dict:
    return json.loads(Path(path).read_text())


def load_records(root: "str | Path") -> GridResult:
    """Reconstruct a grid view from run_record.json files under ``root``."""
    root = Path(root)
    cells: list[GridCell] = []
    records: dict[str, RunRecord] = {}
    for path in sorted(root.rglob("run_record.json")):
        doc = json.loads(path.read_text())
        config = RunConfig.from_json_dict(doc["config"])
        record = RunRecord(config=config, per_seed=doc["per_seed"], aggregate=doc["aggregate"])
        cells.append(GridCell(config, synthesizer_label(config.synthesizer), config.technique))
        records[config.output_dir] = record
    return GridResult(cells, records, {}, None)


def _num(v) -> str:
    return "" if v is None else f"{v:.6f}"


def _records_csv(result: GridResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["synthesizer", "technique", "protected_column", "bca",
         "attribute", "dpr", "eoddr", "intersectional_dpr", "intersectional_eoddr"]
    )
    for cell in result.cells:
        record = result.records.get(cell.config.output_dir)
        if record is None:
            continue
        agg = record.aggregate
        for attr in cell.config.evaluation_attributes:
            writer.writerow(
                [
                    cell.synthesizer_label,
                    cell.technique.display(),
                    cell.technique.protected_column or "",
                    f"{agg['bca']:.6f}",
                    attr,
                    _num(agg["per_attribute"][attr]["dpr"]),
                    _num(agg["per_attribute"][attr]["eoddr"]),
                    _num(agg["intersectional"]["dpr"]),
                    _num(agg["intersectional"]["eoddr"]),
                ]
            )
    return buf.getvalue()


def main(argv: "list[str] | None" = None) -> int:
    parser = argparse.ArgumentParser(prog="fairgen", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a single pipeline config")
    p_run.add_argument("--config", required=True)

    p_grid = sub.add_parser("grid", help="execute a grid of pipeline configs")
    p_grid.add_argument("--config", required=True)
    p_grid.add_argument("--bold", action="store_true", help="mark per-synthesizer best rows")
    p_grid.add_argument("--workers", type=int, default=None)

    p_rep = sub.add_parser("report", help="render stored run records")
    p_rep.add_argument("--in", dest="input_dir", required=True)
    p_rep.add_argument("--format", choices=["json", "table", "csv"], default="table")
    p_rep.add_argument("--bold", action="store_true")

    args = parser.parse_args(argv)

    if args.command == "run":
        config = RunConfig.from_json_dict(_load_json(args.config))
        record = run_pipeline(config)
        cell = GridCell(config, synthesizer_label(config.synthesizer), config.technique)
        result = GridResult([cell], {config.output_dir: record}, {}, None)
        print(render_grid_summary(result), end="")
        return 0

    if args.command == "grid":
        cells, inter_source = expand_grid(_load_json(args.config))
        result = run_grid(cells, workers=args.workers, intersectional_source=inter_source)
        print(render_grid_summary(result, bold_best=args.bold), end="")
        return result.exit_code()

    result = load_records(args.input_dir)
    if args.format == "json":
        docs = [result.records[c.config.output_dir].to_json_dict()
                for c in result.cells if c.config.output_dir in result.records]
        print(json.dumps(docs, sort_keys=True, indent=2))
    elif args.format == "csv":
        print(_records_csv(result), end="")
    else:
        print(render_grid_summary(result, bold_best=args.bold), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
