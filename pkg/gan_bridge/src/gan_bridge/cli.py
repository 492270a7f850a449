"""gan-bridge command line: the fit/sample wire protocol.

Generator flags live before the subcommand so the caller can use
``gan-bridge --generator ctgan --epochs 1`` as its command template and
append the protocol arguments unchanged.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

GENERATORS = ("ctgan", "copulagan")


def _sdv_available() -> bool:
    try:
        import sdv  # noqa: F401

        return True
    except ImportError:
        return False


def _fail(message: str) -> int:
    print(f"gan-bridge: {message}", file=sys.stderr)
    return 1


def _fit(args) -> int:
    data_path = Path(args.data)
    schema_path = Path(args.schema)
    if not schema_path.exists():
        return _fail(f"schema file not found: {schema_path}")
    if not data_path.exists():
        return _fail(f"training data not found: {data_path}")
    model_dir = Path(args.model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)

    meta = {
        "generator": args.generator,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "seed": args.seed,
        "backend": "sdv" if _sdv_available() else "bundled",
        "schema": json.loads(schema_path.read_text()),
    }

    if meta["backend"] == "sdv":
        _fit_sdv(args, model_dir)
    else:
        _fit_bundled(args, model_dir)
    (model_dir / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return 0


def _fit_bundled(args, model_dir: Path) -> None:
    from .ctgan import BridgeGAN
    from .schema import TableSchema, read_table

    schema = TableSchema.load(args.schema)
    numeric, categorical = read_table(args.data, schema)
    model = BridgeGAN(
        use_copula=args.generator == "copulagan",
        epochs=args.epochs,
        batch_size=args.batch_size,
    )
    model.fit(schema, numeric, categorical, seed=args.seed)
    model.save(model_dir / "model.pt")


def _fit_sdv(args, model_dir: Path) -> None:
    import pandas as pd
    from sdv.metadata import SingleTableMetadata
    from sdv.single_table import CopulaGANSynthesizer, CTGANSynthesizer

    from .schema import TableSchema, read_table

    schema = TableSchema.load(args.schema)
    numeric, categorical = read_table(args.data, schema)
    frame = pd.DataFrame({c.name: numeric.get(c.name, categorical.get(c.name))
                          for c in schema.columns})
    metadata = SingleTableMetadata()
    metadata.detect_from_dataframe(frame)
    for col in schema.columns:
        metadata.update_column(
            col.name, sdtype="numerical" if col.kind == "numeric" else "categorical"
        )
    cls = CTGANSynthesizer if args.generator == "ctgan" else CopulaGANSynthesizer
    synthesizer = cls(metadata, epochs=args.epochs, batch_size=args.batch_size)
    synthesizer.fit(frame)
    synthesizer.save(str(model_dir / "model.sdv"))


def _sample(args) -> int:
    model_dir = Path(args.model_dir)
    meta_path = model_dir / "meta.json"
    if not meta_path.exists():
        return _fail(f"model dir has no meta.json (fit first?): {model_dir}")
    if args.n < 1:
        return _fail(f"sample size must be >= 1, got {args.n}")
    meta = json.loads(meta_path.read_text())

    if meta["backend"] == "sdv":
        import pandas as pd  # noqa: F401
        from sdv.single_table import CopulaGANSynthesizer, CTGANSynthesizer

        cls = CTGANSynthesizer if meta["generator"] == "ctgan" else CopulaGANSynthesizer
        synthesizer = cls.load(str(model_dir / "model.sdv"))
        frame = synthesizer.sample(num_rows=args.n)
        frame.to_csv(args.out, index=False)
        return 0

    from .ctgan import BridgeGAN
    from .schema import Column, TableSchema, write_table

    model = BridgeGAN.load(model_dir / "model.pt")
    columns = model.sample(args.n, seed=args.seed)
    schema = TableSchema(
        tuple(
            Column(c["name"], c["kind"], tuple(c.get("categories") or ()))
            for c in meta["schema"]["columns"]
        )
    )
    write_table(args.out, schema, columns)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gan-bridge", description=__doc__)
    parser.add_argument("--generator", choices=GENERATORS, default="ctgan")
    parser.add_argument("--epochs", type=int, default=300)
    parser.add_argument("--batch-size", type=int, default=500)
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="train on train.csv + schema.json")
    p_fit.add_argument("--data", required=True)
    p_fit.add_argument("--schema", required=True)
    p_fit.add_argument("--model-dir", required=True)
    p_fit.add_argument("--seed", type=int, required=True)

    p_sample = sub.add_parser("sample", help="draw rows from a fitted model")
    p_sample.add_argument("--model-dir", required=True)
    p_sample.add_argument("--n", type=int, required=True)
    p_sample.add_argument("--out", required=True)
    p_sample.add_argument("--seed", type=int, required=True)
    return parser


def main(argv: "list[str] | None" = None) -> int:
    args = build_parser().parse_args(argv)
    if args.epochs < 1:
        return _fail(f"epochs must be >= 1, got {args.epochs}")
    if args.batch_size < 2:
        return _fail(f"batch size must be >= 2, got {args.batch_size}")
    try:
        return _fit(args) if args.command == "fit" else _sample(args)
    except Exception as exc:  # surface everything on stderr for the caller's log
        return _fail(f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
