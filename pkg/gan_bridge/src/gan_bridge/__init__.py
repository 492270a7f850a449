"""External synthesizer bridge for deep tabular generators.

Implements the file/subprocess wire protocol of the main pipeline:

    gan-bridge [--generator {ctgan,copulagan}] [--epochs N] [--batch-size B] \
        fit    --data train.csv --schema schema.json --model-dir DIR --seed S
    gan-bridge sample --model-dir DIR --n N --out synth.csv --seed S

When the ``sdv`` package is installed its CTGAN / CopulaGAN synthesizers are
used directly. This environment's package index does not carry the SDV
ecosystem, so the bridge falls back to a bundled, deliberately compact
implementation of the same training procedure (conditional WGAN-GP with
mode-specific normalization; the copulagan variant Gaussian-normalizes
numeric columns through their empirical CDF first).
"""

__version__ = "0.1.0"
