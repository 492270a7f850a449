"""Built-in dataset schemas, download helpers, and surrogate generators.

Raw data is not vendored. ``fetch_adult`` / ``fetch_german`` download and
normalize the two benchmark datasets from the UCI repository when network
access is available; otherwise ``surrogate_adult`` / ``surrogate_german``
produce seeded stand-ins with the same schema, realistic marginals, and a
planted dependence between protected attributes and the label, so every part
of the pipeline can be exercised at full scale offline. Files written by the
surrogate path are clearly named ``surrogate_*.csv``.

German credit note: the raw file has no gender column. Attribute 9
("personal status and sex", codes A91-A95) encodes it; the converter derives
``sex`` (A92/A95 -> female, otherwise male) and drops the combined column so
the protected attribute does not leak back in as a feature.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .tabular import (
    CATEGORICAL,
    NUMERIC,
    ROLE_LABEL,
    ROLE_PROTECTED,
    ColumnSpec,
    DataTable,
    Schema,
    write_csv,
)

ADULT_URL = "https://archive.ics.uci.edu/ml/machine-learning-databases/adult/adult.data"
GERMAN_URL = (
    "https://archive.ics.uci.edu/ml/machine-learning-databases/"
    "statlog/german/german.data"
)

SURROGATE_SEED = 20240811
ADULT_N_ROWS = 32561
GERMAN_N_ROWS = 1000

_ADULT_WORKCLASS = (
    "Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov", "Local-gov",
    "State-gov", "Without-pay", "Never-worked",
)
_ADULT_EDUCATION = (
    "Preschool", "1st-4th", "5th-6th", "7th-8th", "9th", "10th", "11th", "12th",
    "HS-grad", "Some-college", "Assoc-voc", "Assoc-acdm", "Bachelors", "Masters",
    "Prof-school", "Doctorate",
)
_ADULT_MARITAL = (
    "Married-civ-spouse", "Divorced", "Never-married", "Separated", "Widowed",
    "Married-spouse-absent", "Married-AF-spouse",
)
_ADULT_OCCUPATION = (
    "Tech-support", "Craft-repair", "Other-service", "Sales", "Exec-managerial",
    "Prof-specialty", "Handlers-cleaners", "Machine-op-inspct", "Adm-clerical",
    "Farming-fishing", "Transport-moving", "Priv-house-serv", "Protective-serv",
    "Armed-Forces",
)
_ADULT_RELATIONSHIP = ("Wife", "Own-child", "Husband", "Not-in-family", "Other-relative", "Unmarried")
_ADULT_RACE = ("White", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other", "Black")
_ADULT_COUNTRIES = (
    "United-States", "Cambodia", "England", "Puerto-Rico", "Canada", "Germany",
    "Outlying-US(Guam-USVI-etc)", "India", "Japan", "Greece", "South", "China",
    "Cuba", "Iran", "Honduras", "Philippines", "Italy", "Poland", "Jamaica",
    "Vietnam", "Mexico", "Portugal", "Ireland", "France", "Dominican-Republic",
    "Laos", "Ecuador", "Taiwan", "Haiti", "Columbia", "Hungary", "Guatemala",
    "Nicaragua", "Scotland", "Thailand", "Yugoslavia", "El-Salvador",
    "Trinadad&Tobago", "Peru", "Hong", "Holand-Netherlands",
)


def adult_schema() -> Schema:
    """Adult Income: predict income >50K; protected sex (Male) and race (White)."""
    return Schema(
        columns=(
            ColumnSpec("age", NUMERIC),
            ColumnSpec("workclass", CATEGORICAL, categories=_ADULT_WORKCLASS),
            ColumnSpec("fnlwgt", NUMERIC),
            ColumnSpec("education", CATEGORICAL, categories=_ADULT_EDUCATION),
            ColumnSpec("education-num", NUMERIC),
            ColumnSpec("marital-status", CATEGORICAL, categories=_ADULT_MARITAL),
            ColumnSpec("occupation", CATEGORICAL, categories=_ADULT_OCCUPATION),
            ColumnSpec("relationship", CATEGORICAL, categories=_ADULT_RELATIONSHIP),
            ColumnSpec("race", CATEGORICAL, ROLE_PROTECTED, _ADULT_RACE),
            ColumnSpec("sex", CATEGORICAL, ROLE_PROTECTED, ("Female", "Male")),
            ColumnSpec("capital-gain", NUMERIC),
            ColumnSpec("capital-loss", NUMERIC),
            ColumnSpec("hours-per-week", NUMERIC),
            ColumnSpec("native-country", CATEGORICAL, categories=_ADULT_COUNTRIES),
            ColumnSpec("income", CATEGORICAL, ROLE_LABEL, ("<=50K", ">50K")),
        ),
        label_column="income",
        favourable_label=">50K",
        privileged_values={"sex": "Male", "race": "White"},
    )


def german_schema() -> Schema:
    """German Credit (converted): predict good/bad risk; protected sex (male)."""
    cats = {
        "checking_status": ("A11", "A12", "A13", "A14"),
        "credit_history": ("A30", "A31", "A32", "A33", "A34"),
        "purpose": ("A40", "A41", "A410", "A42", "A43", "A44", "A45", "A46", "A47", "A48", "A49"),
        "savings": ("A61", "A62", "A63", "A64", "A65"),
        "employment_since": ("A71", "A72", "A73", "A74", "A75"),
        "other_debtors": ("A101", "A102", "A103"),
        "property": ("A121", "A122", "A123", "A124"),
        "other_installment_plans": ("A141", "A142", "A143"),
        "housing": ("A151", "A152", "A153"),
        "job": ("A171", "A172", "A173", "A174"),
        "telephone": ("A191", "A192"),
        "foreign_worker": ("A201", "A202"),
    }
    return Schema(
        columns=(
            ColumnSpec("checking_status", CATEGORICAL, categories=cats["checking_status"]),
            ColumnSpec("duration", NUMERIC),
            ColumnSpec("credit_history", CATEGORICAL, categories=cats["credit_history"]),
            ColumnSpec("purpose", CATEGORICAL, categories=cats["purpose"]),
            ColumnSpec("credit_amount", NUMERIC),
            ColumnSpec("savings", CATEGORICAL, categories=cats["savings"]),
            ColumnSpec("employment_since", CATEGORICAL, categories=cats["employment_since"]),
            ColumnSpec("installment_rate", NUMERIC),
            ColumnSpec("sex", CATEGORICAL, ROLE_PROTECTED, ("female", "male")),
            ColumnSpec("other_debtors", CATEGORICAL, categories=cats["other_debtors"]),
            ColumnSpec("residence_since", NUMERIC),
            ColumnSpec("property", CATEGORICAL, categories=cats["property"]),
            ColumnSpec("age", NUMERIC),
            ColumnSpec(
                "other_installment_plans", CATEGORICAL, categories=cats["other_installment_plans"]
            ),
            ColumnSpec("housing", CATEGORICAL, categories=cats["housing"]),
            ColumnSpec("existing_credits", NUMERIC),
            ColumnSpec("job", CATEGORICAL, categories=cats["job"]),
            ColumnSpec("num_dependents", NUMERIC),
            ColumnSpec("telephone", CATEGORICAL, categories=cats["telephone"]),
            ColumnSpec("foreign_worker", CATEGORICAL, categories=cats["foreign_worker"]),
            ColumnSpec("class", CATEGORICAL, ROLE_LABEL, ("good", "bad")),
        ),
        label_column="class",
        favourable_label="good",
        privileged_values={"sex": "male"},
    )


def write_builtin_schemas(directory: "str | Path") -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, schema in (("adult", adult_schema()), ("german", german_schema())):
        path = directory / f"{name}.json"
        schema.save(path)
        paths.append(path)
    return paths


# -- download + conversion ----------------------------------------------------


def _download(url: str, timeout: float = 30.0) -> bytes:
    import urllib.request

    with urllib.request.urlopen(url, timeout=timeout) as resp:  # noqa: S310
        return resp.read()


def fetch_adult(dest_dir: "str | Path") -> Path:
    """Download adult.data and write data/adult.csv with a proper header.

    Rows keep their '?' markers; the loader drops and counts them at ingest.
    """
    dest_dir = Path(dest_dir)
    dest_dir.mkdir(parents=True, exist_ok=True)
    raw = _download(ADULT_URL).decode("utf-8")
    out = dest_dir / "adult.csv"
    schema = adult_schema()
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(schema.column_names)
        for line in raw.splitlines():
            line = line.strip()
            if not line:
                continue
            cells = [c.strip().rstrip(".") for c in line.split(",")]
            if len(cells) == len(schema.column_names):
                writer.writerow(cells)
    return out


_GERMAN_RAW_ORDER = (
    "checking_status", "duration", "credit_history", "purpose", "credit_amount",
    "savings", "employment_since", "installment_rate", "personal_status",
    "other_debtors", "residence_since", "property", "age",
    "other_installment_plans", "housing", "existing_credits", "job",
    "num_dependents", "telephone", "foreign_worker", "class",
)

#: A92 = divorced/separated/married female, A95 = single female; the other
#: personal-status codes are male.
_GERMAN_FEMALE_CODES = frozenset({"A92", "A95"})


def fetch_german(dest_dir: "str | Path") -> Path:
    """Download german.data and write data/german.csv in the converted layout."""
    dest_dir = Path(dest_dir)
    dest_dir.mkdir(parents=True, exist_ok=True)
    raw = _download(GERMAN_URL).decode("utf-8")
    out = dest_dir / "german.csv"
    schema = german_schema()
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(schema.column_names)
        for line in raw.splitlines():
            parts = line.split()
            if len(parts) != len(_GERMAN_RAW_ORDER):
                continue
            record = dict(zip(_GERMAN_RAW_ORDER, parts))
            record["sex"] = "female" if record.pop("personal_status") in _GERMAN_FEMALE_CODES else "male"
            record["class"] = "good" if record["class"] == "1" else "bad"
            writer.writerow([record[c] for c in schema.column_names])
    return out


# -- surrogate generators ------------------------------------------------------


def _choice(rng, options, probs, size):
    p = np.asarray(probs, dtype=float)
    p = p / p.sum()
    idx = rng.choice(len(options), size=size, p=p)
    return np.asarray(options, dtype=object)[idx]


def surrogate_adult(n_rows: int = ADULT_N_ROWS, seed: int = SURROGATE_SEED) -> DataTable:
    """Seeded Adult-shaped stand-in with a planted sex/race income gap.

    Marginals approximate the real file; education-num drives education
    exactly (a perfectly correlated column pair that stresses the copula's
    PSD repair) and income follows a logistic latent over skill, age, hours,
    marital status, and the protected attributes.
    """
    rng = np.random.default_rng(seed)
    n = n_rows

    male = rng.random(n) < 0.669
    sex = np.where(male, "Male", "Female").astype(object)
    race = _choice(rng, _ADULT_RACE, [0.854, 0.031, 0.010, 0.008, 0.096], n)

    age = np.clip(np.round(rng.normal(38.6, 13.6, n)), 17, 90)
    skill = rng.normal(0.0, 1.0, n)
    edu_num = np.clip(np.round(10.1 + 1.9 * skill + rng.normal(0, 0.9, n)), 1, 16)
    education = np.asarray(_ADULT_EDUCATION, dtype=object)[edu_num.astype(int) - 1]
    hours = np.clip(np.round(rng.normal(40.4 + 2.5 * skill + 2.0 * male, 11.0, n)), 1, 99)
    fnlwgt = np.round(np.exp(rng.normal(12.0, 0.48, n)))

    workclass = _choice(
        rng, _ADULT_WORKCLASS, [0.753, 0.079, 0.035, 0.030, 0.064, 0.040, 0.0005, 0.0005], n
    )
    occupation = _choice(
        rng,
        _ADULT_OCCUPATION,
        [0.030, 0.134, 0.108, 0.120, 0.133, 0.135, 0.045, 0.066, 0.124, 0.033,
         0.052, 0.005, 0.021, 0.0003],
        n,
    )
    married = rng.random(n) < np.clip(0.18 + 0.011 * (age - 17), 0.05, 0.78)
    marital = np.where(
        married,
        "Married-civ-spouse",
        _choice(rng, ("Never-married", "Divorced", "Separated", "Widowed",
                      "Married-spouse-absent", "Married-AF-spouse"),
                [0.62, 0.26, 0.06, 0.04, 0.015, 0.005], n),
    ).astype(object)
    relationship = np.where(
        married & male,
        "Husband",
        np.where(
            married & ~male,
            "Wife",
            _choice(rng, ("Not-in-family", "Own-child", "Unmarried", "Other-relative"),
                    [0.45, 0.28, 0.21, 0.06], n),
        ),
    ).astype(object)

    gain_hit = rng.random(n) < 0.083
    capital_gain = np.where(gain_hit, np.round(np.exp(rng.normal(8.2, 1.1, n))), 0.0)
    loss_hit = rng.random(n) < 0.047
    capital_loss = np.where(loss_hit, np.round(rng.normal(1870, 330, n)), 0.0)
    capital_loss = np.clip(capital_loss, 0, None)
    country = _choice(
        rng,
        ("United-States", "Mexico", "Philippines", "Germany", "Canada",
         "Puerto-Rico", "El-Salvador", "India", "Cuba", "England"),
        [0.913, 0.020, 0.0061, 0.0042, 0.0037, 0.0035, 0.0033, 0.0031, 0.0029, 0.0027],
        n,
    )

    logit = (
        -8.6
        + 0.33 * edu_num
        + 0.032 * age
        + 0.024 * hours
        + 1.15 * married
        + 0.55 * male
        + 0.30 * (race == "White")
        + 2.2 * (capital_gain > 5000)
    )
    income = np.where(
        rng.random(n) < 1.0 / (1.0 + np.exp(-logit)), ">50K", "<=50K"
    ).astype(object)

    rows = list(
        zip(
            age, workclass, fnlwgt, education, edu_num, marital, occupation,
            relationship, race, sex, capital_gain, capital_loss, hours, country, income,
        )
    )
    return DataTable.build(adult_schema(), rows)


def surrogate_german(n_rows: int = GERMAN_N_ROWS, seed: int = SURROGATE_SEED) -> DataTable:
    """Seeded German-Credit-shaped stand-in (single protected attribute)."""
    rng = np.random.default_rng(seed)
    n = n_rows

    male = rng.random(n) < 0.69
    sex = np.where(male, "male", "female").astype(object)
    checking = _choice(rng, ("A11", "A12", "A13", "A14"), [0.274, 0.269, 0.063, 0.394], n)
    duration = np.clip(np.round(rng.gamma(3.2, 6.6, n)), 4, 72)
    history = _choice(rng, ("A30", "A31", "A32", "A33", "A34"), [0.04, 0.049, 0.53, 0.088, 0.293], n)
    purpose = _choice(
        rng,
        ("A40", "A41", "A410", "A42", "A43", "A44", "A45", "A46", "A48", "A49"),
        [0.234, 0.103, 0.012, 0.181, 0.28, 0.012, 0.022, 0.05, 0.009, 0.097],
        n,
    )
    amount = np.round(np.exp(rng.normal(7.8, 0.75, n)) + 0.02 * duration * 100)
    savings = _choice(rng, ("A61", "A62", "A63", "A64", "A65"), [0.603, 0.103, 0.063, 0.048, 0.183], n)
    employment = _choice(rng, ("A71", "A72", "A73", "A74", "A75"), [0.062, 0.172, 0.339, 0.174, 0.253], n)
    installment = rng.integers(1, 5, n).astype(float)
    debtors = _choice(rng, ("A101", "A102", "A103"), [0.907, 0.041, 0.052], n)
    residence = rng.integers(1, 5, n).astype(float)
    prop = _choice(rng, ("A121", "A122", "A123", "A124"), [0.282, 0.232, 0.332, 0.154], n)
    age = np.clip(np.round(rng.gamma(8.0, 4.45, n)), 19, 75)
    plans = _choice(rng, ("A141", "A142", "A143"), [0.139, 0.047, 0.814], n)
    housing = _choice(rng, ("A151", "A152", "A153"), [0.179, 0.713, 0.108], n)
    credits = rng.integers(1, 5, n).astype(float)
    job = _choice(rng, ("A171", "A172", "A173", "A174"), [0.022, 0.2, 0.63, 0.148], n)
    dependents = rng.integers(1, 3, n).astype(float)
    telephone = _choice(rng, ("A191", "A192"), [0.596, 0.404], n)
    foreign = _choice(rng, ("A201", "A202"), [0.963, 0.037], n)

    logit = (
        1.7
        - 0.9 * (checking == "A11")
        - 0.45 * (checking == "A12")
        + 0.7 * (checking == "A14")
        - 0.016 * duration
        - 0.00008 * amount
        + 0.5 * (history == "A34")
        + 0.35 * (savings == "A65")
        + 0.012 * (age - 35)
        + 0.35 * male
    )
    good = rng.random(n) < 1.0 / (1.0 + np.exp(-logit))
    label = np.where(good, "good", "bad").astype(object)

    rows = list(
        zip(
            checking, duration, history, purpose, amount, savings, employment,
            installment, sex, debtors, residence, prop, age, plans, housing,
            credits, job, dependents, telephone, foreign, label,
        )
    )
    return DataTable.build(german_schema(), rows)


# -- dataset resolution --------------------------------------------------------


def ensure_dataset_csv(name: str, data_dir: "str | Path") -> tuple[Path, str]:
    """Return (csv path, source) for a named dataset, creating a surrogate
    file when the real one is absent.

    Source is ``"real"`` for a previously fetched ``<name>.csv`` and
    ``"surrogate"`` for the generated ``surrogate_<name>.csv``.
    """
    if name not in ("adult", "german"):
        raise ValueError(f"unknown dataset {name!r}")
    data_dir = Path(data_dir)
    real = data_dir / f"{name}.csv"
    if real.exists():
        return real, "real"
    surrogate = data_dir / f"surrogate_{name}.csv"
    if not surrogate.exists():
        data_dir.mkdir(parents=True, exist_ok=True)
        table = surrogate_adult() if name == "adult" else surrogate_german()
        write_csv(table, surrogate)
    return surrogate, "surrogate"


def main(argv: "list[str] | None" = None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m fairgen.datasets",
        description="Fetch benchmark datasets or generate surrogate stand-ins.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in ("fetch", "surrogate"):
        p = sub.add_parser(cmd)
        p.add_argument("--dataset", choices=["adult", "german"], required=True)
        p.add_argument("--out", default="data", help="destination directory")
    p = sub.add_parser("schemas")
    p.add_argument("--out", default="schemas", help="destination directory")
    args = parser.parse_args(argv)

    if args.command == "schemas":
        for path in write_builtin_schemas(args.out):
            print(f"wrote {path}")
        return 0
    if args.command == "fetch":
        try:
            fetch = fetch_adult if args.dataset == "adult" else fetch_german
            path = fetch(args.out)
        except OSError as exc:
            print(
                f"download failed ({exc}); if this environment has no network "
                f"access, generate a stand-in with:\n"
                f"  python -m fairgen.datasets surrogate --dataset {args.dataset} --out {args.out}",
                file=sys.stderr,
            )
            return 1
        print(f"wrote {path}")
        return 0
    table = surrogate_adult() if args.dataset == "adult" else surrogate_german()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / f"surrogate_{args.dataset}.csv"
    write_csv(table, out)
    print(f"wrote {out} ({table.n_rows} rows)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
