"""Baseline downstream classifier: L2 logistic regression by gradient descent.

Trained on synthetic data, evaluated on the untouched real test split.
Protected columns never enter the feature matrix. The implementation is
deliberately plain, full-batch gradient descent from zero initialization,
so its numerics can be audited against finite differences and its loss curve
checked for monotone descent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .base import BaseEstimator, check_is_fitted
from .encoding import TableEncoder
from .errors import SchemaMismatch, SingleClassTraining
from .tabular import DataTable, Schema


@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray
    bias: float
    scaling: Mapping[str, tuple[float, float]]
    threshold: float
    schema: Schema
    loss_curve: tuple[float, ...] = field(default=(), compare=False)

    def to_json_dict(self) -> dict:
        return {
            "weights": [float(w) for w in self.weights],
            "bias": float(self.bias),
            "scaling": {k: [float(a), float(b)] for k, (a, b) in sorted(self.scaling.items())},
            "threshold": float(self.threshold),
            "schema": self.schema.to_json_dict(),
        }

    def save(self, path: "str | Path") -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def loss_and_grad(
    weights: np.ndarray, bias: float, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray, float]:
    """Mean cross-entropy + (l2/2)·||w||², with its exact gradient.

    Uses log(1 + e^z) via logaddexp so the loss stays finite for saturated
    logits. The bias is not regularized.
    """
    z = X @ weights + bias
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * np.dot(weights, weights))
    residual = sigmoid(z) - y
    grad_w = X.T @ residual / X.shape[0] + l2 * weights
    grad_b = float(residual.mean())
    return loss, grad_w, grad_b


def _auto_learning_rate(X: np.ndarray, l2: float) -> float:
    """1 / L for the logistic loss smoothness bound L = 0.25·λmax(X̃ᵀX̃)/n + l2.

    X̃ appends the all-ones bias column; λmax comes from an exact eigh of the
    (d+1)×(d+1) Gram matrix, cheap for our encodings. Gradient descent at this
    rate has mathematically non-increasing loss.
    """
    n = X.shape[0]
    xt = np.hstack([X, np.ones((n, 1))])
    gram = xt.T @ xt / n
    lam_max = float(np.linalg.eigvalsh(gram)[-1])
    return 1.0 / (0.25 * lam_max + l2)


def train(
    table: DataTable,
    l2: float = 1e-3,
    epochs: int = 300,
    lr: "float | None" = None,
    threshold: float = 0.5,
    seed: int = 0,
) -> LogisticModel:
    """Fit by full-batch gradient descent from zero initialization.

    ``lr=None`` selects the data-derived safe rate (see _auto_learning_rate).
    The recorded loss curve has epochs+1 entries: the loss before training and
    after each step. ``seed`` is accepted for config uniformity; zero
    initialization makes the procedure deterministic without it.
    """
    del seed
    encoder = TableEncoder(include_protected=False, include_label=False).fit(table)
    X = encoder.transform(table).values
    favourable = table.schema.favourable_label
    y = np.asarray([1.0 if v == favourable else 0.0 for v in table.labels()])
    if y.min() == y.max():
        raise SingleClassTraining("training labels contain a single class")

    if lr is None:
        lr = _auto_learning_rate(X, l2)
    w = np.zeros(X.shape[1])
    b = 0.0
    curve = []
    for _ in range(epochs):
        loss, grad_w, grad_b = loss_and_grad(w, b, X, y, l2)
        curve.append(loss)
        w = w - lr * grad_w
        b = b - lr * grad_b
    final_loss, _, _ = loss_and_grad(w, b, X, y, l2)
    curve.append(final_loss)

    return LogisticModel(
        weights=w,
        bias=float(b),
        scaling=dict(encoder.scaling_),
        threshold=threshold,
        schema=table.schema,
        loss_curve=tuple(curve),
    )


def predict(model: LogisticModel, table: DataTable) -> list[dict]:
    """Per-row probability and hard label on any table sharing the schema.

    Numeric cells are scaled with the *training* scaling record, so values
    can fall outside [0, 1]. The favourable label is predicted when the
    probability reaches the threshold (boundary inclusive).
    """
    if table.schema != model.schema:
        raise SchemaMismatch("table schema differs from the model's training schema")
    encoder = TableEncoder.from_scaling(model.schema, model.scaling)
    X = encoder.transform(table).values
    probs = sigmoid(X @ model.weights + model.bias)
    favourable = model.schema.favourable_label
    label_spec = model.schema.column(model.schema.label_column)
    unfavourable = next(c for c in label_spec.categories if c != favourable)
    return [
        {"probability": float(p), "label": favourable if p >= model.threshold else unfavourable}
        for p in probs
    ]


class LogisticRegressionClassifier(BaseEstimator):
    """Estimator facade over :func:`train` / :func:`predict`."""

    def __init__(
        self,
        l2: float = 1e-3,
        epochs: int = 300,
        lr: "float | None" = None,
        threshold: float = 0.5,
        seed: int = 0,
    ):
        self.l2 = l2
        self.epochs = epochs
        self.lr = lr
        self.threshold = threshold
        self.seed = seed
        self.model_: LogisticModel | None = None

    def fit(self, table: DataTable) -> "LogisticRegressionClassifier":
        self.model_ = train(
            table, l2=self.l2, epochs=self.epochs, lr=self.lr,
            threshold=self.threshold, seed=self.seed,
        )
        return self

    def predict(self, table: DataTable) -> list[str]:
        check_is_fitted(self, "model_")
        return [p["label"] for p in predict(self.model_, table)]

    def predict_proba(self, table: DataTable) -> list[float]:
        check_is_fitted(self, "model_")
        return [p["probability"] for p in predict(self.model_, table)]


#: Downstream classifiers are pluggable so alternates can register here
#: and be selected by name in run configs.
CLASSIFIER_REGISTRY: dict[str, type] = {"logistic": LogisticRegressionClassifier}


def register_classifier(name: str, cls: type) -> None:
    CLASSIFIER_REGISTRY[name] = cls


def make_classifier(config: Mapping) -> BaseEstimator:
    params = dict(config)
    name = params.pop("name", "logistic")
    if name not in CLASSIFIER_REGISTRY:
        raise KeyError(f"unknown classifier {name!r}; registered: {sorted(CLASSIFIER_REGISTRY)}")
    return CLASSIFIER_REGISTRY[name](**params)
