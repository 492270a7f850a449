from __future__ import annotations

import numpy as np
import pytest

from fairgen.classifier import (
    LogisticRegressionClassifier,
    loss_and_grad,
    make_classifier,
    predict,
    sigmoid,
    train,
)
from fairgen.encoding import TableEncoder
from fairgen.errors import SchemaMismatch, SingleClassTraining
from fairgen.tabular import (
    CATEGORICAL,
    NUMERIC,
    ROLE_LABEL,
    ROLE_PROTECTED,
    ColumnSpec,
    DataTable,
    Schema,
)

from .conftest import make_table


def separable_table():
    # Two clusters split cleanly by x1: (0..3) labelled no, (10..13) labelled
    # yes; verified separable by construction.
    rows = [(float(i), "male" if i % 2 else "female", "no") for i in range(4)]
    rows += [(float(10 + i), "male" if i % 2 else "female", "yes") for i in range(4)]
    return make_table(rows)


def finite_difference_grad(w, b, X, y, l2, h=1e-6):
    grad_w = np.zeros_like(w)
    for i in range(len(w)):
        up, down = w.copy(), w.copy()
        up[i] += h
        down[i] -= h
        grad_w[i] = (loss_and_grad(up, b, X, y, l2)[0] - loss_and_grad(down, b, X, y, l2)[0]) / (2 * h)
    grad_b = (loss_and_grad(w, b + h, X, y, l2)[0] - loss_and_grad(w, b - h, X, y, l2)[0]) / (2 * h)
    return grad_w, grad_b


class TestTraining:
    def test_separable_data_reaches_perfect_training_accuracy(self):
        table = separable_table()
        model = train(table, l2=0.0, epochs=4000)
        labels = [p["label"] for p in predict(model, table)]
        assert labels == list(table.labels())

    def test_zero_initialized_model_predicts_half(self):
        table = separable_table()
        model = train(table, epochs=0)
        for p in predict(model, table):
            assert p["probability"] == pytest.approx(0.5)
            assert p["label"] == "yes"  # boundary convention: p >= threshold

    def test_single_class_training_rejected(self):
        table = make_table([(1, "male", "yes"), (2, "female", "yes")])
        with pytest.raises(SingleClassTraining):
            train(table)

    def test_loss_curve_monotone_at_auto_rate(self):
        rng = np.random.default_rng(0)
        rows = [(float(rng.normal()), str(rng.choice(["male", "female"])),
                 str(rng.choice(["yes", "no"]))) for _ in range(300)]
        model = train(make_table(rows), epochs=500)
        curve = model.loss_curve
        assert len(curve) == 501
        assert all(curve[i + 1] <= curve[i] + 1e-12 for i in range(len(curve) - 1))

    def test_protected_column_not_in_features(self):
        table = separable_table()
        model = train(table, epochs=10)
        assert len(model.weights) == 1  # only x1 (age); sex and label excluded


class TestGradient:
    def test_matches_central_finite_differences_on_random_points(self):
        rng = np.random.default_rng(7)
        rows = [(float(rng.uniform(-2, 2)), str(rng.choice(["male", "female"])),
                 str(rng.choice(["yes", "no"]))) for _ in range(60)]
        table = make_table(rows)
        X = TableEncoder().fit_transform(table).values
        y = np.asarray([1.0 if v == "yes" else 0.0 for v in table.labels()])
        for _ in range(12):
            w = rng.normal(size=X.shape[1])
            b = float(rng.normal())
            l2 = float(rng.uniform(0, 0.5))
            _, grad_w, grad_b = loss_and_grad(w, b, X, y, l2)
            fd_w, fd_b = finite_difference_grad(w, b, X, y, l2)
            denom = max(np.linalg.norm(np.append(fd_w, fd_b)), 1e-12)
            rel = np.linalg.norm(np.append(grad_w - fd_w, grad_b - fd_b)) / denom
            assert rel < 1e-5


class TestPredict:
    def test_saturated_bias_pushes_probability_to_one(self):
        table = separable_table()
        model = train(table, epochs=0)
        saturated = type(model)(
            weights=model.weights,
            bias=100.0,
            scaling=model.scaling,
            threshold=model.threshold,
            schema=model.schema,
        )
        assert all(p["probability"] > 0.999 for p in predict(saturated, table))

    def test_row_order_invariance(self):
        rng = np.random.default_rng(3)
        rows = [(float(rng.normal()), str(rng.choice(["male", "female"])),
                 str(rng.choice(["yes", "no"]))) for _ in range(50)]
        table = make_table(rows)
        model = train(table, epochs=50)
        probs = {rid: p["probability"] for rid, p in zip(table.row_ids, predict(model, table))}
        perm = rng.permutation(table.n_rows)
        shuffled = DataTable(table.schema, tuple(table.rows[i] for i in perm),
                             tuple(table.row_ids[i] for i in perm))
        probs2 = {rid: p["probability"] for rid, p in zip(shuffled.row_ids, predict(model, shuffled))}
        assert probs == probs2

    def test_schema_mismatch_rejected(self):
        model = train(separable_table(), epochs=5)
        other_schema = Schema(
            columns=(
                ColumnSpec("z", NUMERIC),
                ColumnSpec("y", CATEGORICAL, ROLE_LABEL, ("no", "yes")),
            ),
            label_column="y",
            favourable_label="yes",
        )
        other = DataTable.build(other_schema, [(1.0, "no")])
        with pytest.raises(SchemaMismatch):
            predict(model, other)

    def test_scaling_comes_from_training_table(self):
        train_table = make_table([(0.0, "male", "yes"), (10.0, "female", "no")])
        model = train(train_table, epochs=5)
        test = make_table([(20.0, "male", "yes"), (1.0, "female", "no")])
        out = predict(model, test)  # out-of-range values allowed, no error
        assert len(out) == 2

    def test_sigmoid_is_stable_at_extremes(self):
        z = np.array([-1000.0, 0.0, 1000.0])
        s = sigmoid(z)
        assert s[0] == 0.0 and s[1] == 0.5 and s[2] == 1.0


class TestRegistry:
    def test_make_classifier_by_name(self):
        clf = make_classifier({"name": "logistic", "epochs": 7})
        assert isinstance(clf, LogisticRegressionClassifier)
        assert clf.epochs == 7

    def test_unknown_name_rejected(self):
        with pytest.raises(KeyError):
            make_classifier({"name": "deep-net"})

    def test_model_json_round_trip(self, tmp_path):
        model = train(separable_table(), epochs=5)
        path = tmp_path / "model.json"
        model.save(path)
        import json

        doc = json.loads(path.read_text())
        assert set(doc) == {"weights", "bias", "scaling", "threshold", "schema"}
