"""Metric correctness against the frozen conformance vectors plus the
algebraic properties the aggregation rules must satisfy."""

import json
import pathlib

import numpy as np
import pytest

from spckit.metrics import (
    accuracy,
    confidence_aggregate,
    confusion_matrix,
    macro_f1,
    mae,
    multitask_loss,
    validate_probs,
    write_confusion_csv,
    write_metrics_json,
)

VECTORS = pathlib.Path(__file__).resolve().parents[1] / "conformance" / "evalkit_vectors.json"


@pytest.fixture(scope="module")
def vectors():
    with open(VECTORS, encoding="utf-8") as fh:
        return json.load(fh)


def test_conformance_multitask_loss(vectors):
    for case in vectors["multitask_loss"]:
        got = multitask_loss(case["type_probs"], case["type_labels"],
                             case["reg_preds"], case["reg_targets"])
        assert got == pytest.approx(case["expected"], abs=1e-9), case["name"]


def test_conformance_confidence_aggregate(vectors):
    for case in vectors["confidence_aggregate"]:
        winner, beta = confidence_aggregate(case["patch_probs"])
        assert winner == case["expected_class"], case["name"]
        assert np.allclose(beta, case["expected_beta"], atol=1e-9), case["name"]


def test_conformance_macro_f1(vectors):
    for case in vectors["macro_f1"]:
        got = macro_f1(case["preds"], case["labels"], case["num_classes"])
        assert got == pytest.approx(case["expected"], abs=1e-9), case["name"]


def test_conformance_accuracy_and_mae(vectors):
    for case in vectors["accuracy"]:
        assert accuracy(case["preds"], case["labels"]) == pytest.approx(
            case["expected"], abs=1e-12), case["name"]
    for case in vectors["mae"]:
        assert mae(case["preds"], case["targets"]) == pytest.approx(
            case["expected"], abs=1e-12), case["name"]


def test_multitask_loss_zero_iff_perfect():
    assert multitask_loss([1.0, 0.0], 0, [1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
    assert multitask_loss([0.999, 0.001], 0, [0.0] * 3, [0.0] * 3) > 0.0
    assert multitask_loss([1.0, 0.0], 0, [0.1, 0.0, 0.0], [0.0] * 3) > 0.0


def test_multitask_loss_clamps_zero_probability():
    got = multitask_loss([0.0, 1.0], 0, [0.0] * 3, [0.0] * 3)
    assert got == pytest.approx(10.0 * -np.log(1e-12), rel=1e-9)


def test_multitask_loss_batch_is_mean_of_samples():
    rng = np.random.default_rng(2)
    probs = rng.random((6, 4)) + 0.01
    probs /= probs.sum(axis=1, keepdims=True)
    labels = rng.integers(0, 4, 6)
    preds = rng.normal(size=(6, 3))
    targets = rng.normal(size=(6, 3))
    singles = [multitask_loss(probs[i], labels[i], preds[i], targets[i])
               for i in range(6)]
    batch = multitask_loss(probs, labels, preds, targets)
    assert batch == pytest.approx(np.mean(singles), rel=1e-12)


def test_multitask_loss_shape_and_range_errors():
    with pytest.raises(ValueError):
        multitask_loss([0.5, 0.5], 2, [0.0] * 3, [0.0] * 3)
    with pytest.raises(ValueError):
        multitask_loss([0.5, 0.5], 0, [0.0] * 2, [0.0] * 2)


def test_validate_probs_rejections():
    with pytest.raises(ValueError):
        validate_probs([1.0])
    with pytest.raises(ValueError):
        validate_probs([0.7, 0.2])
    with pytest.raises(ValueError):
        validate_probs([1.2, -0.2])
    with pytest.raises(ValueError):
        validate_probs(np.full((2, 2, 2), 0.5))
    out = validate_probs([[0.25, 0.75], [0.5, 0.5]])
    assert out.dtype == np.float64


def test_accuracy_and_mae_input_errors():
    with pytest.raises(ValueError):
        accuracy([], [])
    with pytest.raises(ValueError):
        mae([1.0], [1.0, 2.0])


def test_mae_triangle_bound():
    rng = np.random.default_rng(4)
    for _ in range(50):
        a, b, c = rng.normal(size=(3, 20))
        assert mae(a, c) <= mae(a, b) + mae(b, c) + 1e-12


def test_macro_f1_permutation_and_relabel_invariance():
    rng = np.random.default_rng(9)
    labels = rng.integers(0, 5, 80)
    preds = np.where(rng.random(80) < 0.6, labels, rng.integers(0, 5, 80))
    base = macro_f1(preds, labels, 5)
    for _ in range(5):
        order = rng.permutation(80)
        assert macro_f1(preds[order], labels[order], 5) == pytest.approx(base)
    relabel = rng.permutation(5)
    assert macro_f1(relabel[preds], relabel[labels], 5) == pytest.approx(base)


def test_macro_f1_excludes_unsupported_classes():
    # class 2 never appears in labels: only classes 0 and 1 are averaged
    assert macro_f1([0, 2, 1, 1], [0, 0, 1, 1], 3) == pytest.approx(
        (2.0 / 3.0 + 1.0) / 2.0)
    # same predictions scored with the class present
    assert macro_f1([0, 2, 1, 1, 2], [0, 0, 1, 1, 2], 3) == pytest.approx(
        (2.0 / 3.0 + 1.0 + 2.0 / 3.0) / 3.0)


def test_confusion_matrix_layout():
    counts = confusion_matrix(preds=[0, 1, 1, 1], labels=[0, 0, 1, 1],
                              num_classes=2)
    assert counts.tolist() == [[1, 1], [0, 2]]
    with pytest.raises(ValueError):
        confusion_matrix([0, 3], [0, 1], num_classes=2)


def test_confidence_uniform_patch_invariance():
    rng = np.random.default_rng(13)
    for _ in range(200):
        n, c = int(rng.integers(1, 9)), int(rng.integers(2, 8))
        probs = rng.random((n, c)) + 1e-3
        probs /= probs.sum(axis=1, keepdims=True)
        winner, _ = confidence_aggregate(probs)
        padded = np.vstack([probs, np.full((1, c), 1.0 / c)])
        winner_padded, _ = confidence_aggregate(padded)
        assert winner_padded == winner


def test_confidence_duplication_invariance():
    probs = [[0.8, 0.1, 0.1], [0.2, 0.5, 0.3]]
    winner, beta = confidence_aggregate(probs)
    winner2, beta2 = confidence_aggregate(probs + probs)
    assert winner2 == winner
    assert np.allclose(beta2, beta)


def test_confidence_ties_break_to_lowest_index():
    winner, beta = confidence_aggregate([[0.4, 0.4, 0.2]])
    assert np.allclose(beta, 0.0)
    assert winner == 0
    winner, beta = confidence_aggregate([[0.6, 0.4], [0.4, 0.6]])
    assert beta[0] == pytest.approx(beta[1])
    assert winner == 0


def test_report_writers(tmp_path):
    metrics_path = tmp_path / "metrics.json"
    write_metrics_json(metrics_path, {"accuracy": np.float64(0.93),
                                      "count": np.int64(700)})
    doc = json.loads(metrics_path.read_text())
    assert doc == {"accuracy": 0.93, "count": 700}

    csv_path = tmp_path / "confusion.csv"
    counts = confusion_matrix([0, 1, 1, 1], [0, 0, 1, 1], 2)
    write_confusion_csv(csv_path, counts, ["stable", "vibrato"])
    lines = csv_path.read_text().splitlines()
    assert lines == ["label,stable,vibrato", "stable,1,1", "vibrato,0,2"]
    with pytest.raises(ValueError):
        write_confusion_csv(csv_path, counts, ["only_one"])
