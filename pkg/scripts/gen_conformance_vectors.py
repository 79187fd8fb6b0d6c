"""Regenerate conformance/evalkit_vectors.json.

Every expected value is computed twice: once with plain-Python loop
arithmetic below (the reference), once with spckit.metrics. The file is
only written if the two agree to 1e-12, so the stored vectors are anchored
independently of the vectorized implementation that tests consume.
"""

import argparse
import json
import math
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from spckit import metrics  # noqa: E402


def ref_multitask(probs, labels, preds, targets):
    total = 0.0
    for p, lab, pr, tg in zip(probs, labels, preds, targets):
        cce = -math.log(max(p[lab], 1e-12))
        reg = sum(abs(a - b) for a, b in zip(pr, tg))
        total += 10.0 * cce + 0.1 * reg
    return total / len(probs)


def ref_confidence(patches):
    num_classes = len(patches[0])
    beta = [0.0] * num_classes
    for p in patches:
        ranked = sorted(p, reverse=True)
        alpha = ranked[0] - ranked[1]
        for c in range(num_classes):
            beta[c] += alpha * p[c] / len(patches)
    winner = max(range(num_classes), key=lambda c: (beta[c], -c))
    return winner, beta


def ref_macro_f1(preds, labels, num_classes):
    scores = []
    for c in range(num_classes):
        tp = sum(1 for p, l in zip(preds, labels) if p == c and l == c)
        fp = sum(1 for p, l in zip(preds, labels) if p == c and l != c)
        fn = sum(1 for p, l in zip(preds, labels) if p != c and l == c)
        if tp + fn == 0:
            continue  # no label support: excluded
        scores.append(2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0)
    return sum(scores) / len(scores)


def random_probs(rng, n, c):
    raw = rng.random((n, c)) + 1e-3
    return raw / raw.sum(axis=1, keepdims=True)


def build():
    rng = np.random.default_rng(20240917)
    doc = {"format_version": "1", "multitask_loss": [],
           "confidence_aggregate": [], "macro_f1": [], "accuracy": [],
           "mae": []}

    # --- multitask loss: hand cases then random batches
    hand = [
        ("perfect", [[1.0, 0.0]], [0], [[0.0, 0.0, 0.0]], [[0.0, 0.0, 0.0]]),
        ("half_prob", [[0.5, 0.5]], [0], [[0.0, 0.0, 0.0]],
         [[0.0, 0.0, 0.0]]),
        ("reg_only", [[0.0, 1.0]], [1], [[10.0, 20.0, 0.5]],
         [[0.0, 0.0, 0.0]]),
        ("mixed_batch", [[0.5, 0.5], [0.0, 1.0]], [0, 1],
         [[0.0, 0.0, 0.0], [10.0, 20.0, 0.5]],
         [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
    ]
    for name, probs, labels, preds, targets in hand:
        doc["multitask_loss"].append({
            "name": name, "type_probs": probs, "type_labels": labels,
            "reg_preds": preds, "reg_targets": targets,
            "expected": ref_multitask(probs, labels, preds, targets)})
    assert abs(doc["multitask_loss"][1]["expected"] - 10.0 * math.log(2.0)) < 1e-12
    assert abs(doc["multitask_loss"][2]["expected"] - 3.05) < 1e-12
    for i, (n, c) in enumerate([(4, 7), (16, 7), (32, 4)]):
        probs = random_probs(rng, n, c).tolist()
        labels = rng.integers(0, c, n).tolist()
        preds = (rng.normal(0.0, 200.0, (n, 3))).tolist()
        targets = (rng.normal(0.0, 200.0, (n, 3))).tolist()
        doc["multitask_loss"].append({
            "name": f"random_{i}", "type_probs": probs, "type_labels": labels,
            "reg_preds": preds, "reg_targets": targets,
            "expected": ref_multitask(probs, labels, preds, targets)})

    # --- confidence aggregation
    hand = [
        ("single_patch", [[0.3, 0.45, 0.25]]),
        ("two_patch", [[0.8, 0.1, 0.1], [0.2, 0.5, 0.3]]),
        ("with_uniform", [[0.8, 0.1, 0.1], [0.2, 0.5, 0.3],
                          [1 / 3, 1 / 3, 1 / 3]]),
    ]
    for name, patches in hand:
        winner, beta = ref_confidence(patches)
        doc["confidence_aggregate"].append({
            "name": name, "patch_probs": patches,
            "expected_class": winner, "expected_beta": beta})
    two = doc["confidence_aggregate"][1]
    assert two["expected_class"] == 0
    assert max(abs(a - b) for a, b in
               zip(two["expected_beta"], [0.30, 0.085, 0.065])) < 1e-12
    for i, (n, c) in enumerate([(5, 7), (12, 3), (40, 7)]):
        patches = random_probs(rng, n, c).tolist()
        winner, beta = ref_confidence(patches)
        doc["confidence_aggregate"].append({
            "name": f"random_{i}", "patch_probs": patches,
            "expected_class": winner, "expected_beta": beta})

    # --- macro F1
    cases = [
        ("hand_07333", [0, 1, 1, 1], [0, 0, 1, 1], 2),
        ("degenerate_single_class", [0, 0, 0, 0], [0, 1, 0, 1], 2),
        ("unsupported_class_excluded", [0, 2, 1, 1], [0, 0, 1, 1], 3),
        ("perfect", [0, 1, 2, 0], [0, 1, 2, 0], 3),
    ]
    rng_f1 = np.random.default_rng(7)
    for i in range(2):
        labels = rng_f1.integers(0, 7, 60).tolist()
        preds = [l if rng_f1.random() < 0.7 else int(rng_f1.integers(0, 7))
                 for l in labels]
        cases.append((f"random_{i}", preds, labels, 7))
    for name, preds, labels, c in cases:
        doc["macro_f1"].append({
            "name": name, "preds": preds, "labels": labels, "num_classes": c,
            "expected": ref_macro_f1(preds, labels, c)})
    assert abs(doc["macro_f1"][0]["expected"] - (2 / 3 + 4 / 5) / 2) < 1e-12
    assert abs(doc["macro_f1"][1]["expected"] - 1 / 3) < 1e-12

    # --- accuracy / mae hand cases
    doc["accuracy"] = [
        {"name": "all_correct", "preds": [1, 2, 3], "labels": [1, 2, 3],
         "expected": 1.0},
        {"name": "none_correct", "preds": [0, 0], "labels": [1, 2],
         "expected": 0.0},
        {"name": "93_of_100", "preds": [0] * 93 + [1] * 7,
         "labels": [0] * 100, "expected": 0.93},
    ]
    doc["mae"] = [
        {"name": "identical", "preds": [1.0, 2.0], "targets": [1.0, 2.0],
         "expected": 0.0},
        {"name": "offset_two", "preds": [3.0, 4.0], "targets": [1.0, 2.0],
         "expected": 2.0},
        {"name": "hand_15", "preds": [1.0, 3.0], "targets": [2.0, 1.0],
         "expected": 1.5},
    ]

    # cross-check every stored value against the package implementation
    for case in doc["multitask_loss"]:
        got = metrics.multitask_loss(case["type_probs"], case["type_labels"],
                                     case["reg_preds"], case["reg_targets"])
        assert abs(got - case["expected"]) < 1e-12, case["name"]
    for case in doc["confidence_aggregate"]:
        winner, beta = metrics.confidence_aggregate(case["patch_probs"])
        assert winner == case["expected_class"], case["name"]
        assert np.abs(np.asarray(beta) -
                      case["expected_beta"]).max() < 1e-12, case["name"]
    for case in doc["macro_f1"]:
        got = metrics.macro_f1(case["preds"], case["labels"],
                               case["num_classes"])
        assert abs(got - case["expected"]) < 1e-12, case["name"]
    for case in doc["accuracy"]:
        assert abs(metrics.accuracy(case["preds"], case["labels"])
                   - case["expected"]) < 1e-12, case["name"]
    for case in doc["mae"]:
        assert abs(metrics.mae(case["preds"], case["targets"])
                   - case["expected"]) < 1e-12, case["name"]
    return doc


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(
        pathlib.Path(__file__).resolve().parents[1]
        / "conformance" / "evalkit_vectors.json"))
    args = parser.parse_args()
    doc = build()
    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
