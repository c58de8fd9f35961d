"""End-to-end smoke test of the cashtag Python module."""

import json
import math

import cashtag


def main():
    data = cashtag.generate(n=3000, seed=1)
    assert len(data) == 3000
    train, tune, test = data.split(seed=2)
    assert len(train) + len(tune) + len(test) == len(data)

    gold = test.labels()
    simple = cashtag.heuristic_filter(test, "simple")
    extended = cashtag.heuristic_filter(test, "extended")
    assert len(simple) == len(test)

    model = cashtag.Classifier.train(train, tune, variant="combined", kind="svm", seed=3)
    labels, scores = model.classify(test)
    report = cashtag.evaluate(labels, gold, scores)
    assert report["tp"] + report["fp"] + report["tn"] + report["fn"] == len(test)
    assert report["auc"] is not None and 0.0 <= report["auc"] <= 1.0

    restored = cashtag.Classifier.from_json(model.to_json())
    assert restored.classify(test) == (labels, scores)
    assert len(model.weights()) == len(model.feature_names())

    q, p, dof = cashtag.cochran_q([labels, simple, extended], gold)
    assert dof == 2 and 0.0 <= p <= 1.0
    assert abs(cashtag.chi2_sf(3.841, 1) - 0.05) < 5e-4

    try:
        cashtag.mcnemar(simple, simple, gold)
    except cashtag.CashtagError as e:
        assert "NoDisagreement" in str(e)
    else:
        raise AssertionError("identical predictions must not be comparable")

    record = json.loads(test.to_jsonl().splitlines()[0])
    label, score = model.classify_record(json.dumps(record))
    assert label in ("company", "cryptocurrency") and math.isfinite(score)
    assert cashtag.extract_cashtags("buy $NXT and $sky") == ["NXT", "SKY"]

    for name, preds in [("simple", simple), ("extended", extended), ("combined", labels)]:
        r = cashtag.evaluate(preds, gold)
        print(f"{name:>9}: F={r['f_score']:.3f} precision={r['precision']:.3f} recall={r['recall']:.3f}")
    print(f"Cochran's Q={q:.2f} p={p:.3g}")
    print("smoke test passed")


if __name__ == "__main__":
    main()
