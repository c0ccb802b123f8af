"""Smoke test for the pydxeval extension module.

Build and install with `pip install --no-build-isolation ./crates/python`
(needs maturin), or point PYTHONPATH at a directory holding the built
`pydxeval.so`.
"""

import math
import pathlib
import tempfile

import pydxeval as dx


def main():
    scores = [0.9, 0.4, 0.5, 0.1]
    labels = [1, 1, 0, 0]
    assert dx.roc_auc(scores, labels) == 0.75
    auc, var = dx.delong_variance(scores, labels)
    assert auc == 0.75 and math.isclose(var, 0.125)
    assert math.isclose(dx.average_precision(scores, labels), (1.0 + 2.0 / 3.0) / 2.0)

    m = dx.metrics_from(2, 12, 678, 27)
    assert f"{m['sensitivity']:.2f}" == "0.07"
    assert f"{m['specificity']:.3f}" == "0.983"
    assert f"{m['ppv']:.3f}" == "0.143"
    assert dx.metrics_from(0, 0, 10, 3)["ppv"] is None

    sweep = dx.threshold_sweep(scores, labels, [0.0, 0.5, 1.0])
    assert sweep[0]["counts"]["tp"] == 2 and sweep[0]["counts"]["fp"] == 2

    a = dx.bootstrap_auc(scores * 10, labels * 10, replicates=200, seed=7, workers=1)
    b = dx.bootstrap_auc(scores * 10, labels * 10, replicates=200, seed=7, workers=4)
    assert a == b and a["lo"] <= a["point"] <= a["hi"]

    cohort = dx.generate_clinical(5000, seed=3)
    fit = dx.fit_logistic(cohort)
    assert fit.converged and len(fit.coefficients) == 3
    scored = cohort.with_baseline_scores(fit, "who_siri")
    s, y = scored.scores("who_siri")
    assert 0.5 < dx.roc_auc(s, [int(v) for v in y]) <= 1.0

    cal = dx.generate_calibrated(20000, seed=1)
    s, y = cal.scores("score")
    assert dx.expected_calibration_error(s, [int(v) for v in y]) < 0.03

    curve = dx.dca_curve(s, [int(v) for v in y], replicates=100)
    assert len(curve["thresholds"]) == 50 and len(curve["bands"]) == 50

    try:
        dx.roc_auc([0.1, 0.2], [1, 1])
    except dx.DegenerateError:
        pass
    else:
        raise AssertionError("single-class input should raise")

    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        dx.generate_binormal(30, 60, seed=5).write_csv(str(tmp / "c.csv"))
        (tmp / "run.toml").write_text(
            '[input]\npath = "c.csv"\nscores = ["score"]\n[bootstrap]\nreplicates = 200\n'
        )
        summary = dx.run_comparison(str(tmp / "run.toml"), str(tmp / "out"))
        assert summary["schema_version"] == 1
        assert (tmp / "out" / "summary.json").exists()

    print("pydxeval smoke test passed")


if __name__ == "__main__":
    main()
