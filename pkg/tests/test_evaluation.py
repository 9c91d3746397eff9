import csv
import io
import math
from dataclasses import replace

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hrt.config import HrtConfig
from hrt.datasets import SyntheticSpec, generate, to_csv
from hrt.errors import InvalidLabels, LengthMismatch, SingleClass, ZeroVariance
from hrt.evaluation import (
    ROW_FIELDS,
    AblationRow,
    CsvSource,
    ExperimentSpec,
    ablate,
    auc_score,
    classification_metrics,
    fallback_rate,
    format_table,
    regression_metrics,
    rows_to_csv,
    run_experiment,
)
from hrt.tree import fit


def pair_auc(prob, label):
    """Wins plus half ties over every positive/negative pair."""
    pos = [p for p, l in zip(prob, label) if l == 1]
    neg = [p for p, l in zip(prob, label) if l == 0]
    score = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in pos for b in neg)
    return score / (len(pos) * len(neg))


def mp_metrics(pred, truth):
    with mpmath.workdps(40):
        e = [mpmath.mpf(t) - mpmath.mpf(p) for p, t in zip(pred, truth)]
        n = len(e)
        mean = mpmath.fsum(mpmath.mpf(t) for t in truth) / n
        sse = mpmath.fsum(v * v for v in e)
        sst = mpmath.fsum((mpmath.mpf(t) - mean) ** 2 for t in truth)
        return float(mpmath.sqrt(sse / n)), float(mpmath.fsum(abs(v) for v in e) / n), float(1 - sse / sst)


def test_regression_metrics_examples():
    m = regression_metrics([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert (m.rmse, m.mae, m.r2) == (0.0, 0.0, 1.0)
    m = regression_metrics([0.0, 0.0], [3.0, 4.0])
    assert m.rmse == pytest.approx(math.sqrt(12.5), rel=1e-15)
    assert m.mae == 3.5


def test_regression_metrics_match_extended_precision():
    rng = np.random.default_rng(2)
    pred, truth = rng.normal(size=50), rng.normal(size=50)
    m = regression_metrics(pred, truth)
    np.testing.assert_allclose([m.rmse, m.mae, m.r2], mp_metrics(pred, truth), rtol=1e-12)


def test_regression_metrics_errors():
    with pytest.raises(ZeroVariance):
        regression_metrics([1.0, 2.0], [3.0, 3.0])
    with pytest.raises(LengthMismatch):
        regression_metrics([1.0], [1.0, 2.0])
    with pytest.raises(LengthMismatch):
        regression_metrics([], [])


def test_auc_examples():
    assert auc_score([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auc_score([0.5] * 6, [0, 1] * 3) == 0.5
    with pytest.raises(SingleClass):
        auc_score([0.1, 0.2], [1, 1])


def test_auc_matches_pair_oracle_with_ties():
    rng = np.random.default_rng(4)
    prob = rng.integers(0, 5, size=20) / 4.0
    label = np.r_[np.ones(8), np.zeros(12)].astype(int)
    rng.shuffle(label)
    assert auc_score(prob, label) == pytest.approx(pair_auc(prob, label), abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 40))
def test_auc_oracle_and_monotone_invariance(seed, n):
    rng = np.random.default_rng(seed)
    label = rng.integers(0, 2, size=n)
    label[0], label[1] = 0, 1
    prob = rng.integers(0, 6, size=n) / 5.0
    a = auc_score(prob, label)
    assert a == pytest.approx(pair_auc(prob, label), abs=1e-12)
    assert auc_score(np.exp(3 * prob) - 7, label) == pytest.approx(a, abs=1e-12)


def test_classification_metrics_threshold_inclusive():
    m = classification_metrics([0.5, 0.49, 0.9, 0.1], [1, 1, 0, 0])
    # guesses 1, 0, 1, 0: tp=1 fp=1 fn=1
    assert m.accuracy == 0.5
    assert m.f1 == 0.5
    assert m.auc == 0.5
    with pytest.raises(InvalidLabels):
        classification_metrics([0.1, 0.2], [0, 2])


def test_fallback_rate_identity():
    assert fallback_rate(0.0, 0.0) == 0.0
    assert fallback_rate(1.5, 6.0) == 25.0


SMALL = HrtConfig(max_depth=3, min_samples=10, ridge_alpha=0.001)


def test_experiment_single_rep_has_zero_std():
    s = run_experiment(ExperimentSpec(SyntheticSpec("sinc", 200, 0.025), SMALL, repetitions=1))
    assert (s.std.rmse, s.std.mae, s.std.r2) == (0.0, 0.0, 0.0)
    assert len(s.repetitions) == 1


def test_experiment_is_deterministic_and_counters_consistent():
    spec = ExperimentSpec(SyntheticSpec("f3", 300, 0.05), SMALL, repetitions=4, seed=5)
    a, b = run_experiment(spec), run_experiment(spec)
    assert a.mean == b.mean and a.std == b.std
    assert replace(a.row, fit_seconds=0.0) == replace(b.row, fit_seconds=0.0)
    reps = a.repetitions
    assert len({r.seed for r in reps}) == 4
    fb = np.mean([r.n_fallbacks for r in reps])
    sp = np.mean([r.n_splits for r in reps])
    assert a.row.fallback_rate_pct == (100.0 * fb / sp if sp else 0.0)
    assert a.mean.rmse == pytest.approx(np.mean([r.metrics.rmse for r in reps]), rel=1e-15)
    assert a.std.rmse == pytest.approx(np.std([r.metrics.rmse for r in reps], ddof=1), rel=1e-12)


def test_experiment_parallel_matches_serial():
    spec = ExperimentSpec(SyntheticSpec("sinc", 200, 0.025), SMALL, repetitions=2)
    a, b = run_experiment(spec), run_experiment(spec, jobs=2)
    assert a.mean == b.mean


def test_experiment_from_csv(tmp_path):
    path = tmp_path / "d.csv"
    to_csv(generate(SyntheticSpec("f4", 300, 0.05, 1)), path)
    s = run_experiment(ExperimentSpec(CsvSource(str(path), "y"), SMALL, repetitions=3))
    assert len({r.metrics.rmse for r in s.repetitions}) == 3
    assert s.mean.rmse > 0


def test_training_r2_beats_mean_predictor():
    for seed in range(3):
        data = generate(SyntheticSpec("f1", 300, 0.05, seed))
        model = fit(data, HrtConfig(max_depth=3))
        assert regression_metrics(model.predict(data.features), data.y).r2 >= 0.0


def test_ablation_rows_follow_labels_and_identity():
    rows = ablate(SyntheticSpec("sinc", 200, 0.025), ["0.5", "auto", "0.5"], SMALL, repetitions=2)
    assert [r.step_label for r in rows] == ["0.5", "auto", "0.5"]
    assert replace(rows[0], fit_seconds=0.0) == replace(rows[2], fit_seconds=0.0)
    for r in rows:
        assert r.fallback_rate_pct == fallback_rate(r.avg_fallbacks, r.avg_splits)
    with pytest.raises(ValueError):
        ablate(SyntheticSpec("sinc", 200), [], SMALL)


def test_auto_rarely_falls_back_on_smooth_surface():
    rows = ablate(SyntheticSpec("f3", 1000, 0.05), ["auto"], replace(SMALL, max_depth=4), repetitions=10)
    assert rows[0].avg_splits > 0
    assert rows[0].fallback_rate_pct <= 5.0


def test_rows_to_csv_and_table():
    rows = [AblationRow("0.01", 0.028, 27.0, 2.5, 0.05, 0.1, 26.0, 0.3846153846)]
    parsed = list(csv.reader(io.StringIO(rows_to_csv(rows))))
    assert parsed[0] == ROW_FIELDS
    assert parsed[1][0] == "0.01" and float(parsed[1][-1]) == pytest.approx(0.384615)
    table = format_table(rows).splitlines()
    assert len(table) == 2
    assert table[0].split() == ROW_FIELDS
    assert format_table([]).split() == ROW_FIELDS
