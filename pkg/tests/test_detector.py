import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from loginstruct.detector import (
    DecisionThreshold,
    DetectionResult,
    Verdict,
    aggregate_sequence,
    candidate_thresholds,
    detect,
    detect_scores,
    normality_score,
    select_threshold,
)
from loginstruct.metrics import compute_metrics


def exhaustive_threshold(scores, labels, criterion="f1"):
    """Try every midpoint and both sentinels, scoring each with compute_metrics."""
    distinct = sorted(set(float(s) for s in scores))
    cands = [distinct[0] / 2] + [(a + b) / 2 for a, b in zip(distinct, distinct[1:])] + [distinct[-1] * 2]
    best_t, best_v = None, -1.0
    for t in cands:
        pred = [int(s < t) for s in scores]
        v = getattr(compute_metrics(pred, labels), criterion)
        if v > best_v + 1e-12:
            best_t, best_v = t, v
    return best_t, best_v


def test_score_examples():
    assert normality_score([2.0, 0.0]) == pytest.approx(0.25, abs=1e-12)
    assert normality_score([0.0, 0.0]) == pytest.approx(1e12)
    assert normality_score([0.5, 0.5]) == pytest.approx(2.0)
    batch = normality_score(np.array([[2.0, 0.0], [0.5, 0.5]]))
    assert batch.shape == (2,)


@given(st.floats(0, 1e3), st.floats(0, 1e3))
def test_score_decreasing_in_norm(a, b):
    if a < b:
        assert normality_score([a]) > normality_score([b]) or normality_score([a]) == normality_score([b]) == 1e12


def test_threshold_separated_pair():
    thr = select_threshold([0.1, 0.9], [1, 0])
    assert thr.a_tilde == pytest.approx(0.5)
    assert thr.value == 1.0


def test_threshold_all_equal_scores():
    cands = candidate_thresholds([0.3, 0.3, 0.3])
    assert cands.tolist() == [0.15, 0.6]
    # flagging everything is the only way to get a nonzero F1 here
    assert select_threshold([0.3, 0.3, 0.3], [0, 1, 0]).a_tilde == pytest.approx(0.6)


def test_threshold_errors():
    with pytest.raises(ValueError):
        select_threshold([0.1, 0.2], [1, 1])
    with pytest.raises(ValueError):
        select_threshold([0.1, 0.2], [1, 0], criterion="accuracy")
    with pytest.raises(ValueError):
        DecisionThreshold(0.0)


@pytest.mark.parametrize("criterion", ["f1", "precision", "recall"])
def test_threshold_fifty_point_fixture(criterion):
    rng = np.random.default_rng(42)
    labels = (rng.random(50) < 0.3).astype(int)
    scores = np.where(labels == 1, rng.gamma(2.0, 0.5, 50), rng.gamma(6.0, 0.5, 50)).round(2) + 0.01
    thr = select_threshold(scores, labels, criterion)
    t, v = exhaustive_threshold(scores, labels, criterion)
    assert thr.a_tilde == t
    assert thr.value == pytest.approx(v, abs=1e-12)


def test_threshold_beats_every_candidate():
    rng = np.random.default_rng(1)
    scores = rng.random(80) + 0.01
    labels = (rng.random(80) < 0.4).astype(int)
    thr = select_threshold(scores, labels)
    for t in candidate_thresholds(scores):
        assert compute_metrics((scores < t).astype(int), labels).f1 <= thr.value + 1e-12


def test_detect_boundaries():
    thr = DecisionThreshold(0.5)
    assert detect([2.0], thr).verdict is Verdict.ANOMALOUS  # score 0.25
    assert detect([1 / np.sqrt(0.9)], thr).verdict is Verdict.NORMAL  # score 0.9
    assert detect_scores([0.25, 0.9, 0.5], thr).tolist() == [True, False, False]


@given(st.lists(st.floats(0.01, 100), min_size=1, max_size=30), st.floats(0.01, 50), st.floats(0.01, 50))
def test_raising_threshold_never_clears_anomalies(scores, a, b):
    lo, hi = sorted((a, b))
    flags_lo = detect_scores(scores, DecisionThreshold(lo))
    flags_hi = detect_scores(scores, DecisionThreshold(hi))
    assert not np.any(flags_lo & ~flags_hi)


def test_aggregate_examples():
    n, a = Verdict.NORMAL, Verdict.ANOMALOUS
    assert aggregate_sequence([n, n, a]) is a
    assert aggregate_sequence([n, n]) is n
    assert aggregate_sequence([DetectionResult(3.0, n), DetectionResult(0.1, a)]) is a
    with pytest.raises(ValueError):
        aggregate_sequence([])


def test_aggregate_thousand_or_fold():
    rng = np.random.default_rng(7)
    for _ in range(20):
        flags = rng.random(1000) < 0.001
        expected = Verdict.ANOMALOUS if any(flags.tolist()) else Verdict.NORMAL
        assert aggregate_sequence(flags) is expected


@given(st.lists(st.booleans(), min_size=1, max_size=10), st.lists(st.booleans(), min_size=1, max_size=10))
def test_aggregate_concatenation(xs, ys):
    whole = aggregate_sequence(xs + ys)
    assert whole is aggregate_sequence([aggregate_sequence(xs), aggregate_sequence(ys)])
