import math
import statistics

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import entropy as scipy_entropy

from loginstruct.miner import SeverityGroup, SLSample
from loginstruct.study import (
    LexiconScorer,
    NGramRecord,
    Sentiment,
    classify_sentiment,
    coverage_report,
    default_scorer,
    entropy_stats,
    extract_ngrams,
    ngram_entropy,
    study_corpus,
)

N, A = SeverityGroup.NORMAL, SeverityGroup.ABNORMAL

STUDY_FIXTURE = [
    ("connection successful established now", N),
    ("connection successful established now ready", N),
    ("connection successful established", N),
    ("listing directory contents", N),
    ("listing directory contents done", N),
    ("machine failure error detected", A),
    ("machine failure error detected again", A),
    ("machine failure error", A),
    ("machine failure error now", A),
    ("connection successful established failure", A),
]


def _samples(rows):
    return [SLSample(tuple(text.split()), group) for text, group in rows]


def test_sliding_window():
    s = _samples([("machine error detected now", A)])
    grams = {r.ngram for r in extract_ngrams(s, 3, min_count=0)}
    assert grams == {"machine error detected", "error detected now"}


def test_short_sample_contributes_nothing():
    assert extract_ngrams(_samples([("a b", N)]), 3, min_count=0) == []


def test_fixture_table_hand_count():
    # 3-grams seen more than three times in the fixture, counted by hand
    records = extract_ngrams(_samples(STUDY_FIXTURE), 3, min_count=3)
    table = {r.ngram: (r.count_normal, r.count_abnormal) for r in records}
    assert table == {"connection successful established": (3, 1), "machine failure error": (0, 4)}


@pytest.mark.parametrize("n", [3, 4, 5])
def test_counts_match_brute_force(n):
    samples = _samples(STUDY_FIXTURE)
    brute = {}
    for s in samples:
        for i in range(len(s.tokens) - n + 1):
            key = " ".join(s.tokens[i : i + n])
            pair = brute.setdefault(key, [0, 0])
            pair[s.group is A] += 1
    got = {r.ngram: [r.count_normal, r.count_abnormal] for r in extract_ngrams(samples, n, min_count=0)}
    assert got == brute


def test_entropy_examples():
    assert ngram_entropy(5, 1) == pytest.approx(0.6500, abs=1e-4)
    assert ngram_entropy(3, 3) == 1.0
    assert ngram_entropy(0, 7) == 0.0
    with pytest.raises(ValueError):
        ngram_entropy(0, 0)


def test_entropy_matches_scipy():
    for a in range(21):
        for b in range(21):
            if a + b:
                assert ngram_entropy(a, b) == pytest.approx(scipy_entropy([a, b], base=2), abs=1e-9)


@given(st.integers(0, 500), st.integers(0, 500))
def test_entropy_symmetric_and_bounded(a, b):
    if a + b == 0:
        return
    h = ngram_entropy(a, b)
    assert h == ngram_entropy(b, a)
    assert 0.0 <= h <= 1.0
    assert (h == 0.0) == (a == 0 or b == 0)


def test_entropy_decreases_with_imbalance():
    for total in range(2, 41):
        values = [ngram_entropy(a, total - a) for a in range((total + 1) // 2, total + 1)]
        assert all(x > y for x, y in zip(values, values[1:]))


def _rec(e):
    return NGramRecord("g", 3, 1, 1, e)


def test_entropy_stats_table_shape():
    stats = entropy_stats([_rec(e) for e in [0, 0, 0, 0.27, 0.51]])
    assert (stats.min, stats.q1, stats.median, stats.q3, stats.max) == (0.0, 0.0, 0.0, 0.27, 0.51)


def test_entropy_stats_single_and_empty():
    stats = entropy_stats([_rec(0.4)])
    assert stats.min == stats.q1 == stats.median == stats.q3 == stats.max == 0.4
    with pytest.raises(ValueError):
        entropy_stats([])


def test_entropy_stats_against_statistics_module():
    values = np.random.default_rng(5).random(100).tolist()
    stats = entropy_stats([_rec(v) for v in values])
    q1, med, q3 = statistics.quantiles(values, n=4, method="inclusive")
    assert stats.min == min(values) and stats.max == max(values)
    assert (stats.q1, stats.median, stats.q3) == pytest.approx((q1, med, q3), abs=1e-12)
    assert stats.min <= stats.q1 <= stats.median <= stats.q3 <= stats.max


def test_sentiment_examples():
    scorer = default_scorer()
    assert scorer.polarity["successful"] > 0
    assert scorer.polarity["failure"] < 0 and scorer.polarity["error"] < 0
    assert classify_sentiment("connection successful established") is Sentiment.POSITIVE
    assert classify_sentiment("machine failure error") is Sentiment.NEGATIVE
    assert classify_sentiment("listing directory contents") is Sentiment.NEUTRAL


def test_sentiment_threshold_and_custom_scorer():
    scorer = LexiconScorer({"good": 1.0})
    # score 1/3
    assert classify_sentiment("good x y", scorer, tau=0.3) is Sentiment.POSITIVE
    assert classify_sentiment("good x y", scorer, tau=0.4) is Sentiment.NEUTRAL
    assert classify_sentiment("a b c", lambda toks: -1.0) is Sentiment.NEGATIVE


def test_lexicon_file(tmp_path):
    path = tmp_path / "lex.txt"
    path.write_text("# words\nfine +1\nbad -1\n", encoding="utf-8")
    scorer = LexiconScorer.from_file(path)
    assert scorer(["fine", "bad", "meh"]) == 0.0
    assert scorer(["fine", "meh"]) == 0.5


def _with_sentiment(name, a, b, s):
    return NGramRecord(name, 3, a, b, ngram_entropy(a, b), s)


def test_coverage_thirds():
    recs = [_with_sentiment("a", 3, 0, Sentiment.NEUTRAL), _with_sentiment("b", 0, 4, Sentiment.NEUTRAL),
            _with_sentiment("c", 2, 2, Sentiment.NEUTRAL)]
    cov = coverage_report(recs)[Sentiment.NEUTRAL]
    assert (cov.fraction_normal, cov.fraction_abnormal, cov.fraction_shared) == pytest.approx((1 / 3,) * 3)


def test_coverage_all_normal_and_absent_category():
    report = coverage_report([_with_sentiment("a", 5, 0, Sentiment.POSITIVE)])
    pos = report[Sentiment.POSITIVE]
    assert (pos.fraction_normal, pos.fraction_abnormal, pos.fraction_shared) == (1.0, 0.0, 0.0)
    assert report[Sentiment.NEGATIVE] is None


def test_coverage_fixture_brute_tally():
    report, records = study_corpus(_samples(STUDY_FIXTURE), sizes=(3,), min_count=0)
    tally = {}
    for r in records:
        cls = "normal" if r.count_abnormal == 0 else "abnormal" if r.count_normal == 0 else "shared"
        tally.setdefault(r.sentiment.value, []).append(cls)
    cov = report["per_n"]["3"]["coverage"]
    for sentiment, classes in tally.items():
        got = cov[sentiment]
        assert got["count"] == len(classes)
        for cls in ("normal", "abnormal", "shared"):
            assert got[f"fraction_{cls}"] == pytest.approx(classes.count(cls) / len(classes))
        assert sum(got[f"fraction_{c}"] for c in ("normal", "abnormal", "shared")) == pytest.approx(1.0, abs=1e-9)


def test_disjoint_vocabularies_have_zero_median_entropy():
    rng = np.random.default_rng(0)
    normal_words = [f"ok{c}" for c in "abcdefgh"]
    abnormal_words = [f"bad{c}" for c in "abcdefgh"]
    rows = [(" ".join(rng.choice(normal_words, 5)), N) for _ in range(300)]
    rows += [(" ".join(rng.choice(abnormal_words, 5)), A) for _ in range(300)]
    report, _ = study_corpus(_samples(rows), min_count=3)
    for n in ("3", "4", "5"):
        if report["per_n"][n]["entropy"] is not None:
            assert report["per_n"][n]["entropy"]["median"] == 0.0
    assert report["pooled"]["entropy"]["max"] == 0.0


def test_study_report_structure():
    report, records = study_corpus(_samples(STUDY_FIXTURE))
    assert set(report["per_n"]) == {"3", "4", "5"}
    assert report["samples"] == {"normal": 5, "abnormal": 5}
    assert all(r.count_normal + r.count_abnormal > 3 for r in records)
    with pytest.raises(ValueError):
        study_corpus([])
    assert not math.isnan(report["pooled"]["entropy"]["median"])
