"""N-gram uniqueness and sentiment analysis over severity-labelled samples."""

from __future__ import annotations

import csv
import enum
import math
import os
from collections import defaultdict
from dataclasses import asdict, dataclass
from importlib import resources
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from .miner import SeverityGroup, SLSample

DEFAULT_NGRAM_SIZES = (3, 4, 5)
DEFAULT_MIN_COUNT = 3
DEFAULT_SENTIMENT_TAU = 0.1


class Sentiment(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NEUTRAL = "neutral"


@dataclass
class NGramRecord:
    ngram: str
    n: int
    count_normal: int
    count_abnormal: int
    entropy: float
    sentiment: Sentiment | None = None

    @property
    def total(self) -> int:
        return self.count_normal + self.count_abnormal


@dataclass(frozen=True)
class EntropyStats:
    min: float
    q1: float
    median: float
    q3: float
    max: float


@dataclass(frozen=True)
class CategoryCoverage:
    fraction_normal: float
    fraction_abnormal: float
    fraction_shared: float
    count: int


class SentimentScorer(Protocol):
    def __call__(self, tokens: Sequence[str]) -> float: ...


def ngram_entropy(count_normal: int, count_abnormal: int) -> float:
    """Binary Shannon entropy (bits) of an n-gram's group split.

    With two outcomes the base-2 entropy already lies in [0, 1], so no extra
    normalization factor is needed.
    """
    total = count_normal + count_abnormal
    if total <= 0:
        raise ValueError("entropy undefined for an n-gram with zero occurrences")
    h = 0.0
    for c in (count_normal, count_abnormal):
        if c:
            p = c / total
            h -= p * math.log2(p)
    return min(1.0, max(0.0, h))


def extract_ngrams(
    samples: Iterable[SLSample], n: int, min_count: int = DEFAULT_MIN_COUNT
) -> list[NGramRecord]:
    """Count sliding-window n-grams per severity group.

    Records whose total count is ``<= min_count`` are dropped. Output is
    sorted by n-gram string.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if min_count < 0:
        raise ValueError("min_count must be >= 0")
    counts: dict[str, list[int]] = defaultdict(lambda: [0, 0])
    for sample in samples:
        col = 1 if sample.group is SeverityGroup.ABNORMAL else 0
        toks = sample.tokens
        for i in range(len(toks) - n + 1):
            counts[" ".join(toks[i : i + n])][col] += 1
    records = []
    for gram in sorted(counts):
        a, b = counts[gram]
        if a + b > min_count:
            records.append(NGramRecord(gram, n, a, b, ngram_entropy(a, b)))
    return records


def entropy_stats(records: Sequence[NGramRecord]) -> EntropyStats:
    if not records:
        raise ValueError("entropy statistics need at least one n-gram")
    values = np.array([r.entropy for r in records], dtype=np.float64)
    q = np.quantile(values, [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")
    return EntropyStats(*(float(v) for v in q))


class LexiconScorer:
    """Average word polarity over the tokens; unknown words count as 0."""

    def __init__(self, polarity: dict[str, float]):
        self.polarity = dict(polarity)

    @classmethod
    def from_file(cls, path: str | os.PathLike | None = None) -> "LexiconScorer":
        if path is None:
            text = resources.files("loginstruct.data").joinpath("lexicon.txt").read_text("utf-8")
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        polarity = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            word, value = line.split()
            polarity[word.lower()] = float(value)
        return cls(polarity)

    def __call__(self, tokens: Sequence[str]) -> float:
        if not tokens:
            return 0.0
        return sum(self.polarity.get(t, 0.0) for t in tokens) / len(tokens)


_default_scorer: LexiconScorer | None = None


def default_scorer() -> LexiconScorer:
    global _default_scorer
    if _default_scorer is None:
        _default_scorer = LexiconScorer.from_file()
    return _default_scorer


def classify_sentiment(
    ngram: str, scorer: Callable[[Sequence[str]], float] | None = None, tau: float = DEFAULT_SENTIMENT_TAU
) -> Sentiment:
    score = (scorer or default_scorer())(ngram.split())
    if score > tau:
        return Sentiment.POSITIVE
    if score < -tau:
        return Sentiment.NEGATIVE
    return Sentiment.NEUTRAL


def annotate_sentiment(records, scorer=None, tau: float = DEFAULT_SENTIMENT_TAU):
    for r in records:
        r.sentiment = classify_sentiment(r.ngram, scorer, tau)
    return records


def coverage_report(records: Iterable[NGramRecord]) -> dict[Sentiment, CategoryCoverage | None]:
    """Share of normal-only, abnormal-only and shared n-grams per sentiment.

    A category with no n-grams maps to ``None`` rather than zeros.
    """
    tallies = {s: [0, 0, 0] for s in Sentiment}
    for r in records:
        if r.sentiment is None:
            raise ValueError(f"n-gram {r.ngram!r} has no sentiment; run annotate_sentiment first")
        if r.count_abnormal == 0:
            tallies[r.sentiment][0] += 1
        elif r.count_normal == 0:
            tallies[r.sentiment][1] += 1
        else:
            tallies[r.sentiment][2] += 1
    report: dict[Sentiment, CategoryCoverage | None] = {}
    for s, (norm, abn, shared) in tallies.items():
        total = norm + abn + shared
        report[s] = CategoryCoverage(norm / total, abn / total, shared / total, total) if total else None
    return report


def study_corpus(
    samples: Sequence[SLSample],
    sizes: Sequence[int] = DEFAULT_NGRAM_SIZES,
    min_count: int = DEFAULT_MIN_COUNT,
    scorer=None,
    tau: float = DEFAULT_SENTIMENT_TAU,
) -> tuple[dict, list[NGramRecord]]:
    """Run the full study; returns a JSON-ready report and all records."""
    if not samples:
        raise ValueError("no samples to study")
    per_n = {}
    pooled: list[NGramRecord] = []
    for n in sizes:
        recs = annotate_sentiment(extract_ngrams(samples, n, min_count), scorer, tau)
        pooled.extend(recs)
        per_n[str(n)] = _section(recs)
    counts = {g.value: sum(1 for s in samples if s.group is g) for g in SeverityGroup}
    report = {
        "samples": counts,
        "min_count": min_count,
        "ngram_sizes": list(sizes),
        "per_n": per_n,
        "pooled": _section(pooled),
    }
    return report, pooled


def _section(records: Sequence[NGramRecord]) -> dict:
    return {
        "records": len(records),
        "entropy": asdict(entropy_stats(records)) if records else None,
        "coverage": {
            s.value: (asdict(c) if c is not None else None) for s, c in coverage_report(records).items()
        },
    }


def write_records_tsv(records: Iterable[NGramRecord], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["n", "ngram", "count_normal", "count_abnormal", "entropy", "sentiment"])
        for r in sorted(records, key=lambda r: (r.n, r.ngram)):
            w.writerow([r.n, r.ngram, r.count_normal, r.count_abnormal, f"{r.entropy:.6f}",
                        r.sentiment.value if r.sentiment else ""])
