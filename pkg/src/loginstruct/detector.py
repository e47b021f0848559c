"""Normality scoring, threshold selection and sequence-level verdicts."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .metrics import rates_from_counts

SCORE_EPS = 1e-12
CRITERIA = ("f1", "precision", "recall")
_TIE_TOL = 1e-12


class Verdict(str, enum.Enum):
    NORMAL = "normal"
    ANOMALOUS = "anomalous"


@dataclass(frozen=True)
class DecisionThreshold:
    a_tilde: float
    criterion: str = "f1"
    value: float | None = None  # criterion value reached on the validation set

    def __post_init__(self) -> None:
        if not self.a_tilde > 0:
            raise ValueError("threshold must be positive")
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}")


@dataclass(frozen=True)
class DetectionResult:
    score: float
    verdict: Verdict

    @property
    def is_anomalous(self) -> bool:
        return self.verdict is Verdict.ANOMALOUS


def normality_score(x) -> float | np.ndarray:
    """``1 / (|x|^2 + 1e-12)``: large near the origin, small far away.

    Accepts one vector or a 2-D batch (one row per log).
    """
    x = np.asarray(x, dtype=np.float64)
    sq = np.sum(x * x, axis=-1)
    return 1.0 / (sq + SCORE_EPS)


def _criterion(tp: int, fp: int, fn: int, criterion: str) -> float:
    p, r, f1 = rates_from_counts(tp, fp, fn)
    return {"precision": p, "recall": r, "f1": f1}[criterion]


def candidate_thresholds(scores: Sequence[float]) -> np.ndarray:
    """Sorted candidates: midpoints of distinct scores plus two sentinels.

    The low sentinel (half the minimum) flags nothing, the high sentinel
    (twice the maximum) flags everything; both stay positive.
    """
    s = np.unique(np.asarray(scores, dtype=np.float64))
    mids = (s[:-1] + s[1:]) / 2.0
    return np.concatenate([[s[0] / 2.0], mids, [s[-1] * 2.0]])


def select_threshold(scores: Sequence[float], labels: Sequence[int], criterion: str = "f1") -> DecisionThreshold:
    """Pick the threshold maximizing ``criterion`` for "anomalous iff score < threshold".

    Label 1 marks the anomalous class. Among equally good candidates the
    smallest threshold wins (fewest logs reported).
    """
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}")
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-D and of equal length")
    if len(np.unique(labels)) < 2:
        raise ValueError("threshold selection needs both classes in the labels")
    if np.any(scores <= 0):
        raise ValueError("normality scores must be positive")

    cands = candidate_thresholds(scores)
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    cum_pos = np.concatenate([[0], np.cumsum(labels[order])])
    total_pos = int(cum_pos[-1])
    # logs with score < t form the reported set
    reported = np.searchsorted(sorted_scores, cands, side="left")
    best_t, best_v = None, -1.0
    for t, k in zip(cands, reported):
        tp = int(cum_pos[k])
        v = _criterion(tp, int(k) - tp, total_pos - tp, criterion)
        if v > best_v + _TIE_TOL:
            best_t, best_v = float(t), v
    return DecisionThreshold(best_t, criterion, best_v)


def detect_scores(scores, threshold: DecisionThreshold) -> np.ndarray:
    """Boolean anomaly flags; a score equal to the threshold is normal."""
    return np.asarray(scores, dtype=np.float64) < threshold.a_tilde


def detect(x, threshold: DecisionThreshold) -> DetectionResult:
    score = float(normality_score(x))
    verdict = Verdict.ANOMALOUS if score < threshold.a_tilde else Verdict.NORMAL
    return DetectionResult(score, verdict)


def aggregate_sequence(verdicts: Iterable[DetectionResult | Verdict | bool]) -> Verdict:
    """A sequence is anomalous as soon as one member is."""
    seen = False
    for v in verdicts:
        seen = True
        if isinstance(v, DetectionResult):
            v = v.verdict
        if isinstance(v, (bool, np.bool_)):
            v = Verdict.ANOMALOUS if v else Verdict.NORMAL
        if Verdict(v) is Verdict.ANOMALOUS:
            return Verdict.ANOMALOUS
    if not seen:
        raise ValueError("cannot aggregate an empty sequence")
    return Verdict.NORMAL
