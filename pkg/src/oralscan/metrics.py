"""Precision/recall, PR curves, average precision, and the log-resolution fit."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .network import ClassLabel

NUM_CLASSES = len(ClassLabel)


class MetricValue(NamedTuple):
    """A ratio metric; degenerate marks a 0/0 denominator (value fixed at 0)."""

    value: float
    degenerate: bool = False


class ConfusionTally:
    """3x3 count matrix indexed [true][predicted]."""

    def __init__(self, counts: np.ndarray | None = None):
        if counts is None:
            counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (NUM_CLASSES, NUM_CLASSES) or (counts < 0).any():
            raise ValueError(f"tally must be a non-negative {NUM_CLASSES}x{NUM_CLASSES} matrix")
        self.counts = counts

    @classmethod
    def from_pairs(cls, truths: Sequence[int], preds: Sequence[int]) -> "ConfusionTally":
        tally = cls()
        for t, p in zip(truths, preds, strict=True):
            tally.add(t, p)
        return tally

    def add(self, truth: int, pred: int) -> None:
        self.counts[int(truth), int(pred)] += 1

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        if self.total == 0:
            return 0.0
        return float(np.trace(self.counts)) / self.total


def precision(tally: ConfusionTally, c: ClassLabel | int) -> MetricValue:
    """TP / (TP + FP); 0 with the degenerate flag when nothing was predicted as c."""
    c = int(c)
    tp = int(tally.counts[c, c])
    predicted = int(tally.counts[:, c].sum())
    if predicted == 0:
        return MetricValue(0.0, degenerate=True)
    return MetricValue(tp / predicted)


def recall(tally: ConfusionTally, c: ClassLabel | int) -> MetricValue:
    """TP / (TP + FN); 0 with the degenerate flag when class c never occurs."""
    c = int(c)
    tp = int(tally.counts[c, c])
    actual = int(tally.counts[c, :].sum())
    if actual == 0:
        return MetricValue(0.0, degenerate=True)
    return MetricValue(tp / actual)


@dataclass(frozen=True)
class PRCurve:
    """(recall, precision) points in score-descending prefix order."""

    points: tuple[tuple[float, float], ...]


def pr_curve(scores: Sequence[float], truths: Sequence[bool]) -> PRCurve:
    """One curve point per prefix of the score-ranked samples.

    Ties in score keep the stable input order. Recall is measured against the
    total positive count; at least one positive is required.
    """
    scores = np.asarray(scores, dtype=np.float64)
    truths = np.asarray(truths, dtype=bool)
    if scores.shape != truths.shape or scores.ndim != 1:
        raise ValueError(f"scores {scores.shape} and truths {truths.shape} must be equal-length vectors")
    positives = int(truths.sum())
    if positives == 0:
        raise ValueError("pr_curve requires at least one positive sample")
    order = np.argsort(-scores, kind="stable")
    tp = np.cumsum(truths[order])
    ks = np.arange(1, len(scores) + 1)
    points = tuple((float(t / positives), float(t / k)) for t, k in zip(tp, ks))
    return PRCurve(points)


def average_precision(curve: PRCurve) -> float:
    """Area under the PR curve with all-point interpolation.

    AP = sum (r_i - r_{i-1}) * p_interp(r_i), where p_interp(r) is the maximum
    precision achieved at recall >= r.
    """
    recalls = np.array([r for r, _ in curve.points], dtype=np.float64)
    precisions = np.array([p for _, p in curve.points], dtype=np.float64)
    # max precision at recall >= r_i == suffix running maximum in prefix order
    interp = np.maximum.accumulate(precisions[::-1])[::-1]
    prev = np.concatenate(([0.0], recalls[:-1]))
    return float(((recalls - prev) * interp).sum())


def mean_average_precision(aps: Sequence[float]) -> float:
    """Unweighted mean of the per-class average precisions."""
    if not aps:
        raise ValueError("mean_average_precision needs at least one AP")
    return float(sum(aps) / len(aps))


@dataclass(frozen=True)
class LogFit:
    """Least-squares fit of accuracy = a * ln(pixel_count) + b."""

    a: float
    b: float
    r2: float


def log_fit(points: Sequence[tuple[float, float]]) -> LogFit:
    """OLS of accuracy on ln(pixel_count); needs >= 2 distinct x values."""
    xs = np.array([p[0] for p in points], dtype=np.float64)
    ys = np.array([p[1] for p in points], dtype=np.float64)
    if len(set(xs.tolist())) < 2:
        raise ValueError("log_fit requires at least 2 distinct pixel counts")
    if (xs <= 0).any():
        raise ValueError("pixel counts must be positive")
    lx = np.log(xs)
    lx_c = lx - lx.mean()
    a = float((lx_c * (ys - ys.mean())).sum() / (lx_c * lx_c).sum())
    b = float(ys.mean() - a * lx.mean())
    resid = ys - (a * lx + b)
    ss_res = float((resid * resid).sum())
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res == 0.0 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return LogFit(a=a, b=b, r2=r2)
