"""Anomaly score D(k), the threshold width W_thr and threshold detection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORMAL = "normal"
ABNORMAL = "abnormal"


class MissingClassError(ValueError):
    pass


@dataclass(frozen=True)
class AnnotatedSeries:
    D: np.ndarray
    labels: np.ndarray  # "normal", "abnormal" or "" (excluded)

    def __post_init__(self):
        if len(self.D) != len(self.labels):
            raise ValueError("D and labels differ in length")


@dataclass(frozen=True)
class MarginResult:
    D_no_max: float
    D_ab_min: float
    W_thr: float
    F_thr: float | None


def deviation(F_out: float, F_in_next: float) -> float:
    return abs(F_out - F_in_next)


def margin(series: AnnotatedSeries) -> MarginResult:
    D = np.asarray(series.D, dtype=float)
    labels = np.asarray(series.labels)
    normal = D[labels == NORMAL]
    abnormal = D[labels == ABNORMAL]
    for name, part in ((NORMAL, normal), (ABNORMAL, abnormal)):
        if len(part) == 0:
            raise MissingClassError(f"no samples labelled {name!r}")
    d_no = float(normal.max())
    d_ab = float(abnormal.min())
    w = d_ab - d_no
    return MarginResult(d_no, d_ab, w, (d_no + d_ab) / 2 if w > 0 else None)


def detect(D, F_thr: float):
    if F_thr < 0:
        raise ValueError("F_thr must be non-negative")
    return np.asarray(D) > F_thr if np.ndim(D) else D > F_thr


def label_bins(n: int, ranges, guard: int = 0) -> np.ndarray:
    """Per-bin labels from ``(start, end, label)`` ranges (end inclusive).

    Normal bins within ``guard`` samples of an abnormal range are excluded,
    as are bins covered by no range.
    """
    labels = np.full(n, "", dtype=object)
    abnormal = np.zeros(n, dtype=bool)
    for start, end, lab in ranges:
        labels[start:end + 1] = lab
        if lab == ABNORMAL:
            abnormal[start:end + 1] = True
    if guard > 0:
        near = np.zeros(n, dtype=bool)
        for i in np.flatnonzero(abnormal):
            near[max(0, i - guard):i + guard + 1] = True
        labels[near & (labels == NORMAL)] = ""
    return labels


def annotate(D, ranges, guard: int = 0) -> AnnotatedSeries:
    """Build a series from a D sequence where ``None`` entries are unlabelled."""
    D = list(D)
    labels = label_bins(len(D), ranges, guard)
    for i, d in enumerate(D):
        if d is None:
            labels[i] = ""
    values = np.array([np.nan if d is None else d for d in D], dtype=float)
    return AnnotatedSeries(values, labels)
