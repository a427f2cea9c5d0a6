"""Benjamini-Hochberg adjustment and detection metrics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import OutOfRange

DEFAULT_WEIGHTS = (0.5, 1.0, 2.0)


@dataclass(frozen=True, eq=False)
class AdjustedPValues:
    raw: np.ndarray
    adjusted: np.ndarray
    alpha: float
    rejected: np.ndarray

    @property
    def n_rejected(self) -> int:
        return int(self.rejected.sum())


def bh_adjust(p_values, alpha: float = 0.05) -> AdjustedPValues:
    """Step-up adjusted p-values ``min_{j >= i} min(1, m p_(j) / j)`` in input order.

    NaN entries are left as NaN and do not count towards m.
    """
    p = np.asarray(p_values, dtype=float).ravel()
    if not 0.0 < alpha < 1.0:
        raise OutOfRange(f"alpha must lie in (0, 1), got {alpha}")
    finite = ~np.isnan(p)
    if np.any((p[finite] < 0) | (p[finite] > 1)):
        raise OutOfRange("p-values must lie in [0, 1]")
    adj = np.full_like(p, np.nan)
    q = p[finite]
    m = q.size
    if m:
        order = np.argsort(q, kind="stable")
        scaled = q[order] * m / np.arange(1, m + 1)
        scaled = np.minimum.accumulate(scaled[::-1])[::-1]
        out = np.empty(m)
        out[order] = np.minimum(scaled, 1.0)
        adj[finite] = out
    return AdjustedPValues(p, adj, alpha, np.where(finite, adj <= alpha, False))


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float | None
    recall: float | None
    f_scores: Mapping[float, float | None]

    def f(self, w: float = 1.0) -> float | None:
        return self.f_scores.get(float(w))

    def to_dict(self) -> dict:
        return {
            "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
            "precision": self.precision, "recall": self.recall,
            "f_scores": {f"F{w:g}": v for w, v in self.f_scores.items()},
        }


def f_score(precision: float | None, recall: float | None, w: float = 1.0) -> float | None:
    """Weighted F: ``(1 + w^2) / (w^2 / recall + 1 / precision)``; None if either is 0 or undefined."""
    if not precision or not recall:
        return None
    return (1.0 + w * w) / (w * w / recall + 1.0 / precision)


def compute_metrics(rejected: Iterable[bool], truth_abnormal: Iterable[bool],
                    weights=DEFAULT_WEIGHTS) -> Metrics:
    r = np.asarray(list(rejected), dtype=bool)
    t = np.asarray(list(truth_abnormal), dtype=bool)
    if r.shape != t.shape:
        raise ValueError("rejected and truth must have the same length")
    tp = int(np.sum(r & t))
    fp = int(np.sum(r & ~t))
    tn = int(np.sum(~r & ~t))
    fn = int(np.sum(~r & t))
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    fs = {float(w): f_score(precision, recall, w) for w in weights}
    return Metrics(tp, fp, tn, fn, precision, recall, fs)
