"""Ranking metrics and the Wilcoxon signed-rank test."""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy.stats import norm, rankdata

from .exceptions import DomainError


class RankedList(NamedTuple):
    items: tuple
    scores: tuple


def rank_labels(labels: Sequence, scores) -> RankedList:
    """Sort labels by descending score; ties keep label order."""
    scores = np.asarray(scores, dtype=float)
    order = sorted(range(len(labels)), key=lambda i: (-scores[i], i))
    return RankedList(tuple(labels[i] for i in order),
                      tuple(float(scores[i]) for i in order))


def accuracy_top1(predicted: Sequence, actual: Sequence) -> float:
    """Fraction of positions where the predicted top label is the actual one."""
    if len(predicted) != len(actual):
        raise DomainError("label sequences differ in length")
    if not predicted:
        raise DomainError("empty label sequences")
    return sum(p == a for p, a in zip(predicted, actual)) / len(predicted)


def ndcg(predicted, gains: Mapping) -> float:
    """Full-list NDCG with raw gains and ``log2(rank + 1)`` discount.

    Returns 1.0 when every gain is zero.
    """
    items = predicted.items if isinstance(predicted, RankedList) else list(predicted)
    missing = [i for i in items if i not in gains]
    if missing:
        raise DomainError(f"no gain for {missing[:3]}")
    g = np.array([gains[i] for i in items], dtype=float)
    if np.any(g < 0):
        raise DomainError("gains must be non-negative")
    disc = 1.0 / np.log2(np.arange(2, g.size + 2))
    ideal = float(np.sum(np.sort(g)[::-1] * disc))
    if ideal == 0.0:
        return 1.0
    return float(np.sum(g * disc)) / ideal


def rbo(list_a: Sequence, list_b: Sequence, p: float = 0.9) -> float:
    """Truncated rank-biased overlap, no extrapolation.

    ``(1 - p) * sum_{d=1}^{D} p^(d-1) |A_d & B_d| / d`` with ``D`` the
    longer list length. Identical lists score ``1 - p^D``.
    """
    if not 0 < p < 1:
        raise DomainError("persistence p must lie in (0, 1)")
    a, b = list(list_a), list(list_b)
    if len(set(a)) != len(a) or len(set(b)) != len(b):
        raise DomainError("duplicate labels within a list")
    depth = max(len(a), len(b))
    seen_a, seen_b = set(), set()
    overlap = 0
    total = 0.0
    for d in range(1, depth + 1):
        if d <= len(a):
            x = a[d - 1]
            overlap += x in seen_b
            seen_a.add(x)
        if d <= len(b):
            y = b[d - 1]
            overlap += y in seen_a
            seen_b.add(y)
        total += p ** (d - 1) * overlap / d
    return (1.0 - p) * total


def mrr(reciprocal_ranks: Sequence[float]) -> float:
    if len(reciprocal_ranks) == 0:
        raise DomainError("no reciprocal ranks")
    return float(np.mean(reciprocal_ranks))


# -- Wilcoxon signed-rank -----------------------------------------------------

EXACT_MAX_N = 25
MIN_N = 6


@lru_cache(maxsize=None)
def _signed_rank_counts(n: int) -> tuple:
    # Number of sign assignments giving each rank sum W+ = 0..n(n+1)/2.
    top = n * (n + 1) // 2
    counts = [0] * (top + 1)
    counts[0] = 1
    for r in range(1, n + 1):
        for s in range(top, r - 1, -1):
            counts[s] += counts[s - r]
    return tuple(counts)


@lru_cache(maxsize=None)
def critical_value(n: int, alpha: float = 0.05) -> int:
    """Largest ``w`` with two-sided ``P(min(W+, W-) <= w) <= alpha`` (-1 if none)."""
    counts = _signed_rank_counts(n)
    total = 2 ** n
    cum = 0
    crit = -1
    for w, c in enumerate(counts):
        cum += c
        if 2 * cum / total <= alpha:
            crit = w
        else:
            break
    return crit


class WilcoxonResult(NamedTuple):
    statistic: float
    significant: bool
    n: int


def wilcoxon_signed_rank(a, b, alpha: float = 0.05) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped and tied magnitudes get midranks. The
    statistic is ``min(W+, W-)``. For 6..25 non-zero pairs it is compared
    against the exact null critical value; above that a normal
    approximation with continuity and tie corrections is used. Fewer than
    six pairs are never significant.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DomainError("paired samples must be 1-D and equally long")
    diff = a - b
    diff = diff[diff != 0]
    n = diff.size
    if n == 0:
        return WilcoxonResult(0.0, False, 0)
    ranks = rankdata(np.abs(diff))
    w_plus = float(ranks[diff > 0].sum())
    w_minus = float(ranks[diff < 0].sum())
    stat = min(w_plus, w_minus)
    if n < MIN_N:
        return WilcoxonResult(stat, False, n)
    if n <= EXACT_MAX_N:
        return WilcoxonResult(stat, bool(stat <= critical_value(n, alpha)), n)
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 \
        - np.sum(tie_counts ** 3 - tie_counts) / 48.0
    if var <= 0:
        return WilcoxonResult(stat, False, n)
    z = (abs(w_plus - mean) - 0.5) / math.sqrt(var)
    return WilcoxonResult(stat, bool(z > norm.ppf(1 - alpha / 2)), n)
