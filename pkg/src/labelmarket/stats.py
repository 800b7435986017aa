"""Wilcoxon signed-rank test and small summary helpers."""
from __future__ import annotations

import math

import numpy as np
from scipy.stats import norm, rankdata

from .errors import EmptyInput, LengthMismatch

EXACT_MAX_N = 25


def _signed_rank_parts(x, y):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise LengthMismatch(f"paired samples differ in length: {x.size} vs {y.size}")
    if x.size == 0:
        raise EmptyInput("no pairs")
    d = x - y
    d = d[d != 0]
    ranks = rankdata(np.abs(d))  # average ranks for ties
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    return d, ranks, w_plus, w_minus


def signed_rank_null_counts(ranks) -> np.ndarray:
    """Number of sign patterns giving each value of 2 * W+.

    Ranks are averages of integers, so doubling makes them integral and the
    2^n patterns can be counted by a subset-sum convolution. Entry ``k`` of
    the result counts patterns with ``2 * W+ == k``.
    """
    doubled = np.rint(2 * np.asarray(ranks, dtype=float)).astype(int)
    counts = np.zeros(int(doubled.sum()) + 1)
    counts[0] = 1.0
    top = 0
    for r in doubled:
        counts[r:top + r + 1] += counts[:top + 1].copy()
        top += r
    return counts


def wilcoxon_signed_rank(x, y, method: str = "auto"):
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped and tied |d| get average ranks. The
    statistic is W = min(W+, W-). ``method`` is ``"exact"`` (full sign
    pattern distribution), ``"approx"`` (normal with tie-corrected variance
    and continuity correction) or ``"auto"`` (exact when at most 25 nonzero
    differences remain). Returns ``(W, p)``; p is 1 when every difference is 0.
    """
    d, ranks, w_plus, w_minus = _signed_rank_parts(x, y)
    n = d.size
    if n == 0:
        return 0.0, 1.0
    w = min(w_plus, w_minus)
    if method == "auto":
        method = "exact" if n <= EXACT_MAX_N else "approx"
    if method == "exact":
        counts = signed_rank_null_counts(ranks)
        k = int(round(2 * w))
        p = 2.0 * counts[:k + 1].sum() / counts.sum()
    elif method == "approx":
        mean = n * (n + 1) / 4.0
        _, tie_sizes = np.unique(np.abs(d), return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - float(((tie_sizes ** 3) - tie_sizes).sum()) / 48.0
        z = (w - mean + 0.5) / math.sqrt(var)
        p = 2.0 * norm.cdf(z)
    else:
        raise ValueError(f"unknown method {method!r}")
    return w, min(1.0, float(p))


def percentile(values, q: float) -> float:
    """Linear interpolation between closest ranks (numpy's default method)."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise EmptyInput("percentile of an empty sample")
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    h = (v.size - 1) * q
    lo = math.floor(h)
    hi = min(lo + 1, v.size - 1)
    return float(v[lo] + (h - lo) * (v[hi] - v[lo]))


def paired_comparison(method_values, baseline_values):
    """Wilcoxon p-value and median of (method - baseline) over paired runs.

    Pairs where either value is NaN (e.g. average cost with nothing bought)
    are dropped.
    """
    a = np.asarray(method_values, dtype=float).ravel()
    b = np.asarray(baseline_values, dtype=float).ravel()
    if a.shape != b.shape:
        raise LengthMismatch(f"{a.size} method runs vs {b.size} baseline runs")
    keep = ~(np.isnan(a) | np.isnan(b))
    a, b = a[keep], b[keep]
    if a.size == 0:
        raise EmptyInput("no complete pairs")
    _, p = wilcoxon_signed_rank(a, b)
    return p, float(np.median(a - b))
