"""Slow, definition-level reference computations used only by the tests."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def subset_counts(sizes) -> tuple[np.ndarray, np.ndarray]:
    """Every subset of the pooled units as a bitmask, with per-flow counts.

    Returns ``(k, counts)`` where ``k[s]`` is the subset size and
    ``counts[s, i]`` the number of units of flow ``i`` in subset ``s``.
    """
    total = sum(sizes)
    masks = np.arange(1 << total, dtype=np.uint64)
    counts = np.empty((len(masks), len(sizes)), dtype=np.int64)
    offset = 0
    for i, s in enumerate(sizes):
        flow_bits = np.uint64(((1 << s) - 1) << offset)
        counts[:, i] = np.bitwise_count(masks & flow_bits)
        offset += s
    return counts.sum(axis=1), counts


def in_zero_error_region(counts: np.ndarray, sizes, alpha: int, tie_policy: str) -> np.ndarray:
    """Rows whose observed top ``alpha`` is correct under every tie-break.

    Let ``y`` be the ``alpha``-th largest count.  Any flow counted ``>= y``
    can be picked into the observed top set, so all such flows must be
    acceptable: the first ``alpha`` flows (``strict``) or any flow whose true
    size is at least the ``alpha``-th largest (``tolerant``).
    """
    n = len(sizes)
    if tie_policy == "strict":
        acceptable = np.arange(n) < alpha
    else:
        acceptable = np.array([s >= sizes[alpha - 1] for s in sizes])
    y = -np.sort(-counts, axis=1)[:, alpha - 1]
    could_be_picked = counts >= y[:, None]
    return ~np.any(could_be_picked & ~acceptable, axis=1)


def brute_force_likelihoods(sizes, alpha: int, tie_policy: str) -> list[Fraction]:
    """Exact detection likelihood for every ``k = 0 .. sum(sizes)`` by exhaustive enumeration."""
    total = sum(sizes)
    k, counts = subset_counts(sizes)
    hit = in_zero_error_region(counts, sizes, alpha, tie_policy)
    good = np.bincount(k[hit], minlength=total + 1)
    return [Fraction(int(good[j]), math.comb(total, j)) for j in range(total + 1)]


def single_elephant_exact(m: int, n: int, k: int) -> Fraction:
    """The single-elephant closed form on exact integers."""
    den = math.comb(m + n, k)
    miss = math.comb(n, k) + (m * math.comb(n, k - 1) if k >= 1 else 0)
    return 1 - Fraction(miss, den)


def two_pass_excess_kurtosis(values) -> float:
    x = np.asarray(values, dtype=float)
    d = x - x.mean()
    m2 = np.mean(d**2)
    return float(np.mean(d**4) / m2**2 - 3.0)


def sorted_partitions(max_flows: int, max_total: int):
    """All non-increasing positive size vectors with at most ``max_flows`` entries and sum ``<= max_total``."""

    def rec(prefix, remaining, cap):
        if prefix:
            yield tuple(prefix)
        if len(prefix) == max_flows:
            return
        for s in range(min(cap, remaining), 0, -1):
            yield from rec(prefix + [s], remaining - s, s)

    yield from rec([], max_total, max_total)
