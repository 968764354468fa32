"""Exact top-flow detection likelihoods.

Sampling ``k`` units without replacement from flows of sizes ``sigma`` gives
per-flow counts that follow a multivariate hypergeometric law.  The detection
likelihood is the probability mass of the zero-error region: count vectors
whose top ``alpha`` flows are exactly the true top ``alpha``.

The general computation works on exact Python integers, so it never
overflows and the float result is correctly rounded.  It is still limited by
an enumeration budget so callers reach for the Monte-Carlo estimator in
:mod:`bubblecache.sampling` on large instances.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from fractions import Fraction

from ._validation import check_alpha, check_counts, check_probability, check_tie_policy

DEFAULT_MAX_FLOWS = 8
DEFAULT_MAX_TOTAL = 64


class EnumerationBudgetError(ValueError):
    """The instance is too large for exact evaluation."""


def log_binom(n: int, k: int) -> float:
    """``log C(n, k)`` via log-gamma; ``-inf`` when ``k < 0`` or ``k > n``."""
    if k < 0 or k > n or n < 0:
        return -math.inf
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def detect_single_elephant(m: int, n: int, k: int) -> float:
    """Probability that ``k`` samples identify one ``m``-packet flow among ``n`` singletons.

    The elephant is identified once at least two of its packets are sampled:
    ``1 - C(n,k)/C(m+n,k) - m*C(n,k-1)/C(m+n,k)`` with ``C(a,b) = 0`` outside
    ``0 <= b <= a``.  A one-packet "elephant" (``m == 1``) can never be told
    apart, fewer than two samples cannot contain two elephant packets, and
    ``k > n + 1`` forces at least two of them.
    """
    for name, value, lo in (("m", m, 1), ("n", n, 1), ("k", k, 0)):
        if isinstance(value, bool) or int(value) != value or value < lo:
            raise ValueError(f"{name} must be an integer >= {lo}, got {value}")
    m, n, k = int(m), int(n), int(k)
    if k > m + n:
        raise ValueError(f"cannot take k={k} samples from {m + n} packets")
    if m == 1 or k < 2:
        return 0.0
    if k > n + 1:
        return 1.0
    log_den = log_binom(m + n, k)
    miss_all = math.exp(log_binom(n, k) - log_den)
    miss_one = m * math.exp(log_binom(n, k - 1) - log_den)
    return min(1.0, max(0.0, 1.0 - miss_all - miss_one))


def top_set_size(sizes: Sequence[int], alpha: int, tie_policy: str = "strict") -> int:
    """How many leading flows (sorted descending) count as a valid top-``alpha`` member.

    ``strict`` uses exactly the first ``alpha``; ``tolerant`` also admits every
    flow whose true size ties the ``alpha``-th largest.
    """
    if tie_policy == "strict":
        return alpha
    threshold = sizes[alpha - 1]
    t = alpha
    while t < len(sizes) and sizes[t] >= threshold:
        t += 1
    return t


def _mul(a: list[int], b: list[int], deg: int) -> list[int]:
    out = [0] * (deg + 1)
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j, bj in enumerate(b[: deg - i + 1]):
            if bj:
                out[i + j] += ai * bj
    return out


def _add(a: list[int], b: list[int]) -> list[int]:
    return [x + y for x, y in zip(a, b)]


def _at_least(top: Sequence[int], alpha: int, y: int, k: int) -> list[int]:
    # Generating polynomial (in total count) of the top flows' configurations
    # with at least `alpha` flows holding >= y units.
    states = [[0] * (k + 1) for _ in range(alpha + 1)]
    states[0][0] = 1
    for s in top:
        low = [math.comb(s, x) if x < y else 0 for x in range(min(s, k) + 1)]
        high = [math.comb(s, x) if x >= y else 0 for x in range(min(s, k) + 1)]
        nxt = [[0] * (k + 1) for _ in range(alpha + 1)]
        for c, poly in enumerate(states):
            if not any(poly):
                continue
            nxt[c] = _add(nxt[c], _mul(poly, low, k))
            c2 = min(alpha, c + 1)
            nxt[c2] = _add(nxt[c2], _mul(poly, high, k))
        states = nxt
    return states[alpha]


def zero_error_weight(sizes: Sequence[int], k: int, alpha: int, tie_policy: str = "strict") -> int:
    """Number of ``k``-subsets of the pooled units that land in the zero-error region.

    ``sizes`` must be sorted in non-increasing order.  A count vector is in
    the region when its ``alpha``-th largest count among the admissible top
    flows (see :func:`top_set_size`) exceeds every other flow's count.
    """
    t = top_set_size(sizes, alpha, tie_policy)
    top, rest = sizes[:t], sizes[t:]
    if not rest:
        return math.comb(sum(sizes), k)
    y_max = sorted(top, reverse=True)[alpha - 1]
    at_least = [_at_least(top, alpha, y, k) for y in range(1, y_max + 2)]
    total = 0
    for y in range(1, y_max + 1):
        exact_y = [a - b for a, b in zip(at_least[y - 1], at_least[y])]
        if not any(exact_y):
            continue
        below = [1] + [0] * k
        for s in rest:
            below = _mul(below, [math.comb(s, x) for x in range(min(s, y - 1, k) + 1)], k)
        total += sum(exact_y[r] * below[k - r] for r in range(k + 1))
    return total


def _prepare(sizes, k, alpha, tie_policy, max_flows, max_total):
    arr = check_counts(sizes, "sizes")
    if arr.min() < 1:
        raise ValueError("flow sizes must be >= 1")
    sigma = sorted(arr.tolist(), reverse=True)
    alpha = check_alpha(alpha, len(sigma))
    check_tie_policy(tie_policy)
    total = sum(sigma)
    if isinstance(k, bool) or int(k) != k or not 0 <= k <= total:
        raise ValueError(f"k must be an integer in [0, {total}], got {k}")
    if (max_flows is not None and len(sigma) > max_flows) or (max_total is not None and total > max_total):
        raise EnumerationBudgetError(
            f"exact evaluation is limited to {max_flows} flows and total size {max_total} "
            f"(got {len(sigma)} flows, total {total}); use the Monte-Carlo estimator instead"
        )
    return sigma, int(k), alpha, total


def exact_detection_likelihood(
    sizes: Sequence[int],
    k: int,
    alpha: int,
    tie_policy: str = "strict",
    *,
    exact: bool = False,
    max_flows: int | None = DEFAULT_MAX_FLOWS,
    max_total: int | None = DEFAULT_MAX_TOTAL,
) -> float | Fraction:
    """Probability that ``k`` samples without replacement recover the top ``alpha`` flows.

    Parameters
    ----------
    sizes : sequence of int
        True flow sizes (any order; ties are ranked by position).
    k : int
        Number of sampled units, ``0 <= k <= sum(sizes)``.
    alpha : int
        Size of the top set to recover.
    tie_policy : {"strict", "tolerant"}
        ``strict`` demands every true top-``alpha`` count to exceed every
        other count.  ``tolerant`` accepts flows tied with the ``alpha``-th
        largest true size as top members.
    exact : bool
        Return a :class:`fractions.Fraction` instead of a float.
    max_flows, max_total : int or None
        Enumeration budget; ``None`` lifts the limit.
    """
    sigma, k, alpha, total = _prepare(sizes, k, alpha, tie_policy, max_flows, max_total)
    value = Fraction(zero_error_weight(sigma, k, alpha, tie_policy), math.comb(total, k))
    return value if exact else float(value)


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def estimated_sizes(counts, p: float) -> list[int]:
    """Size estimates ``round(x_i / p)``, never below the observed count."""
    x = check_counts(counts)
    p = check_probability(p, open_low=True)
    return [max(round_half_up(xi / p), xi) for xi in x.tolist()]


def estimated_detection_likelihood(
    counts,
    p: float,
    alpha: int,
    tie_policy: str = "strict",
    **budget,
) -> float | Fraction:
    """Detection likelihood with true sizes replaced by their estimates ``x_i / p``.

    The number of samples is the observed total ``sum(counts)``.  At ``p = 1``
    this is :func:`exact_detection_likelihood` on the counts themselves.
    Flows never observed carry no estimate and are dropped.
    """
    x = check_counts(counts)
    if x.sum() == 0:
        raise ValueError("at least one flow must have a positive count")
    sigma_hat = [s for s in estimated_sizes(x, p) if s > 0]
    return exact_detection_likelihood(sigma_hat, int(x.sum()), alpha, tie_policy, **budget)


def _check_rho_args(sigma: int, x_i: int, x_j: int) -> int:
    if not 0 <= x_j <= x_i <= sigma:
        raise ValueError(f"need 0 <= x_j <= x_i <= sigma, got sigma={sigma}, x_i={x_i}, x_j={x_j}")
    if (x_i + x_j) % 2:
        raise ValueError("x_i + x_j must be even so the midpoint is an integer")
    return (x_i + x_j) // 2


def rho(sigma: int, x_i: int, x_j: int) -> float:
    """Likelihood ratio of observing ``(x_i, x_j)`` versus the midpoint pair for two equal flows.

    ``C(sigma, x_i) * C(sigma, x_j) / C(sigma, mid)**2`` with
    ``mid = (x_i + x_j) / 2``, evaluated in log space.
    """
    mid = _check_rho_args(sigma, x_i, x_j)
    return math.exp(log_binom(sigma, x_i) + log_binom(sigma, x_j) - 2.0 * log_binom(sigma, mid))


def rho_product(sigma: int, x_i: int, x_j: int) -> float:
    """Same ratio as :func:`rho`, from the telescoped factor products."""
    mid = _check_rho_args(sigma, x_i, x_j)
    half = (x_i - x_j) // 2
    value = 1.0
    for step in range(1, half + 1):
        value *= (x_j + step) / (mid + step)
        value *= (sigma - x_i + step) / (sigma - mid + step)
    return value
