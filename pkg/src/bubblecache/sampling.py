"""Random sampling of datasets and traces, quantum error, and cutoff-rate search."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from ._validation import (
    check_alpha,
    check_counts,
    check_positive_int,
    check_probability,
    check_rng,
    check_tie_policy,
)
from .likelihood import top_set_size
from .traffic import Trace, TrafficDataset, as_trace

# rows per Monte-Carlo chunk are capped so a chunk stays near this many cells
_MC_CELLS = 1 << 22


class CutoffUnreachableError(RuntimeError):
    """The target likelihood is not reached even when sampling everything."""

    def __init__(self, message: str, max_likelihood: float):
        super().__init__(message)
        self.max_likelihood = max_likelihood


@dataclass(frozen=True)
class SampleOutcome:
    """Observed per-flow counts, aligned index-for-index with a dataset."""

    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in check_counts(self.counts).tolist()))

    @property
    def k(self) -> int:
        return sum(self.counts)

    def __len__(self) -> int:
        return len(self.counts)


@dataclass(frozen=True)
class CutoffResult:
    p_c: float
    achieved_likelihood: float
    trials: int
    ci_halfwidth: float
    k: int


def _sizes(dataset) -> np.ndarray:
    if isinstance(dataset, TrafficDataset):
        return dataset.to_array()
    sizes = check_counts(dataset, "sizes")
    if sizes.min() < 1:
        raise ValueError("flow sizes must be >= 1")
    return sizes


def samples_for_rate(p: float, total: int) -> int:
    """``round(p * total)`` with halves rounded up."""
    return math.floor(p * total + 0.5)


def sample_without_replacement(dataset, k: int, seed=None) -> SampleOutcome:
    """Draw ``k`` units uniformly without replacement from the pooled flows."""
    sizes = _sizes(dataset)
    total = int(sizes.sum())
    if isinstance(k, bool) or int(k) != k or not 0 <= k <= total:
        raise ValueError(f"k must be an integer in [0, {total}], got {k}")
    rng = check_rng(seed)
    counts = rng.multivariate_hypergeometric(sizes, int(k), method="marginals")
    return SampleOutcome(tuple(counts.tolist()))


def _top_indices(values: np.ndarray, alpha: int) -> np.ndarray:
    # largest first, ties by lower index
    return np.lexsort((np.arange(len(values)), -values))[:alpha]


def quantum_error(truth, observed, alpha: int) -> float:
    """Fraction of the true top-``alpha`` flows missing from the observed top ``alpha``.

    Both rankings break ties by lower flow index.  Flows observed zero times
    are never part of the observed top set.
    """
    sizes = _sizes(truth)
    counts = np.asarray(observed.counts if isinstance(observed, SampleOutcome) else check_counts(observed))
    if len(counts) != len(sizes):
        raise ValueError(f"truth has {len(sizes)} flows but observation has {len(counts)}")
    alpha = check_alpha(alpha, len(sizes))
    true_top = _top_indices(sizes, alpha)
    seen_top = _top_indices(counts, alpha)
    seen_top = seen_top[counts[seen_top] > 0]
    return float(np.setdiff1d(true_top, seen_top).size) / alpha


def zero_error_mask(counts: np.ndarray, sizes: np.ndarray, alpha: int, tie_policy: str = "strict") -> np.ndarray:
    """Row-wise test that sampled count vectors fall in the zero-error region.

    ``counts`` has shape ``(trials, n_flows)`` with columns ordered like the
    descending ``sizes``.
    """
    t = top_set_size(sizes, alpha, tie_policy)
    if t == counts.shape[1]:
        return np.ones(counts.shape[0], dtype=bool)
    top = counts[:, :t]
    if t == alpha:
        kth = top.min(axis=1)
    else:
        kth = np.partition(top, t - alpha, axis=1)[:, t - alpha]
    return kth > counts[:, t:].max(axis=1)


def monte_carlo_detection_likelihood(
    dataset,
    *,
    k: int | None = None,
    p: float | None = None,
    alpha: int,
    trials: int = 10_000,
    seed=None,
    tie_policy: str = "strict",
) -> tuple[float, float]:
    """Estimate the detection likelihood by repeated sampling.

    Give exactly one of ``k`` (samples) or ``p`` (rate; ``k = round(p * total)``).
    Returns the fraction of trials in the zero-error region and the 95%
    normal-approximation half-width ``1.96 * sqrt(q (1 - q) / trials)``.
    """
    sizes = _sizes(dataset)
    order = np.argsort(-sizes, kind="stable")
    sizes = sizes[order]
    total = int(sizes.sum())
    alpha = check_alpha(alpha, len(sizes))
    check_tie_policy(tie_policy)
    trials = check_positive_int(trials, "trials")
    if (k is None) == (p is None):
        raise ValueError("give exactly one of k or p")
    if k is None:
        k = samples_for_rate(check_probability(p), total)
    if isinstance(k, bool) or int(k) != k or not 0 <= k <= total:
        raise ValueError(f"k must be an integer in [0, {total}], got {k}")
    rng = check_rng(seed)
    chunk = max(1, _MC_CELLS // len(sizes))
    hits = 0
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        draws = rng.multivariate_hypergeometric(sizes, int(k), size=n, method="marginals")
        hits += int(zero_error_mask(draws, sizes, alpha, tie_policy).sum())
        done += n
    q = hits / trials
    return q, 1.96 * math.sqrt(q * (1.0 - q) / trials)


def find_cutoff_rate(
    dataset,
    alpha: int,
    target: float = 0.99,
    *,
    trials: int = 10_000,
    seed=0,
    tie_policy: str = "tolerant",
    resolution: int = 1000,
) -> CutoffResult:
    """Smallest rate on a ``1/resolution`` grid whose estimated likelihood reaches ``target``.

    The likelihood is treated as non-decreasing in ``p`` and located by
    bisection over grid indices.  Each sample count ``k`` draws from its own
    stream derived from ``(seed, k)``, so an estimate does not depend on the
    order in which points are probed.
    """
    target = float(target)
    if not 0.0 < target < 1.0:
        raise ValueError(f"target must lie in (0, 1), got {target}")
    sizes = _sizes(dataset)
    total = int(sizes.sum())
    base = int(seed)
    cache: dict[int, tuple[float, float]] = {}

    def probe(j: int) -> tuple[float, float]:
        k = (2 * j * total + resolution) // (2 * resolution)
        if k not in cache:
            cache[k] = monte_carlo_detection_likelihood(
                sizes, k=k, alpha=alpha, trials=trials, seed=[base, k], tie_policy=tie_policy
            )
        return cache[k]

    top, _ = probe(resolution)
    if top < target:
        raise CutoffUnreachableError(
            f"target likelihood {target} is unreachable; maximum achieved at p=1 is {top:.6f}", top
        )
    lo, hi = 0, resolution
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if probe(mid)[0] >= target:
            hi = mid
        else:
            lo = mid
    est, ci = probe(hi)
    k = (2 * hi * total + resolution) // (2 * resolution)
    return CutoffResult(hi / resolution, est, trials, ci, k)


def bernoulli_sample_trace(events, p: float, seed=None) -> Trace:
    """Keep each event independently with probability ``p``."""
    trace = as_trace(events)
    p = check_probability(p)
    rng = check_rng(seed)
    keep = rng.random(len(trace)) < p
    return trace.select(keep)


class BernoulliSampler(TransformerMixin, BaseEstimator):
    """Fixed-rate packet sampler with the scikit-learn transformer interface.

    ``transform`` keeps each event of a trace with probability ``p``; repeated
    calls continue the same random stream started by ``fit``.
    """

    def __init__(self, p: float = 1.0, seed=None):
        self.p = p
        self.seed = seed

    def fit(self, X=None, y=None):
        check_probability(self.p)
        self.rng_ = check_rng(self.seed)
        return self

    def transform(self, X) -> Trace:
        if not hasattr(self, "rng_"):
            raise NotFittedError("BernoulliSampler is not fitted yet; call fit first")
        return bernoulli_sample_trace(X, self.p, self.rng_)
