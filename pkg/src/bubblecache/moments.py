"""One-pass central moments up to fourth order and the kurtosis built on them.

Updates follow the single-value and pairwise-merge recurrences of Pébay
(SAND2008-6212), so partial accumulators computed on separate partitions can
be combined without revisiting the data.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np


class UndefinedKurtosisError(ValueError):
    """Kurtosis needs at least two values with non-zero spread."""


@dataclass
class MomentAccumulator:
    """Running count, mean and centred power sums ``m2``, ``m3``, ``m4``.

    >>> acc = MomentAccumulator().extend([0, 0, 0, 1])
    >>> round(acc.excess_kurtosis(), 12)
    -0.666666666667
    """

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0
    m3: float = 0.0
    m4: float = 0.0

    def push(self, value: float) -> "MomentAccumulator":
        x = float(value)
        n1 = self.n
        n = n1 + 1
        delta = x - self.mean
        delta_n = delta / n
        delta_n2 = delta_n * delta_n
        term1 = delta * delta_n * n1
        self.mean += delta_n
        self.m4 += term1 * delta_n2 * (n * n - 3 * n + 3) + 6.0 * delta_n2 * self.m2 - 4.0 * delta_n * self.m3
        self.m3 += term1 * delta_n * (n - 2) - 3.0 * delta_n * self.m2
        self.m2 += term1
        self.n = n
        return self

    def extend(self, values: Iterable[float]) -> "MomentAccumulator":
        for v in values:
            self.push(v)
        return self

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        """Accumulator for the union of both value streams (neither input is modified)."""
        a, b = self, other
        if a.n == 0:
            return b.copy()
        if b.n == 0:
            return a.copy()
        na, nb = float(a.n), float(b.n)
        n = na + nb
        delta = b.mean - a.mean
        d2 = delta * delta
        d3 = d2 * delta
        d4 = d2 * d2
        mean = a.mean + delta * nb / n
        m2 = a.m2 + b.m2 + d2 * na * nb / n
        m3 = a.m3 + b.m3 + d3 * na * nb * (na - nb) / (n * n) + 3.0 * delta * (na * b.m2 - nb * a.m2) / n
        m4 = (
            a.m4
            + b.m4
            + d4 * na * nb * (na * na - na * nb + nb * nb) / (n**3)
            + 6.0 * d2 * (na * na * b.m2 + nb * nb * a.m2) / (n * n)
            + 4.0 * delta * (na * b.m3 - nb * a.m3) / n
        )
        return MomentAccumulator(a.n + b.n, mean, m2, m3, m4)

    __add__ = merge

    def copy(self) -> "MomentAccumulator":
        return MomentAccumulator(self.n, self.mean, self.m2, self.m3, self.m4)

    @property
    def variance(self) -> float:
        """Population variance (``m2 / n``)."""
        return self.m2 / self.n if self.n else 0.0

    def raw_kurtosis(self) -> float:
        """Fourth standardised moment ``n * m4 / m2**2``."""
        if self.n < 2 or not self.m2 > 0.0:
            raise UndefinedKurtosisError("undefined kurtosis: need at least two values with non-zero variance")
        return self.n * self.m4 / (self.m2 * self.m2)

    def excess_kurtosis(self) -> float:
        return self.raw_kurtosis() - 3.0


def push(acc: MomentAccumulator, value: float) -> MomentAccumulator:
    """Functional form of :meth:`MomentAccumulator.push` (returns a new accumulator)."""
    return acc.copy().push(value)


def merge(a: MomentAccumulator, b: MomentAccumulator) -> MomentAccumulator:
    return a.merge(b)


def excess_kurtosis(acc: MomentAccumulator) -> float:
    return acc.excess_kurtosis()


def batch_kurtosis(values, *, excess: bool = True) -> float:
    """Two-pass kurtosis of ``values`` with population moments.

    Raises :class:`UndefinedKurtosisError` for fewer than two values or a
    constant sequence.
    """
    x = np.asarray(values, dtype=float).reshape(-1)
    if x.size < 2:
        raise UndefinedKurtosisError("undefined kurtosis: need at least two values")
    if x.max() == x.min():
        raise UndefinedKurtosisError("undefined kurtosis: zero variance")
    d = x - x.mean()
    m2 = float(np.mean(d * d))
    if not m2 > 0.0 or not math.isfinite(m2):
        raise UndefinedKurtosisError("undefined kurtosis: zero variance")
    kurt = float(np.mean(d**4)) / (m2 * m2)
    return kurt - 3.0 if excess else kurt


def kurtosis_or_nan(values) -> float:
    """Excess kurtosis, or ``nan`` when it is undefined."""
    try:
        return batch_kurtosis(values)
    except UndefinedKurtosisError:
        return math.nan
