"""Input validation helpers shared by the public API."""

from __future__ import annotations

import numbers
import re
from decimal import Decimal, InvalidOperation

import numpy as np

TIE_POLICIES = ("strict", "tolerant")


def check_rng(seed) -> np.random.Generator:
    """Turn ``seed`` into a ``numpy.random.Generator``.

    ``None`` gives a fresh unseeded generator, an int or a sequence of ints
    seeds a new PCG64 stream and an existing generator is passed through.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def check_positive_int(value, name: str, *, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_probability(value, name: str = "p", *, open_low: bool = False) -> float:
    value = float(value)
    if not np.isfinite(value) or value < 0.0 or value > 1.0 or (open_low and value == 0.0):
        bounds = "(0, 1]" if open_low else "[0, 1]"
        raise ValueError(f"{name} must lie in {bounds}, got {value}")
    return value


def check_tie_policy(policy: str) -> str:
    if policy not in TIE_POLICIES:
        raise ValueError(f"tie_policy must be one of {TIE_POLICIES}, got {policy!r}")
    return policy


def check_alpha(alpha, n_flows: int) -> int:
    alpha = check_positive_int(alpha, "alpha")
    if alpha > n_flows:
        raise ValueError(f"alpha={alpha} exceeds the number of flows ({n_flows})")
    return alpha


def check_counts(values, name: str = "counts") -> np.ndarray:
    """Return ``values`` as a 1-d int64 array of non-negative integers."""
    arr = np.asarray(values)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d sequence")
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise ValueError(f"{name} must contain integers")
    elif arr.dtype.kind not in "iu":
        raise TypeError(f"{name} must contain integers, got dtype {arr.dtype}")
    arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise ValueError(f"{name} must be non-negative")
    return arr


_DURATION = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(ns|us|ms|s)\s*$")
_UNIT_NS = {"ns": 1, "us": 1_000, "ms": 1_000_000, "s": 1_000_000_000}


def parse_duration_ns(text: str) -> int:
    """Parse ``"20s"``, ``"0.05s"``, ``"50ms"``, ``"10us"`` or ``"7ns"`` into integer nanoseconds."""
    match = _DURATION.match(str(text))
    if match is None:
        raise ValueError(f"invalid duration {text!r}; expected a number with an s/ms/us/ns suffix")
    try:
        value = Decimal(match.group(1)) * _UNIT_NS[match.group(2)]
    except InvalidOperation as exc:  # pragma: no cover - regex already filters
        raise ValueError(f"invalid duration {text!r}") from exc
    if value != value.to_integral_value():
        raise ValueError(f"duration {text!r} is not a whole number of nanoseconds")
    return int(value)
