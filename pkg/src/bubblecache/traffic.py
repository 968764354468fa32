"""Flow-size datasets, synthetic packet traces and the trace/truth CSV formats.

A dataset is the vector of true flow sizes sorted from largest to smallest.
Flow ``i`` of a generated dataset (0-based position) gets ``flow_id = i + 1``
in every trace and truth file produced here, so the two line up.
"""

from __future__ import annotations

import enum
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np

from ._validation import check_positive_int, check_rng

TRACE_HEADER = "ts_ns,flow_id,bytes"
TRUTH_HEADER = "flow_id,total_size"
DEFAULT_MTU = 1500


class Metric(str, enum.Enum):
    PACKETS = "packets"
    BYTES = "bytes"


class Distribution(str, enum.Enum):
    LAPLACE = "laplace"
    CAUCHY = "cauchy"
    SECH2 = "sech2"
    GAUSSIAN = "gaussian"
    LINEAR = "linear"


@dataclass(frozen=True)
class SingleElephant:
    """One flow of ``m`` packets next to ``n`` single-packet flows."""

    m: int
    n: int

    def __post_init__(self):
        check_positive_int(self.m, "m")
        check_positive_int(self.n, "n")


DistributionKind = Union[Distribution, SingleElephant]


class TraceFormatError(ValueError):
    """A trace or truth file does not follow the expected CSV layout."""


@dataclass(frozen=True)
class TrafficDataset:
    """True flow sizes ``sizes[0] >= sizes[1] >= ... >= 1``."""

    sizes: tuple[int, ...]
    metric: Metric = Metric.PACKETS
    label: str = ""

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes:
            raise ValueError("a dataset needs at least one flow")
        if min(sizes) < 1:
            raise ValueError("every flow size must be >= 1")
        if any(a < b for a, b in zip(sizes, sizes[1:])):
            raise ValueError("sizes must be sorted in non-increasing order")
        if sum(sizes) > 2**53:
            raise ValueError("total size exceeds 2**53")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "metric", Metric(self.metric))

    @classmethod
    def from_sizes(cls, sizes: Iterable[int], metric=Metric.PACKETS, label: str = "") -> "TrafficDataset":
        """Build a dataset from sizes in any order (sorted descending here)."""
        return cls(tuple(sorted((int(s) for s in sizes), reverse=True)), metric, label)

    @property
    def total(self) -> int:
        return sum(self.sizes)

    @property
    def n_flows(self) -> int:
        return len(self.sizes)

    def __len__(self) -> int:
        return len(self.sizes)

    def to_array(self) -> np.ndarray:
        return np.asarray(self.sizes, dtype=np.int64)

    def as_truth(self) -> dict[int, int]:
        """Mapping ``flow_id -> size`` using the ``flow_id = index + 1`` convention."""
        return {i + 1: s for i, s in enumerate(self.sizes)}


def _shape(kind: Distribution, flows: int) -> np.ndarray:
    i = np.arange(flows, dtype=float)
    if kind is Distribution.LAPLACE:
        return 0.5 * np.exp(-np.abs(i))
    if kind is Distribution.CAUCHY:
        return 1.0 / (np.pi * (1.0 + i**2))
    if kind is Distribution.SECH2:
        return np.exp(-i) / (1.0 + np.exp(-i)) ** 2
    if kind is Distribution.GAUSSIAN:
        return np.exp(-(i**2) / 2.0) / np.sqrt(2.0 * np.pi)
    if kind is Distribution.LINEAR:
        return flows - i
    raise ValueError(f"unknown distribution {kind!r}")


def _integerize(shape: np.ndarray, total: int) -> np.ndarray:
    # sizes(g) = max(round_half_up(g * shape), 1) is non-decreasing in g; take
    # the largest g whose sum does not overshoot and put any residual on flow 0.
    shape = shape / shape.sum()

    def sizes_at(gamma: float) -> np.ndarray:
        return np.maximum(np.floor(gamma * shape + 0.5), 1.0).astype(np.int64)

    lo, hi = 0.0, float(total)
    while sizes_at(hi).sum() <= total:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if sizes_at(mid).sum() <= total:
            lo = mid
        else:
            hi = mid
    sizes = sizes_at(lo)
    sizes[0] += total - int(sizes.sum())
    return sizes


def parse_distribution(kind) -> DistributionKind:
    if isinstance(kind, (Distribution, SingleElephant)):
        return kind
    name = str(kind).lower().replace("-", "_")
    if name in ("single_elephant", "single"):
        raise ValueError("single_elephant needs m and n; pass SingleElephant(m, n)")
    return Distribution(name)


def generate_distribution(kind, flows: int | None = None, total: int | None = None) -> TrafficDataset:
    """Integer flow sizes following one of the reference shapes.

    The five smooth shapes are evaluated at ``i = 0 .. flows - 1``.  The
    scale factor is chosen so that, after rounding half-up and flooring every
    flow at one unit, the sizes add up to ``total`` exactly.

    >>> generate_distribution("linear", 40, 300).sizes[:4]
    (15, 14, 14, 14)
    >>> generate_distribution(SingleElephant(5, 3)).sizes
    (5, 1, 1, 1)
    """
    kind = parse_distribution(kind)
    if isinstance(kind, SingleElephant):
        return TrafficDataset((kind.m,) + (1,) * kind.n, Metric.PACKETS, f"single_elephant(m={kind.m},n={kind.n})")
    flows = check_positive_int(flows, "flows")
    total = check_positive_int(total, "total")
    if total < flows:
        raise ValueError(f"total={total} cannot give each of {flows} flows at least one unit")
    sizes = _integerize(_shape(kind, flows), total)
    return TrafficDataset(tuple(sizes.tolist()), Metric.PACKETS, kind.value)


class PacketEvent(NamedTuple):
    timestamp_ns: int
    flow_id: int
    size: int


@dataclass(frozen=True, eq=False)
class Trace:
    """A time-ordered packet trace stored column-wise.

    Iterating yields :class:`PacketEvent` tuples; the arrays are what the
    vectorised code paths consume.
    """

    timestamp_ns: np.ndarray
    flow_id: np.ndarray
    size: np.ndarray
    _validated: bool = field(default=False, repr=False)

    def __post_init__(self):
        ts = np.array(self.timestamp_ns, dtype=np.int64).reshape(-1)
        fid = np.array(self.flow_id, dtype=np.int64).reshape(-1)
        size = np.array(self.size, dtype=np.int64).reshape(-1)
        if not (len(ts) == len(fid) == len(size)):
            raise ValueError("trace columns must have equal length")
        if not self._validated:
            if len(ts) and ts[0] < 0:
                raise ValueError("timestamps must be non-negative")
            if np.any(np.diff(ts) < 0):
                raise ValueError("timestamps must be non-decreasing")
            if np.any(size < 1):
                raise ValueError("event sizes must be positive")
        for arr in (ts, fid, size):
            arr.setflags(write=False)
        object.__setattr__(self, "timestamp_ns", ts)
        object.__setattr__(self, "flow_id", fid)
        object.__setattr__(self, "size", size)

    @classmethod
    def from_events(cls, events: Iterable) -> "Trace":
        rows = [tuple(e) for e in events]
        if not rows:
            return cls.empty()
        ts, fid, size = zip(*rows)
        return cls(np.array(ts), np.array(fid), np.array(size))

    @classmethod
    def empty(cls) -> "Trace":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z, z)

    def __len__(self) -> int:
        return len(self.timestamp_ns)

    def __iter__(self) -> Iterator[PacketEvent]:
        for ts, fid, size in zip(self.timestamp_ns.tolist(), self.flow_id.tolist(), self.size.tolist()):
            yield PacketEvent(ts, fid, size)

    def __getitem__(self, index):
        if isinstance(index, (int, np.integer)):
            return PacketEvent(int(self.timestamp_ns[index]), int(self.flow_id[index]), int(self.size[index]))
        if isinstance(index, slice) and index.step not in (None, 1):
            raise ValueError("trace slices must keep time order")
        return self.select(index)

    def select(self, index) -> "Trace":
        """Sub-trace from a boolean mask, increasing index array or slice."""
        return Trace(self.timestamp_ns[index], self.flow_id[index], self.size[index], _validated=True)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            np.array_equal(self.timestamp_ns, other.timestamp_ns)
            and np.array_equal(self.flow_id, other.flow_id)
            and np.array_equal(self.size, other.size)
        )

    __hash__ = None

    def flow_totals(self, metric=Metric.PACKETS) -> dict[int, int]:
        """Per-flow packet counts (or byte sums) seen in the trace."""
        ids, inverse = np.unique(self.flow_id, return_inverse=True)
        if Metric(metric) is Metric.BYTES:
            totals = np.bincount(inverse, weights=self.size, minlength=len(ids))
        else:
            totals = np.bincount(inverse, minlength=len(ids))
        return dict(zip(ids.tolist(), totals.astype(np.int64).tolist()))


def as_trace(events) -> Trace:
    if isinstance(events, Trace):
        return events
    return Trace.from_events(events)


def generate_trace(
    dataset: TrafficDataset,
    seed,
    duration_ns: int,
    *,
    mtu: int = DEFAULT_MTU,
    flow_span_ns: int | None = None,
) -> Trace:
    """Materialise ``dataset`` as a packet trace.

    With the packets metric flow ``i`` emits ``sizes[i]`` events of size 1;
    with the bytes metric it emits ``ceil(sizes[i] / mtu)`` events of ``mtu``
    bytes, the last one carrying the remainder.  The interleaving of flows is
    uniformly random and timestamps are uniform over ``[0, duration_ns]``.

    ``flow_span_ns`` confines each flow to a random active interval of that
    length inside the trace, which makes large flows bursty.  ``None`` (the
    default) lets every flow span the whole duration.
    """
    duration_ns = check_positive_int(duration_ns, "duration_ns")
    rng = check_rng(seed)
    sizes = dataset.to_array()
    flow_ids = np.arange(1, len(sizes) + 1, dtype=np.int64)

    if dataset.metric is Metric.BYTES:
        mtu = check_positive_int(mtu, "mtu")
        n_events = -(-sizes // mtu)
        fid = np.repeat(flow_ids, n_events)
        ev_size = np.full(len(fid), mtu, dtype=np.int64)
        last = np.cumsum(n_events) - 1
        remainder = sizes - (n_events - 1) * mtu
        ev_size[last] = remainder
    else:
        fid = np.repeat(flow_ids, sizes)
        ev_size = np.ones(len(fid), dtype=np.int64)

    order = rng.permutation(len(fid))
    fid, ev_size = fid[order], ev_size[order]
    if flow_span_ns is None or flow_span_ns >= duration_ns:
        ts = np.sort(rng.integers(0, duration_ns, size=len(fid), endpoint=True))
    else:
        span = check_positive_int(flow_span_ns, "flow_span_ns")
        start = rng.integers(0, duration_ns - span, size=len(sizes), endpoint=True)
        ts = start[fid - 1] + rng.integers(0, span, size=len(fid), endpoint=True)
        by_time = np.argsort(ts, kind="stable")
        ts, fid, ev_size = ts[by_time], fid[by_time], ev_size[by_time]
    return Trace(ts, fid, ev_size, _validated=True)


def _data_lines(path: Path, header: str) -> Iterator[tuple[int, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        seen_header = False
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not seen_header:
                if line.startswith("#") or not line.strip():
                    continue
                if line.strip() != header:
                    raise TraceFormatError(f"{path}:{lineno}: expected header {header!r}, got {line!r}")
                seen_header = True
                continue
            if not line.strip():
                continue
            yield lineno, line
        if not seen_header:
            raise TraceFormatError(f"{path}: missing header {header!r}")


def _parse_ints(path, lineno: int, line: str, n: int) -> list[int]:
    parts = line.split(",")
    if len(parts) != n:
        raise TraceFormatError(f"{path}:{lineno}: expected {n} fields, got {len(parts)}: {line!r}")
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise TraceFormatError(f"{path}:{lineno}: non-integer field in {line!r}") from None


def read_trace(path) -> Trace:
    """Read a trace CSV (``ts_ns,flow_id,bytes``); leading ``#`` lines are skipped."""
    path = Path(path)
    ts, fid, size = [], [], []
    prev = 0
    for lineno, line in _data_lines(path, TRACE_HEADER):
        t, f, s = _parse_ints(path, lineno, line, 3)
        if t < 0:
            raise TraceFormatError(f"{path}:{lineno}: negative timestamp {t}")
        if t < prev:
            raise TraceFormatError(f"{path}:{lineno}: timestamp {t} is earlier than the previous event ({prev})")
        if s < 1:
            raise TraceFormatError(f"{path}:{lineno}: event size must be positive, got {s}")
        prev = t
        ts.append(t)
        fid.append(f)
        size.append(s)
    return Trace(np.array(ts, dtype=np.int64), np.array(fid, dtype=np.int64), np.array(size, dtype=np.int64), _validated=True)


def _write_comments(fh, comments: Iterable[str]) -> None:
    for c in comments:
        for line in str(c).splitlines() or [""]:
            fh.write(f"# {line}\n" if line else "#\n")


def write_trace(events, path, comments: Iterable[str] = ()) -> None:
    trace = as_trace(events)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        _write_comments(fh, comments)
        fh.write(TRACE_HEADER + "\n")
        cols = np.column_stack([trace.timestamp_ns, trace.flow_id, trace.size])
        if len(cols):
            fh.write("\n".join(",".join(map(str, row)) for row in cols.tolist()))
            fh.write("\n")


def write_truth(truth, path, comments: Iterable[str] = ()) -> None:
    """Write ``flow_id,total_size`` rows from a dataset or a ``{flow_id: size}`` mapping."""
    if isinstance(truth, TrafficDataset):
        truth = truth.as_truth()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        _write_comments(fh, comments)
        fh.write(TRUTH_HEADER + "\n")
        for flow_id, size in truth.items():
            fh.write(f"{flow_id},{size}\n")


def read_truth(path) -> dict[int, int]:
    path = Path(path)
    truth: dict[int, int] = {}
    for lineno, line in _data_lines(path, TRUTH_HEADER):
        flow_id, size = _parse_ints(path, lineno, line, 2)
        if size < 1:
            raise TraceFormatError(f"{path}:{lineno}: flow size must be positive, got {size}")
        if flow_id in truth:
            raise TraceFormatError(f"{path}:{lineno}: duplicate flow_id {flow_id}")
        truth[flow_id] = size
    if not truth:
        raise TraceFormatError(f"{path}: no flows")
    return truth


def truth_order(truth: Mapping[int, int] | TrafficDataset) -> tuple[list[int], TrafficDataset]:
    """Flow ids ranked by true size (ties by lower id) and the matching dataset."""
    if isinstance(truth, TrafficDataset):
        return list(range(1, truth.n_flows + 1)), truth
    ranked = sorted(truth.items(), key=lambda kv: (-kv[1], kv[0]))
    ids = [fid for fid, _ in ranked]
    return ids, TrafficDataset(tuple(s for _, s in ranked))


def excess_kurtosis_of(dataset: TrafficDataset) -> float:
    """Excess kurtosis of the dataset's flow sizes (population moments)."""
    from .moments import batch_kurtosis

    return batch_kurtosis(dataset.sizes)
