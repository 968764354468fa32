"""The BubbleCache engine: adaptive Bernoulli sampling steered by cache kurtosis.

Every packet is sampled with probability ``p``.  Sampled packets grow their
flow's record.  Every ``T_h`` of trace time a housekeeping pass computes the
excess kurtosis of the resident flow sizes.  It raises ``p`` by ``delta_p``
while the distribution looks light-tailed (kurtosis below ``phi``) and lowers
it otherwise, then evicts flows idle for more than ``T_i``.

Time is virtual: the clock only moves with event timestamps, and housekeeping
boundaries are anchored at the first event, so a replay is a pure function
of the configuration and the trace.
"""

from __future__ import annotations

import heapq
import math
from collections.abc import Mapping
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ._validation import check_positive_int, check_probability, check_rng
from .moments import kurtosis_or_nan
from .sampling import quantum_error
from .traffic import Metric, _write_comments, as_trace, truth_order

SNAPSHOT_HEADER = "ts_ns,p,kurtosis,cache_size,packets_seen,packets_sampled,evictions"


@dataclass(frozen=True)
class BubbleCacheConfig:
    phi: float = 100.0
    delta_p: float = 0.01
    t_inactive_ns: int = 20_000_000_000
    t_house_ns: int = 50_000_000
    p_init: float = 1.0
    p_min: float = 1e-5
    p_max: float = 1.0
    metric: Metric = Metric.PACKETS
    alpha_report: int = 5
    seed: int = 0

    def __post_init__(self):
        if not math.isfinite(float(self.phi)):
            raise ValueError(f"phi must be finite, got {self.phi}")
        if not float(self.delta_p) > 0.0:
            raise ValueError(f"delta_p must be > 0, got {self.delta_p}")
        check_positive_int(self.t_inactive_ns, "t_inactive_ns")
        check_positive_int(self.t_house_ns, "t_house_ns")
        p_min = check_probability(self.p_min, "p_min", open_low=True)
        p_max = check_probability(self.p_max, "p_max", open_low=True)
        if p_min > p_max:
            raise ValueError(f"p_min={p_min} exceeds p_max={p_max}")
        # an out-of-range start is clamped rather than rejected
        check_probability(self.p_init, "p_init")
        object.__setattr__(self, "metric", Metric(self.metric))
        check_positive_int(self.alpha_report, "alpha_report")


@dataclass(frozen=True)
class FlowRecord:
    flow_id: int
    size: int
    last_seen_ns: int


@dataclass(frozen=True)
class Snapshot:
    ts_ns: int
    p: float
    kurtosis: float
    cache_size: int
    top: tuple[tuple[int, int], ...]
    packets_seen: int
    packets_sampled: int
    evictions: int

    def csv_row(self) -> str:
        kurt = "nan" if math.isnan(self.kurtosis) else f"{self.kurtosis:.6f}"
        return (
            f"{self.ts_ns},{self.p:.10g},{kurt},{self.cache_size},"
            f"{self.packets_seen},{self.packets_sampled},{self.evictions}"
        )


@dataclass
class VirtualClock:
    """Trace time; ``now_ns`` is ``None`` until the first event arrives."""

    now_ns: int | None = None

    def advance(self, ts_ns: int) -> None:
        if self.now_ns is not None and ts_ns < self.now_ns:
            raise ValueError(f"out-of-order timestamp {ts_ns} < clock {self.now_ns}")
        self.now_ns = int(ts_ns)


@dataclass(frozen=True)
class FinalReport:
    p: float
    kurtosis: float
    cache_size: int
    top: tuple[tuple[int, int], ...]
    alpha: int
    qer: float | None = None


class BubbleCache(BaseEstimator):
    """Adaptive flow cache that tracks the cutoff sampling rate of the traffic.

    Parameters mirror :class:`BubbleCacheConfig`.  ``fit`` replays a whole
    trace from a fresh state; ``partial_fit`` and ``on_packet`` continue the
    current replay.  Both paths draw one uniform per packet from the same
    seeded stream, so they produce identical results.

    Attributes
    ----------
    p_ : float
        Current sampling rate.
    snapshots_ : list of Snapshot
        One entry per housekeeping pass, in time order.
    """

    def __init__(
        self,
        phi: float = 100.0,
        delta_p: float = 0.01,
        t_inactive_ns: int = 20_000_000_000,
        t_house_ns: int = 50_000_000,
        p_init: float = 1.0,
        p_min: float = 1e-5,
        p_max: float = 1.0,
        metric: str = "packets",
        alpha_report: int = 5,
        seed: int = 0,
    ):
        self.phi = phi
        self.delta_p = delta_p
        self.t_inactive_ns = t_inactive_ns
        self.t_house_ns = t_house_ns
        self.p_init = p_init
        self.p_min = p_min
        self.p_max = p_max
        self.metric = metric
        self.alpha_report = alpha_report
        self.seed = seed

    @classmethod
    def from_config(cls, config: BubbleCacheConfig) -> "BubbleCache":
        return cls(**asdict(config))

    # state

    def reset(self) -> "BubbleCache":
        """Validate parameters and start from an empty cache at ``p_init``."""
        cfg = BubbleCacheConfig(**self.get_params())
        self.config_ = cfg
        self.p_ = min(max(float(cfg.p_init), cfg.p_min), cfg.p_max)
        self.rng_ = check_rng(cfg.seed)
        self.clock_ = VirtualClock()
        self.snapshots_: list[Snapshot] = []
        self.packets_seen_ = 0
        self.packets_sampled_ = 0
        self.evictions_ = 0
        self._sizes: dict[int, int] = {}
        self._last_seen: dict[int, int] = {}
        self._next_house: int | None = None
        self._last_house: int | None = None
        return self

    def _check_started(self) -> None:
        if not hasattr(self, "config_"):
            self.reset()

    @property
    def records(self) -> dict[int, FlowRecord]:
        self._check_started()
        return {f: FlowRecord(f, s, self._last_seen[f]) for f, s in self._sizes.items()}

    @property
    def cache_size(self) -> int:
        self._check_started()
        return len(self._sizes)

    # queries

    def kurtosis(self) -> float:
        """Excess kurtosis of resident flow sizes; ``nan`` when undefined."""
        self._check_started()
        if len(self._sizes) < 2:
            return math.nan
        # sorted so the float result does not depend on insertion order
        values = np.sort(np.fromiter(self._sizes.values(), dtype=float, count=len(self._sizes)))
        return kurtosis_or_nan(values)

    def undersampling(self) -> bool:
        kurt = self.kurtosis()
        return math.isnan(kurt) or kurt < self.config_.phi

    def top(self, alpha: int | None = None) -> list[tuple[int, int]]:
        """Resident flows by size descending (ties by lower id), at most ``alpha`` of them."""
        self._check_started()
        alpha = self.config_.alpha_report if alpha is None else check_positive_int(alpha, "alpha")
        return heapq.nsmallest(alpha, self._sizes.items(), key=lambda kv: (-kv[1], kv[0]))

    # event processing

    def _start(self, ts: int) -> None:
        self._next_house = ts + self.config_.t_house_ns

    def _catch_up(self, ts: int) -> Snapshot | None:
        snap = None
        while self._next_house <= ts:
            snap = self.housekeeping(self._next_house)
            self._next_house += self.config_.t_house_ns
        return snap

    def housekeeping(self, now_ns: int) -> Snapshot:
        """Adjust ``p`` from the cache kurtosis, evict idle flows and record a snapshot."""
        self._check_started()
        now_ns = int(now_ns)
        self.clock_.advance(now_ns)
        cfg = self.config_
        kurt = self.kurtosis()
        if math.isnan(kurt) or kurt < cfg.phi:
            self.p_ = min(self.p_ + cfg.delta_p, cfg.p_max)
        else:
            self.p_ = max(self.p_ - cfg.delta_p, cfg.p_min)
        limit = now_ns - cfg.t_inactive_ns
        idle = [f for f, t in self._last_seen.items() if t < limit]
        for f in idle:
            del self._sizes[f]
            del self._last_seen[f]
        self.evictions_ += len(idle)
        snap = Snapshot(
            ts_ns=now_ns,
            p=self.p_,
            kurtosis=kurt,
            cache_size=len(self._sizes),
            top=tuple(self.top(cfg.alpha_report)),
            packets_seen=self.packets_seen_,
            packets_sampled=self.packets_sampled_,
            evictions=self.evictions_,
        )
        self.snapshots_.append(snap)
        self._last_house = now_ns
        return snap

    def on_packet(self, event) -> Snapshot | None:
        """Process one packet; returns the last snapshot if housekeeping ran first."""
        self._check_started()
        ts, flow_id, size = (int(v) for v in event)
        if self.clock_.now_ns is not None and ts < self.clock_.now_ns:
            raise ValueError(f"out-of-order timestamp {ts} < clock {self.clock_.now_ns}")
        if self._next_house is None:
            self._start(ts)
        snap = self._catch_up(ts)
        self.clock_.advance(ts)
        self.packets_seen_ += 1
        if self.rng_.random() < self.p_:
            self.packets_sampled_ += 1
            inc = size if self.config_.metric is Metric.BYTES else 1
            self._sizes[flow_id] = self._sizes.get(flow_id, 0) + inc
            self._last_seen[flow_id] = ts
        return snap

    def _admit(self, ts: np.ndarray, fid: np.ndarray, size: np.ndarray) -> None:
        n = len(ts)
        if n == 0:
            return
        keep = self.rng_.random(n) < self.p_
        self.packets_seen_ += n
        self.clock_.advance(int(ts[-1]))
        n_kept = int(keep.sum())
        if n_kept == 0:
            return
        self.packets_sampled_ += n_kept
        ids, inverse = np.unique(fid[keep], return_inverse=True)
        if self.config_.metric is Metric.BYTES:
            inc = np.zeros(len(ids), dtype=np.int64)
            np.add.at(inc, inverse, size[keep])
        else:
            inc = np.bincount(inverse, minlength=len(ids))
        last = np.zeros(len(ids), dtype=np.int64)
        np.maximum.at(last, inverse, ts[keep])
        sizes, last_seen = self._sizes, self._last_seen
        for f, s, t in zip(ids.tolist(), inc.tolist(), last.tolist()):
            sizes[f] = sizes.get(f, 0) + s
            last_seen[f] = t

    def partial_fit(self, X, y=None) -> "BubbleCache":
        """Continue the replay with the events of ``X`` (a trace or iterable of events)."""
        self._check_started()
        trace = as_trace(X)
        ts, fid, size = trace.timestamp_ns, trace.flow_id, trace.size
        n = len(ts)
        if n == 0:
            return self
        if self.clock_.now_ns is not None and ts[0] < self.clock_.now_ns:
            raise ValueError(f"out-of-order timestamp {int(ts[0])} < clock {self.clock_.now_ns}")
        if self._next_house is None:
            self._start(int(ts[0]))
        i = 0
        while i < n:
            self._catch_up(int(ts[i]))
            j = i + int(np.searchsorted(ts[i:], self._next_house, side="left"))
            self._admit(ts[i:j], fid[i:j], size[i:j])
            i = j
        return self

    def finalize(self) -> Snapshot | None:
        """Run the closing housekeeping at the last event time unless one just ran there."""
        self._check_started()
        now = self.clock_.now_ns
        if now is None or now == self._last_house:
            return None
        return self.housekeeping(now)

    def fit(self, X, y=None) -> "BubbleCache":
        """Replay trace ``X`` from a fresh state and close it with a final housekeeping."""
        self.reset()
        self.partial_fit(X)
        self.finalize()
        return self

    def report(self, truth=None) -> FinalReport:
        """Final state; with ``truth`` also the quantum error of the reported top flows."""
        if not hasattr(self, "config_"):
            raise NotFittedError("BubbleCache has not processed any traffic yet")
        alpha = self.config_.alpha_report
        qer = None
        if truth is not None:
            qer = _report_qer(self._sizes, truth, alpha)
        return FinalReport(
            p=self.p_,
            kurtosis=self.kurtosis(),
            cache_size=len(self._sizes),
            top=tuple(self.top(alpha)),
            alpha=alpha,
            qer=qer,
        )


def _report_qer(sizes: Mapping[int, int], truth, alpha: int) -> float:
    ids, dataset = truth_order(truth)
    unknown = set(sizes) - set(ids)
    if unknown:
        raise ValueError(f"cache holds flows missing from the truth: {sorted(unknown)[:5]}")
    observed = [sizes.get(f, 0) for f in ids]
    return quantum_error(dataset, observed, min(alpha, dataset.n_flows))


def run_trace(config, events, truth=None) -> tuple[list[Snapshot], FinalReport]:
    """Replay ``events`` through a fresh engine; returns its snapshots and final report.

    ``config`` is a :class:`BubbleCacheConfig`, a mapping of its fields or a
    :class:`BubbleCache` (whose parameters are used, not its state).
    """
    if isinstance(config, BubbleCache):
        engine = BubbleCache(**config.get_params())
    elif isinstance(config, BubbleCacheConfig):
        engine = BubbleCache.from_config(config)
    else:
        engine = BubbleCache(**dict(config))
    engine.fit(events)
    return list(engine.snapshots_), engine.report(truth)


def write_snapshots(snapshots: Iterable[Snapshot], path, comments: Iterable[str] = ()) -> None:
    with open(Path(path), "w", encoding="utf-8", newline="\n") as fh:
        _write_comments(fh, comments)
        fh.write(SNAPSHOT_HEADER + "\n")
        for snap in snapshots:
            fh.write(snap.csv_row() + "\n")

