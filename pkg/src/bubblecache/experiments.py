"""Fixed-rate sampling sweeps: quantum error as a function of the sampling rate.

An optional capacity budget models a monitor that cannot keep up.  The
device processes at most ``capacity * window`` sampled packets per window;
later packets in the window are tail-dropped.  Lowering ``p`` relieves the
budget, which is what makes the error curve U-shaped on bursty traffic.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ._validation import check_alpha, check_positive_int, check_probability, check_rng
from .sampling import quantum_error
from .traffic import Metric, _write_comments, as_trace, truth_order

SWEEP_HEADER = "p,mean_qer,std_qer,drop_fraction"


@dataclass(frozen=True)
class SweepPoint:
    p: float
    mean_qer: float
    std_qer: float
    drop_fraction: float
    repetitions: int

    def csv_row(self) -> str:
        return f"{self.p:.10g},{self.mean_qer:.6f},{self.std_qer:.6f},{self.drop_fraction:.6f}"


def capacity_keep_mask(timestamps: np.ndarray, sampled: np.ndarray, budget: int, window_ns: int) -> np.ndarray:
    """Tail-drop: keep the first ``budget`` sampled events of every window.

    Windows are ``window_ns`` long and start at the first timestamp.
    """
    keep = sampled.copy()
    idx = np.flatnonzero(sampled)
    if len(idx) == 0:
        return keep
    win = (timestamps[idx] - timestamps[0]) // window_ns
    first = np.searchsorted(win, win, side="left")
    rank = np.arange(len(idx)) - first
    keep[idx[rank >= budget]] = False
    return keep


def qer_sweep(
    events,
    truth,
    p_grid: Sequence[float],
    *,
    repetitions: int = 20,
    alpha: int = 5,
    seed=0,
    capacity: float | None = None,
    window_ns: int = 50_000_000,
    metric="packets",
) -> list[SweepPoint]:
    """Mean quantum error of Bernoulli sampling at each rate in ``p_grid``.

    Repetition ``r`` draws one uniform per event from ``default_rng([seed, r])``
    and keeps the event when it falls below ``p``, so every rate sees the same
    coins (the same stream :func:`bubblecache.sampling.bernoulli_sample_trace`
    would use with that seed).  ``capacity`` is in sampled events per second.
    """
    trace = as_trace(events)
    ids, dataset = truth_order(truth)
    alpha = check_alpha(alpha, dataset.n_flows)
    repetitions = check_positive_int(repetitions, "repetitions")
    window_ns = check_positive_int(window_ns, "window_ns")
    grid = [check_probability(p) for p in p_grid]
    if not grid:
        raise ValueError("p_grid must not be empty")
    budget = None
    if capacity is not None:
        if not capacity > 0:
            raise ValueError(f"capacity must be > 0, got {capacity}")
        budget = int(capacity * window_ns // 1_000_000_000)
        if budget < 1:
            raise ValueError("capacity admits no event per window; raise it or widen the window")

    id_arr = np.asarray(ids, dtype=np.int64)
    by_id = np.argsort(id_arr)
    pos = np.searchsorted(id_arr, trace.flow_id, sorter=by_id)
    pos = np.minimum(pos, len(id_arr) - 1)
    flow_index = by_id[pos]
    if np.any(id_arr[flow_index] != trace.flow_id):
        missing = np.unique(trace.flow_id[id_arr[flow_index] != trace.flow_id])[:5]
        raise ValueError(f"trace contains flows missing from the truth: {missing.tolist()}")
    weights = trace.size if Metric(metric) is Metric.BYTES else None

    n = len(trace)
    qer = np.zeros((len(grid), repetitions))
    dropped = np.zeros((len(grid), repetitions))
    for r in range(repetitions):
        u = check_rng([int(seed), r]).random(n)
        for g, p in enumerate(grid):
            sampled = u < p
            keep = sampled if budget is None else capacity_keep_mask(trace.timestamp_ns, sampled, budget, window_ns)
            n_sampled = int(sampled.sum())
            dropped[g, r] = (n_sampled - int(keep.sum())) / n_sampled if n_sampled else 0.0
            observed = np.bincount(
                flow_index[keep], weights=None if weights is None else weights[keep], minlength=len(id_arr)
            ).astype(np.int64)
            qer[g, r] = quantum_error(dataset, observed, alpha)
    return [
        SweepPoint(p, float(qer[g].mean()), float(qer[g].std()), float(dropped[g].mean()), repetitions)
        for g, p in enumerate(grid)
    ]


def write_sweep(points, path, comments=()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        _write_comments(fh, comments)
        fh.write(SWEEP_HEADER + "\n")
        for pt in points:
            fh.write(pt.csv_row() + "\n")
