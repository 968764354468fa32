"""Elephant-flow detection under partial information.

Exact and Monte-Carlo detection likelihoods for sampled traffic, streaming
kurtosis, and BubbleCache, a flow cache that adapts its sampling rate until
the resident flow sizes reach a target kurtosis.
"""

from .cache import BubbleCache, BubbleCacheConfig, FinalReport, FlowRecord, Snapshot, VirtualClock, run_trace
from .experiments import SweepPoint, qer_sweep
from .likelihood import (
    EnumerationBudgetError,
    detect_single_elephant,
    estimated_detection_likelihood,
    exact_detection_likelihood,
    rho,
)
from .moments import MomentAccumulator, UndefinedKurtosisError, batch_kurtosis
from .sampling import (
    BernoulliSampler,
    CutoffResult,
    CutoffUnreachableError,
    SampleOutcome,
    find_cutoff_rate,
    monte_carlo_detection_likelihood,
    quantum_error,
    sample_without_replacement,
)
from .traffic import (
    Distribution,
    Metric,
    PacketEvent,
    SingleElephant,
    Trace,
    TrafficDataset,
    generate_distribution,
    generate_trace,
    read_trace,
    read_truth,
    write_trace,
    write_truth,
)

__version__ = "0.1.0"

__all__ = [
    "BernoulliSampler",
    "BubbleCache",
    "BubbleCacheConfig",
    "CutoffResult",
    "CutoffUnreachableError",
    "Distribution",
    "EnumerationBudgetError",
    "FinalReport",
    "FlowRecord",
    "Metric",
    "MomentAccumulator",
    "PacketEvent",
    "SampleOutcome",
    "SingleElephant",
    "Snapshot",
    "SweepPoint",
    "Trace",
    "TrafficDataset",
    "UndefinedKurtosisError",
    "VirtualClock",
    "batch_kurtosis",
    "detect_single_elephant",
    "estimated_detection_likelihood",
    "exact_detection_likelihood",
    "find_cutoff_rate",
    "generate_distribution",
    "generate_trace",
    "monte_carlo_detection_likelihood",
    "qer_sweep",
    "quantum_error",
    "read_trace",
    "read_truth",
    "rho",
    "run_trace",
    "sample_without_replacement",
    "write_trace",
    "write_truth",
]
