"""Rank-based packet scheduling on a simulated bottleneck link.

Provides the PACKS scheduler and its reference points (ideal PIFO, FIFO,
AIFO, SP-PIFO), a batch optimizer for admission cutoffs and queue bounds,
a deterministic discrete-time simulator and trace-derived metrics.
"""

from .model import (
    FlowSpec,
    Packet,
    RankDistribution,
    SchedulerConfig,
    WorkloadSpec,
    make_distribution,
    sample_rank,
    sample_ranks,
    staggered_flows,
    validate_config,
)
from .optimizer import (
    QueueBoundsOptimizer,
    admit_batch,
    batch_map,
    optimal_bounds_drop,
    optimal_bounds_sched,
)
from .schedulers import (
    AifoScheduler,
    ArrivalDecision,
    DropReason,
    FifoScheduler,
    PacksScheduler,
    PifoScheduler,
    SpPifoScheduler,
    make_scheduler,
)
from .simulator import Trace, generate_arrivals, run_comparison, run_scenario
from .window import SlidingWindow

__all__ = [
    "AifoScheduler", "ArrivalDecision", "DropReason", "FifoScheduler", "FlowSpec",
    "Packet", "PacksScheduler", "PifoScheduler", "QueueBoundsOptimizer",
    "RankDistribution", "SchedulerConfig", "SlidingWindow", "SpPifoScheduler", "Trace",
    "WorkloadSpec", "admit_batch", "batch_map", "generate_arrivals", "make_distribution",
    "make_scheduler", "optimal_bounds_drop", "optimal_bounds_sched", "run_comparison",
    "run_scenario", "sample_rank", "sample_ranks", "staggered_flows", "validate_config",
]

__version__ = "0.1.0"
