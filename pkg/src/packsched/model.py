"""Core value types, rank distributions and sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Optional, Sequence

import numpy as np

DEFAULT_MAX_RANK = 100
DEFAULT_TAU = 20.0

DISTRIBUTION_KINDS = (
    "uniform",
    "exponential",
    "inverse_exponential",
    "poisson",
    "convex",
    "explicit",
)


class Packet(NamedTuple):
    """A unit-size packet. ``id`` is the global arrival index."""

    id: int
    rank: int
    arrival_tick: int = 0
    flow_id: Optional[int] = None

    @property
    def size(self) -> int:
        return 1


@dataclass(frozen=True)
class RankDistribution:
    """Probability mass over ranks ``0..max_rank``."""

    mass: tuple

    def __post_init__(self):
        mass = tuple(float(m) for m in self.mass)
        if not mass:
            raise ValueError("distribution needs at least one rank")
        if any(m < 0 or not math.isfinite(m) for m in mass):
            raise ValueError("mass entries must be finite and non-negative")
        if abs(sum(mass) - 1.0) > 1e-9:
            raise ValueError(f"mass sums to {sum(mass)!r}, expected 1")
        object.__setattr__(self, "mass", mass)

    @property
    def max_rank(self) -> int:
        return len(self.mass) - 1

    def __len__(self):
        return len(self.mass)

    def __getitem__(self, rank):
        return self.mass[rank]

    def cdf(self) -> np.ndarray:
        """Cumulative mass at or below each rank."""
        return np.cumsum(self.mass)

    def support(self) -> list[int]:
        return [r for r, m in enumerate(self.mass) if m > 0]

    @classmethod
    def from_counts(cls, counts, max_rank=None) -> "RankDistribution":
        """Build from a rank->count mapping or a per-rank count sequence."""
        if isinstance(counts, Mapping):
            items = {int(r): float(c) for r, c in counts.items()}
            if any(r < 0 for r in items):
                raise ValueError("ranks must be non-negative")
            top = max(items, default=0) if max_rank is None else max_rank
            if items and max(items) > top:
                raise ValueError("count given for a rank above max_rank")
            dense = [items.get(r, 0.0) for r in range(top + 1)]
        else:
            dense = [float(c) for c in counts]
            if max_rank is not None:
                if len(dense) > max_rank + 1:
                    raise ValueError("more counts than ranks")
                dense += [0.0] * (max_rank + 1 - len(dense))
        return cls(_normalize(dense))


def _normalize(weights) -> tuple:
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and non-negative")
    total = w.sum()
    if total <= 0:
        raise ValueError("distribution weights are all zero")
    w = w / total
    # absorb rounding so the mass sums to 1 to machine precision
    w[int(np.argmax(w))] += 1.0 - w.sum()
    return tuple(w.tolist())


def make_distribution(kind: str, params: Optional[Mapping] = None,
                      max_rank: int = DEFAULT_MAX_RANK) -> RankDistribution:
    """Construct one of the named rank distributions over ``[0, max_rank]``.

    Shapes: exponential ``exp(-r/tau)``; inverse exponential
    ``exp(-(R-r)/tau)``; Poisson with rate ``lam`` truncated to the rank
    range; convex ``(r - R/2)**2 + 1``; explicit takes ``counts`` (mapping or
    sequence) or ``mass``.
    """
    params = dict(params or {})
    if kind not in DISTRIBUTION_KINDS:
        raise ValueError(f"unknown distribution kind {kind!r}")
    if kind != "explicit" and max_rank < 1:
        raise ValueError("max_rank must be >= 1")
    r = np.arange(max_rank + 1, dtype=float)

    if kind == "uniform":
        weights = np.ones_like(r)
    elif kind in ("exponential", "inverse_exponential"):
        tau = float(params.get("tau", DEFAULT_TAU))
        if tau <= 0:
            raise ValueError("tau must be positive")
        x = r if kind == "exponential" else max_rank - r
        weights = np.exp(-x / tau)
    elif kind == "poisson":
        lam = float(params.get("lam", max_rank / 2))
        if lam <= 0:
            raise ValueError("lam must be positive")
        # log-space to stay finite for large ranks
        logw = r * math.log(lam) - lam - np.array([math.lgamma(k + 1) for k in r])
        weights = np.exp(logw - logw.max())
    elif kind == "convex":
        weights = (r - max_rank / 2) ** 2 + 1
    else:
        if "counts" in params:
            return RankDistribution.from_counts(params["counts"], max_rank=max_rank)
        if "mass" in params:
            mass = list(params["mass"])
            if len(mass) < max_rank + 1:
                mass += [0.0] * (max_rank + 1 - len(mass))
            return RankDistribution(_normalize(mass))
        raise ValueError("explicit distribution needs 'counts' or 'mass'")
    return RankDistribution(_normalize(weights))


def sample_ranks(dist: RankDistribution, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` ranks by inverse-CDF lookup on uniform variates."""
    cdf = dist.cdf()
    cdf[-1] = 1.0
    u = rng.random(size)
    out = np.searchsorted(cdf, u, side="right")
    # u in [0,1) never exceeds the last entry, but guard zero-mass tails
    return np.minimum(out, dist.max_rank).astype(np.int64)


def sample_rank(dist: RankDistribution, rng: np.random.Generator) -> int:
    return int(sample_ranks(dist, 1, rng)[0])


@dataclass(frozen=True)
class SchedulerConfig:
    """Buffer layout and estimator parameters shared by every policy.

    ``capacities`` lists per-queue sizes, highest priority first. Single
    queue policies (FIFO, AIFO, PIFO) use one queue of the summed size.
    """

    capacities: tuple = (10,) * 8
    window_size: int = 20
    burstiness: float = 0.0
    max_rank: int = DEFAULT_MAX_RANK

    def __post_init__(self):
        object.__setattr__(self, "capacities", tuple(self.capacities))

    @property
    def queue_count(self) -> int:
        return len(self.capacities)

    @property
    def total_capacity(self) -> int:
        return sum(self.capacities)


def validate_config(cfg: SchedulerConfig) -> list[str]:
    """Return every violated invariant; an empty list means the config is valid."""
    errors = []
    caps = cfg.capacities
    if len(caps) < 1:
        errors.append("queue_count must be >= 1")
    for i, c in enumerate(caps, start=1):
        if not isinstance(c, (int, np.integer)) or isinstance(c, bool):
            errors.append(f"capacity of queue {i} must be an integer, got {c!r}")
        elif c <= 0:
            errors.append(f"capacity of queue {i} must be positive, got {c}")
    if not isinstance(cfg.window_size, (int, np.integer)) or cfg.window_size < 1:
        errors.append(f"window_size must be a positive integer, got {cfg.window_size!r}")
    k = cfg.burstiness
    if not isinstance(k, (int, float)) or not math.isfinite(k):
        errors.append(f"burstiness must be a real number, got {k!r}")
    elif not 0 <= k < 1:
        errors.append(f"burstiness must lie in [0, 1), got {k}")
    if not isinstance(cfg.max_rank, (int, np.integer)) or cfg.max_rank < 0:
        errors.append(f"max_rank must be a non-negative integer, got {cfg.max_rank!r}")
    return errors


@dataclass(frozen=True)
class FlowSpec:
    flow_id: int
    rank: int
    start_tick: int
    stop_tick: int
    arrival_period: int


@dataclass(frozen=True)
class WorkloadSpec:
    """Arrival process offered to the bottleneck.

    Without ``flows`` a single constant-rate stream of ``total_arrivals``
    packets arrives every ``arrival_period`` ticks, ranks drawn from the
    distribution. With ``flows`` each flow sends fixed-rank packets every
    ``arrival_period`` ticks within ``[start_tick, stop_tick)``.
    """

    distribution: str = "uniform"
    distribution_params: Mapping = field(default_factory=dict)
    arrival_period: int = 10
    departure_period: int = 11
    total_arrivals: int = 100_000
    flows: Sequence[FlowSpec] = ()

    def __post_init__(self):
        object.__setattr__(self, "flows", tuple(
            f if isinstance(f, FlowSpec) else FlowSpec(**f) for f in self.flows))

    def rank_distribution(self, max_rank: int) -> RankDistribution:
        return make_distribution(self.distribution, self.distribution_params, max_rank)


def validate_workload(spec: WorkloadSpec) -> list[str]:
    errors = []
    if spec.departure_period < 1:
        errors.append("departure_period must be a positive integer")
    if spec.flows:
        for f in spec.flows:
            if f.arrival_period < 1:
                errors.append(f"flow {f.flow_id}: arrival_period must be positive")
            if f.stop_tick < f.start_tick or f.start_tick < 0:
                errors.append(f"flow {f.flow_id}: need 0 <= start_tick <= stop_tick")
            if f.rank < 0:
                errors.append(f"flow {f.flow_id}: rank must be non-negative")
    else:
        if spec.arrival_period < 1:
            errors.append("arrival_period must be a positive integer")
        if spec.total_arrivals < 1:
            errors.append("total_arrivals must be a positive integer")
        if spec.distribution not in DISTRIBUTION_KINDS:
            errors.append(f"unknown distribution kind {spec.distribution!r}")
    return errors


def staggered_flows(ranks: Sequence[int], phase_ticks: int, arrival_period: int) -> tuple:
    """Flows started one per phase in list order, then stopped in reverse order.

    With four ranks the active set grows 1,2,3,4, holds for one phase, then
    shrinks 3,2,1 as the most recently started flow leaves first.
    """
    n = len(ranks)
    flows = []
    for i, rank in enumerate(ranks):
        start = i * phase_ticks
        stop = (2 * n - 1 - i) * phase_ticks
        flows.append(FlowSpec(i, int(rank), start, stop, arrival_period))
    return tuple(flows)
