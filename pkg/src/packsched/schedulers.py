"""Scheduling policies sharing one arrival/service interface.

Each policy is a scikit-learn style estimator: constructor arguments are
plain parameters (``get_params``/``set_params``/``clone`` work), and
``reset()`` builds the mutable run state into trailing-underscore
attributes, the way ``fit`` does for a model.
"""

from __future__ import annotations

from enum import IntEnum
from typing import NamedTuple, Optional

from sklearn.base import BaseEstimator

from .model import Packet, SchedulerConfig, validate_config
from .queueing import EnqueuedEvicting, Enqueued, PifoBuffer, QueueBank
from .window import SlidingWindow

SCHEDULER_KINDS = ("pifo", "fifo", "aifo", "sppifo", "packs")
WINDOW_POLICIES = ("all", "admitted")


class DropReason(IntEnum):
    ADMISSION_REJECT = 0
    QUEUE_FULL = 1
    EVICTED = 2


class ArrivalDecision(NamedTuple):
    """Outcome for one arriving packet.

    ``queue`` is the 1-based queue index when enqueued, else None and
    ``reason`` says why. ``victim`` is set only when the PIFO reference
    evicted a buffered packet to make room.
    """

    queue: Optional[int]
    reason: Optional[DropReason] = None
    victim: Optional[Packet] = None

    @property
    def enqueued(self) -> bool:
        return self.queue is not None


ADMISSION_REJECT = ArrivalDecision(None, DropReason.ADMISSION_REJECT)
QUEUE_FULL = ArrivalDecision(None, DropReason.QUEUE_FULL)
_ENQUEUED = [ArrivalDecision(i) for i in range(65)]


def enqueued(i: int) -> ArrivalDecision:
    return _ENQUEUED[i] if i < len(_ENQUEUED) else ArrivalDecision(i)


def admits(below, fill, free, total, share, one_minus_k) -> bool:
    """Quantile test ``below/fill <= free/total * share/total / (1-k)``.

    Cross-multiplied so that integer inputs with ``k = 0`` compare exactly.
    AIFO calls this with ``share == total``, which makes a one-queue PACKS
    evaluate the identical expression.
    """
    return below * total * total * one_minus_k <= fill * free * share


def _check_policy(policy):
    if policy not in WINDOW_POLICIES:
        raise ValueError(f"window_policy must be one of {WINDOW_POLICIES}, got {policy!r}")


class BaseScheduler(BaseEstimator):
    kind = ""

    def reset(self):
        raise NotImplementedError

    def on_arrival(self, pkt: Packet) -> ArrivalDecision:
        raise NotImplementedError

    def on_service(self) -> Optional[Packet]:
        raise NotImplementedError

    @property
    def occupancy(self) -> int:
        raise NotImplementedError


class FifoScheduler(BaseScheduler):
    """Single tail-drop FIFO."""

    kind = "fifo"

    def __init__(self, capacity=80):
        self.capacity = capacity

    def reset(self):
        self.bank_ = QueueBank((self.capacity,))
        return self

    def on_arrival(self, pkt):
        return _ENQUEUED[1] if self.bank_.enqueue(1, pkt) else QUEUE_FULL

    def on_service(self):
        return self.bank_.dequeue()

    @property
    def occupancy(self):
        return self.bank_.occupancy


class AifoScheduler(BaseScheduler):
    """Single FIFO behind rank-aware admission control.

    A packet is admitted when its window quantile is at most
    ``1/(1-k) * (B-b)/B``. ``fixed_cutoff`` replaces the window test with a
    static ``rank < fixed_cutoff`` rule.
    """

    kind = "aifo"

    def __init__(self, capacity=80, window_size=20, burstiness=0.0, max_rank=100,
                 fixed_cutoff=None, window_policy="all"):
        self.capacity = capacity
        self.window_size = window_size
        self.burstiness = burstiness
        self.max_rank = max_rank
        self.fixed_cutoff = fixed_cutoff
        self.window_policy = window_policy

    def reset(self):
        _check_policy(self.window_policy)
        if not 0 <= self.burstiness < 1:
            raise ValueError("burstiness must lie in [0, 1)")
        self.bank_ = QueueBank((self.capacity,))
        self.window_ = SlidingWindow(self.window_size, self.max_rank)
        self._one_minus_k = 1.0 - self.burstiness
        self._push_first = self.window_policy == "all"
        return self

    def on_arrival(self, pkt):
        bank = self.bank_
        rank = pkt.rank
        if self.fixed_cutoff is not None:
            ok = rank < self.fixed_cutoff
        else:
            w = self.window_
            if self._push_first:
                w.push(rank)
            total = bank.total_capacity
            ok = admits(w.count_below(rank), w.fill, total - bank.occupancy,
                        total, total, self._one_minus_k)
        if not ok:
            return ADMISSION_REJECT
        if not bank.enqueue(1, pkt):
            return QUEUE_FULL
        if self.fixed_cutoff is None and not self._push_first:
            self.window_.push(rank)
        return _ENQUEUED[1]

    def on_service(self):
        return self.bank_.dequeue()

    @property
    def occupancy(self):
        return self.bank_.occupancy


class PifoScheduler(BaseScheduler):
    """Ideal push-in first-out queue with highest-rank eviction."""

    kind = "pifo"

    def __init__(self, capacity=80):
        self.capacity = capacity

    def reset(self):
        self.buffer_ = PifoBuffer(self.capacity)
        return self

    def on_arrival(self, pkt):
        outcome = self.buffer_.offer(pkt)
        if isinstance(outcome, Enqueued):
            return _ENQUEUED[1]
        if isinstance(outcome, EnqueuedEvicting):
            return ArrivalDecision(1, None, outcome.victim)
        return QUEUE_FULL

    def on_service(self):
        return self.buffer_.dequeue()

    @property
    def occupancy(self):
        return len(self.buffer_)


class SpPifoScheduler(BaseScheduler):
    """Strict-priority queues with bottom-up bound mapping.

    In adaptive mode the mapped queue's bound is raised to the packet rank
    (push-up), and a packet mapped to queue 1 below that queue's bound
    lowers every bound by the difference (push-down). Bounds adapt at
    mapping time, whether or not the queue then has room. Serving a packet
    from queue 1 whose rank is below ``q_1`` applies the same push-down.
    ``adaptive=False`` keeps ``initial_bounds`` fixed.
    """

    kind = "sppifo"

    def __init__(self, capacities=(10,) * 8, initial_bounds=None, adaptive=True):
        self.capacities = capacities
        self.initial_bounds = initial_bounds
        self.adaptive = adaptive

    def reset(self):
        caps = tuple(self.capacities)
        self.bank_ = QueueBank(caps)
        if self.initial_bounds is None:
            self.bounds_ = [0] * len(caps)
        else:
            if len(self.initial_bounds) != len(caps):
                raise ValueError("need one initial bound per queue")
            self.bounds_ = list(self.initial_bounds)
        return self

    def map_rank(self, rank: int) -> int:
        """Bottom-up first fit: lowest-priority queue whose bound is <= rank."""
        bounds = self.bounds_
        for i in range(len(bounds) - 1, 0, -1):
            if bounds[i] <= rank:
                return i + 1
        return 1

    def _push_down(self, rank):
        bounds = self.bounds_
        cost = bounds[0] - rank
        for j in range(len(bounds)):
            bounds[j] -= cost

    def on_arrival(self, pkt):
        rank = pkt.rank
        i = self.map_rank(rank)
        if self.adaptive:
            if i == 1 and rank < self.bounds_[0]:
                self._push_down(rank)
            self.bounds_[i - 1] = rank
        if not self.bank_.enqueue(i, pkt):
            return QUEUE_FULL
        return enqueued(i)

    def on_service(self):
        pkt, i = self.bank_.dequeue_with_index()
        if self.adaptive and i == 1 and pkt.rank < self.bounds_[0]:
            self._push_down(pkt.rank)
        return pkt

    @property
    def occupancy(self):
        return self.bank_.occupancy


class PacksScheduler(BaseScheduler):
    """Admission control and queue mapping over strict-priority queues.

    Per arrival: record the rank in the window, read total occupancy ``b``
    once, then scan queues top-down and take the first queue ``i`` that has
    room and for which ``quantile(r) <= 1/(1-k) * (B-b)/B * C_i/B``, where
    ``C_i`` is the cumulative capacity of queues ``1..i``. Already buffered
    packets are never touched.
    """

    kind = "packs"

    def __init__(self, capacities=(10,) * 8, window_size=20, burstiness=0.0,
                 max_rank=100, window_policy="all"):
        self.capacities = capacities
        self.window_size = window_size
        self.burstiness = burstiness
        self.max_rank = max_rank
        self.window_policy = window_policy

    def reset(self):
        _check_policy(self.window_policy)
        if not 0 <= self.burstiness < 1:
            raise ValueError("burstiness must lie in [0, 1)")
        caps = tuple(self.capacities)
        self.bank_ = QueueBank(caps)
        self.window_ = SlidingWindow(self.window_size, self.max_rank)
        cumulative, acc = [], 0
        for c in caps:
            acc += c
            cumulative.append(acc)
        self.cumulative_capacities_ = tuple(cumulative)
        self._one_minus_k = 1.0 - self.burstiness
        self._push_first = self.window_policy == "all"
        return self

    def on_arrival(self, pkt):
        w = self.window_
        bank = self.bank_
        rank = pkt.rank
        if self._push_first:
            w.push(rank)
        total = bank.total_capacity
        free = total - bank.occupancy
        below = w.count_below(rank)
        fill = w.fill
        omk = self._one_minus_k
        queues = bank.queues
        cumulative = self.cumulative_capacities_
        n = len(queues)
        # thresholds grow with i, so once the test passes it passes for all later queues
        i = 0
        while i < n and not admits(below, fill, free, total, cumulative[i], omk):
            i += 1
        if i == n:
            return ADMISSION_REJECT
        while i < n:
            q = queues[i]
            if len(q.contents) < q.capacity:
                q.contents.append(pkt)
                bank.occupancy += 1
                if not self._push_first:
                    w.push(rank)
                return enqueued(i + 1)
            i += 1
        return QUEUE_FULL

    def on_service(self):
        return self.bank_.dequeue()

    @property
    def occupancy(self):
        return self.bank_.occupancy


def make_scheduler(kind: str, cfg: SchedulerConfig, **overrides) -> BaseScheduler:
    """Instantiate and reset the policy ``kind`` for the given buffer layout."""
    errors = validate_config(cfg)
    if errors:
        raise ValueError("invalid scheduler config: " + "; ".join(errors))
    B = cfg.total_capacity
    if kind == "pifo":
        sched = PifoScheduler(capacity=B)
    elif kind == "fifo":
        sched = FifoScheduler(capacity=B)
    elif kind == "aifo":
        sched = AifoScheduler(capacity=B, window_size=cfg.window_size,
                              burstiness=cfg.burstiness, max_rank=cfg.max_rank)
    elif kind == "sppifo":
        sched = SpPifoScheduler(capacities=cfg.capacities)
    elif kind == "packs":
        sched = PacksScheduler(capacities=cfg.capacities, window_size=cfg.window_size,
                               burstiness=cfg.burstiness, max_rank=cfg.max_rank)
    else:
        raise ValueError(f"unknown scheduler kind {kind!r}; expected one of {SCHEDULER_KINDS}")
    if overrides:
        sched.set_params(**overrides)
    return sched.reset()
