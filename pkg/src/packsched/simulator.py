"""Discrete-time bottleneck engine and the event trace it records."""

from __future__ import annotations

import hashlib
import json
from array import array
from dataclasses import asdict
from enum import IntEnum
from typing import Iterable, NamedTuple, Optional

import numpy as np

from .model import (
    Packet,
    SchedulerConfig,
    WorkloadSpec,
    sample_ranks,
    validate_config,
    validate_workload,
)
from .schedulers import DropReason, make_scheduler

TRACE_COLUMNS = ("tick", "kind", "packet_id", "rank", "queue", "reason", "flow_id")


class EventKind(IntEnum):
    ARRIVAL = 0
    ENQUEUE = 1
    DROP = 2
    DEPART = 3


_KIND_NAMES = {k: k.name.lower() for k in EventKind}
_REASON_NAMES = {
    DropReason.ADMISSION_REJECT: "admission",
    DropReason.QUEUE_FULL: "queue_full",
    DropReason.EVICTED: "evicted",
}


class SimEvent(NamedTuple):
    tick: int
    kind: EventKind
    packet_id: int
    rank: int
    queue: Optional[int] = None
    reason: Optional[DropReason] = None
    flow_id: Optional[int] = None


class ArrivalStream:
    """Arrival sequence held as parallel arrays; iterates as ``Packet``s."""

    def __init__(self, ticks, ranks, flows=None):
        self.ticks = np.asarray(ticks, dtype=np.int64)
        self.ranks = np.asarray(ranks, dtype=np.int64)
        self.flows = None if flows is None else np.asarray(flows, dtype=np.int64)
        if len(self.ticks) != len(self.ranks):
            raise ValueError("ticks and ranks differ in length")

    def __len__(self):
        return len(self.ticks)

    def __iter__(self):
        ticks = self.ticks.tolist()
        ranks = self.ranks.tolist()
        if self.flows is None:
            for i, (t, r) in enumerate(zip(ticks, ranks)):
                yield Packet(i, r, t, None)
        else:
            for i, (t, r, f) in enumerate(zip(ticks, ranks, self.flows.tolist())):
                yield Packet(i, r, t, f)

    def __getitem__(self, i):
        f = None if self.flows is None else int(self.flows[i])
        return Packet(int(i) if i >= 0 else len(self) + i, int(self.ranks[i]), int(self.ticks[i]), f)

    def packets(self) -> list[Packet]:
        return list(self)


def generate_arrivals(spec: WorkloadSpec, seed: int, max_rank: int = 100) -> ArrivalStream:
    """Constant-rate arrivals; ids are the gapless arrival order.

    Single-stream mode draws ranks from the workload distribution. Flow mode
    emits fixed-rank packets per flow; packets of different flows due on
    the same tick are offered in a seeded random order.
    """
    errors = validate_workload(spec)
    if errors:
        raise ValueError("invalid workload: " + "; ".join(errors))
    rng = np.random.default_rng(seed)
    if not spec.flows:
        dist = spec.rank_distribution(max_rank)
        n = spec.total_arrivals
        ranks = sample_ranks(dist, n, rng)
        ticks = np.arange(n, dtype=np.int64) * spec.arrival_period
        return ArrivalStream(ticks, ranks)
    tick_parts, flow_parts, rank_parts = [], [], []
    for f in spec.flows:
        t = np.arange(f.start_tick, f.stop_tick, f.arrival_period, dtype=np.int64)
        tick_parts.append(t)
        flow_parts.append(np.full(len(t), f.flow_id, dtype=np.int64))
        rank_parts.append(np.full(len(t), f.rank, dtype=np.int64))
    ticks = np.concatenate(tick_parts)
    flows = np.concatenate(flow_parts)
    ranks = np.concatenate(rank_parts)
    tiebreak = rng.random(len(ticks))
    order = np.lexsort((tiebreak, ticks))
    return ArrivalStream(ticks[order], ranks[order], flows[order])


def config_digest(*parts) -> str:
    """Short stable hash of JSON-serialisable experiment inputs."""
    def default(o):
        if hasattr(o, "__dataclass_fields__"):
            return asdict(o)
        if isinstance(o, (tuple, set, frozenset)):
            return list(o)
        raise TypeError(type(o))
    blob = json.dumps(parts, sort_keys=True, default=default, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


class Trace:
    """Ordered event log of one run, stored column-wise.

    Missing ``queue``, ``reason`` and ``flow_id`` values are stored as -1.
    """

    def __init__(self, scheduler_kind: str, config: SchedulerConfig,
                 workload: WorkloadSpec, seed: int):
        self.scheduler_kind = scheduler_kind
        self.config = config
        self.workload = workload
        self.seed = seed
        self.tick = array("q")
        self.kind = array("b")
        self.packet_id = array("q")
        self.rank = array("l")
        self.queue = array("h")
        self.reason = array("b")
        self.flow_id = array("l")

    def __len__(self):
        return len(self.tick)

    def append(self, tick, kind, packet_id, rank, queue=None, reason=None, flow_id=None):
        self.tick.append(tick)
        self.kind.append(kind)
        self.packet_id.append(packet_id)
        self.rank.append(rank)
        self.queue.append(-1 if queue is None else queue)
        self.reason.append(-1 if reason is None else reason)
        self.flow_id.append(-1 if flow_id is None else flow_id)

    def __iter__(self) -> Iterable[SimEvent]:
        for t, k, p, r, q, why, f in zip(self.tick, self.kind, self.packet_id, self.rank,
                                         self.queue, self.reason, self.flow_id):
            yield SimEvent(t, EventKind(k), p, r,
                           None if q < 0 else q,
                           None if why < 0 else DropReason(why),
                           None if f < 0 else f)

    def columns(self) -> dict:
        """Zero-copy numpy views of every column."""
        return {name: np.frombuffer(getattr(self, name), dtype=getattr(self, name).typecode)
                for name in TRACE_COLUMNS}

    @property
    def max_rank(self) -> int:
        return self.config.max_rank

    @property
    def digest(self) -> str:
        return config_digest(self.config, self.workload)

    def header(self) -> str:
        return (f"# packsched trace v1 scheduler={self.scheduler_kind} seed={self.seed} "
                f"config={self.digest}\n# " + ",".join(TRACE_COLUMNS) + "\n")

    def iter_lines(self):
        """Serialised events, one comma-separated record per line."""
        yield from self.header().splitlines(keepends=True)
        kinds = [_KIND_NAMES[k] for k in EventKind]
        reasons = {-1: ""}
        reasons.update({int(k): v for k, v in _REASON_NAMES.items()})
        for t, k, p, r, q, why, f in zip(self.tick, self.kind, self.packet_id, self.rank,
                                         self.queue, self.reason, self.flow_id):
            yield (f"{t},{kinds[k]},{p},{r},{'' if q < 0 else q},"
                   f"{reasons[why]},{'' if f < 0 else f}\n")

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(self.iter_lines())

    def arrival_signature(self) -> tuple:
        """(tick, id, rank, flow) of every arrival, for shared-stream checks."""
        cols = self.columns()
        m = cols["kind"] == EventKind.ARRIVAL
        return (cols["tick"][m], cols["packet_id"][m], cols["rank"][m], cols["flow_id"][m])


def parse_trace_line(line: str) -> SimEvent:
    """Inverse of one ``Trace.iter_lines`` record."""
    t, k, p, r, q, why, f = line.rstrip("\n").split(",")
    kinds = {v: k for k, v in _KIND_NAMES.items()}
    reasons = {v: k for k, v in _REASON_NAMES.items()}
    return SimEvent(int(t), kinds[k], int(p), int(r),
                    int(q) if q else None, reasons[why] if why else None,
                    int(f) if f else None)


def run_scenario(cfg: SchedulerConfig, spec: WorkloadSpec, scheduler_kind: str, seed: int,
                 arrivals: Optional[ArrivalStream] = None, scheduler=None) -> Trace:
    """Drive one scheduler over the workload and drain the buffer afterwards.

    Departure opportunities occur on ticks divisible by the departure
    period and fire before any arrival on the same tick. ``scheduler`` may
    be a pre-built policy instance (it is reset first).
    """
    errors = validate_config(cfg) + validate_workload(spec)
    if errors:
        raise ValueError("invalid scenario: " + "; ".join(errors))
    if arrivals is None:
        arrivals = generate_arrivals(spec, seed, cfg.max_rank)
    if scheduler is None:
        sched = make_scheduler(scheduler_kind, cfg)
    else:
        sched = scheduler.reset()
        scheduler_kind = sched.kind or scheduler_kind
    trace = Trace(scheduler_kind, cfg, spec, seed)

    t_tick, t_kind, t_id = trace.tick.append, trace.kind.append, trace.packet_id.append
    t_rank, t_queue = trace.rank.append, trace.queue.append
    t_reason, t_flow = trace.reason.append, trace.flow_id.append
    on_arrival, on_service = sched.on_arrival, sched.on_service
    ARR, ENQ, DROP, DEP = 0, 1, 2, 3
    EVICTED = int(DropReason.EVICTED)
    D = spec.departure_period

    def record(tick, kind, pkt, queue, reason):
        t_tick(tick)
        t_kind(kind)
        t_id(pkt.id)
        t_rank(pkt.rank)
        t_queue(queue)
        t_reason(reason)
        f = pkt.flow_id
        t_flow(-1 if f is None else f)

    next_dep = 0
    for pkt in arrivals:
        now = pkt.arrival_tick
        while next_dep <= now:
            out = on_service()
            if out is None:
                # idle until the first opportunity after this arrival
                next_dep = (now // D + 1) * D
                break
            record(next_dep, DEP, out, -1, -1)
            next_dep += D
        record(now, ARR, pkt, -1, -1)
        decision = on_arrival(pkt)
        q = decision[0]
        if q is not None:
            record(now, ENQ, pkt, q, -1)
            victim = decision[2]
            if victim is not None:
                record(now, DROP, victim, -1, EVICTED)
        else:
            record(now, DROP, pkt, -1, int(decision[1]))
    while True:
        out = on_service()
        if out is None:
            break
        record(next_dep, DEP, out, -1, -1)
        next_dep += D
    return trace


def run_comparison(cfg: SchedulerConfig, spec: WorkloadSpec, scheduler_kinds, seed: int) -> dict:
    """Run several policies over one shared arrival sequence."""
    arrivals = generate_arrivals(spec, seed, cfg.max_rank)
    return {kind: run_scenario(cfg, spec, kind, seed, arrivals=arrivals)
            for kind in scheduler_kinds}


def check_trace(trace: Trace) -> list[str]:
    """Structural and conservation checks; returns a list of violations.

    Per packet: Arrival, then Enqueue or Drop, then at most one of Depart or
    an eviction Drop. Per rank: arrived = departed + dropped + still
    buffered (always zero after the final drain).
    """
    problems = []
    cols = trace.columns()
    ticks, kind, pid, rank = cols["tick"], cols["kind"], cols["packet_id"], cols["rank"]
    reason = cols["reason"]
    if len(ticks) and np.any(np.diff(ticks) < 0):
        problems.append("ticks decrease")
    n = int(pid.max()) + 1 if len(pid) else 0
    state = bytearray(n)  # 0 unseen, 1 arrived, 2 buffered, 3 gone
    for k, p, why in zip(kind.tolist(), pid.tolist(), reason.tolist()):
        s = state[p]
        if k == EventKind.ARRIVAL:
            ok = s == 0
            state[p] = 1
        elif k == EventKind.ENQUEUE:
            ok = s == 1
            state[p] = 2
        elif k == EventKind.DROP:
            ok = s == 1 or (s == 2 and why == DropReason.EVICTED)
            state[p] = 3
        else:
            ok = s == 2
            state[p] = 3
        if not ok:
            problems.append(f"packet {p}: unexpected {EventKind(k).name} after state {s}")
            if len(problems) > 20:
                break
    size = max(trace.max_rank, int(rank.max()) if len(rank) else 0) + 1

    def per_rank(mask):
        return np.bincount(rank[mask], minlength=size)

    arrived = per_rank(kind == EventKind.ARRIVAL)
    departed = per_rank(kind == EventKind.DEPART)
    dropped = per_rank(kind == EventKind.DROP)
    enq = per_rank(kind == EventKind.ENQUEUE)
    evicted = per_rank((kind == EventKind.DROP) & (reason == DropReason.EVICTED))
    residual = enq - departed - evicted
    if np.any(residual < 0):
        problems.append("more departures than enqueues for some rank")
    bad = np.nonzero(arrived != departed + dropped + residual)[0]
    if len(bad):
        problems.append(f"per-rank conservation fails at ranks {bad.tolist()[:10]}")
    if np.any(residual != 0):
        problems.append("buffer not drained at end of run")
    return problems
