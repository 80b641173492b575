"""Per-rank and per-flow measurements derived from traces."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .schedulers import DropReason
from .simulator import EventKind, Trace

METRIC_COLUMNS = ("rank", "arrived", "forwarded", "dropped", "inversions")


class MalformedTraceError(ValueError):
    pass


def _size(trace: Trace, cols) -> int:
    top = int(cols["rank"].max()) if len(cols["rank"]) else 0
    return max(trace.max_rank, top) + 1


def _histogram(trace: Trace, kind: EventKind) -> np.ndarray:
    cols = trace.columns()
    return np.bincount(cols["rank"][cols["kind"] == kind], minlength=_size(trace, cols))


def arrivals_per_rank(trace: Trace) -> np.ndarray:
    return _histogram(trace, EventKind.ARRIVAL)


def departures_per_rank(trace: Trace) -> np.ndarray:
    return _histogram(trace, EventKind.DEPART)


def drops_per_rank(trace: Trace) -> np.ndarray:
    """Drop events per rank, PIFO evictions included."""
    return _histogram(trace, EventKind.DROP)


def inversions_per_rank(trace: Trace) -> np.ndarray:
    """Count departures that leave while a strictly lower rank is buffered.

    The buffered set is rebuilt from Enqueue, eviction Drop and Depart
    events; each departure adds at most one to its rank's bin.
    """
    cols = trace.columns()
    size = _size(trace, cols)
    kind, why = cols["kind"], cols["reason"]
    mask = ((kind == EventKind.ENQUEUE) | (kind == EventKind.DEPART)
            | ((kind == EventKind.DROP) & (why == DropReason.EVICTED)))
    kinds = kind[mask].tolist()
    ranks = cols["rank"][mask].tolist()
    ids = cols["packet_id"][mask].tolist()
    n_ids = int(cols["packet_id"].max()) + 1 if len(cols["packet_id"]) else 0

    hist = [0] * size
    counts = [0] * (size + 1)
    buffered = bytearray(n_ids)
    low = size  # lowest buffered rank; ``size`` when empty
    ENQ, DEP = int(EventKind.ENQUEUE), int(EventKind.DEPART)
    for k, r, p in zip(kinds, ranks, ids):
        if k == ENQ:
            if buffered[p]:
                raise MalformedTraceError(f"packet {p} enqueued twice")
            buffered[p] = 1
            counts[r] += 1
            if r < low:
                low = r
            continue
        if not buffered[p]:
            name = "Depart" if k == DEP else "eviction"
            raise MalformedTraceError(f"{name} of packet {p} without a prior Enqueue")
        buffered[p] = 0
        counts[r] -= 1
        if r == low and counts[r] == 0:
            while low < size and counts[low] == 0:
                low += 1
        if k == DEP and low < r:
            hist[r] += 1
    return np.asarray(hist, dtype=np.int64)


def min_dropped_rank(trace: Trace) -> Optional[int]:
    cols = trace.columns()
    dropped = cols["rank"][cols["kind"] == EventKind.DROP]
    return int(dropped.min()) if len(dropped) else None


def per_rank_rates(trace: Trace) -> dict:
    """Forwarded fraction for every rank that saw at least one arrival."""
    arrived = arrivals_per_rank(trace)
    departed = departures_per_rank(trace)
    return {r: departed[r] / arrived[r] for r in np.nonzero(arrived)[0].tolist()}


def forwarded_ids(trace: Trace, up_to_tick: Optional[int] = None) -> np.ndarray:
    cols = trace.columns()
    m = cols["kind"] == EventKind.DEPART
    if up_to_tick is not None:
        m &= cols["tick"] <= up_to_tick
    return cols["packet_id"][m]


def delta_vs(trace_a: Trace, trace_b: Trace, up_to_tick: Optional[int] = None) -> float:
    """Normalised symmetric difference of the forwarded packet sets.

    ``(|A - B| + |B - A|) / (|A| + |B|)`` over ids departed by
    ``up_to_tick`` (end of run when None); 0 when nothing was forwarded.
    """
    sig_a, sig_b = trace_a.arrival_signature(), trace_b.arrival_signature()
    if any(len(x) != len(y) or np.any(x != y) for x, y in zip(sig_a, sig_b)):
        raise ValueError("traces were produced from different arrival streams")
    fa = forwarded_ids(trace_a, up_to_tick)
    fb = forwarded_ids(trace_b, up_to_tick)
    denom = len(fa) + len(fb)
    if denom == 0:
        return 0.0
    only_a = len(np.setdiff1d(fa, fb, assume_unique=True))
    only_b = len(np.setdiff1d(fb, fa, assume_unique=True))
    return (only_a + only_b) / denom


def flow_throughput(trace: Trace, bucket_ticks: int) -> dict:
    """Departures per flow in consecutive buckets tiling ``[0, last tick]``."""
    if bucket_ticks < 1:
        raise ValueError("bucket_ticks must be positive")
    cols = trace.columns()
    if not len(cols["tick"]):
        return {}
    n_buckets = int(cols["tick"].max()) // bucket_ticks + 1
    dep = cols["kind"] == EventKind.DEPART
    flows = cols["flow_id"]
    out = {}
    for f in np.unique(flows[cols["kind"] == EventKind.ARRIVAL]).tolist():
        m = dep & (flows == f)
        buckets = cols["tick"][m] // bucket_ticks
        out[None if f < 0 else f] = np.bincount(buckets, minlength=n_buckets)
    return out


def rank_table(trace: Trace) -> list[tuple]:
    """Rows of ``METRIC_COLUMNS``, one per rank."""
    arrived = arrivals_per_rank(trace)
    forwarded = departures_per_rank(trace)
    dropped = drops_per_rank(trace)
    inv = inversions_per_rank(trace)
    return [(r, int(arrived[r]), int(forwarded[r]), int(dropped[r]), int(inv[r]))
            for r in range(len(arrived))]


def summary(trace: Trace, reference: Optional[Trace] = None) -> dict:
    """Totals for one run; ``delta_vs_pifo`` when a PIFO reference is given."""
    rows = rank_table(trace)
    out = {
        "scheduler": trace.scheduler_kind,
        "seed": trace.seed,
        "config": trace.digest,
        "arrived": sum(r[1] for r in rows),
        "forwarded": sum(r[2] for r in rows),
        "dropped": sum(r[3] for r in rows),
        "inversions": sum(r[4] for r in rows),
        "min_dropped_rank": min_dropped_rank(trace),
    }
    if reference is not None:
        out["delta_vs_pifo"] = delta_vs(reference, trace)
    return out
