"""Batch-mode admission cutoffs and queue bounds.

Bounds ``q_1 <= ... <= q_n`` map a rank ``r`` to the first queue (scanning
from the highest priority) with ``r <= q_i``. A bound equal to its
predecessor leaves that queue empty; ``-1`` is the empty prefix.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_capacities, check_ranks
from .model import Packet, RankDistribution

_EPS = 1e-9


class InfeasibleBoundsError(ValueError):
    """No rank-granular bound vector fits the admitted mass into the queues."""


@dataclass(frozen=True)
class BatchAdmission:
    r_drop: int
    t_drop: Optional[int]
    admitted_ids: frozenset

    def admits(self, pkt: Packet) -> bool:
        if pkt.rank >= self.r_drop:
            return False
        if self.t_drop is not None and pkt.rank == self.r_drop - 1:
            return pkt.id < self.t_drop
        return True


def admit_batch(packets: Sequence[Packet], B: int) -> BatchAdmission:
    """Admit the ``B`` lowest-``(rank, id)`` packets of a batch.

    ``r_drop`` is the smallest cutoff that admits that many packets by rank
    alone, except at a boundary rank that only partly fits: there
    ``t_drop`` is the id of the first packet of that rank left out.
    """
    if B < 0:
        raise ValueError("capacity must be non-negative")
    if B == 0 or not packets:
        return BatchAdmission(0 if B == 0 else max((p.rank for p in packets), default=-1) + 1,
                              None, frozenset())
    order = sorted(packets, key=lambda p: (p.rank, p.id))
    if len(order) <= B:
        return BatchAdmission(order[-1].rank + 1, None, frozenset(p.id for p in order))
    last_in, first_out = order[B - 1], order[B]
    t_drop = first_out.id if first_out.rank == last_in.rank else None
    return BatchAdmission(last_in.rank + 1, t_drop, frozenset(p.id for p in order[:B]))


def _check_bounds(bounds) -> list[int]:
    q = [int(b) for b in bounds]
    if not q:
        raise ValueError("need at least one bound")
    if q[0] < -1:
        raise ValueError("bounds must be >= -1")
    if any(b > a for a, b in zip(q[1:], q)):
        raise ValueError(f"bounds must be non-decreasing, got {tuple(q)}")
    return q


def _segments(bounds, max_rank):
    """Yield the inclusive rank range ``(lo, hi)`` owned by each queue."""
    prev = -1
    for q in bounds:
        hi = min(q, max_rank)
        yield prev + 1, hi
        prev = max(prev, hi)


def sched_unpifoness(bounds, dist: RankDistribution) -> float:
    """Expected same-queue rank pairs: sum of ``p(r) p(r')`` over ``r < r'``."""
    q = _check_bounds(bounds)
    p = dist.mass
    total = 0.0
    for lo, hi in _segments(q, dist.max_rank):
        for r in range(lo, hi + 1):
            for r2 in range(r + 1, hi + 1):
                total += p[r] * p[r2]
    return total


def sched_unpifoness_upper(bounds, dist: RankDistribution) -> float:
    """Worst-case bound taking ``p(r') = 1``: the mass mapped to each queue."""
    return float(sum(queue_loads(bounds, dist, 1.0)))


def queue_loads(bounds, dist: RankDistribution, total_mass: float) -> tuple:
    """Expected packets per queue, ``m_i = total * (F(q_i) - F(q_{i-1}))``."""
    q = _check_bounds(bounds)
    cdf = dist.cdf()
    loads, prev = [], 0.0
    for b in q:
        c = 0.0 if b < 0 else float(cdf[min(b, dist.max_rank)])
        loads.append(max(c - prev, 0.0) * total_mass)
        prev = max(prev, c)
    return tuple(loads)


def drop_unpifoness(bounds, dist: RankDistribution, capacities, total_mass: float) -> float:
    """Mapped packets in excess of queue capacity, summed over queues."""
    loads = queue_loads(bounds, dist, total_mass)
    caps = check_capacities(capacities)
    if len(caps) != len(loads):
        raise ValueError("need one capacity per bound")
    excess = 0.0
    for m, c in zip(loads, caps):
        if m > c + _EPS * max(1.0, total_mass):
            excess += m - c
    return excess


def _counts(dist, total_mass):
    return np.asarray(dist.mass) * total_mass


def admission_cutoff(dist: RankDistribution, capacity: int, total_mass: float) -> int:
    """Smallest ``r_drop`` admitting the most whole ranks within ``capacity``."""
    cdf = np.cumsum(_counts(dist, total_mass))
    tol = _EPS * max(1.0, total_mass)
    r_drop = 0
    for r in range(dist.max_rank + 1):
        if cdf[r] <= capacity + tol:
            r_drop = r + 1
        else:
            break
    # trim zero-mass ranks just below the cutoff
    while r_drop > 0 and dist.mass[r_drop - 1] == 0:
        r_drop -= 1
    return r_drop


def optimal_bounds_drop(dist: RankDistribution, capacities, total_mass: float) -> tuple:
    """Greedy zero-drop bounds: each ``q_i`` as large as queue ``i`` allows.

    Each bound is trimmed back over zero-mass ranks so that equivalent
    vectors collapse to the smallest one. The last bound must reach the
    admission cutoff; if rank granularity prevents that the mapping is
    infeasible and per-queue arrival cutoffs are needed (see ``batch_map``).
    """
    caps = check_capacities(capacities)
    counts = _counts(dist, total_mass)
    tol = _EPS * max(1.0, total_mass)
    R = dist.max_rank
    bounds, prev, used = [], -1, 0.0
    for cap in caps:
        q, acc = prev, 0.0
        while q < R and acc + counts[q + 1] <= cap + tol:
            q += 1
            acc += counts[q]
        while q > prev and counts[q] == 0:
            q -= 1
        bounds.append(q)
        prev = q
        used += acc
    r_drop = admission_cutoff(dist, sum(caps), total_mass)
    if bounds[-1] < r_drop - 1:
        need = float(np.sum(counts[:r_drop]))
        stuck = next(r for r in range(bounds[-1] + 1, r_drop) if counts[r] > 0)
        raise InfeasibleBoundsError(
            f"admitted mass {need:g} (ranks < {r_drop}) does not fit rank-granular queues "
            f"{caps}: greedy bounds {tuple(bounds)} place only {used:g}; rank "
            f"{stuck} carries {counts[stuck]:g} packets, more than the space left in "
            f"its queue")
    return tuple(bounds)


def _pair_cost_tables(p):
    P = np.concatenate([[0.0], np.cumsum(p)])
    P2 = np.concatenate([[0.0], np.cumsum(np.asarray(p) ** 2)])
    return P, P2


def optimal_bounds_sched(dist: RankDistribution, n: int) -> tuple:
    """Exact minimiser of ``sched_unpifoness`` over bounds covering the support.

    Dynamic program over (queue, previous bound); a segment's cost is
    ``(S^2 - sum p^2) / 2`` with ``S`` its mass. Bounds lie in
    ``[0, max support rank]`` with the last one pinned to the top; ties go
    to the lexicographically smallest vector.
    """
    if n < 1:
        raise ValueError("need at least one queue")
    support = dist.support()
    M = support[-1]
    p = np.asarray(dist.mass[:M + 1])
    P, P2 = _pair_cost_tables(p)

    def cost(a, b):  # ranks a+1..b
        if b <= a:
            return 0.0
        s = P[b + 1] - P[a + 1]
        return 0.5 * (s * s - (P2[b + 1] - P2[a + 1]))

    # best[i][a]: minimal cost of queues i..n-1 when the previous bound is a (index a+1)
    inf = float("inf")
    best = [[inf] * (M + 2) for _ in range(n + 1)]
    best[n][M + 1] = 0.0
    for i in range(n - 1, -1, -1):
        for a in ([-1] if i == 0 else range(M + 1)):
            cand = inf
            for b in range(max(a, 0), M + 1):
                v = cost(a, b) + best[i + 1][b + 1]
                if v < cand:
                    cand = v
            best[i][a + 1] = cand
    bounds, a = [], -1
    for i in range(n):
        target = best[i][a + 1]
        for b in range(max(a, 0), M + 1):
            if cost(a, b) + best[i + 1][b + 1] <= target + 1e-12:
                bounds.append(b)
                a = b
                break
    return tuple(bounds)


BRUTE_FORCE_MAX_RANK = 12
BRUTE_FORCE_MAX_QUEUES = 4


def brute_force_bounds(dist: RankDistribution, n_or_capacities, objective: str = "sched",
                       total_mass: float = 1.0):
    """Exhaustive search over monotone bound vectors (test oracle).

    ``sched`` minimises ``sched_unpifoness`` over vectors in
    ``[0, max support]`` ending at the top of the support. ``drop``
    minimises ``drop_unpifoness`` over vectors ending at the admission
    cutoff minus one. Returns ``(bounds, value)``; ties go to the
    lexicographically smallest vector.
    """
    if objective == "sched":
        n = int(n_or_capacities)
        top = dist.support()[-1]
        caps = None
    elif objective == "drop":
        caps = check_capacities(n_or_capacities)
        n = len(caps)
        top = admission_cutoff(dist, sum(caps), total_mass) - 1
    else:
        raise ValueError(f"unknown objective {objective!r}")
    if dist.max_rank > BRUTE_FORCE_MAX_RANK or n > BRUTE_FORCE_MAX_QUEUES:
        raise ValueError("brute force budget exceeded (max_rank <= 12, n <= 4)")
    best, best_val = None, float("inf")
    lo = 0 if objective == "sched" else -1
    for head in itertools.combinations_with_replacement(range(lo, max(top, lo) + 1), n - 1):
        q = (*head, top)
        if objective == "sched":
            val = sched_unpifoness(q, dist)
        else:
            val = drop_unpifoness(q, dist, caps, total_mass)
        if val < best_val - 1e-12:
            best, best_val = q, val
    return best, best_val


@dataclass(frozen=True)
class QueueAssignment:
    packets: tuple
    bound: int
    carry_from: Optional[int]


def batch_map(packets: Sequence[Packet], capacities) -> list[QueueAssignment]:
    """Fill queues in ``(rank, id)`` order, carrying overflow to the next queue.

    For each queue the bound is the highest rank it holds; ``carry_from`` is
    the id of the first packet of that rank pushed to the next queue, if
    the rank was split.
    """
    caps = check_capacities(capacities)
    order = sorted(packets, key=lambda p: (p.rank, p.id))
    if len(order) > sum(caps):
        raise ValueError(f"{len(order)} packets exceed total capacity {sum(caps)}")
    out, pos, bound = [], 0, -1
    for cap in caps:
        chunk = order[pos:pos + cap]
        pos += len(chunk)
        if chunk:
            bound = chunk[-1].rank
        cut = None
        if chunk and pos < len(order) and order[pos].rank == chunk[-1].rank:
            cut = order[pos].id
        out.append(QueueAssignment(tuple(chunk), bound, cut))
    return out


class QueueBoundsOptimizer(ClusterMixin, BaseEstimator):
    """Fit admission cutoff and queue bounds to a batch of ranks.

    ``fit`` takes a 1-D array of ranks in arrival order. ``predict`` maps
    ranks to 1-based queue indices with 0 for packets refused admission.
    ``fit_predict`` returns the exact batch placement, resolving split ranks
    by arrival order.

    Parameters
    ----------
    capacities : sequence of int
        Per-queue buffer sizes, highest priority first.
    objective : {"drop", "sched"}
        ``drop`` uses the greedy zero-drop bounds; ``sched`` minimises the
        expected same-queue rank pairs over the admitted ranks.
    """

    def __init__(self, capacities=(10,) * 8, objective="drop"):
        self.capacities = capacities
        self.objective = objective

    def fit(self, X, y=None):
        ranks = check_ranks(X)
        caps = check_capacities(self.capacities)
        if self.objective not in ("drop", "sched"):
            raise ValueError(f"objective must be 'drop' or 'sched', got {self.objective!r}")
        packets = [Packet(i, int(r)) for i, r in enumerate(ranks)]
        B = sum(caps)
        admission = admit_batch(packets, B)
        dist = RankDistribution.from_counts(np.bincount(ranks))
        total = float(len(ranks))

        self.admission_ = admission
        self.r_drop_ = admission.r_drop
        self.t_drop_ = admission.t_drop
        self.distribution_ = dist
        self.total_mass_ = total
        if self.objective == "drop":
            self.bounds_ = optimal_bounds_drop(dist, caps, total)
        elif admission.r_drop == 0:
            self.bounds_ = (-1,) * len(caps)
        else:
            admitted = np.bincount(ranks[ranks < admission.r_drop])
            self.bounds_ = optimal_bounds_sched(RankDistribution.from_counts(admitted), len(caps))
        self.loads_ = queue_loads(self.bounds_, dist, total)
        self.sched_unpifoness_ = sched_unpifoness(self.bounds_, dist)
        self.sched_unpifoness_upper_ = sched_unpifoness_upper(self.bounds_, dist)
        self.drop_unpifoness_ = drop_unpifoness(self.bounds_, dist, caps, total)
        self._packets = packets
        return self

    def predict(self, X):
        check_is_fitted(self, "bounds_")
        ranks = check_ranks(X)
        bounds = np.asarray(self.bounds_)
        idx = np.searchsorted(bounds, ranks, side="left") + 1
        idx[(ranks >= self.r_drop_) | (idx > len(bounds))] = 0
        return idx

    def fit_predict(self, X, y=None):
        self.fit(X)
        admitted = [p for p in self._packets if self.admission_.admits(p)]
        labels = np.zeros(len(self._packets), dtype=np.int64)
        for i, a in enumerate(batch_map(admitted, self.capacities), start=1):
            for p in a.packets:
                labels[p.id] = i
        return labels
