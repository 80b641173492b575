"""Acceptance suite: one test per criterion (criterion 3 split per distribution).

Each check records a ``PASS``/``FAIL`` line that is echoed immediately and
again in the terminal summary.
"""

import itertools
import time

import numpy as np
import pytest

from packsched import (AifoScheduler, Packet, PifoScheduler, QueueBoundsOptimizer,
                       RankDistribution, SchedulerConfig, SlidingWindow, SpPifoScheduler,
                       WorkloadSpec, admit_batch, optimal_bounds_sched, run_comparison,
                       run_scenario, staggered_flows)
from packsched import metrics
from packsched.optimizer import brute_force_bounds, sched_unpifoness
from packsched.queueing import PifoBuffer, QueueBank
from packsched.schedulers import SCHEDULER_KINDS, DropReason, PacksScheduler
from packsched.simulator import EventKind, check_trace

from conftest import ACCEPTANCE_LINES, SIX_RANKS, as_packets, six_trace

pytestmark = pytest.mark.acceptance


def verdict(criterion, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


# -- 1. golden worked examples ------------------------------------------------

def test_c1_golden_examples():
    start = time.perf_counter()
    pifo = six_trace("pifo")
    pifo_dep = [e.rank for e in pifo if e.kind == EventKind.DEPART]
    pifo_drop = [e.rank for e in pifo if e.kind == EventKind.DROP]

    sp = six_trace("sppifo", SpPifoScheduler(capacities=(2, 2), initial_bounds=(1, 2),
                                              adaptive=False), capacities=(2, 2))
    sp_dep = [e.rank for e in sp if e.kind == EventKind.DEPART]
    sp_drop = [e.rank for e in sp if e.kind == EventKind.DROP]

    aifo = six_trace("aifo", AifoScheduler(capacity=4, fixed_cutoff=3))
    aifo_dep = [e.rank for e in aifo if e.kind == EventKind.DEPART]

    est = QueueBoundsOptimizer(capacities=(2, 2)).fit([1, 1, 2, 2, 4, 5])
    elapsed = time.perf_counter() - start

    checks = {
        "PIFO departs 1,1,2,2": pifo_dep == [1, 1, 2, 2],
        "PIFO drops 5 then 4": pifo_drop == [5, 4],
        "SP-PIFO departs 1,1,4,5": sp_dep == [1, 1, 4, 5],
        "SP-PIFO drops 2,2": sp_drop == [2, 2],
        "AIFO(r<3) departs 1,2,1,2": aifo_dep == [1, 2, 1, 2],
        "r_drop=3": est.r_drop_ == 3,
        "bounds (1,2)": est.bounds_ == (1, 2),
        "loads (2,2)": np.allclose(est.loads_, (2, 2)),
        "zero batch drops": est.drop_unpifoness_ == 0,
        "< 1 s": elapsed < 1.0,
    }
    bad = [k for k, v in checks.items() if not v]
    verdict("C1 golden examples", not bad,
            f"{len(checks) - len(bad)}/{len(checks)} exact matches in {elapsed:.3f}s"
            + (f"; mismatched: {bad}" if bad else ""))


# -- 2. oracle equivalences ---------------------------------------------------

def test_c2_oracle_equivalences():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)

    admit_bad = 0
    for _ in range(1000):
        n = int(rng.integers(1, 10**4 + 1))
        R = int(rng.integers(0, 101))
        ranks = rng.integers(0, R + 1, size=n).tolist()
        B = int(rng.integers(0, n + 20))
        pkts = as_packets(ranks)
        a = admit_batch(pkts, B)
        if B == 0:
            admit_bad += bool(a.admitted_ids)
            continue
        buf = PifoBuffer(B)
        for p in pkts:
            buf.offer(p)
        admit_bad += a.admitted_ids != {p.id for p in buf.contents}

    sched_bad, sched_cases = 0, 0
    grid = []
    for R in range(0, 9):
        for pattern in itertools.product((0, 1), repeat=R + 1):
            if any(pattern) and pattern[-1]:
                grid.append(RankDistribution.from_counts(pattern))
    for _ in range(500):
        R = int(rng.integers(0, 9))
        w = rng.random(R + 1) * (rng.random(R + 1) < 0.7)
        if not w.any():
            w[int(rng.integers(0, R + 1))] = 1.0
        grid.append(RankDistribution.from_counts(w))
    for d in grid:
        for n in (1, 2, 3):
            sched_cases += 1
            q = optimal_bounds_sched(d, n)
            _, best = brute_force_bounds(d, n, "sched")
            sched_bad += abs(sched_unpifoness(q, d) - best) > 1e-12

    equiv_bad = 0
    for i in range(100):
        cap = int(rng.integers(1, 40))
        R = int(rng.integers(1, 60))
        cfg = SchedulerConfig(capacities=(cap,), window_size=int(rng.integers(1, 50)),
                              burstiness=float(rng.choice([0.0, 0.1, 0.3])), max_rank=R)
        ap = int(rng.integers(1, 6))
        spec = WorkloadSpec(distribution=str(rng.choice(["uniform", "exponential", "convex",
                                                         "poisson"])),
                            arrival_period=ap, departure_period=ap + int(rng.integers(1, 4)),
                            total_arrivals=int(rng.integers(100, 3000)))
        tr = run_comparison(cfg, spec, ["aifo", "packs"], i)
        a, p = tr["aifo"].columns(), tr["packs"].columns()
        equiv_bad += any(not np.array_equal(a[c], p[c]) for c in a)
    elapsed = time.perf_counter() - start

    ok = admit_bad == 0 and sched_bad == 0 and equiv_bad == 0 and elapsed < 60
    verdict("C2 oracle equivalences", ok,
            f"admit_batch vs PIFO replay 1000 batches: {admit_bad} mismatches; "
            f"DP vs brute force {sched_cases} cases: {sched_bad} mismatches; "
            f"PACKS(n=1) vs AIFO 100 traces: {equiv_bad} mismatches; {elapsed:.1f}s")


# -- 3. behavioural reproduction ---------------------------------------------

DISTRIBUTIONS = ("uniform", "exponential", "poisson", "convex", "inverse_exponential")
SEEDS = (1, 2, 3, 4, 5)
_C3_CACHE = {}


def c3_results(dist):
    if dist not in _C3_CACHE:
        start = time.perf_counter()
        cfg = SchedulerConfig(capacities=(10,) * 8, window_size=20, burstiness=0.0,
                              max_rank=100)
        spec = WorkloadSpec(distribution=dist, arrival_period=10, departure_period=11,
                            total_arrivals=100_000)
        inv = {k: [] for k in SCHEDULER_KINDS}
        low = {k: [] for k in SCHEDULER_KINDS}
        for seed in SEEDS:
            for kind, trace in run_comparison(cfg, spec, SCHEDULER_KINDS, seed).items():
                inv[kind].append(int(metrics.inversions_per_rank(trace).sum()))
                m = metrics.min_dropped_rank(trace)
                low[kind].append(cfg.max_rank + 1 if m is None else m)
        _C3_CACHE[dist] = (inv, low, time.perf_counter() - start)
    return _C3_CACHE[dist]


@pytest.mark.slow
@pytest.mark.parametrize("dist", DISTRIBUTIONS)
def test_c3a_pifo_zero_inversions(dist):
    inv, _, elapsed = c3_results(dist)
    verdict(f"C3a {dist}", inv["pifo"] == [0] * 5 and elapsed < 60,
            f"PIFO inversions per seed {inv['pifo']}; {elapsed:.1f}s for 5 seeds x 5 policies")


@pytest.mark.slow
@pytest.mark.parametrize("dist", DISTRIBUTIONS)
def test_c3b_inversion_ordering(dist):
    inv, _, _ = c3_results(dist)
    per_seed = [inv["packs"][i] < inv["sppifo"][i] < min(inv["aifo"][i], inv["fifo"][i])
                for i in range(len(SEEDS))]
    verdict(f"C3b {dist}", all(per_seed),
            f"PACKS<SP-PIFO<min(AIFO,FIFO) per seed {per_seed}; PACKS {inv['packs']}, "
            f"SP-PIFO {inv['sppifo']}, AIFO {inv['aifo']}, FIFO {inv['fifo']}")


@pytest.mark.slow
@pytest.mark.parametrize("dist", DISTRIBUTIONS)
def test_c3c_reduction_vs_sppifo(dist):
    inv, _, _ = c3_results(dist)
    red = 1 - np.mean(inv["packs"]) / np.mean(inv["sppifo"])
    verdict(f"C3c {dist}", red >= 0.20,
            f"PACKS inversion reduction vs SP-PIFO {red:.1%} (floor 20%)")


@pytest.mark.slow
@pytest.mark.parametrize("dist", DISTRIBUTIONS)
def test_c3d_min_dropped_rank_ordering(dist):
    _, low, _ = c3_results(dist)
    chain = ("pifo", "packs", "aifo", "sppifo", "fifo")
    per_seed = [all(low[a][i] >= low[b][i] - 5 for a, b in zip(chain, chain[1:]))
                for i in range(len(SEEDS))]
    table = ", ".join(f"{k} {low[k]}" for k in chain)
    verdict(f"C3d {dist}", all(per_seed),
            f"PIFO>=PACKS>=AIFO>=SP-PIFO>=FIFO (slack 5) per seed {per_seed}; {table}")


# -- 4. stationary desk check -------------------------------------------------

@pytest.mark.slow
def test_c4_stationary_forwarding():
    start = time.perf_counter()
    R = 20
    cfg = SchedulerConfig(capacities=(500,) * 4, window_size=5000, max_rank=R)
    spec = WorkloadSpec(distribution="uniform", arrival_period=4, departure_period=5,
                        total_arrivals=10**6)
    delta_plus = 1 / (R + 1)
    details, ok = [], True
    for seed in (1, 2, 3):
        tr = run_comparison(cfg, spec, ["pifo", "packs"], seed)
        rp = metrics.per_rank_rates(tr["pifo"])
        rk = metrics.per_rank_rates(tr["packs"])
        off = [r for r in rp if abs(rk[r] - rp[r]) > 0.05]
        delta = metrics.delta_vs(tr["pifo"], tr["packs"])
        worst = max(abs(rk[r] - rp[r]) for r in rp)
        ok &= len(off) <= 1 and delta <= delta_plus + 0.05
        details.append(f"seed {seed}: ranks off by >0.05 {off}, max gap {worst:.3f}, "
                       f"delta {delta:.4f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 120
    verdict("C4 stationary PACKS vs PIFO", ok,
            "; ".join(details) + f"; bound {delta_plus + 0.05:.4f}; {elapsed:.1f}s")


# -- 5. bandwidth split -------------------------------------------------------

def phase_shares(kind, seed=1):
    phase, bucket = 150_000, 30_000
    flows = staggered_flows([3, 2, 1, 0], phase, 5)
    spec = WorkloadSpec(flows=flows, departure_period=6)
    cfg = SchedulerConfig(capacities=(10,) * 4, window_size=16)
    trace = run_scenario(cfg, spec, kind, seed)
    assert check_trace(trace) == []
    series = metrics.flow_throughput(trace, bucket)
    per = phase // bucket
    out = []
    for p in range(2 * len(flows) - 1):
        active = [f.flow_id for f in flows if f.start_tick <= p * phase < f.stop_tick]
        # the first bucket of each phase is a transient
        for b in range(p * per + 1, (p + 1) * per):
            total = sum(int(s[b]) for s in series.values())
            out.append((p, active, {f: series[f][b] / total for f in active}))
    return flows, out


@pytest.mark.slow
def test_c5_bandwidth_split():
    flows, packs = phase_shares("packs")
    _, fifo = phase_shares("fifo")
    rank = {f.flow_id: f.rank for f in flows}
    packs_min = min(share[min(active, key=rank.get)] for _, active, share in packs)
    fifo_dev = max(abs(s - 1 / len(active)) * len(active)
                   for _, active, share in fifo for s in share.values())
    ok = packs_min >= 0.95 and fifo_dev <= 0.10
    verdict("C5 bandwidth split", ok,
            f"PACKS lowest-rank active flow share min {packs_min:.3f} (>= 0.95); "
            f"FIFO max relative deviation from 1/f {fifo_dev:.3f} (<= 0.10) "
            f"over {len(packs)} steady buckets")


# -- 6. invariant fuzzing -----------------------------------------------------

def test_c6_invariant_fuzz():
    rng = np.random.default_rng(77)
    ops = {}

    # window: ring equals the last |W| pushes; quantile monotone and matches snapshot
    n = 0
    for _ in range(200):
        cap = int(rng.integers(1, 40))
        w = SlidingWindow(cap, 30)
        recent = []
        for r in rng.integers(0, 31, size=500).tolist():
            w.push(r)
            recent = (recent + [r])[-cap:]
            n += 1
            assert w.ranks() == recent
            probe = int(rng.integers(0, 32))
            q = w.quantile(probe)
            assert q == sum(x < probe for x in recent) / len(recent)
            assert q <= w.quantile(probe + 1) and w.quantile(0) == 0
        snap = np.asarray(w.snapshot().mass)
        assert all(abs(w.quantile(r) - snap[:r].sum()) < 1e-12 for r in range(32))
    ops["window"] = n

    # PIFO buffer vs sorted-list replay; bank conservation and strict priority
    n = 0
    for _ in range(100):
        cap = int(rng.integers(1, 30))
        buf, naive = PifoBuffer(cap), []
        caps = tuple(int(c) for c in rng.integers(1, 6, size=int(rng.integers(1, 6))))
        bank, held = QueueBank(caps), [0] * len(caps)
        for i in range(1000):
            r = int(rng.integers(0, 20))
            if rng.random() < 0.6:
                p = Packet(i, r)
                buf.offer(p)
                naive = sorted(naive + [p], key=lambda x: (x.rank, x.id))[:cap]
                qi = int(rng.integers(1, len(caps) + 1))
                held[qi - 1] += bank.enqueue(qi, p)
            else:
                assert buf.dequeue() == (naive.pop(0) if naive else None)
                lengths = bank.lengths()
                got, qi = bank.dequeue_with_index()
                if got is not None:
                    assert not any(lengths[:qi - 1])
                    held[qi - 1] -= 1
            assert buf.contents == naive and bank.lengths() == held
            n += 1
    ops["queueing"] = n

    # schedulers: PACKS never overfills nor touches buffered packets; static SP-PIFO bounds
    n = 0
    for _ in range(100):
        caps = tuple(int(c) for c in rng.integers(1, 8, size=int(rng.integers(1, 6))))
        s = PacksScheduler(capacities=caps, window_size=int(rng.integers(1, 30)),
                           burstiness=float(rng.choice([0.0, 0.5])), max_rank=50).reset()
        bounds = tuple(sorted(rng.integers(0, 50, size=len(caps)).tolist()))
        sp = SpPifoScheduler(capacities=caps, initial_bounds=bounds, adaptive=False).reset()
        for i in range(1000):
            if rng.random() < 0.7:
                p = Packet(i, int(rng.integers(0, 51)))
                before = [list(q.contents) for q in s.bank_.queues]
                d = s.on_arrival(p)
                for j, q in enumerate(s.bank_.queues):
                    assert len(q) <= q.capacity
                    assert list(q.contents)[:len(before[j])] == before[j]
                if d.queue is None:
                    assert d.reason in (DropReason.ADMISSION_REJECT, DropReason.QUEUE_FULL)
                qi = sp.on_arrival(p).queue
                assert qi is None or qi == 1 or bounds[qi - 1] <= p.rank
            else:
                s.on_service()
                sp.on_service()
            n += 1
    ops["schedulers"] = n

    # engine: conservation, structure and PIFO zero inversions on generated traces
    n = 0
    for i in range(60):
        kind = SCHEDULER_KINDS[i % len(SCHEDULER_KINDS)]
        cfg = SchedulerConfig(capacities=tuple(int(c) for c in rng.integers(1, 10, size=3)),
                              window_size=int(rng.integers(1, 30)), max_rank=40)
        ap = int(rng.integers(1, 5))
        spec = WorkloadSpec(distribution=str(rng.choice(list(DISTRIBUTIONS))),
                            arrival_period=ap, departure_period=ap + int(rng.integers(0, 3)),
                            total_arrivals=5000)
        trace = run_scenario(cfg, spec, kind, i)
        assert check_trace(trace) == []
        arr, dep, drp = (metrics.arrivals_per_rank(trace), metrics.departures_per_rank(trace),
                         metrics.drops_per_rank(trace))
        assert np.array_equal(arr, dep + drp)
        if kind == "pifo":
            assert not metrics.inversions_per_rank(trace).any()
        n += len(trace)
    ops["engine events"] = n

    total = sum(ops.values())
    verdict("C6 invariant fuzz", total >= 10**5,
            f"{total} random operations ({', '.join(f'{k} {v}' for k, v in ops.items())}), "
            "all invariants held")


@pytest.mark.slow
def test_c6_pifo_inversion_fuzz_million():
    cfg = SchedulerConfig(capacities=(80,), max_rank=100)
    spec = WorkloadSpec(distribution="convex", arrival_period=10, departure_period=11,
                        total_arrivals=10**6)
    trace = run_scenario(cfg, spec, "pifo", 99)
    inv = int(metrics.inversions_per_rank(trace).sum())
    problems = check_trace(trace)
    verdict("C6 PIFO 10^6-packet fuzz", inv == 0 and not problems,
            f"{inv} inversions, {len(problems)} conservation problems")
