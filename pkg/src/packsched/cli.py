"""Command-line front end: ``packsched {simulate,compare,optimize,bandwidth}``.

Experiments are described by a JSON file whose keys mirror
``SchedulerConfig`` and ``WorkloadSpec`` plus a few run options::

    {
      "schedulers": ["pifo", "packs"],
      "seeds": [1, 2, 3],
      "capacities": [10, 10, 10, 10, 10, 10, 10, 10],
      "window_size": 20, "burstiness": 0.0, "max_rank": 100,
      "distribution": "uniform", "distribution_params": {},
      "arrival_period": 10, "departure_period": 11, "total_arrivals": 100000,
      "scheduler_params": {"packs": {"window_policy": "admitted"}}
    }

Multi-flow runs add ``flows`` (explicit list) or ``staggered``
(``{"ranks": [...], "phase_ticks": S, "arrival_period": P}``) and
``bucket_ticks``. Command-line flags override file values. Every output
file carries the config hash and seed, and a failed invocation removes the
files it had already written.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import metrics
from .model import (SchedulerConfig, WorkloadSpec, staggered_flows, validate_config,
                    validate_workload)
from .optimizer import InfeasibleBoundsError, QueueBoundsOptimizer
from .schedulers import SCHEDULER_KINDS, make_scheduler
from .simulator import check_trace, config_digest, generate_arrivals, run_scenario

EXIT_OK, EXIT_CHECK_FAILED, EXIT_BAD_INPUT = 0, 1, 2
DEFAULT_SEEDS = (1, 2, 3, 4, 5)

_CFG_KEYS = {f.name for f in fields(SchedulerConfig)}
_WORKLOAD_KEYS = {f.name for f in fields(WorkloadSpec)}
_RUN_KEYS = {"schedulers", "seeds", "out", "formats", "scheduler_params",
             "staggered", "bucket_ticks"}


class UsageError(Exception):
    """Invalid configuration or arguments; maps to a nonzero exit."""


class Experiment:
    """Parsed configuration shared by the simulation subcommands."""

    def __init__(self, raw: dict, default_kinds=SCHEDULER_KINDS):
        unknown = set(raw) - _CFG_KEYS - _WORKLOAD_KEYS - _RUN_KEYS
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        try:
            self.config = SchedulerConfig(**{k: raw[k] for k in _CFG_KEYS if k in raw})
            work = {k: raw[k] for k in _WORKLOAD_KEYS if k in raw}
            if "staggered" in raw:
                st = raw["staggered"]
                work["flows"] = staggered_flows(st["ranks"], st["phase_ticks"],
                                                st["arrival_period"])
            self.workload = WorkloadSpec(**work)
        except (TypeError, KeyError) as exc:
            raise UsageError(f"malformed config: {exc}") from None
        errors = validate_config(self.config) + validate_workload(self.workload)
        self.kinds = list(raw.get("schedulers") or default_kinds)
        bad = [k for k in self.kinds if k not in SCHEDULER_KINDS]
        if bad:
            errors.append(f"unknown scheduler kinds {bad}; expected {list(SCHEDULER_KINDS)}")
        self.seeds = [int(s) for s in raw.get("seeds") or DEFAULT_SEEDS]
        self.scheduler_params = dict(raw.get("scheduler_params") or {})
        self.bucket_ticks = raw.get("bucket_ticks")
        if self.bucket_ticks is not None and int(self.bucket_ticks) < 1:
            errors.append("bucket_ticks must be positive")
        if errors:
            raise UsageError("invalid config: " + "; ".join(errors))
        # fail now rather than after some outputs exist
        for kind in self.kinds:
            try:
                make_scheduler(kind, self.config, **self.scheduler_params.get(kind, {}))
            except (TypeError, ValueError) as exc:
                raise UsageError(f"scheduler {kind}: {exc}") from None
        # equals Trace.digest unless scheduler overrides are in play
        extra = [self.scheduler_params] if self.scheduler_params else []
        self.digest = config_digest(self.config, self.workload, *extra)

    def scheduler(self, kind):
        return make_scheduler(kind, self.config, **self.scheduler_params.get(kind, {}))


class OutputSet:
    """Tracks files written by one invocation so a failure can undo them."""

    def __init__(self, root):
        self.root = Path(root)
        self.written: list[Path] = []

    def path(self, name) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        p = self.root / name
        self.written.append(p)
        return p

    def write_text(self, name, text):
        with open(self.path(name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)

    def discard(self):
        for p in self.written:
            try:
                p.unlink()
            except FileNotFoundError:
                pass
        self.written.clear()


def _csv(header, rows, preamble) -> str:
    lines = [f"# {preamble}", ",".join(header)]
    lines += [",".join("" if v is None else str(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load_config(args) -> dict:
    raw = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise UsageError("config must be a JSON object")
    if args.seed:
        raw["seeds"] = args.seed
    if args.scheduler:
        raw["schedulers"] = args.scheduler
    return raw


def _run_checked(exp, kind, seed, arrivals, report):
    trace = run_scenario(exp.config, exp.workload, kind, seed, arrivals=arrivals,
                         scheduler=exp.scheduler(kind))
    problems = check_trace(trace)
    for p in problems:
        report.append(f"{kind} seed {seed}: {p}")
    return trace


def _write_run(out, fmt, exp, kind, seed, trace, summary):
    stem = f"{kind}-seed{seed}"
    tag = f"scheduler={kind} seed={seed} config={exp.digest}"
    rows = metrics.rank_table(trace)
    if fmt == "csv":
        out.write_text(f"{stem}.ranks.csv", _csv(metrics.METRIC_COLUMNS, rows, tag))
        keys = sorted(summary)
        out.write_text(f"{stem}.summary.csv", _csv(keys, [[summary[k] for k in keys]], tag))
    else:
        table = [dict(zip(metrics.METRIC_COLUMNS, r)) for r in rows]
        out.write_text(f"{stem}.json", _json({"config": exp.digest, "seed": seed,
                                              "scheduler": kind, "ranks": table,
                                              "summary": summary}))


def cmd_simulate(args) -> int:
    exp = Experiment(_load_config(args))
    out = OutputSet(args.out)
    problems: list[str] = []
    try:
        for seed in exp.seeds:
            arrivals = generate_arrivals(exp.workload, seed, exp.config.max_rank)
            for kind in exp.kinds:
                trace = _run_checked(exp, kind, seed, arrivals, problems)
                summary = metrics.summary(trace)
                summary["config"] = exp.digest
                trace.write(out.path(f"{kind}-seed{seed}.trace"))
                _write_run(out, args.format, exp, kind, seed, trace, summary)
                print(f"{kind} seed={seed} forwarded={summary['forwarded']} "
                      f"dropped={summary['dropped']} inversions={summary['inversions']}")
    except BaseException:
        out.discard()
        raise
    return _finish(problems)


_COMPARE_COLUMNS = ("scheduler", "arrived", "forwarded", "dropped", "inversions",
                    "min_dropped_rank", "delta_vs_pifo")


def cmd_compare(args) -> int:
    exp = Experiment(_load_config(args))
    if len(exp.kinds) < 2:
        raise UsageError("compare needs at least two scheduler kinds")
    out = OutputSet(args.out)
    problems: list[str] = []
    try:
        for seed in exp.seeds:
            arrivals = generate_arrivals(exp.workload, seed, exp.config.max_rank)
            traces = {k: _run_checked(exp, k, seed, arrivals, problems) for k in exp.kinds}
            ref = traces.get("pifo")
            rows = []
            for kind, trace in traces.items():
                s = metrics.summary(trace, reference=ref if kind != "pifo" else None)
                s["config"] = exp.digest
                _write_run(out, args.format, exp, kind, seed, trace, s)
                rows.append([s.get(c) for c in _COMPARE_COLUMNS])
            tag = f"seed={seed} config={exp.digest}"
            if args.format == "csv":
                text = _csv(_COMPARE_COLUMNS, rows, tag)
                out.write_text(f"compare-seed{seed}.csv", text)
            else:
                text = _json({"config": exp.digest, "seed": seed,
                              "rows": [dict(zip(_COMPARE_COLUMNS, r)) for r in rows]})
                out.write_text(f"compare-seed{seed}.json", text)
            print(_csv(_COMPARE_COLUMNS, rows, tag), end="")
    except BaseException:
        out.discard()
        raise
    return _finish(problems)


def cmd_bandwidth(args) -> int:
    exp = Experiment(_load_config(args), default_kinds=("fifo", "packs"))
    if not exp.workload.flows:
        raise UsageError("bandwidth needs a multi-flow config ('flows' or 'staggered')")
    bucket = int(exp.bucket_ticks or exp.workload.departure_period * 1000)
    out = OutputSet(args.out)
    problems: list[str] = []
    try:
        for seed in exp.seeds:
            arrivals = generate_arrivals(exp.workload, seed, exp.config.max_rank)
            for kind in exp.kinds:
                trace = _run_checked(exp, kind, seed, arrivals, problems)
                series = metrics.flow_throughput(trace, bucket)
                flows = sorted(series)
                n = len(next(iter(series.values()))) if series else 0
                rows = [[b, b * bucket] + [int(series[f][b]) for f in flows] for b in range(n)]
                header = ["bucket", "start_tick"] + [f"flow_{f}" for f in flows]
                tag = f"scheduler={kind} seed={seed} config={exp.digest} bucket_ticks={bucket}"
                if args.format == "csv":
                    out.write_text(f"bandwidth-{kind}-seed{seed}.csv", _csv(header, rows, tag))
                else:
                    out.write_text(f"bandwidth-{kind}-seed{seed}.json",
                                   _json({"config": exp.digest, "seed": seed, "scheduler": kind,
                                          "bucket_ticks": bucket,
                                          "series": {str(f): series[f].tolist() for f in flows}}))
                print(f"{kind} seed={seed}: {n} buckets of {bucket} ticks, flows {flows}")
    except BaseException:
        out.discard()
        raise
    return _finish(problems)


def _read_distribution(path):
    """Rank sample from ``{rank: n}``, a list of counts, or either under ``"counts"``."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read distribution: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"distribution is not valid JSON: {exc}") from None
    counts = raw.get("counts", raw) if isinstance(raw, dict) else raw
    if isinstance(counts, dict):
        try:
            pairs = {int(r): int(c) for r, c in counts.items()}
        except ValueError:
            raise UsageError("counts must map integer ranks to integer counts") from None
        if not pairs:
            raise UsageError("distribution has no counts")
        dense = [0] * (max(pairs) + 1)
        for r, c in pairs.items():
            if r < 0:
                raise UsageError("ranks must be non-negative")
            dense[r] = c
        counts = dense
    if not isinstance(counts, list) or not all(isinstance(c, int) and c >= 0 for c in counts):
        raise UsageError("counts must be non-negative integers")
    if sum(counts) == 0:
        raise UsageError("distribution has no counts")
    return np.repeat(np.arange(len(counts)), counts)


def cmd_optimize(args) -> int:
    try:
        caps = tuple(int(c) for c in args.capacities.split(","))
    except ValueError:
        raise UsageError("capacities must be comma-separated integers") from None
    if not caps or min(caps) < 1:
        raise UsageError("capacities must be positive")
    ranks = _read_distribution(args.distribution)
    opt = QueueBoundsOptimizer(capacities=caps, objective=args.objective)
    try:
        opt.fit(ranks)
    except InfeasibleBoundsError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    report = {
        "objective": args.objective,
        "capacities": list(caps),
        "r_drop": opt.r_drop_,
        "t_drop": opt.t_drop_,
        "bounds": list(opt.bounds_),
        "loads": [round(float(m), 9) for m in opt.loads_],
        "sched_unpifoness": opt.sched_unpifoness_,
        "sched_unpifoness_upper": opt.sched_unpifoness_upper_,
        "drop_unpifoness": opt.drop_unpifoness_,
    }
    if args.format == "json":
        print(_json(report), end="")
    else:
        for k in ("r_drop", "t_drop", "bounds", "loads", "sched_unpifoness",
                  "sched_unpifoness_upper", "drop_unpifoness"):
            v = report[k]
            print(f"{k},{' '.join(map(str, v)) if isinstance(v, list) else v}")
    return EXIT_OK


def _finish(problems) -> int:
    for p in problems:
        print(f"check failed: {p}", file=sys.stderr)
    return EXIT_CHECK_FAILED if problems else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="packsched", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def run_flags(p):
        p.add_argument("--config", help="JSON experiment file")
        p.add_argument("--seed", type=int, action="append", help="repeatable; default 1..5")
        p.add_argument("--scheduler", action="append", choices=SCHEDULER_KINDS,
                       help="repeatable; default every kind")
        p.add_argument("--out", default="results", help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    run_flags(sub.add_parser("simulate", help="trace and per-rank metrics per run"))
    run_flags(sub.add_parser("compare", help="shared-stream comparison table"))
    run_flags(sub.add_parser("bandwidth", help="per-flow throughput series"))
    opt = sub.add_parser("optimize", help="batch admission cutoff and queue bounds")
    opt.add_argument("--distribution", required=True, help="JSON rank counts")
    opt.add_argument("--capacities", required=True, help="e.g. 2,2")
    opt.add_argument("--objective", choices=("drop", "sched"), default="drop")
    opt.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


_COMMANDS = {"simulate": cmd_simulate, "compare": cmd_compare,
             "bandwidth": cmd_bandwidth, "optimize": cmd_optimize}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"packsched: error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except OSError as exc:
        print(f"packsched: error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
