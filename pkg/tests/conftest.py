import os

from hypothesis import HealthCheck, settings

from packsched import Packet

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=2000,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

SIX_RANKS = (1, 4, 5, 2, 1, 2)


def as_packets(ranks, start=0):
    return [Packet(start + i, r) for i, r in enumerate(ranks)]


def six_trace(kind, scheduler=None, capacities=(4,)):
    """The six-packet worked example with no service until every packet is in."""
    from packsched import SchedulerConfig, WorkloadSpec, run_scenario
    from packsched.simulator import ArrivalStream

    cfg = SchedulerConfig(capacities=capacities, window_size=6, max_rank=5)
    spec = WorkloadSpec(arrival_period=1, departure_period=100, total_arrivals=6)
    arrivals = ArrivalStream(range(1, 7), SIX_RANKS)
    return run_scenario(cfg, spec, kind, 0, arrivals=arrivals, scheduler=scheduler)


# one verdict line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
