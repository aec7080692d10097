import pytest

from noisy_platoon import ChannelSpec, GainSet, PlatoonConfig, simulate
from noisy_platoon.synthesis import optimal_ka_headway

KA_OPT = optimal_ka_headway(5.0, 0.5)[0]

STABLE = GainSet(k_a=0.5, k_v=0.63, k_p=0.009, h_w=0.95)
UNSTABLE = GainSet(k_a=0.5, k_v=0.63, k_p=0.009, h_w=0.65)
OPTIMAL = GainSet(k_a=KA_OPT, k_v=0.85, k_p=0.003, h_w=0.88)


@pytest.fixture(scope="session")
def channel():
    return ChannelSpec(5.0)


@pytest.fixture(scope="session")
def platoon():
    return PlatoonConfig()


@pytest.fixture(scope="session")
def averaged_runs(platoon, channel):
    return {name: simulate(platoon, g, channel, "averaged")
            for name, g in (("stable", STABLE), ("unstable", UNSTABLE), ("optimal", OPTIMAL))}


# one line per acceptance criterion, printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
