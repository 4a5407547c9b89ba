import numpy as np
import pytest

from meran.model import SystemConfig, TaskSpec
from meran.scenario import from_channels, generate


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def reference_scenario():
    """The twenty reference workloads on a 20-RRH, 2-antenna layout."""
    return generate(7, 20, 20, 2)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def make_scenario(channels, tasks, **cfg):
    """Scenario built from explicit noise-normalized channel rows."""
    return from_channels(np.asarray(channels, dtype=complex), tasks, SystemConfig(**cfg))


def task(cycles_m, bits_m, deadline=1.0):
    return TaskSpec(cycles=cycles_m * 1e6, bits=bits_m * 1e6, deadline=deadline)


# Reference workload rows used to build small instances by hand: local-infeasible (OH)
# and locally feasible light tasks.
HEAVY = task(1.1, 0.15)      # F > f_local_max * T  -> must offload
HEAVY2 = task(1.21, 0.7)
LIGHT = task(0.8, 0.15)      # local power 0.512 W
LIGHT2 = task(0.9, 0.55)     # local power 0.729 W


# -- acceptance summary ------------------------------------------------------

ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
