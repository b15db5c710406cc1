import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from switchdiag.system import SwitchedDelaySystem, paper_example

settings.register_profile(
    "switchdiag",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("switchdiag")

SQRT6 = math.sqrt(6)
LAMBDA_A2 = (1 + SQRT6) / 4
MU_A2 = (2 + SQRT6) / 4
LAMBDA_A94 = (13 + math.sqrt(217)) / 32
# minimal mu at a = 9/4 for the printed matrices, from the row selection 4*[[a,3],[2,2]]
MU_A94 = (17 + math.sqrt(385)) / 32
REFERENCE_D_FAMILY = np.array([[1.179, 0.5], [1.3, 1.0]])


def zero_system(n=2, N=2, l=1, model="persidskii"):
    return SwitchedDelaySystem(np.zeros((N, n, n)), np.zeros((l, N, n, n)), model)


def random_system(rng, n, N, l=1, scale=1.0, model="persidskii"):
    A = rng.uniform(0, scale, (N, n, n))
    B = rng.uniform(0, scale, (N, n, n))
    return SwitchedDelaySystem.single_delay(A, B, l=l, model=model)


@pytest.fixture
def sys_a2():
    return paper_example(2)


@pytest.fixture
def sys_a94():
    return paper_example(2.25)


# one PASS/FAIL line per acceptance criterion in the terminal summary
_acceptance = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if not item.module.__name__.endswith("test_acceptance"):
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        title = (item.function.__doc__ or item.name).strip().splitlines()[0]
        if hasattr(item, "callspec"):
            title += f" [{item.callspec.id}]"
        _acceptance.append((title, rep.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for title, outcome in _acceptance:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {title}")
