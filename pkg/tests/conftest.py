import numpy as np
import pytest

from optsample.cli import load_scenario
from optsample.solver import make_grid, value_iterate

# criterion id -> (passed, detail), filled by test_acceptance and printed at the end
ACCEPTANCE_RESULTS: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k[2:])):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{key}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture(scope="session")
def ex1():
    return load_scenario("example1").model


@pytest.fixture(scope="session")
def ex1_solution(ex1):
    return value_iterate(ex1, grid=make_grid(2, 1000))


@pytest.fixture(scope="session")
def ex4():
    return load_scenario("example4").model


@pytest.fixture(scope="session")
def ex4_solution(ex4):
    return value_iterate(ex4, grid=make_grid(3, 125))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
