from pathlib import Path

import numpy as np
import pytest

from mksys import EmpiricalMeasure, estimate_invariant, load_system, ulam_invariant

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"
LN2 = float(np.log(2.0))

# Two-state chain of fixture B, written out by hand: rows are V1, V2.
CHAIN_P = np.array([[0.9, 0.1], [0.2, 0.8]])


def chain_stationary():
    """Solve pi P = pi, sum(pi) = 1 directly for the 2x2 chain."""
    A = np.vstack([CHAIN_P.T - np.eye(2), np.ones(2)])
    pi, *_ = np.linalg.lstsq(A, np.array([0.0, 0.0, 1.0]), rcond=None)
    return pi


def shannon(row):
    row = np.asarray(row)
    return float(-np.sum(row * np.log(row)))


def chain_entropy():
    pi = chain_stationary()
    return float(sum(pi[i] * shannon(CHAIN_P[i]) for i in range(2)))


def fixture_path(name):
    return FIXTURES / f"{name}.mks"


@pytest.fixture(scope="session")
def sys_a():
    return load_system(fixture_path("bernoulli"))


@pytest.fixture(scope="session")
def sys_b():
    return load_system(fixture_path("chain2"))


@pytest.fixture(scope="session")
def sys_c():
    return load_system(fixture_path("placedep"))


@pytest.fixture(scope="session")
def sys_fig1():
    return load_system(fixture_path("fig1"))


@pytest.fixture(scope="session")
def sys_broken():
    return load_system(fixture_path("broken"))


@pytest.fixture(scope="session")
def all_systems(sys_a, sys_b, sys_c, sys_fig1):
    return {"A": sys_a, "B": sys_b, "C": sys_c, "fig1": sys_fig1}


@pytest.fixture(scope="session")
def pi_b(sys_b):
    """Exact stationary law of fixture B as a two-point weighted measure."""
    return EmpiricalMeasure(sys_b, np.array([[0.0], [1.0]]), chain_stationary())


@pytest.fixture(scope="session")
def ulam_a(sys_a):
    return ulam_invariant(sys_a, 1024)


@pytest.fixture(scope="session")
def ulam_c(sys_c):
    return ulam_invariant(sys_c, 4096)


@pytest.fixture(scope="session")
def emp_a_1e6(sys_a):
    return estimate_invariant(sys_a, 0.3, 10 ** 6, 1000, seed=11)


@pytest.fixture(scope="session")
def emp_c_1e6(sys_c):
    return estimate_invariant(sys_c, 0.3, 10 ** 6, 1000, seed=12)


# one line per acceptance criterion, echoed after the test run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
