from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from frackbench import reference
from frackbench.scenario import (BoundaryCondition, FractureNetwork, Region, Scenario, builtin_benchmark)

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA = Path(__file__).parent / "data"


def unit_square_scenario(bcs=None, K=((1.0, 0.0), (0.0, 1.0)), network=(), name="unit"):
    dom = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))
    if bcs is None:
        bcs = (BoundaryCondition("left", "dirichlet", 1.0), BoundaryCondition("right", "dirichlet", 0.0),
               BoundaryCondition("top", "neumann", 0.0), BoundaryCondition("bottom", "neumann", 0.0))
    return Scenario(dom, (Region(dom, K),), FractureNetwork(tuple(network)), tuple(bcs), name=name)


def linear_scenario(a=0.7, b=-1.3, c=0.25, K=((2.0, 0.0), (0.0, 0.5))):
    """All-Dirichlet data p = a x + b y + c on the unit square."""
    tags = ("left", "right", "top", "bottom")
    return unit_square_scenario(tuple(BoundaryCondition(t, "dirichlet", linear=(a, b, c)) for t in tags), K)


@pytest.fixture(scope="session")
def b2a():
    return builtin_benchmark("2a")


@pytest.fixture(scope="session")
def b2b():
    return builtin_benchmark("2b")


@pytest.fixture(scope="session")
def b2a_reference(b2a):
    return reference.solve_reference(b2a, reference.build_equidimensional_grid(b2a, cells_across=10))


@pytest.fixture(scope="session")
def b2b_reference(b2b):
    return reference.solve_reference(b2b, reference.build_equidimensional_grid(b2b, cells_across=10))


@pytest.fixture(scope="session")
def b3b():
    return builtin_benchmark("3b")


@pytest.fixture(scope="session")
def b3b_reference(b3b):
    return reference.solve_hybrid_reference(b3b, *reference.HYBRID_REFERENCE_SIZES["3b"])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, repeated at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
