import numpy as np
import pytest

from dtac_admm.costs import AgentSpec, Problem, Quadratic
from dtac_admm.topology import build_weights_custom, build_weights, random_connected_edges

CYCLE6_W = np.array([
    [0.5, 0.25, 0, 0, 0, 0.25],
    [0.25, 0.5, 0.25, 0, 0, 0],
    [0, 0.25, 0.5, 0.25, 0, 0],
    [0, 0, 0.25, 0.5, 0.25, 0],
    [0, 0, 0, 0.25, 0.5, 0.25],
    [0.25, 0, 0, 0, 0.25, 0.5],
])


def fig1_problem(seed=3, n=6, demand=500.0):
    rng = np.random.default_rng(seed)
    gamma = rng.uniform(0.02, 0.05, n)
    beta = rng.uniform(-4, 1, n)
    return Problem([AgentSpec(Quadratic(gamma[i], beta[i]), demand / n, 0.0, 100.0)
                    for i in range(n)])


def random_instance(rng, n_range=(3, 8)):
    """Random connected network with a strictly feasible quadratic problem."""
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    net = build_weights(random_connected_edges(n, 0.5, rng), n)
    gamma = rng.uniform(0.05, 1.0, n)
    beta = rng.uniform(-2, 2, n)
    lower = rng.uniform(-5, 0, n)
    upper = rng.uniform(5, 10, n)
    total = rng.uniform(lower.sum() + 1, upper.sum() - 1)
    agents = [AgentSpec(Quadratic(gamma[i], beta[i]), total / n, lower[i], upper[i]) for i in range(n)]
    y0 = lower + (upper - lower) * rng.random(n)
    return net, Problem(agents), y0


@pytest.fixture
def cycle6():
    return build_weights_custom(CYCLE6_W)


@pytest.fixture
def fig1():
    return fig1_problem()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
