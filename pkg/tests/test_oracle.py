import numpy as np
import pytest

from dtac_admm.costs import AgentSpec, LogExp, Problem, Quadratic
from dtac_admm.oracle import (
    OracleError, dual_sum, project_onto_constraint, random_feasible_candidates,
    solve_dual_bisection,
)

from conftest import fig1_problem


def kkt_check(problem, sol, tol=1e-6):
    """Every agent's y minimizes phi + x* a y over its box."""
    for s, y in zip(problem.agents, sol.y_star):
        g = s.cost.derivative(y) + sol.x_star * s.a
        if y <= s.m + 1e-9:
            assert g >= -tol
        elif y >= s.M - 1e-9:
            assert g <= tol
        else:
            assert abs(g) <= tol


def test_two_agent_closed_form():
    # y1^2 + y2^2 with y1 + y2 = 2: y* = (1, 1), dual x* = -2
    p = Problem([AgentSpec(Quadratic(1.0), 1.0, -10, 10), AgentSpec(Quadratic(1.0), 1.0, -10, 10)])
    sol = solve_dual_bisection(p)
    assert np.allclose(sol.y_star, [1, 1], atol=1e-9)
    assert sol.x_star == pytest.approx(-2.0, abs=1e-9)
    assert sol.objective == pytest.approx(2.0, abs=1e-9)


def test_fig1_strong_duality():
    p = fig1_problem()
    sol = solve_dual_bisection(p)
    assert sol.residual <= 1e-8
    assert dual_sum(p, sol.x_star) == pytest.approx(sol.objective, abs=1e-7)
    kkt_check(p, sol)


def test_no_feasible_candidate_beats_oracle():
    p = fig1_problem(seed=9)
    sol = solve_dual_bisection(p)
    rng = np.random.default_rng(0)
    for y in random_feasible_candidates(p, 100, rng):
        assert abs(p.residual(y)) <= 1e-6
        assert p.objective(y) >= sol.objective - 1e-7


def test_weak_duality_everywhere():
    p = fig1_problem(seed=4)
    sol = solve_dual_bisection(p)
    for x in np.linspace(-10, 10, 41):
        assert dual_sum(p, x) <= sol.objective + 1e-7


def test_battery_balance():
    rng = np.random.default_rng(5)
    agents = [AgentSpec(Quadratic(rng.uniform(0.02, 0.05), rng.uniform(-4, 1)), 200 / 6,
                        rng.uniform(0, 10), rng.uniform(80, 120)) for _ in range(4)]
    agents += [AgentSpec(Quadratic(rng.uniform(0.02, 0.05), -4.0), 200 / 6,
                         rng.uniform(0, 5), rng.uniform(20, 40), a=-1.0) for _ in range(2)]
    p = Problem(agents)
    sol = solve_dual_bisection(p)
    gen, batt = sol.y_star[:4].sum(), sol.y_star[4:].sum()
    assert gen - batt == pytest.approx(200.0, abs=1e-7)
    kkt_check(p, sol)


def test_logexp_oracle_kkt():
    rng = np.random.default_rng(6)
    agents = [AgentSpec(LogExp(rng.uniform(0.02, 0.08), rng.uniform(20, 80), rng.uniform(-0.2, 0.2),
                               rng.uniform(20, 80)), 50.0, 0.0, 100.0) for _ in range(8)]
    p = Problem(agents)
    sol = solve_dual_bisection(p)
    assert sol.residual <= 1e-8
    kkt_check(p, sol)


def test_linear_costs_flag_non_unique_primal():
    # identical linear costs: any split works, g jumps across zero
    p = Problem([AgentSpec(Quadratic(0.0, 1.0), 1.0, 0, 2), AgentSpec(Quadratic(0.0, 1.0), 1.0, 0, 2)])
    sol = solve_dual_bisection(p)
    assert not sol.primal_unique
    assert abs(p.residual(sol.y_star)) <= 1e-9
    assert sol.x_star == pytest.approx(-1.0, abs=1e-6)


def test_flat_dual_flagged():
    # linear costs with different slopes and a demand met exactly at a kink: x* is an interval
    p = Problem([AgentSpec(Quadratic(0.0, 1.0), 1.0, 0, 1), AgentSpec(Quadratic(0.0, 3.0), 0.0, 0, 1)])
    sol = solve_dual_bisection(p)
    assert not sol.dual_unique
    assert -3.0 - 1e-6 <= sol.x_star <= -1.0 + 1e-6
    assert np.allclose(sol.y_star, [1, 0], atol=1e-9)


def test_infeasible_problem_raises():
    p = Problem([AgentSpec(Quadratic(1.0), 10.0, 0, 1), AgentSpec(Quadratic(1.0), 10.0, 0, 1)])
    with pytest.raises(OracleError):
        solve_dual_bisection(p)


def test_projection_lands_on_constraint():
    p = fig1_problem()
    v = np.full(6, 200.0)
    y = project_onto_constraint(p, v)
    assert abs(p.residual(y)) <= 1e-6
    assert np.all((y >= p.lower) & (y <= p.upper))


def test_oracle_beats_nearby_candidates():
    # perturbations of y* projected back: the hardest candidates to beat
    p = fig1_problem(seed=11)
    sol = solve_dual_bisection(p)
    rng = np.random.default_rng(12)
    for scale in (1e-3, 1e-1, 1.0):
        for _ in range(30):
            y = project_onto_constraint(p, sol.y_star + rng.normal(0, scale, p.n))
            assert p.objective(y) >= sol.objective - 1e-9
