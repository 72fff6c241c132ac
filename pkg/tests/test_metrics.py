import numpy as np
import pytest

from dtac_admm.engine import RunConfig, run
from dtac_admm.metrics import (
    RunRecord, augmented_lyapunov_series, error_series, lyapunov_series, optimality_gap,
    tail_nonincreasing,
)
from dtac_admm.oracle import OracleSolution, solve_dual_bisection
from dtac_admm.topology import assign_delays

Y0 = np.full(6, 500 / 12)


def test_constant_record_has_zero_errors():
    rec = RunRecord.constant([1.0, 2.0, 3.0], 0.5, 1.0, [1.0, 2.0, 3.0])
    es = error_series(rec)
    assert np.all(es.e_d == 0) and np.all(es.e_x == 0) and np.all(es.d_bar == 0)


def test_error_series_worked_example():
    # d = a*y - b = (1, -1), mean 0 -> ||d - 0|| = sqrt(2); x = (1, 3) -> spread sqrt(2)
    rec = RunRecord.constant([2.0, 0.0], [1.0, 3.0], 1.0, [1.0, 1.0])
    es = error_series(rec)
    assert es.e_d[0] == pytest.approx(np.sqrt(2))
    assert es.e_x[0] == pytest.approx(np.sqrt(2))
    assert es.last()["d_bar"] == 0.0


def test_lyapunov_zero_at_optimum():
    sol = OracleSolution(np.array([1.0, 1.0]), -2.0, 2.0, 0.0)
    rec = RunRecord.constant([1.0, 1.0], -2.0, 1.0, [1.0, 1.0], c=3.0, iterations=5)
    assert np.all(lyapunov_series(rec, sol).values == 0)


def test_lyapunov_worked_value():
    # x off by 1 on each agent, y off by (1, -1) with d_bar = 0: S = 2 + c^2 * 2
    sol = OracleSolution(np.array([1.0, 1.0]), -2.0, 2.0, 0.0)
    rec = RunRecord.constant([2.0, 0.0], -1.0, 1.0, [1.0, 1.0], c=3.0)
    assert lyapunov_series(rec, sol).values[0] == pytest.approx(2 + 9 * 2)


def test_lyapunov_needs_solution():
    rec = RunRecord.constant([1.0], 0.0, 1.0, [1.0])
    with pytest.raises(ValueError):
        lyapunov_series(rec, None)


def test_tail_nonincreasing():
    assert tail_nonincreasing([5, 4, 4, 3])
    assert not tail_nonincreasing([5, 4, 4.1, 3], slack=1e-6)
    assert tail_nonincreasing([1, 9, 4, 3], burn_in_index=1)


def test_optimality_gap():
    sol = OracleSolution(np.array([1.0, 1.0]), -2.0, 2.0, 0.0)
    rec = RunRecord.constant([1.5, 0.5], -2.5, 1.0, [1.0, 1.0], objective=2.5)
    primal, dual, obj = optimality_gap(rec, sol)
    assert (primal, dual, obj) == pytest.approx((0.5, 0.5, 0.5))


def test_run_lyapunov_decreases(cycle6, fig1):
    sol = solve_dual_bisection(fig1)
    rec = run(fig1, cycle6, assign_delays(cycle6, 0, "constant"), RunConfig(max_iters=3000), y0=Y0)
    lyap = lyapunov_series(rec, sol)
    assert lyap.nonincreasing
    assert lyap.values[-1] < 1e-3 * lyap.values[0]


def test_augmented_lyapunov_shape(cycle6, fig1):
    sol = solve_dual_bisection(fig1)
    rec = run(fig1, cycle6, assign_delays(cycle6, 2, "constant"), RunConfig(max_iters=50), y0=Y0)
    aug = augmented_lyapunov_series(rec, sol, 2)
    single = lyapunov_series(rec, sol).values
    assert aug.values[0] == pytest.approx(3 * single[0])
    assert aug.values[10] == pytest.approx(single[8:11].sum())


def test_d_bar_is_true_mean_residual(cycle6, fig1):
    rec = run(fig1, cycle6, assign_delays(cycle6, 4, "uniform_random", seed=1),
              RunConfig(max_iters=40), y0=Y0)
    assert np.allclose(rec.d_bar, np.mean(fig1.a * rec.y - fig1.b, axis=1))


def test_mean_dual_identity_without_delays(cycle6, fig1):
    # x_bar moves by c times the feasibility deviation of the new iterate
    rec = run(fig1, cycle6, assign_delays(cycle6, 0, "constant"), RunConfig(c=5.0, max_iters=200), y0=Y0)
    step = np.diff(rec.x_bar)
    assert np.max(np.abs(step - 5.0 * rec.d_bar[1:])) <= 1e-10
    assert np.allclose(rec.d_mean, rec.d_bar, atol=1e-10)
