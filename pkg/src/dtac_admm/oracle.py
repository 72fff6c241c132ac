"""Centralized reference solution by bisection on the scalar dual variable."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .costs import Problem, dual_value

__all__ = ["OracleError", "OracleSolution", "solve_dual_bisection", "dual_sum",
           "project_onto_constraint", "random_feasible_candidates"]

BRACKET_LIMIT = 1e9
G_TOL = 1e-10


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleSolution:
    y_star: np.ndarray
    x_star: float
    objective: float
    residual: float
    dual_unique: bool = True
    primal_unique: bool = True

    def as_dict(self) -> dict:
        return {
            "y_star": [float(v) for v in self.y_star],
            "x_star": float(self.x_star),
            "objective": float(self.objective),
            "residual": float(self.residual),
            "dual_unique": self.dual_unique,
            "primal_unique": self.primal_unique,
        }


def _minimizers(problem: Problem, x: float) -> np.ndarray:
    return np.array([dual_value(s, x)[1] for s in problem.agents])


def dual_sum(problem: Problem, x: float) -> float:
    """``F(x) = sum_i f_i(x)``."""
    return float(sum(dual_value(s, x)[0] for s in problem.agents))


def solve_dual_bisection(problem: Problem, tol: float = G_TOL) -> OracleSolution:
    """Maximize the concave dual by locating the zero of its supergradient.

    ``g(x) = sum_i (a_i y_i*(x) - b_i)`` is non-increasing in ``x``; the
    bracket doubles until ``g`` changes sign, then bisection runs until
    ``|g| <= tol`` or the bracket is exhausted. A jump of ``g`` across zero
    (agents with flat costs) is resolved by interpolating between the one
    sided minimizers; a flat zero stretch returns its midpoint.
    """
    a, b = problem.a, problem.b

    def g(x):
        return float(np.sum(a * _minimizers(problem, x) - b))

    lo, hi = -1.0, 1.0
    while g(lo) < 0 or g(hi) > 0:
        lo, hi = 2 * lo, 2 * hi
        if hi > BRACKET_LIMIT:
            raise OracleError("infeasible or degenerate scenario: no sign change of the dual gradient")

    x = None
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if abs(gm) <= tol:
            x = mid
            break
        if mid in (lo, hi):
            break
        if gm > 0:
            lo = mid
        else:
            hi = mid

    dual_unique = primal_unique = True
    if x is None:
        # g jumps over zero between lo and hi
        y_lo, y_hi = _minimizers(problem, lo), _minimizers(problem, hi)
        g_lo, g_hi = np.sum(a * y_lo - b), np.sum(a * y_hi - b)
        t = g_lo / (g_lo - g_hi) if g_lo != g_hi else 0.5
        y = y_lo + t * (y_hi - y_lo)
        x = 0.5 * (lo + hi)
        primal_unique = False
    else:
        h = 1e-6 * max(1.0, abs(x))
        g_minus, g_plus = g(x - h), g(x + h)
        if abs(g_minus) <= tol and abs(g_plus) <= tol:
            left, right = _flat_extent(g, x, lo, hi, tol)
            x = 0.5 * (left + right)
            dual_unique = False
            y = _minimizers(problem, x)
        elif g_minus - g_plus > tol and g(x - h / 100) - g(x + h / 100) > 0.5 * (g_minus - g_plus):
            # g does not shrink with the probe width: a jump sits at x
            y_lo, y_hi = _minimizers(problem, x - h), _minimizers(problem, x + h)
            t = g_minus / (g_minus - g_plus)
            y = y_lo + t * (y_hi - y_lo)
            primal_unique = False
        else:
            y = _minimizers(problem, x)
    return OracleSolution(
        y_star=y, x_star=float(x), objective=problem.objective(y),
        residual=abs(problem.residual(y)), dual_unique=dual_unique,
        primal_unique=primal_unique,
    )


def _flat_extent(g, x, lo, hi, tol):
    """End points of the interval around ``x`` where ``|g| <= tol``."""
    def edge(inside, outside):
        for _ in range(200):
            mid = 0.5 * (inside + outside)
            if mid in (inside, outside):
                break
            if abs(g(mid)) <= tol:
                inside = mid
            else:
                outside = mid
        return inside
    return edge(x, lo), edge(x, hi)


def project_onto_constraint(problem: Problem, v) -> np.ndarray:
    """Euclidean projection of ``v`` onto the boxes intersected with the coupling constraint."""
    a, b = problem.a, problem.b
    lo_box, hi_box = problem.lower, problem.upper
    v = np.asarray(v, dtype=float)
    target = float(np.sum(b))

    def y_of(lam):
        return np.clip(v - lam * a, lo_box, hi_box)

    def h(lam):
        return float(np.sum(a * y_of(lam))) - target

    lo, hi = -1.0, 1.0
    while h(lo) < 0 or h(hi) > 0:
        lo, hi = 2 * lo, 2 * hi
        if hi > 1e12:
            raise OracleError("coupling constraint unreachable inside the boxes")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if h(mid) > 0:
            lo = mid
        else:
            hi = mid
    return y_of(0.5 * (lo + hi))


def random_feasible_candidates(problem: Problem, count: int, rng: np.random.Generator):
    """Random box points projected onto the feasible set."""
    lo, hi = problem.lower, problem.upper
    for _ in range(count):
        yield project_onto_constraint(problem, lo + (hi - lo) * rng.random(problem.n))
