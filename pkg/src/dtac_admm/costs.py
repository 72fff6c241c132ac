"""Scalar convex agent costs and the local subproblems built on them.

Every cost exposes ``value`` and ``derivative`` (a subgradient for
non-smooth costs). The engine and the oracle only need those two plus the
box-constrained scalar minimizer :func:`bisect_minimizer`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "ArgminError",
    "Quadratic",
    "LogExp",
    "Custom",
    "AgentSpec",
    "Problem",
    "bisect_minimizer",
    "local_argmin",
    "dual_value",
]

ARGMIN_TOL = 1e-12
MAX_BISECTIONS = 200


class ArgminError(RuntimeError):
    """The scalar subproblem could not be solved."""


@dataclass(frozen=True)
class Quadratic:
    """``gamma * y**2 + beta * y + alpha``."""

    gamma: float
    beta: float = 0.0
    alpha: float = 0.0

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError(f"quadratic cost needs gamma >= 0, got {self.gamma}")

    def value(self, y: float) -> float:
        return self.gamma * y * y + self.beta * y + self.alpha

    def derivative(self, y: float) -> float:
        return 2.0 * self.gamma * y + self.beta


def _softplus(z: float) -> float:
    return max(z, 0.0) + math.log1p(math.exp(-abs(z)))


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@dataclass(frozen=True)
class LogExp:
    """``0.5 * curvature * (y - center)**2 + log(1 + exp(slope * (y - shift)))``."""

    curvature: float
    center: float
    slope: float
    shift: float

    def __post_init__(self):
        if not self.curvature >= 0:
            raise ValueError(f"logexp cost needs curvature >= 0, got {self.curvature}")

    def value(self, y: float) -> float:
        return 0.5 * self.curvature * (y - self.center) ** 2 + _softplus(self.slope * (y - self.shift))

    def derivative(self, y: float) -> float:
        return self.curvature * (y - self.center) + self.slope * _sigmoid(self.slope * (y - self.shift))


@dataclass(frozen=True)
class Custom:
    """User supplied convex cost. ``subgradient`` must be non-decreasing."""

    evaluator: Callable[[float], float]
    subgradient: Callable[[float], float]
    name: str = "custom"

    def value(self, y: float) -> float:
        return float(self.evaluator(y))

    def derivative(self, y: float) -> float:
        return float(self.subgradient(y))


CostModel = Quadratic | LogExp | Custom


@dataclass(frozen=True)
class AgentSpec:
    """One agent: its cost, demand offset ``b``, box ``[m, M]`` and coupling weight ``a``."""

    cost: CostModel
    b: float
    m: float
    M: float
    a: float = 1.0

    def __post_init__(self):
        if not self.m <= self.M:
            raise ValueError(f"empty box [{self.m}, {self.M}]")
        if self.a == 0:
            raise ValueError("coupling weight a must be non-zero")

    def clamp(self, y: float) -> float:
        return min(max(y, self.m), self.M)


@dataclass(frozen=True)
class Problem:
    """Resource allocation instance: minimize the summed costs subject to
    ``sum(a_i * y_i - b_i) == 0`` and the per-agent boxes."""

    agents: tuple[AgentSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if not self.agents:
            raise ValueError("problem needs at least one agent")

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def a(self) -> np.ndarray:
        return np.array([s.a for s in self.agents])

    @property
    def b(self) -> np.ndarray:
        return np.array([s.b for s in self.agents])

    @property
    def lower(self) -> np.ndarray:
        return np.array([s.m for s in self.agents])

    @property
    def upper(self) -> np.ndarray:
        return np.array([s.M for s in self.agents])

    def objective(self, y) -> float:
        return float(sum(s.cost.value(float(v)) for s, v in zip(self.agents, y)))

    def residual(self, y) -> float:
        """Coupling constraint violation ``sum(a*y - b)``."""
        return float(np.sum(self.a * np.asarray(y, dtype=float) - self.b))

    def feasible_range(self) -> tuple[float, float]:
        """Range of ``sum(a*y)`` reachable inside the boxes."""
        lo = sum(min(s.a * s.m, s.a * s.M) for s in self.agents)
        hi = sum(max(s.a * s.m, s.a * s.M) for s in self.agents)
        return lo, hi

    def is_strictly_feasible(self) -> bool:
        """A point strictly inside every box meets the coupling constraint."""
        lo, hi = self.feasible_range()
        total = float(np.sum(self.b))
        if all(s.m == s.M for s in self.agents):
            return False
        return lo < total < hi


def bisect_minimizer(raw_deriv: Callable[[float], float], lo: float, hi: float,
                     tol: float = ARGMIN_TOL, max_iter: int = MAX_BISECTIONS) -> float:
    """Minimize a convex scalar function on ``[lo, hi]`` given its derivative.

    Returns an end point when the derivative does not change sign there.
    """
    def deriv(y):
        g = raw_deriv(y)
        if not math.isfinite(g):
            raise ArgminError(f"argmin failed: derivative {g} at y={y}")
        return g

    if deriv(lo) >= 0:
        return lo
    if deriv(hi) <= 0:
        return hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol or mid in (lo, hi):
            return mid
        g = deriv(mid)
        if g > 0:
            hi = mid
        elif g < 0:
            lo = mid
        else:
            return mid
    raise ArgminError(f"argmin failed: bracket [{lo}, {hi}] after {max_iter} bisections")


def _check_finite(**values: float) -> None:
    for name, v in values.items():
        if not math.isfinite(v):
            raise ArgminError(f"non-finite input {name}={v}")


def local_argmin(spec: AgentSpec, eta: float, y_prev: float, delta: float, c: float) -> float:
    """Solve the per-iteration ADMM subproblem of one agent.

    Minimizes ``phi(y) + eta * a * y + c/2 * (a*y - a*y_prev + delta)**2``
    over ``y`` in ``[m, M]``. Quadratic costs use the closed form, everything
    else bisects on the derivative.
    """
    _check_finite(eta=eta, y_prev=y_prev, delta=delta, c=c)
    if not c > 0:
        raise ArgminError(f"penalty c must be positive, got {c}")
    a = spec.a
    cost = spec.cost
    if isinstance(cost, Quadratic):
        y = (c * a * a * y_prev - c * a * delta - a * eta - cost.beta) / (2.0 * cost.gamma + c * a * a)
        return spec.clamp(y)

    def deriv(y: float) -> float:
        return cost.derivative(y) + eta * a + c * a * (a * y - a * y_prev + delta)

    return bisect_minimizer(deriv, spec.m, spec.M)


def dual_value(spec: AgentSpec, x: float) -> tuple[float, float]:
    """Local dual function ``f(x) = min_{y in box} phi(y) + x * (a*y - b)``.

    Returns ``(f(x), y*(x))``.
    """
    _check_finite(x=x)
    cost, a = spec.cost, spec.a
    if isinstance(cost, Quadratic):
        if cost.gamma > 0:
            y = spec.clamp(-(cost.beta + a * x) / (2.0 * cost.gamma))
        else:
            slope = cost.beta + a * x
            y = spec.m if slope > 0 else spec.M if slope < 0 else 0.5 * (spec.m + spec.M)
    else:
        y = bisect_minimizer(lambda v: cost.derivative(v) + a * x, spec.m, spec.M)
    return cost.value(y) + x * (a * y - spec.b), y
