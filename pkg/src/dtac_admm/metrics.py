"""Run records and the error, feasibility and Lyapunov quantities computed from them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RunRecord",
    "ErrorSeries",
    "LyapunovSeries",
    "error_series",
    "lyapunov_series",
    "augmented_lyapunov_series",
    "optimality_gap",
    "tail_nonincreasing",
    "inflight_totals",
    "BURN_IN",
]

BURN_IN = 100


@dataclass(eq=False)
class RunRecord:
    """Recorded trajectory of one run.

    ``y``, ``d`` and ``x`` have one row per recorded iteration (listed in
    ``iters``) and one column per agent. ``d_bar`` is the true mean
    feasibility deviation ``mean(a*y - b)``, not the mean of the tracker
    states ``d``; the two coincide only without delays.
    """

    variant: str
    c: float
    a: np.ndarray
    b: np.ndarray
    iters: np.ndarray
    y: np.ndarray
    d: np.ndarray
    x: np.ndarray
    objective: np.ndarray
    iterations: int = 0
    converged: bool = False
    stopped_early: bool = False
    runtime: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.y.shape[1]

    @property
    def d_bar(self) -> np.ndarray:
        return np.mean(self.a * self.y - self.b, axis=1)

    @property
    def d_mean(self) -> np.ndarray:
        """Mean of the tracker states ``d`` per recorded iteration."""
        return self.d.mean(axis=1)

    @property
    def x_bar(self) -> np.ndarray:
        return self.x.mean(axis=1)

    @property
    def dual_spread(self) -> np.ndarray:
        return self.x.max(axis=1) - self.x.min(axis=1)

    @property
    def final_y(self) -> np.ndarray:
        return self.y[-1]

    @property
    def final_x(self) -> np.ndarray:
        return self.x[-1]

    def weighted_residual(self) -> float:
        """``|sum(a*y - b)|`` at the last recorded iteration."""
        return float(abs(np.sum(self.a * self.y[-1] - self.b)))

    @classmethod
    def constant(cls, y, x, a, b, c: float = 1.0, iterations: int = 1, objective: float = 0.0):
        """Record that sits at ``(y, x)`` for ``iterations + 1`` rows, with ``d = a*y - b``."""
        y = np.asarray(y, dtype=float)
        a = np.broadcast_to(np.asarray(a, dtype=float), y.shape).copy()
        b = np.asarray(b, dtype=float)
        xs = np.broadcast_to(np.asarray(x, dtype=float), y.shape)
        rows = iterations + 1
        return cls(
            variant="constant", c=c, a=a, b=b, iters=np.arange(rows),
            y=np.tile(y, (rows, 1)), d=np.tile(a * y - b, (rows, 1)),
            x=np.tile(xs, (rows, 1)), objective=np.full(rows, objective),
            iterations=iterations,
        )


@dataclass(frozen=True)
class ErrorSeries:
    iters: np.ndarray
    e_d: np.ndarray
    e_x: np.ndarray
    d_bar: np.ndarray
    tail_window: int

    def last(self) -> dict:
        return {"e_d": float(self.e_d[-1]), "e_x": float(self.e_x[-1]),
                "d_bar": float(abs(self.d_bar[-1]))}

    def tail_max(self) -> dict:
        w = self.tail_window
        return {"e_d": float(np.max(self.e_d[-w:])), "e_x": float(np.max(self.e_x[-w:])),
                "d_bar": float(np.max(np.abs(self.d_bar[-w:])))}


def error_series(record: RunRecord, tail_window: int = 100) -> ErrorSeries:
    """Consensus errors ``||d - d_bar 1||``, ``||x - x_bar 1||`` and ``d_bar`` per record."""
    if len(record.iters) == 0:
        raise ValueError("empty record")
    d_bar = record.d_bar
    e_d = np.linalg.norm(record.d - d_bar[:, None], axis=1)
    e_x = np.linalg.norm(record.x - record.x_bar[:, None], axis=1)
    return ErrorSeries(record.iters, e_d, e_x, d_bar, min(tail_window, len(d_bar)))


def tail_nonincreasing(values, burn_in_index: int = 0, slack: float = 1e-6) -> bool:
    tail = np.asarray(values)[burn_in_index:]
    return bool(np.all(np.diff(tail) <= slack))


@dataclass(frozen=True)
class LyapunovSeries:
    iters: np.ndarray
    values: np.ndarray
    burn_in: int
    slack: float

    @property
    def nonincreasing(self) -> bool:
        start = int(np.searchsorted(self.iters, self.burn_in))
        return tail_nonincreasing(self.values, start, self.slack)

    @property
    def max_increase(self) -> float:
        """Largest one-step increase after burn-in (negative if strictly decreasing)."""
        start = int(np.searchsorted(self.iters, self.burn_in))
        tail = self.values[start:]
        if len(tail) < 2:
            return 0.0
        return float(np.max(np.diff(tail)))


def lyapunov_series(record: RunRecord, solution, c: float | None = None,
                    burn_in: int = BURN_IN, slack: float = 1e-6) -> LyapunovSeries:
    """``||x^k - x* 1||^2 + c^2 ||z^k - y*||^2`` with ``z^k = y^k - d_bar^k 1``.

    ``solution`` is the oracle's solution; it must expose ``y_star`` and
    ``x_star``.
    """
    if solution is None:
        raise ValueError("lyapunov series needs the oracle solution")
    c = record.c if c is None else c
    y_star = np.asarray(solution.y_star, dtype=float)
    z = record.y - record.d_bar[:, None]
    values = (np.sum((record.x - solution.x_star) ** 2, axis=1)
              + c * c * np.sum((z - y_star) ** 2, axis=1))
    return LyapunovSeries(record.iters, values, burn_in, slack)


def augmented_lyapunov_series(record: RunRecord, solution, tau_bar: int,
                              c: float | None = None) -> LyapunovSeries:
    """Augmented form of :func:`lyapunov_series` over the last ``tau_bar + 1`` states.

    Needs a record with every iteration stored. Entry ``k`` stacks
    ``x^k ... x^{k-tau_bar}`` and the matching ``z`` blocks; iterations
    before 0 repeat the initial state.
    """
    if solution is None:
        raise ValueError("lyapunov series needs the oracle solution")
    if not np.array_equal(record.iters, np.arange(len(record.iters))):
        raise ValueError("augmented series needs record_every=1")
    c = record.c if c is None else c
    y_star = np.asarray(solution.y_star, dtype=float)
    z = record.y - record.d_bar[:, None]
    per_step = (np.sum((record.x - solution.x_star) ** 2, axis=1)
                + c * c * np.sum((z - y_star) ** 2, axis=1))
    K = len(per_step)
    values = np.empty(K)
    for k in range(K):
        idx = [max(k - r, 0) for r in range(tau_bar + 1)]
        values[k] = per_step[idx].sum()
    return LyapunovSeries(record.iters, values, BURN_IN, 1e-6)


def optimality_gap(record: RunRecord, solution, problem=None) -> tuple[float, float, float]:
    """``(max|y - y*|, max|x_i - x*|, |Phi(y) - Phi(y*)|)`` at the final record.

    The objective gap uses ``problem`` when given, otherwise the recorded
    objective.
    """
    y = record.final_y
    primal = float(np.max(np.abs(y - np.asarray(solution.y_star))))
    dual = float(np.max(np.abs(record.final_x - solution.x_star)))
    phi = problem.objective(y) if problem is not None else float(record.objective[-1])
    return primal, dual, float(abs(phi - solution.objective))


def inflight_totals(record: RunRecord, W: np.ndarray, delay_matrix: np.ndarray):
    """Totals of ``d`` and ``x`` held by the agents plus those still on the links.

    For each iteration ``k`` returns ``sum_ij W_ij * sum_{s=k-tau_ij}^{k} v_j^s``
    (states before iteration 0 count as empty). With symmetric bi-stochastic
    weights the ``d`` total equals ``sum(a*y^k - b)`` and the ``x`` total grows
    by ``c * sum(d^{k+1})`` per step. Needs ``record_every=1``.
    """
    if not np.array_equal(record.iters, np.arange(len(record.iters))):
        raise ValueError("in-flight totals need record_every=1")
    D = np.asarray(delay_matrix)
    col_weight = {}
    n = W.shape[0]
    for i in range(n):
        for j in range(n):
            if W[i, j] != 0:
                col_weight.setdefault(int(D[i, j]), np.zeros(n))[j] += W[i, j]
    csum_d = np.vstack([np.zeros(record.n), np.cumsum(record.d, axis=0)])
    csum_x = np.vstack([np.zeros(record.n), np.cumsum(record.x, axis=0)])
    K = len(record.iters)
    ks = np.arange(K)
    tot_d = np.zeros(K)
    tot_x = np.zeros(K)
    for tau, w in col_weight.items():
        lo = np.maximum(ks - tau, 0)
        tot_d += (csum_d[ks + 1] - csum_d[lo]) @ w
        tot_x += (csum_x[ks + 1] - csum_x[lo]) @ w
    return tot_d, tot_x
