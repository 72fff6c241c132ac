"""Synchronous-round simulation of the ADMM resource allocation variants.

Four variants share one record format:

``parallel``
    semi-centralized loop with a single shared dual and feasibility variable.
``distributed``
    consensus-based version without delays (matrix recursion).
``homogeneous``
    every consensus term delayed by the same ``tau`` (matrix recursion over
    a history window).
``dtac``
    message passing over per-link FIFO buffers with heterogeneous delays.

Before a payload has arrived on a link the receiver adds nothing for that
link: the wire starts empty. Pre-filling it with the sender's initial state
would inject ``sum_ij W_ij tau_ij d_j^0`` of spurious feasibility mass and the
iterates would settle on an infeasible point.
"""

from __future__ import annotations

import logging
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .costs import ArgminError, Problem, local_argmin
from .metrics import RunRecord
from .topology import DelaySchedule, Network

__all__ = [
    "DivergenceError",
    "RunConfig",
    "AgentState",
    "LinkBuffer",
    "VARIANTS",
    "run",
    "run_parallel",
    "initial_state",
]

log = logging.getLogger(__name__)

VARIANTS = ("parallel", "distributed", "homogeneous", "dtac")


class DivergenceError(RuntimeError):
    """A state became non-finite."""


@dataclass(frozen=True)
class RunConfig:
    variant: str = "dtac"
    c: float = 5.0
    max_iters: int = 10_000
    termination: str = "fixed"
    feasibility_tol: float = 1e-3
    consensus_tol: float = 1e-2
    patience: int = 50
    seed: int = 0
    record_every: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not self.c > 0:
            raise ValueError(f"penalty c must be positive, got {self.c}")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be >= 0, got {self.max_iters}")
        if self.termination not in ("fixed", "tolerance"):
            raise ValueError(f"unknown termination {self.termination!r}")
        if self.feasibility_tol <= 0 or self.consensus_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass
class AgentState:
    y: float
    d: float
    x: float


class LinkBuffer:
    """FIFO for one directed link ``sender -> receiver`` with a fixed delay.

    A payload sent at iteration ``k`` is handed out at iteration
    ``k + delay``; earlier reads return ``None``.
    """

    def __init__(self, delay: int):
        self.delay = int(delay)
        self._queue: deque[tuple[int, tuple[float, float, float]]] = deque()

    def send(self, k: int, payload: tuple[float, float, float]) -> None:
        self._queue.append((k, payload))

    def receive(self, k: int):
        due = k - self.delay
        if due < 0:
            return None
        sent, payload = self._queue.popleft()
        if sent != due:
            raise RuntimeError(f"link out of order: expected payload from {due}, got {sent}")
        return payload

    def __len__(self) -> int:
        return len(self._queue)


def _warm(problem: Problem, y, d0, x0):
    """Initial ``d`` and ``x``: ``a*y0 - b`` and zero unless given."""
    n = problem.n
    d = problem.a * y - problem.b if d0 is None else np.broadcast_to(np.asarray(d0, float), (n,)).copy()
    x = np.zeros(n) if x0 is None else np.broadcast_to(np.asarray(x0, float), (n,)).copy()
    return d, x


def initial_state(problem: Problem, y0=None, seed: int = 0) -> np.ndarray:
    """Initial allocation: ``y0`` if given, else uniform in each box."""
    lo, hi = problem.lower, problem.upper
    if y0 is None:
        rng = np.random.default_rng(seed)
        return lo + (hi - lo) * rng.random(problem.n)
    y0 = np.broadcast_to(np.asarray(y0, dtype=float), (problem.n,)).copy()
    if np.any(y0 < lo) or np.any(y0 > hi):
        raise ValueError("initial allocation outside the boxes")
    return y0


class _Recorder:
    def __init__(self, problem: Problem, config: RunConfig):
        self.problem = problem
        self.every = config.record_every
        self.iters, self.y, self.d, self.x, self.obj = [], [], [], [], []
        self.last = -1

    def __call__(self, k, y, d, x, force=False):
        if k == self.last or not (force or k % self.every == 0):
            return
        self.iters.append(k)
        self.y.append(np.array(y, dtype=float))
        self.d.append(np.array(d, dtype=float))
        self.x.append(np.array(x, dtype=float))
        self.obj.append(self.problem.objective(y))
        self.last = k

    def build(self, config, k, converged, stopped, runtime, **meta) -> RunRecord:
        p = self.problem
        return RunRecord(
            variant=config.variant, c=config.c, a=p.a, b=p.b,
            iters=np.array(self.iters), y=np.array(self.y), d=np.array(self.d),
            x=np.array(self.x), objective=np.array(self.obj), iterations=k,
            converged=converged, stopped_early=stopped, runtime=runtime, meta=meta,
        )


class _Stopper:
    """Tolerance test with hysteresis over ``patience`` consecutive rounds."""

    def __init__(self, problem: Problem, config: RunConfig):
        self.a, self.b = problem.a, problem.b
        self.config = config
        self.streak = 0

    def within(self, y, x) -> bool:
        d_bar = abs(float(np.mean(self.a * y - self.b)))
        spread = float(np.max(x) - np.min(x))
        return d_bar < self.config.feasibility_tol and spread < self.config.consensus_tol

    def update(self, y, x) -> bool:
        self.streak = self.streak + 1 if self.within(y, x) else 0
        return self.config.termination == "tolerance" and self.streak >= self.config.patience


def _check_finite(k, *arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise DivergenceError(f"divergence detected at iteration {k}")


def _argmin(spec, i, k, eta, y_prev, delta, c):
    try:
        return local_argmin(spec, eta, y_prev, delta, c)
    except ArgminError as exc:
        raise ArgminError(f"agent {i}, iteration {k}: {exc}") from exc


def run(problem: Problem, network: Network | None, delays: DelaySchedule | None,
        config: RunConfig, y0=None, *, d0=None, x0=None) -> RunRecord:
    """Run the variant named in ``config`` and return its record.

    ``y0`` defaults to a uniform draw in the boxes (seeded by ``config.seed``).
    ``d0`` and ``x0`` override the standard start ``d0 = a*y0 - b``,
    ``x0 = 0`` for warm starts.
    """
    record = _dispatch(problem, network, delays, config, y0, d0, x0)
    log.debug("%s: %d iterations in %.3f s, |d_bar| = %.3e", config.variant,
              record.iterations, record.runtime, abs(record.d_bar[-1]))
    return record


def _dispatch(problem, network, delays, config, y0, d0, x0) -> RunRecord:
    if config.variant == "parallel":
        return run_parallel(problem, config, y0=y0, d0=d0, x0=x0)
    if network is None:
        raise ValueError(f"variant {config.variant!r} needs a network")
    if network.n != problem.n:
        raise ValueError(f"network has {network.n} nodes but problem has {problem.n} agents")
    if delays is None:
        delays = DelaySchedule({e: 0 for e in network.edges}, 0)
    delays.validate(network)
    if config.variant == "distributed":
        if not delays.is_zero:
            raise ValueError("distributed variant needs all-zero delays")
        return _run_matrix(problem, network, 0, config, y0, d0, x0)
    if config.variant == "homogeneous":
        if not delays.is_homogeneous:
            raise ValueError("homogeneous variant needs a constant delay schedule")
        return _run_matrix(problem, network, delays.tau_bar, config, y0, d0, x0)
    return _run_links(problem, network, delays, config, y0, d0, x0)


def run_parallel(problem: Problem, config: RunConfig, y0=None, *, d0=None, x0=None) -> RunRecord:
    """Semi-centralized loop: local argmins, then a shared ``d`` and ``x`` update."""
    start = time.perf_counter()
    agents, n, c = problem.agents, problem.n, config.c
    a, b = problem.a, problem.b
    y = initial_state(problem, y0, config.seed)
    d = float(np.mean(a * y - b)) if d0 is None else float(d0)
    x = 0.0 if x0 is None else float(x0)
    rec = _Recorder(problem, config)
    stop = _Stopper(problem, config)
    rec(0, y, np.full(n, d), np.full(n, x), force=True)
    k = 0
    stopped = False
    while k < config.max_iters:
        y = np.array([_argmin(s, i, k, x, y[i], d, c) for i, s in enumerate(agents)])
        d = float(np.mean(a * y - b))
        x = x + c * d
        k += 1
        _check_finite(k, y, np.array([d, x]))
        rec(k, y, np.full(n, d), np.full(n, x))
        if stop.update(y, np.full(n, x)):
            stopped = True
            break
    rec(k, y, np.full(n, d), np.full(n, x), force=True)
    return rec.build(config, k, stop.within(y, np.full(n, x)), stopped,
                     time.perf_counter() - start)


def _run_matrix(problem: Problem, network: Network, tau: int, config: RunConfig,
                y0, d0, x0) -> RunRecord:
    """Vector recursion where every term of the consensus sum is ``tau`` steps old."""
    start = time.perf_counter()
    agents, n, c = problem.agents, problem.n, config.c
    a, b = problem.a, problem.b
    W = np.asarray(network.W)
    y = initial_state(problem, y0, config.seed)
    d, x = _warm(problem, y, d0, x0)
    history: deque[tuple[np.ndarray, np.ndarray]] = deque(maxlen=tau + 1)
    history.appendleft((d, x))
    zero = np.zeros(n)
    rec = _Recorder(problem, config)
    stop = _Stopper(problem, config)
    rec(0, y, d, x, force=True)
    k = 0
    stopped = False
    while k < config.max_iters:
        if k - tau >= 0:
            d_old, x_old = history[tau]
        else:
            d_old, x_old = zero, zero
        eta = W @ x_old
        delta = W @ d_old
        y_new = np.array([_argmin(s, i, k, eta[i], y[i], delta[i], c)
                          for i, s in enumerate(agents)])
        d = delta + a * (y_new - y)
        x = eta + c * d
        y = y_new
        k += 1
        _check_finite(k, y, d, x)
        history.appendleft((d, x))
        rec(k, y, d, x)
        if stop.update(y, x):
            stopped = True
            break
    rec(k, y, d, x, force=True)
    return rec.build(config, k, stop.within(y, x), stopped, time.perf_counter() - start,
                     tau_bar=tau)


def _run_links(problem: Problem, network: Network, delays: DelaySchedule,
               config: RunConfig, y0, d0, x0) -> RunRecord:
    """Message passing: every agent reads its in-links, solves, then broadcasts."""
    start = time.perf_counter()
    agents, n, c = problem.agents, problem.n, config.c
    W = np.asarray(network.W)
    y0 = initial_state(problem, y0, config.seed)
    d_init, x_init = _warm(problem, y0, d0, x0)
    states = [AgentState(y=float(y0[i]), d=float(d_init[i]), x=float(x_init[i])) for i in range(n)]
    # in_links[i] lists (j, W_ij, buffer j -> i), self link included
    in_links = [[(j, float(W[i, j]), LinkBuffer(delays.delay(i, j)))
                 for j in range(n) if W[i, j] != 0] for i in range(n)]
    out_links = [[] for _ in range(n)]
    for i in range(n):
        for j, _, buf in in_links[i]:
            out_links[j].append(buf)

    def broadcast(k):
        for j, st in enumerate(states):
            payload = (st.y, st.d, st.x)
            for buf in out_links[j]:
                buf.send(k, payload)

    def snapshot():
        return (np.array([s.y for s in states]), np.array([s.d for s in states]),
                np.array([s.x for s in states]))

    rec = _Recorder(problem, config)
    stop = _Stopper(problem, config)
    rec(0, *snapshot(), force=True)
    broadcast(0)
    k = 0
    stopped = False
    while k < config.max_iters:
        # every agent reads before anyone writes: results do not depend on agent order
        aggregates = []
        for i in range(n):
            eta = delta = 0.0
            for _, w, buf in in_links[i]:
                payload = buf.receive(k)
                if payload is not None:
                    delta += w * payload[1]
                    eta += w * payload[2]
            aggregates.append((eta, delta))
        for i, (spec, st) in enumerate(zip(agents, states)):
            eta, delta = aggregates[i]
            y_new = _argmin(spec, i, k, eta, st.y, delta, c)
            st.d = delta + spec.a * (y_new - st.y)
            st.x = eta + c * st.d
            st.y = y_new
        k += 1
        y, d, x = snapshot()
        _check_finite(k, y, d, x)
        broadcast(k)
        rec(k, y, d, x)
        if stop.update(y, x):
            stopped = True
            break
    y, d, x = snapshot()
    rec(k, y, d, x, force=True)
    return rec.build(config, k, stop.within(y, x), stopped, time.perf_counter() - start,
                     tau_bar=delays.tau_bar)
