"""Networks, consensus weights, link delays and the augmented delay matrices.

Delays live on undirected links. A schedule also carries a ``self_delay``:
zero for heterogeneous schedules (a node always reads its own fresh state),
and equal to the common delay for homogeneous schedules, where every term of
the consensus sum, the node's own included, is ``tau`` iterations old.
The same value decides where the non-edge entries of the averaging matrix
are placed when the augmented matrices are built.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "TopologyError",
    "Network",
    "DelaySchedule",
    "AugmentedSystem",
    "SpectralReport",
    "normalize_edges",
    "cycle_edges",
    "complete_edges",
    "ring_hop_edges",
    "path_edges",
    "random_connected_edges",
    "build_weights",
    "build_weights_custom",
    "assign_delays",
    "build_augmented",
    "spectral_radius",
    "spectral_radius_check",
    "single_class_matrix",
]

SYM_TOL = 1e-12
STOCHASTIC_TOL = 1e-9
PSD_TOL = 1e-10


class TopologyError(ValueError):
    """Invalid graph, weight matrix or delay schedule."""


Edge = tuple[int, int]


def normalize_edges(edges: Iterable[Iterable[int]], n: int) -> frozenset[Edge]:
    """Return edges as a set of sorted pairs, rejecting self-loops and bad ids."""
    out = set()
    for e in edges:
        i, j = (int(v) for v in e)
        if i == j:
            raise TopologyError(f"self-loop ({i},{j}) is not an edge")
        if not (0 <= i < n and 0 <= j < n):
            raise TopologyError(f"edge ({i},{j}) out of range for n={n}")
        out.add((min(i, j), max(i, j)))
    return frozenset(out)


def cycle_edges(n: int) -> list[Edge]:
    if n == 2:
        return [(0, 1)]
    return [(i, (i + 1) % n) for i in range(n)]


def path_edges(n: int) -> list[Edge]:
    return [(i, i + 1) for i in range(n - 1)]


def complete_edges(n: int) -> list[Edge]:
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def ring_hop_edges(n: int, hops: int) -> list[Edge]:
    """Ring where each node links to every node within ``hops`` steps."""
    edges = set()
    for i in range(n):
        for h in range(1, hops + 1):
            j = (i + h) % n
            if i != j:
                edges.add((min(i, j), max(i, j)))
    return sorted(edges)


def random_connected_edges(n: int, p: float, rng: np.random.Generator,
                           max_tries: int = 1000) -> list[Edge]:
    """Draw Erdos-Renyi G(n, p) graphs until one is connected."""
    for _ in range(max_tries):
        upper = np.triu(rng.random((n, n)) < p, k=1)
        edges = [(int(i), int(j)) for i, j in zip(*np.nonzero(upper))]
        if _is_connected(n, edges):
            return edges
    raise TopologyError(f"no connected G({n}, {p}) graph after {max_tries} draws")


def _laplacian(n: int, edges: Iterable[Edge]) -> np.ndarray:
    L = np.zeros((n, n))
    for i, j in edges:
        L[i, j] -= 1.0
        L[j, i] -= 1.0
        L[i, i] += 1.0
        L[j, j] += 1.0
    return L


def _is_connected(n: int, edges: Iterable[Edge]) -> bool:
    # breadth-first search; the Laplacian check is kept for the Network invariant
    adj: dict[int, list[int]] = {i: [] for i in range(n)}
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == n


@dataclass(frozen=True, eq=False)
class Network:
    """Undirected connected graph with its consensus weight matrix ``W``."""

    n: int
    edges: frozenset[Edge]
    W: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.W.setflags(write=False)

    def neighbors(self, i: int) -> list[int]:
        return sorted({j for e in self.edges if i in e for j in e if j != i})

    def degree(self, i: int) -> int:
        return sum(1 for e in self.edges if i in e)

    @property
    def laplacian(self) -> np.ndarray:
        return _laplacian(self.n, self.edges)

    @property
    def algebraic_connectivity(self) -> float:
        if self.n == 1:
            return 0.0
        return float(np.linalg.eigvalsh(self.laplacian)[1])

    @property
    def W_tilde(self) -> np.ndarray:
        """``W`` minus the averaging matrix ``(1/n) * ones``."""
        return self.W - np.full((self.n, self.n), 1.0 / self.n)

    def validate(self) -> None:
        """Raise :class:`TopologyError` unless every Network invariant holds."""
        W, n = self.W, self.n
        if W.shape != (n, n):
            raise TopologyError(f"W has shape {W.shape}, expected ({n}, {n})")
        if not np.all(np.isfinite(W)):
            raise TopologyError("W has non-finite entries")
        if np.max(np.abs(W - W.T)) > SYM_TOL:
            raise TopologyError("W is not symmetric")
        if np.any(W < 0):
            raise TopologyError("W has negative entries")
        if (np.max(np.abs(W.sum(axis=1) - 1.0)) > STOCHASTIC_TOL
                or np.max(np.abs(W.sum(axis=0) - 1.0)) > STOCHASTIC_TOL):
            raise TopologyError("W is not bi-stochastic")
        if np.linalg.eigvalsh(W)[0] < -PSD_TOL:
            raise TopologyError("W is not PSD")
        off = (W != 0) & ~np.eye(n, dtype=bool)
        for i, j in zip(*np.nonzero(off)):
            if (min(i, j), max(i, j)) not in self.edges:
                raise TopologyError(f"W[{i},{j}] != 0 but ({i},{j}) is not an edge")
        if n > 1 and not _is_connected(n, self.edges):
            raise TopologyError("graph not connected")


def build_weights(edges: Iterable[Iterable[int]], n: int) -> Network:
    """Consensus weights for a connected graph.

    Each link gets ``1 / (max(deg_i, deg_j) + 1)``, the diagonal takes what is
    left of the unit row sum, and the result is made lazy with
    ``W <- (W + I) / 2`` so that it is positive semi-definite.
    """
    if n < 2:
        raise TopologyError(f"need at least 2 nodes, got n={n}")
    E = normalize_edges(edges, n)
    if not _is_connected(n, E):
        raise TopologyError("graph not connected")
    deg = np.zeros(n, dtype=int)
    for i, j in E:
        deg[i] += 1
        deg[j] += 1
    W = np.zeros((n, n))
    for i, j in E:
        W[i, j] = W[j, i] = 1.0 / (max(deg[i], deg[j]) + 1)
    W[np.diag_indices(n)] = 1.0 - W.sum(axis=1)
    W = 0.5 * (W + np.eye(n))
    net = Network(n, E, W)
    net.validate()
    return net


def build_weights_custom(W_raw) -> Network:
    """Wrap an explicit weight matrix, checking every Network invariant.

    The matrix is symmetrized with ``(W + W^T) / 2`` first; edges are read
    off the non-zero off-diagonal entries.
    """
    W = np.array(W_raw, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise TopologyError(f"W must be square, got shape {W.shape}")
    if np.max(np.abs(W - W.T)) > SYM_TOL:
        raise TopologyError("W is not symmetric")
    W = 0.5 * (W + W.T)
    n = W.shape[0]
    iu, ju = np.nonzero(np.triu(W != 0, k=1))
    net = Network(n, frozenset(zip(iu.tolist(), ju.tolist())), W)
    net.validate()
    return net


@dataclass(frozen=True)
class DelaySchedule:
    """Time-invariant integer delays on the undirected links.

    ``tau`` maps each sorted edge ``(i, j)`` to its delay; the delay on the
    reverse direction is the same entry.
    """

    tau: Mapping[Edge, int]
    tau_bar: int
    self_delay: int = 0

    def delay(self, i: int, j: int) -> int:
        if i == j:
            return self.self_delay
        return self.tau[(min(i, j), max(i, j))]

    def matrix(self, n: int) -> np.ndarray:
        """Dense ``n x n`` delay pattern; non-edges carry ``self_delay``."""
        D = np.full((n, n), self.self_delay, dtype=int)
        for (i, j), t in self.tau.items():
            D[i, j] = D[j, i] = t
        return D

    @property
    def is_homogeneous(self) -> bool:
        return self.self_delay == self.tau_bar and all(
            t == self.tau_bar for t in self.tau.values())

    @property
    def is_zero(self) -> bool:
        return self.self_delay == 0 and all(t == 0 for t in self.tau.values())

    def validate(self, network: Network) -> None:
        if self.tau_bar < 0:
            raise TopologyError(f"tau_bar must be >= 0, got {self.tau_bar}")
        if not 0 <= self.self_delay <= self.tau_bar:
            raise TopologyError(f"self_delay {self.self_delay} outside [0, {self.tau_bar}]")
        keys = set(self.tau)
        missing = network.edges - keys
        extra = keys - network.edges
        if missing:
            raise TopologyError(f"no delay for edges {sorted(missing)}")
        if extra:
            raise TopologyError(f"delays given for non-edges {sorted(extra)}")
        for e, t in self.tau.items():
            if int(t) != t or not 0 <= t <= self.tau_bar:
                raise TopologyError(f"delay {t} on edge {e} outside [0, {self.tau_bar}]")


def assign_delays(network: Network, tau_bar: int, mode: str = "uniform_random", *,
                  seed: int | None = None, value: int | None = None,
                  explicit: Mapping[tuple[int, int], int] | None = None) -> DelaySchedule:
    """Build a delay schedule for every link of ``network``.

    mode
        ``"uniform_random"``: i.i.d. integers in ``[0, tau_bar]`` drawn with
        ``seed``. ``"constant"``: every link and self term delayed by ``value``
        (default ``tau_bar``), the homogeneous protocol. ``"explicit"``: delays
        read from ``explicit``, keyed by either orientation of each edge.
    """
    tau_bar = int(tau_bar)
    if tau_bar < 0:
        raise TopologyError(f"tau_bar must be >= 0, got {tau_bar}")
    edges = sorted(network.edges)
    self_delay = 0
    if mode == "uniform_random":
        rng = np.random.default_rng(seed)
        draws = rng.integers(0, tau_bar + 1, size=len(edges))
        tau = {e: int(t) for e, t in zip(edges, draws)}
    elif mode == "constant":
        t = tau_bar if value is None else int(value)
        if not 0 <= t <= tau_bar:
            raise TopologyError(f"constant delay {t} outside [0, {tau_bar}]")
        tau = {e: t for e in edges}
        self_delay = t
    elif mode == "explicit":
        if explicit is None:
            raise TopologyError("explicit mode needs a delay map")
        tau = {}
        for (i, j), t in explicit.items():
            key = (min(i, j), max(i, j))
            if key in tau and tau[key] != t:
                raise TopologyError(f"asymmetric delays on link {key}: {tau[key]} vs {t}")
            tau[key] = int(t)
    else:
        raise TopologyError(f"unknown delay mode {mode!r}")
    sched = DelaySchedule(tau, tau_bar, self_delay)
    sched.validate(network)
    return sched


@dataclass(frozen=True, eq=False)
class AugmentedSystem:
    """Delay matrices and the augmented consensus matrices.

    ``P[r]`` marks the entries delayed by exactly ``r``. ``PW_bar`` stacks
    ``P_r o W`` in its first block row with identity blocks below the
    diagonal; ``PW_tilde`` is the same with ``W`` replaced by ``W - J/n``.
    """

    n: int
    tau_bar: int
    P: tuple[np.ndarray, ...]
    PW_bar: np.ndarray
    P1_bar: np.ndarray
    PW_tilde: np.ndarray
    W: np.ndarray

    @property
    def size(self) -> int:
        return self.n * (self.tau_bar + 1)

    def selector(self, block: int) -> np.ndarray:
        """Row-block extractor: ``selector(b) @ v`` returns block ``b`` of ``v``."""
        u = self.unit(block)
        return np.kron(u, np.eye(self.n)).T

    def unit(self, block: int) -> np.ndarray:
        """Unit column vector of length ``tau_bar + 1`` (zero-based block index)."""
        u = np.zeros((self.tau_bar + 1, 1))
        u[block, 0] = 1.0
        return u

    def stack(self, history: list[np.ndarray]) -> np.ndarray:
        """Stack ``[v^k; v^{k-1}; ...; v^{k-tau_bar}]`` from newest-first history."""
        return np.concatenate([np.asarray(h, dtype=float) for h in history[: self.tau_bar + 1]])


def _augment(first_row: list[np.ndarray], n: int, tau_bar: int, shift: float = 1.0) -> np.ndarray:
    N = n * (tau_bar + 1)
    M = np.zeros((N, N))
    for r, block in enumerate(first_row):
        M[:n, r * n:(r + 1) * n] = block
    for r in range(1, tau_bar + 1):
        M[r * n:(r + 1) * n, (r - 1) * n:r * n] = shift * np.eye(n)
    return M


def build_augmented(network: Network, delays: DelaySchedule) -> AugmentedSystem:
    delays.validate(network)
    n, tb = network.n, delays.tau_bar
    D = delays.matrix(n)
    W = np.asarray(network.W)
    avg = np.full((n, n), 1.0 / n)
    P = tuple((D == r).astype(float) for r in range(tb + 1))
    PW_bar = _augment([p * W for p in P], n, tb)
    P1_bar = np.zeros_like(PW_bar)
    for r, p in enumerate(P):
        P1_bar[:n, r * n:(r + 1) * n] = p * avg
    PW_tilde = PW_bar - P1_bar
    for M in (*P, PW_bar, P1_bar, PW_tilde):
        M.setflags(write=False)
    return AugmentedSystem(n, tb, P, PW_bar, P1_bar, PW_tilde, W)


def single_class_matrix(system: AugmentedSystem, r: int) -> np.ndarray:
    """Keep only the delay-``r`` class of ``PW_tilde``; lower identity blocks
    are scaled by ``1 / (tau_bar + 1)``."""
    n, tb = system.n, system.tau_bar
    W_tilde = system.W - np.full((n, n), 1.0 / n)
    first = [np.zeros((n, n)) for _ in range(tb + 1)]
    first[r] = system.P[r] * W_tilde
    return _augment(first, n, tb, shift=1.0 / (tb + 1))


def spectral_radius(A: np.ndarray, symmetric: bool = False) -> float:
    if symmetric:
        return float(np.max(np.abs(np.linalg.eigvalsh(A))))
    return float(np.max(np.abs(np.linalg.eigvals(A))))


@dataclass(frozen=True)
class SpectralReport:
    rho_W_tilde: float
    rho_PW_tilde: float
    tau_bar: int
    homogeneous: bool
    predicted: float | None
    bound: float
    stable: bool
    within_bound: bool
    matches_prediction: bool | None

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def spectral_radius_check(system: AugmentedSystem, homogeneous: bool | None = None,
                          tol: float = 1e-9) -> SpectralReport:
    """Compare ``rho(PW_tilde)`` with ``rho(W_tilde) ** (1 / (tau_bar + 1))``.

    For homogeneous delays the two must agree; otherwise the root is an upper
    bound. ``homogeneous`` defaults to whether every entry of the delay
    pattern equals ``tau_bar``.
    """
    n, tb = system.n, system.tau_bar
    if homogeneous is None:
        homogeneous = bool(system.P[tb].all()) if tb > 0 else True
    rho_w = spectral_radius(system.W - np.full((n, n), 1.0 / n), symmetric=True)
    rho_pw = spectral_radius(system.PW_tilde)
    bound = rho_w ** (1.0 / (tb + 1))
    predicted = bound if homogeneous else None
    matches = abs(rho_pw - bound) <= tol if homogeneous else None
    return SpectralReport(
        rho_W_tilde=rho_w,
        rho_PW_tilde=rho_pw,
        tau_bar=tb,
        homogeneous=homogeneous,
        predicted=predicted,
        bound=bound,
        stable=rho_pw < 1.0,
        within_bound=rho_pw <= bound + tol,
        matches_prediction=matches,
    )
