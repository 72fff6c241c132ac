"""Scenario files: parsing, validation and construction of the run inputs.

A scenario is an INI-style file with ``[scenario]``, ``[network]``,
``[delays]``, ``[agents]`` and ``[run]`` sections. Per-agent values are
whitespace separated tokens; a token is a number, ``u(lo,hi)`` for a uniform
draw, and either may carry a ``*count`` repeat suffix. A single token is
broadcast to all agents. Matrices and link lists span several indented
lines, one row or link per line. See ``scenarios/`` for complete examples.
"""

from __future__ import annotations

import configparser
import re
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .costs import AgentSpec, LogExp, Problem, Quadratic
from .engine import RunConfig
from .topology import (DelaySchedule, Network, TopologyError, assign_delays, build_weights,
                       build_weights_custom, complete_edges, cycle_edges, path_edges,
                       random_connected_edges, ring_hop_edges)

__all__ = ["ScenarioError", "Scenario", "load_scenario", "parse_scenario"]

_UNIFORM = re.compile(r"^u\(\s*([^,]+)\s*,\s*([^)]+)\s*\)$")
_NETWORK_KINDS = ("cycle", "path", "complete", "ring_hop", "random", "edges", "explicit")
_COST_KEYS = {"quadratic": ("gamma", "beta", "alpha"),
              "logexp": ("curvature", "center", "slope", "shift")}


class ScenarioError(ValueError):
    """Invalid scenario; the message starts with the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _rng(seed: int, key: str) -> np.random.Generator:
    # one stream per field so editing one field leaves the other draws intact
    return np.random.default_rng([seed, zlib.crc32(key.encode())])


def _float(path: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ScenarioError(path, f"not a number: {text!r}") from None


def _int(path: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ScenarioError(path, f"not an integer: {text!r}") from None


def _values(path: str, text: str, n: int, seed: int) -> np.ndarray:
    tokens = []
    for tok in text.split():
        count = 1
        if "*" in tok:
            tok, _, rep = tok.rpartition("*")
            count = _int(path, rep)
        tokens.extend([tok] * count)
    if len(tokens) == 1:
        tokens = tokens * n
    if len(tokens) != n:
        raise ScenarioError(path, f"expected 1 or {n} values, got {len(tokens)}")
    rng = _rng(seed, path)
    out = np.empty(n)
    for i, tok in enumerate(tokens):
        m = _UNIFORM.match(tok)
        if m:
            lo, hi = _float(path, m.group(1)), _float(path, m.group(2))
            if lo > hi:
                raise ScenarioError(path, f"empty range u({lo},{hi})")
            out[i] = rng.uniform(lo, hi)
        else:
            out[i] = _float(path, tok)
    return out


def _rows(path: str, text: str) -> list[list[str]]:
    return [line.split() for line in text.strip().splitlines() if line.strip()]


@dataclass(frozen=True)
class Scenario:
    """Everything needed for one run, already validated."""

    name: str
    seed: int
    network: Network
    delays: DelaySchedule
    problem: Problem
    y0: np.ndarray
    config: RunConfig
    source: dict

    def with_overrides(self, *, seed: int | None = None, max_iters: int | None = None,
                       tau_bar: int | None = None, c: float | None = None) -> "Scenario":
        """Rebuild with changed parameters; a new seed redraws every random field."""
        src = {sec: dict(vals) for sec, vals in self.source.items()}
        if seed is not None:
            src["scenario"]["seed"] = str(seed)
        if max_iters is not None:
            src.setdefault("run", {})["max_iters"] = str(max_iters)
        if tau_bar is not None:
            src["delays"]["tau_bar"] = str(tau_bar)
            if src["delays"].get("mode") == "constant":
                src["delays"]["value"] = str(tau_bar)
        if c is not None:
            src.setdefault("run", {})["c"] = repr(float(c))
        return _build(src)


def load_scenario(path) -> Scenario:
    path = Path(path)
    if path.is_dir():
        path = path / "scenario.ini"
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(str(path), f"cannot read scenario: {exc}") from None
    return parse_scenario(text, default_name=path.parent.name if path.name == "scenario.ini" else path.stem)


def parse_scenario(text: str, default_name: str = "scenario") -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError("<file>", str(exc)) from None
    src = {sec: dict(cp[sec]) for sec in cp.sections()}
    src.setdefault("scenario", {}).setdefault("name", default_name)
    return _build(src)


def _section(src: dict, name: str) -> dict:
    if name not in src:
        raise ScenarioError(name, "missing section")
    return src[name]


def _build(src: dict) -> Scenario:
    head = src.get("scenario", {})
    name = head.get("name", "scenario")
    seed = _int("scenario.seed", head.get("seed", "0"))
    network = _build_network(_section(src, "network"), seed)
    delays = _build_delays(_section(src, "delays"), network, seed)
    problem = _build_problem(_section(src, "agents"), network.n, seed)
    config = _build_config(src.get("run", {}), seed)
    y0 = _build_y0(src["agents"], problem, seed)
    _check_feasible(problem)
    if config.variant == "homogeneous" and not delays.is_homogeneous:
        raise ScenarioError("run.variant", "homogeneous variant needs delays.mode = constant")
    if config.variant in ("parallel", "distributed") and not delays.is_zero:
        raise ScenarioError("run.variant", f"{config.variant} variant needs zero delays")
    return Scenario(name, seed, network, delays, problem, y0, config, src)


def _build_network(sec: dict, seed: int) -> Network:
    kind = sec.get("kind", "")
    if kind not in _NETWORK_KINDS:
        raise ScenarioError("network.kind", f"expected one of {_NETWORK_KINDS}, got {kind!r}")
    try:
        if kind == "explicit":
            rows = _rows("network.weights", sec.get("weights", ""))
            W = [[_float(f"network.weights[{r}]", v) for v in row] for r, row in enumerate(rows)]
            if any(len(row) != len(W) for row in W):
                raise ScenarioError("network.weights", "matrix is not square")
            return build_weights_custom(W)
        n = _int("network.n", sec.get("n", ""))
        if kind == "cycle":
            edges = cycle_edges(n)
        elif kind == "path":
            edges = path_edges(n)
        elif kind == "complete":
            edges = complete_edges(n)
        elif kind == "ring_hop":
            edges = ring_hop_edges(n, _int("network.hops", sec.get("hops", "1")))
        elif kind == "random":
            p = _float("network.p", sec.get("p", "0.5"))
            edges = random_connected_edges(n, p, _rng(seed, "network"))
        else:
            edges = []
            for tok in sec.get("edges", "").split():
                i, _, j = tok.partition("-")
                edges.append((_int("network.edges", i), _int("network.edges", j)))
        return build_weights(edges, n)
    except TopologyError as exc:
        raise ScenarioError("network", str(exc)) from None


def _build_delays(sec: dict, network: Network, seed: int) -> DelaySchedule:
    mode = sec.get("mode", "constant")
    tau_bar = _int("delays.tau_bar", sec.get("tau_bar", "0"))
    try:
        if mode == "explicit":
            links = {}
            for r, row in enumerate(_rows("delays.links", sec.get("links", ""))):
                if len(row) != 3:
                    raise ScenarioError(f"delays.links[{r}]", "expected 'i j tau'")
                i, j, t = (_int(f"delays.links[{r}]", v) for v in row)
                key = (min(i, j), max(i, j))
                if key in links and links[key] != t:
                    raise ScenarioError(f"delays.links[{r}]",
                                        f"asymmetric delays on link {key}: {links[key]} vs {t}")
                links[key] = t
            return assign_delays(network, tau_bar, "explicit", explicit=links)
        if mode == "constant":
            value = _int("delays.value", sec["value"]) if "value" in sec else None
            return assign_delays(network, tau_bar, "constant", value=value)
        if mode == "uniform_random":
            return assign_delays(network, tau_bar, "uniform_random",
                                 seed=_int("delays.seed", sec.get("seed", str(seed))))
    except TopologyError as exc:
        raise ScenarioError("delays", str(exc)) from None
    raise ScenarioError("delays.mode", f"unknown mode {mode!r}")


def _build_problem(sec: dict, n: int, seed: int) -> Problem:
    cost = sec.get("cost", "quadratic")
    if cost not in _COST_KEYS:
        raise ScenarioError("agents.cost", f"expected one of {tuple(_COST_KEYS)}, got {cost!r}")

    def field(key, default=None):
        if key not in sec:
            if default is None:
                raise ScenarioError(f"agents.{key}", "missing")
            return np.full(n, float(default))
        return _values(f"agents.{key}", sec[key], n, seed)

    if "b" in sec:
        b = field("b")
    elif "demand" in sec:
        b = np.full(n, _float("agents.demand", sec["demand"]) / n)
    else:
        raise ScenarioError("agents.b", "give per-agent 'b' or a total 'demand'")
    lower, upper, a = field("lower"), field("upper"), field("a", 1.0)
    defaults = {"alpha": 0.0, "beta": 0.0}
    params = {k: field(k, defaults.get(k)) for k in _COST_KEYS[cost]}
    agents = []
    for i in range(n):
        if lower[i] > upper[i]:
            raise ScenarioError(f"agents.lower[{i}]", f"empty box [{lower[i]}, {upper[i]}]")
        if a[i] == 0:
            raise ScenarioError(f"agents.a[{i}]", "coupling weight must be non-zero")
        try:
            if cost == "quadratic":
                model = Quadratic(params["gamma"][i], params["beta"][i], params["alpha"][i])
            else:
                model = LogExp(params["curvature"][i], params["center"][i],
                               params["slope"][i], params["shift"][i])
        except ValueError as exc:
            raise ScenarioError(f"agents[{i}].cost", str(exc)) from None
        agents.append(AgentSpec(model, float(b[i]), float(lower[i]), float(upper[i]), float(a[i])))
    return Problem(agents)


def _build_y0(sec: dict, problem: Problem, seed: int) -> np.ndarray:
    spec = sec.get("y0", "random")
    lo, hi = problem.lower, problem.upper
    if spec.strip() == "random":
        return lo + (hi - lo) * _rng(seed, "agents.y0").random(problem.n)
    y0 = _values("agents.y0", spec, problem.n, seed)
    bad = np.nonzero((y0 < lo) | (y0 > hi))[0]
    if len(bad):
        raise ScenarioError(f"agents.y0[{bad[0]}]", f"{y0[bad[0]]} outside the box")
    return y0


def _build_config(sec: dict, seed: int) -> RunConfig:
    kwargs = {"seed": seed}
    for key, conv in (("variant", str), ("c", float), ("max_iters", int),
                      ("termination", str), ("feasibility_tol", float),
                      ("consensus_tol", float), ("patience", int), ("record_every", int)):
        if key in sec:
            if conv is str:
                kwargs[key] = sec[key]
            else:
                kwargs[key] = (_int if conv is int else _float)(f"run.{key}", sec[key])
    try:
        return RunConfig(**kwargs)
    except ValueError as exc:
        raise ScenarioError("run", str(exc)) from None


def _check_feasible(problem: Problem) -> None:
    if not problem.is_strictly_feasible():
        lo, hi = problem.feasible_range()
        raise ScenarioError(
            "agents", f"total demand {np.sum(problem.b):g} not strictly inside the reachable "
                      f"range ({lo:g}, {hi:g})")

