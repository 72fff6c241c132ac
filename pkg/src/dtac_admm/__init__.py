"""Delay-tolerant distributed ADMM for resource allocation over networks."""

from .costs import AgentSpec, ArgminError, Custom, LogExp, Problem, Quadratic, dual_value, local_argmin
from .engine import DivergenceError, LinkBuffer, RunConfig, run, run_parallel
from .metrics import RunRecord, error_series, lyapunov_series, optimality_gap
from .oracle import OracleSolution, solve_dual_bisection
from .topology import (AugmentedSystem, DelaySchedule, Network, TopologyError, assign_delays,
                       build_augmented, build_weights, build_weights_custom, spectral_radius_check)

__version__ = "0.1.0"
