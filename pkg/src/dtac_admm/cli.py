"""Command line entry point.

    dtac-admm run <scenario> [--seed S] [--max-iters K] [--out-dir DIR]
    dtac-admm sweep <scenario> --param {tau_bar,c,seed} --values v1,v2,...
    dtac-admm oracle <scenario>
    dtac-admm spectral <scenario>

Exit status: 0 when the run ends within the feasibility and consensus
tolerances, 2 when it ran out of iterations without getting there, 1 on any
error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .costs import ArgminError
from .engine import DivergenceError, run
from .metrics import error_series, lyapunov_series, optimality_gap
from .oracle import OracleError, solve_dual_bisection
from .scenario import Scenario, ScenarioError, load_scenario
from .topology import build_augmented, spectral_radius_check

__all__ = ["run_scenario", "sweep", "main", "TRAJECTORY_COLUMNS", "SERIES_COLUMNS"]

log = logging.getLogger("dtac_admm")

TRAJECTORY_COLUMNS = ("iter", "agent", "y", "d", "x")
SERIES_COLUMNS = ("iter", "d_bar", "e_d_norm", "e_x_norm", "lyapunov", "objective")
SWEEP_PARAMS = ("tau_bar", "c", "seed")

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2


def _resolve(scenario, seed=None, max_iters=None) -> Scenario:
    sc = scenario if isinstance(scenario, Scenario) else load_scenario(scenario)
    if seed is not None or max_iters is not None:
        sc = sc.with_overrides(seed=seed, max_iters=max_iters)
    return sc


def _execute(sc: Scenario):
    solution = solve_dual_bisection(sc.problem)
    record = run(sc.problem, sc.network, sc.delays, sc.config, y0=sc.y0)
    return record, solution


def _summary(sc: Scenario, record, solution) -> dict:
    primal, dual, obj = optimality_gap(record, solution, sc.problem)
    es = error_series(record)
    y = record.final_y
    return {
        "scenario": sc.name,
        "variant": sc.config.variant,
        "seed": sc.seed,
        "tau_bar": sc.delays.tau_bar,
        "c": sc.config.c,
        "iterations": record.iterations,
        "converged": record.converged,
        "runtime_s": round(record.runtime, 4),
        "sum_y": float(np.sum(y)),
        "weighted_residual": record.weighted_residual(),
        "d_bar_initial": float(abs(record.d_bar[0])),
        "d_bar_final": float(abs(record.d_bar[-1])),
        "e_d_final": float(es.e_d[-1]),
        "e_x_final": float(es.e_x[-1]),
        "dual_spread_final": float(record.dual_spread[-1]),
        "y_in_box": bool(np.all((y >= sc.problem.lower) & (y <= sc.problem.upper))),
        "primal_gap": primal,
        "dual_gap": dual,
        "objective": float(sc.problem.objective(y)),
        "objective_gap": obj,
        "oracle": solution.as_dict(),
        "y_final": [float(v) for v in y],
        "x_final": [float(v) for v in record.final_x],
    }


def write_trajectory(path: Path, record) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for row, k in enumerate(record.iters):
            for i in range(record.n):
                w.writerow((int(k), i, repr(float(record.y[row, i])),
                            repr(float(record.d[row, i])), repr(float(record.x[row, i]))))


def write_series(path: Path, record, solution) -> None:
    es = error_series(record)
    lyap = lyapunov_series(record, solution).values
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        for row, k in enumerate(record.iters):
            w.writerow((int(k), repr(float(es.d_bar[row])), repr(float(es.e_d[row])),
                        repr(float(es.e_x[row])), repr(float(lyap[row])),
                        repr(float(record.objective[row]))))


def run_scenario(scenario, out_dir=None, *, seed=None, max_iters=None):
    """Run one scenario and write its artifacts.

    Returns ``(exit_status, summary, record, solution)``. Artifacts go to
    ``out_dir/<scenario name>/`` when ``out_dir`` is given.
    """
    sc = _resolve(scenario, seed, max_iters)
    record, solution = _execute(sc)
    summary = _summary(sc, record, solution)
    if out_dir is not None:
        target = Path(out_dir) / sc.name
        target.mkdir(parents=True, exist_ok=True)
        write_trajectory(target / "trajectory.csv", record)
        write_series(target / "series.csv", record, solution)
        (target / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        log.info("wrote %s", target)
    status = EXIT_OK if record.converged else EXIT_NOT_CONVERGED
    return status, summary, record, solution


def sweep(scenario, parameter: str, values, out_dir=None, *, max_iters=None, workers: int = 1):
    """One sub-run per value of ``parameter``.

    Returns ``(rows, wide)``: a per-value summary table and the ``|d_bar|``
    series side by side (one column per value, on the recorded iterations of
    the first sub-run).
    """
    if parameter not in SWEEP_PARAMS:
        raise ValueError(f"sweep parameter must be one of {SWEEP_PARAMS}, got {parameter!r}")
    base = _resolve(scenario, max_iters=max_iters)
    conv = float if parameter == "c" else int
    values = [conv(v) for v in values]

    def one(value):
        sc = base.with_overrides(**{parameter: value})
        sub = Path(out_dir) / f"{base.name}_{parameter}_{value}" if out_dir else None
        status, summary, record, _ = run_scenario(sc, None)
        if sub is not None:
            sub.mkdir(parents=True, exist_ok=True)
            (sub / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        return value, status, summary, record

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, values))
    else:
        results = [one(v) for v in values]

    rows = []
    for value, status, summary, _ in results:
        rows.append({parameter: value, "status": status, "iterations": summary["iterations"],
                     "d_bar_final": summary["d_bar_final"], "primal_gap": summary["primal_gap"],
                     "dual_gap": summary["dual_gap"], "objective_gap": summary["objective_gap"],
                     "y_final": summary["y_final"]})
    iters = results[0][3].iters
    wide = {"iter": iters}
    for value, _, _, record in results:
        series = np.abs(record.d_bar)
        aligned = np.full(len(iters), np.nan)
        idx = np.searchsorted(record.iters, iters)
        ok = (idx < len(record.iters)) & (record.iters[np.minimum(idx, len(record.iters) - 1)] == iters)
        aligned[ok] = series[idx[ok]]
        wide[f"{parameter}={value}"] = aligned
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / f"sweep_{parameter}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            cols = list(wide)
            w.writerow(cols)
            for r in range(len(iters)):
                w.writerow([int(iters[r])] + [repr(float(wide[c][r])) for c in cols[1:]])
        with open(out / f"sweep_{parameter}_summary.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            cols = [parameter, "status", "iterations", "d_bar_final", "primal_gap",
                    "dual_gap", "objective_gap"]
            w.writerow(cols)
            for row in rows:
                w.writerow([row[c] for c in cols])
    return rows, wide


def _cmd_run(args) -> int:
    status, summary, _, _ = run_scenario(args.scenario, args.out_dir, seed=args.seed,
                                         max_iters=args.max_iters)
    keys = ("scenario", "iterations", "converged", "d_bar_final", "sum_y", "primal_gap",
            "dual_gap", "objective_gap", "runtime_s")
    for k in keys:
        print(f"{k} = {summary[k]}")
    return status


def _cmd_sweep(args) -> int:
    values = [v for v in args.values.split(",") if v]
    rows, _ = sweep(args.scenario, args.param, values, args.out_dir,
                    max_iters=args.max_iters, workers=args.workers)
    print(f"{args.param},status,iterations,d_bar_final,primal_gap,objective_gap")
    for r in rows:
        print(f"{r[args.param]},{r['status']},{r['iterations']},{r['d_bar_final']:.3e},"
              f"{r['primal_gap']:.3e},{r['objective_gap']:.3e}")
    return max(r["status"] for r in rows)


def _cmd_oracle(args) -> int:
    sc = _resolve(args.scenario, args.seed)
    print(json.dumps(solve_dual_bisection(sc.problem).as_dict(), indent=2))
    return EXIT_OK


def _cmd_spectral(args) -> int:
    sc = _resolve(args.scenario, args.seed)
    report = spectral_radius_check(build_augmented(sc.network, sc.delays))
    print(json.dumps(report.as_dict(), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dtac-admm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("scenario", help="scenario file or directory holding scenario.ini")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--max-iters", type=int, default=None)
        p.add_argument("--out-dir", default=None, help="where CSV and summary files go")

    p = sub.add_parser("run", help="run one scenario")
    common(p)
    p.set_defaults(func=_cmd_run)
    p = sub.add_parser("sweep", help="repeat a scenario over parameter values")
    common(p)
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--values", required=True, help="comma separated values")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_sweep)
    p = sub.add_parser("oracle", help="print the centralized solution")
    common(p)
    p.set_defaults(func=_cmd_oracle)
    p = sub.add_parser("spectral", help="print the augmented matrix spectral report")
    common(p)
    p.set_defaults(func=_cmd_spectral)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, OracleError, ArgminError, DivergenceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
