"""Scenario-driven command line front end.

Subcommands: validate | simulate | refine | feasible | optimize.
Exit codes: 0 ok, 2 parse error, 3 validation failure, 4 numerical failure,
5 io failure.  All CSV numbers carry 17 significant digits; files are
written atomically (temp file + rename).  The report path also renders PNG
figures next to the delimited output.  SWEEP_THREADS caps the per-level
fan-out of study commands.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import analysis, plots
from .catchup import Trajectory, refine_until_cauchy, solve_delayed
from .discretize import convergence_study
from .errors import (
    EnumerationTooLarge,
    ScenarioError,
    SweepError,
    ValidationFailure,
)
from .geometry import distance
from .optimize import DiscreteOCP, solve_local, solve_oracle
from .problem import validate_assumptions
from .scenario import load_scenario

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_NUMERICAL = 4
EXIT_IO = 5


def _fmt(x) -> str:
    return "%.17g" % float(x)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SWEEP_THREADS", "1")))
    except ValueError:
        return 1


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_csv(path: str, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(
            cell if isinstance(cell, str) else _fmt(cell) for cell in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not serializable: {type(obj)!r}")


def _write_json(path: str, payload: dict) -> None:
    _atomic_write(path, json.dumps(payload, sort_keys=True, indent=2,
                                   default=_json_default) + "\n")


def _outdir(args) -> str:
    out = args.out
    os.makedirs(out, exist_ok=True)
    return out


# -- commands ---------------------------------------------------------------


def cmd_validate(args) -> int:
    sc = load_scenario(args.scenario)
    report = validate_assumptions(sc.problem, samples=args.samples,
                                  seed=args.seed)
    for check in report.checks:
        status = "ok" if check.passed else "FAIL"
        print(f"{status:4s} {check.name}: {check.detail}")
    if not report.passed:
        names = ", ".join(c.name for c in report.failed_checks())
        print(f"validation failed: {names}")
        return EXIT_VALIDATION
    print(f"scenario {sc.name!r}: all assumption checks passed")
    return EXIT_OK


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    out = _outdir(args)
    traj, report = solve_delayed(sc.problem, sc.control_signal, args.level,
                                 substeps=args.substeps)
    p = sc.problem
    rows = []
    for i, t in enumerate(traj.times):
        snap = p.moving_set.snapshot(t)
        x = traj.states[i]
        u = sc.control_signal.eval(min(t, traj.times[-1]))
        active = ";".join(str(j) for j in snap.active_indices(x))
        rows.append([t, *x, *np.atleast_1d(u), distance(snap, x), active])
    n, d = p.n, p.d
    header = (["t"] + [f"x_{j + 1}" for j in range(n)]
              + [f"u_{j + 1}" for j in range(d)]
              + ["dist_to_C", "active_constraints"])
    _write_csv(os.path.join(out, "trajectory.csv"), header, rows)
    _write_json(os.path.join(out, "report.json"), {
        "scenario": sc.name,
        "level": args.level,
        "substeps": args.substeps,
        "l_bound": report.l_bound,
        "l_bound_statement": report.l_bound_statement,
        "m_bound": report.m_bound,
        "bounds_applicable": report.bounds_applicable,
        "max_state_norm": report.max_state_norm,
        "max_velocity_norm": report.max_velocity_norm,
        "lemma1_violation": report.lemma1_violation,
        "wall_time": report.wall_time,
    })
    controls = np.array([np.atleast_1d(sc.control_signal.eval(t))
                         for t in traj.times[:-1]])
    plots.save_trajectory_plot(traj.times, traj.states, controls,
                               os.path.join(out, "trajectory.png"))
    print(f"wrote trajectory.csv, report.json, trajectory.png to {out}")
    return EXIT_OK


def cmd_refine(args) -> int:
    sc = load_scenario(args.scenario)
    out = _outdir(args)
    traj, report = refine_until_cauchy(sc.problem, sc.control_signal,
                                       args.tol, args.kstart, args.kmax,
                                       substeps=args.substeps)
    rows = [[kc, kf, gap] for kc, kf, gap in report.levels]
    _write_csv(os.path.join(out, "cauchy.csv"),
               ["k_coarse", "k_fine", "sup_gap"], rows)
    _write_json(os.path.join(out, "cauchy.json"), {
        "scenario": sc.name,
        "converged": report.converged,
        "final_k": report.final_k,
        "tol": args.tol,
    })
    if rows:
        plots.save_cauchy_plot([r[0] for r in rows], [r[2] for r in rows],
                               os.path.join(out, "cauchy.png"))
    status = "converged" if report.converged else "not converged"
    print(f"{status} at k={report.final_k}; wrote cauchy.csv to {out}")
    return EXIT_OK if report.converged else EXIT_NUMERICAL


def _parse_levels(spec: str):
    try:
        lo, hi = spec.split(":")
        lo, hi = int(lo), int(hi)
    except ValueError as exc:
        raise ScenarioError(f"--levels expects m1:m2, got {spec!r}") from exc
    if not 0 <= lo <= hi:
        raise ScenarioError("--levels range must satisfy 0 <= m1 <= m2")
    return range(lo, hi + 1)


def cmd_feasible(args) -> int:
    sc = load_scenario(args.scenario)
    out = _outdir(args)
    levels = _parse_levels(args.levels)
    ref_level = args.reference_level or int(sc.study.get("reference_level", 12))
    xbar, _ = solve_delayed(sc.problem, sc.control_signal, 2**ref_level,
                            substeps=args.substeps)
    ubar = sc.control_signal

    def one_level(m):
        return convergence_study(sc.problem, xbar, ubar, [m]).rows[0]

    workers = min(_threads(), len(levels))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            all_rows = list(pool.map(one_level, levels))
    else:
        all_rows = [one_level(m) for m in levels]

    rows = [[r.level, 2**r.level, r.err_u_l2, r.err_x_w12, r.r_l2, r.sup_err]
            for r in all_rows]
    _write_csv(os.path.join(out, "feasible.csv"),
               ["level", "k", "err_u_l2", "err_x_w12", "r_l2", "sup_err"],
               rows)
    plots.save_convergence_plot(
        [r.level for r in all_rows],
        {"err_u_l2": [r.err_u_l2 for r in all_rows],
         "err_x_w12": [r.err_x_w12 for r in all_rows],
         "r_l2": [r.r_l2 for r in all_rows]},
        os.path.join(out, "feasible.png"))
    print(f"wrote feasible.csv, feasible.png to {out}")
    return EXIT_OK


def cmd_optimize(args) -> int:
    sc = load_scenario(args.scenario)
    if sc.cost is None or sc.epsilon is None:
        raise ValidationFailure(
            "scenario lacks a cost section with epsilon; optimize needs both")
    out = _outdir(args)
    if args.oracle_grid:
        n_values = (len(sc.problem.controls.points)
                    if sc.problem.controls.kind == "finite"
                    else args.oracle_grid**sc.problem.d)
        if 2**args.level * math.log(max(n_values, 2)) > math.log(10_000_000):
            raise EnumerationTooLarge(
                f"{n_values}^{2**args.level} oracle rollouts exceed the guard")
    ref_level = args.reference_level or int(sc.study.get("reference_level", 10))
    xbar, _ = solve_delayed(sc.problem, sc.control_signal, 2**ref_level,
                            substeps=args.substeps)
    ocp = DiscreteOCP(sc.problem, sc.cost, xbar, sc.control_signal,
                      args.level, sc.epsilon)
    local = solve_local(ocp, starts=args.starts, seed=args.seed)
    payload = {
        "scenario": sc.name,
        "level": args.level,
        "starts": args.starts,
        "seed": args.seed,
        "epsilon": sc.epsilon,
        "J_local": local.objective,
        "feasible_local": local.feasible,
        "feasibility_local": local.feasibility,
        "controls_local": local.candidate.controls,
        "evaluations_local": local.evaluations,
    }
    if args.oracle_grid:
        oracle = solve_oracle(ocp, args.oracle_grid)
        payload.update({
            "J_oracle": oracle.objective,
            "feasible_oracle": oracle.feasible,
            "evaluations_oracle": oracle.evaluations,
        })
        if oracle.candidate is not None:
            payload["controls_oracle"] = oracle.candidate.controls
    _write_json(os.path.join(out, "optimize.json"), payload)

    cand = local.candidate
    rows = []
    for i in range(ocp.N):
        rows.append([ocp.times[i], *cand.states[i], *cand.controls[i]])
    rows.append([ocp.times[-1], *cand.states[-1],
                 *([float("nan")] * ocp.d)])
    header = (["t"] + [f"x_{j + 1}" for j in range(sc.problem.n)]
              + [f"u_{j + 1}" for j in range(ocp.d)])
    _write_csv(os.path.join(out, "controls.csv"), header, rows)
    plots.save_trajectory_plot(ocp.times, cand.states, cand.controls,
                               os.path.join(out, "optimize.png"))
    print(f"J_local = {_fmt(local.objective)}"
          + (f", J_oracle = {_fmt(payload['J_oracle'])}"
             if "J_oracle" in payload else "")
          + f"; wrote optimize.json, controls.csv to {out}")
    return EXIT_OK


# -- dispatch ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="delaysweep",
        description="Catching-up solver and discrete Mayer studies for "
                    "delayed sweeping processes over moving polyhedra.")
    sub = parser.add_subparsers(dest="command", required=True)

    pv = sub.add_parser("validate", help="run standing-assumption checks")
    pv.add_argument("scenario")
    pv.add_argument("--samples", type=int, default=1000)
    pv.add_argument("--seed", type=int, default=0)
    pv.set_defaults(fn=cmd_validate)

    ps = sub.add_parser("simulate", help="catching-up solve, CSV + report")
    ps.add_argument("scenario")
    ps.add_argument("--level", type=int, required=True,
                    help="number of mesh intervals k")
    ps.add_argument("--substeps", type=int, default=4)
    ps.add_argument("--out", required=True)
    ps.set_defaults(fn=cmd_simulate)

    pr = sub.add_parser("refine", help="mesh doubling until Cauchy tolerance")
    pr.add_argument("scenario")
    pr.add_argument("--tol", type=float, required=True)
    pr.add_argument("--kstart", type=int, default=16)
    pr.add_argument("--kmax", type=int, required=True)
    pr.add_argument("--substeps", type=int, default=4)
    pr.add_argument("--out", required=True)
    pr.set_defaults(fn=cmd_refine)

    pf = sub.add_parser("feasible",
                        help="sampled-pair residual and error study")
    pf.add_argument("scenario")
    pf.add_argument("--levels", required=True, help="range m1:m2")
    pf.add_argument("--reference-level", type=int, default=None)
    pf.add_argument("--substeps", type=int, default=4)
    pf.add_argument("--out", required=True)
    pf.set_defaults(fn=cmd_feasible)

    po = sub.add_parser("optimize", help="solve the level-m discrete problem")
    po.add_argument("scenario")
    po.add_argument("--level", type=int, required=True)
    po.add_argument("--starts", type=int, default=8)
    po.add_argument("--seed", type=int, default=0)
    po.add_argument("--oracle-grid", type=int, default=0)
    po.add_argument("--reference-level", type=int, default=None)
    po.add_argument("--substeps", type=int, default=4)
    po.add_argument("--out", required=True)
    po.set_defaults(fn=cmd_optimize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ScenarioError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationFailure as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SweepError as exc:
        print(f"numerical failure: {exc.__class__.__name__}: {exc}",
              file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"io failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
