"""Command-line front end.

    aggrekin run <config> [--keep-going]
    aggrekin study <config> --kind refinement|ap_sweep
    aggrekin presets

``run`` writes ``snapshots.csv``, ``diagnostics.csv`` and ``meta.txt`` into the
output directory (``output_dir`` in the config, overridden by the
``AGGREKIN_OUTPUT`` environment variable).  Floats are written with Python's
``repr``, the shortest decimal string that round-trips to the same double, so
identical configs give byte-identical CSV files.

Exit status: 0 on success, 1 when an invariant fails, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from typing import List, Optional, TextIO

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, build_problem, output_dir, parse_config
from .diagnostics import StepReport, check_report, compare_ap, refinement_study, report
from .grid import Grid1D
from .kinetic import SPLITTINGS, ap_velocity, initial_distribution, kinetic_dt, make_state
from .macro import (CFLError, InvariantError, cfl_dt, initial_state, macro_step, nodal_step,
                    sup_velocity_bound)
from .models import ProblemPreset, preset, preset_names
from .potential import FieldSolver

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_CONFIG = 2


def fmt(value) -> str:
    """Shortest round-trip decimal for floats; plain ``str`` otherwise."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: str, header: List[str], rows) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


class RunResult:
    def __init__(self):
        self.snapshots: List[tuple] = []
        self.reports: List[StepReport] = []
        self.failures: List[tuple] = []
        self.meta: dict = {}


def _snapshot_rows(result: RunResult, grid: Grid1D, dump_f: bool):
    x = grid.x
    for t, rho, f in result.snapshots:
        for i in range(grid.n):
            row = [float(t), float(x[i]), float(rho[i])]
            if dump_f and f is not None:
                row.extend(float(v) for v in f[i])
            yield row


def execute(problem: ProblemPreset, cfg: RunConfig, keep_going: bool = False) -> RunResult:
    """Time loop with per-step invariant checks; stops at the first failure unless ``keep_going``."""
    res = RunResult()
    grid0 = problem.grid(cfg.nx)
    rho0 = problem.initial_density(grid0)
    mass = float(grid0.dx * rho0.sum())
    rho0_max = float(np.max(np.abs(rho0))) or 1.0
    kinetic = problem.scheme.startswith("kinetic")
    limit = problem.scheme == "macro_limit"
    law = problem.law
    if kinetic or limit:
        vgrid = problem.vgrid
        dt = kinetic_dt(grid0, vgrid)
        c = vgrid.vmax
    else:
        c = sup_velocity_bound(law, mass, problem.potential.w0)
        dt = cfl_dt(c, grid0.dx)
    grid = grid0.with_dt(dt)
    solver = FieldSolver(problem.potential, grid, cfg.closure)
    mode = cfg.velocity_mode
    if kinetic:
        fld0 = solver(rho0)
        f0 = initial_distribution(rho0, vgrid, "uniform", fld0, problem.equilibrium, mode)
        state = make_state(f0, problem.eps, solver, vgrid)
        step = SPLITTINGS[problem.scheme.split("_", 1)[1]]
    else:
        state = initial_state(rho0, solver)
    horizon = problem.horizon
    nsteps = int(math.ceil(horizon / dt - 1e-9)) if horizon > 0 else 0
    every = max(1, int(round(cfg.snapshot_every / dt)))
    res.meta.update(grid=grid, c=c, dt=dt, lam=grid.lam, cfl_number=grid.lam * c, steps=nsteps,
                    mass=mass, kinetic=kinetic, snapshot_stride=every)

    def make_report(st):
        if kinetic or limit:
            return report(st, law, grid, mode, a_half=ap_velocity(st.field, problem.equilibrium,
                                                                   vgrid, mode))
        return report(st, law, grid, mode)

    def snap(st):
        res.snapshots.append((st.t, st.rho, getattr(st, "f", None)))

    prev = make_report(state)
    res.reports.append(prev)
    snap(state)
    for n in range(1, nsteps + 1):
        try:
            if kinetic:
                state = step(state, grid, vgrid, problem.equilibrium, solver, mode)
            elif limit:
                ahat = ap_velocity(state.field, problem.equilibrium, vgrid, mode)
                state = nodal_step(state, ahat, solver, c)
            else:
                state = macro_step(state, law, solver, c, mode)
        except (InvariantError, CFLError) as exc:
            res.failures.append((n, str(exc), prev))
            break
        rep = make_report(state)
        res.reports.append(rep)
        if kinetic or limit:
            bad = check_report(rep, float("inf"), mass, rho0_max, None, attractive=False)
            if kinetic and float(state.f.min()) < -1e-14 * rho0_max:
                bad.append(f"min f {float(state.f.min()):.3e} < 0")
        else:
            bad = check_report(rep, c, mass, rho0_max, prev, attractive=law.attractive)
        prev = rep
        if n == nsteps or n % every == 0:
            snap(state)
        if bad:
            res.failures.append((n, "; ".join(bad), rep))
            if not keep_going:
                if res.snapshots[-1][0] != state.t:
                    snap(state)
                break
    return res


def _print_failure(out: TextIO, n: int, msg: str, rep: StepReport) -> None:
    out.write(f"invariant failure at step {n}: {msg}\n")
    out.write("  " + ", ".join(f"{k}={fmt(v)}" for k, v in zip(StepReport.columns(), rep.row())) + "\n")


def cmd_run(cfg: RunConfig, keep_going: bool, out: TextIO, err: TextIO) -> int:
    problem = build_problem(cfg)
    outdir = output_dir(cfg)
    os.makedirs(outdir, exist_ok=True)
    t0 = time.perf_counter()
    res = execute(problem, cfg, keep_going)
    wall = time.perf_counter() - t0
    grid = res.meta["grid"]
    header = ["t", "x", "rho"]
    if cfg.dump_f and res.meta["kinetic"]:
        header += [f"f_{j}" for j in range(problem.vgrid.size)]
    _write_csv(os.path.join(outdir, "snapshots.csv"), header,
               _snapshot_rows(res, grid, cfg.dump_f and res.meta["kinetic"]))
    _write_csv(os.path.join(outdir, "diagnostics.csv"), StepReport.columns(),
               (r.row() for r in res.reports))
    with open(os.path.join(outdir, "meta.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"aggrekin_version = {__version__}\n")
        for k, v in cfg.resolved().items():
            fh.write(f"{k} = {v}\n")
        fh.write(f"problem_name = {problem.name}\n")
        fh.write(f"law = {problem.law.name}\n")
        fh.write(f"potential = {problem.potential.kind}\n")
        fh.write(f"resolved_scheme = {problem.scheme}\n")
        fh.write(f"resolved_horizon = {fmt(problem.horizon)}\n")
        for key in ("c", "dt", "lam", "cfl_number", "steps", "mass", "snapshot_stride"):
            fh.write(f"{key} = {fmt(res.meta[key])}\n")
        if not problem.law.attractive:
            fh.write("note = non-monotone velocity law: no convergence theory applies\n")
        fh.write(f"failures = {len(res.failures)}\n")
        fh.write(f"wall_time_s = {wall:.3f}\n")
    for n, msg, rep in res.failures:
        _print_failure(err, n, msg, rep)
    status = EXIT_INVARIANT if res.failures and not keep_going else EXIT_OK
    out.write(f"wrote {outdir}: {len(res.snapshots)} snapshots, {len(res.reports)} reports, "
              f"{len(res.failures)} invariant failure(s)\n")
    return status


def cmd_study(cfg: RunConfig, kind: str, out: TextIO) -> int:
    problem = build_problem(cfg)
    outdir = output_dir(cfg)
    os.makedirs(outdir, exist_ok=True)
    if kind == "refinement":
        if len(cfg.study_grids) < 3:
            raise ConfigError("need >= 3 grids for a refinement study")
        table = refinement_study(problem.initial, problem.domain, problem.law, problem.potential,
                                 cfg.study_grids, problem.horizon, cfg.velocity_mode)
        rows = [["error", r.nx, r.dx, r.error] for r in table.rows]
        rows.append(["order", "", "", table.order])
        path = os.path.join(outdir, "study_refinement.csv")
        _write_csv(path, ["kind", "nx", "dx", "value"], rows)
        out.write(f"wrote {path}: fitted order {table.order:.3f}\n")
        return EXIT_OK
    if kind == "ap_sweep":
        if problem.equilibrium is None or problem.vgrid is None:
            raise ConfigError("ap_sweep needs a kinetic problem (equilibrium and velocity set)")
        grid = problem.grid(cfg.nx)
        splitting = "strang" if problem.scheme == "kinetic_strang" else "lie"
        rows = compare_ap(problem.initial_density(grid), grid, problem.vgrid, problem.equilibrium,
                          problem.potential, cfg.study_eps, cfg.study_steps, splitting,
                          cfg.velocity_mode, cfg.closure)
        path = os.path.join(outdir, "study_ap_sweep.csv")
        _write_csv(path, ["eps", "gap"], ([r.eps, r.gap] for r in rows))
        out.write(f"wrote {path}\n")
        return EXIT_OK
    raise ConfigError(f"unknown study kind {kind!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aggrekin", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"aggrekin {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one simulation")
    p_run.add_argument("config", help="path to a configuration file")
    p_run.add_argument("--keep-going", action="store_true",
                       help="record invariant failures instead of stopping")
    p_study = sub.add_parser("study", help="refinement or eps-sweep study")
    p_study.add_argument("config")
    p_study.add_argument("--kind", required=True, choices=("refinement", "ap_sweep"))
    sub.add_parser("presets", help="list preset names")
    return parser


def main(argv: Optional[List[str]] = None, out: TextIO = None, err: TextIO = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        for name in preset_names():
            out.write(f"{name}\t{preset(name).description}\n")
        return EXIT_OK
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
        if args.command == "run":
            return cmd_run(cfg, args.keep_going, out, err)
        return cmd_study(cfg, args.kind, out)
    except (ConfigError, OSError) as exc:
        err.write(f"aggrekin: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
