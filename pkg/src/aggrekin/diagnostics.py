"""Per-step invariant monitors, blow-up detection and comparison studies."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Callable, List, Optional, Sequence

import numpy as np

from .grid import ContractError, Grid1D, VelocityGrid
from .kinetic import ap_velocity, run_kinetic
from .macro import (VelocityLaw, cell_averages, cfl_dt, face_velocities, initial_state,
                    macro_step, nodal_step, resolved_faces, sup_velocity_bound)
from .potential import FieldSolver, PointyPotential, support_leak


@dataclass(frozen=True)
class StepReport:
    t: float
    mass: float
    min_rho: float
    max_rho: float
    max_abs_velocity: float
    osl_max: float
    osl_bound: float
    tv_cumulative: float  # includes the fixed value 0 left of node 0
    support_leak: float
    centroid: float

    @classmethod
    def columns(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> List[float]:
        return [getattr(self, name) for name in self.columns()]


def osl_values(a_half: np.ndarray, dx: float, resolved: Optional[np.ndarray] = None) -> np.ndarray:
    """``(a[i+1/2] - a[i-1/2]) / dx`` for adjacent face pairs.

    Pairs touching a face where the velocity was set by the equal-slope rule
    (``resolved == False``) are reported as ``-inf``.
    """
    diff = np.diff(a_half) / dx
    if resolved is not None:
        keep = resolved[:-1] & resolved[1:]
        diff = np.where(keep, diff, -np.inf)
    return diff


def total_variation(values) -> float:
    return float(np.abs(np.diff(np.asarray(values, dtype=float))).sum())


def report(state, law: VelocityLaw, grid: Grid1D, mode: str = "volpert_literal",
           a_half: Optional[np.ndarray] = None) -> StepReport:
    """Invariant snapshot of a macro or kinetic state.

    ``a_half`` overrides the face velocities (e.g. for kinetic runs, where
    the density is moved by the kinetic flux instead).
    """
    rho = np.asarray(state.rho, dtype=float)
    dx = grid.dx
    mass = float(dx * rho.sum())
    fld = state.field
    if a_half is None:
        a_half = face_velocities(fld, law, mode)
        resolved = resolved_faces(fld, mode)
    else:
        resolved = None
    osl = osl_values(a_half, dx, resolved)
    osl_max = float(osl.max()) if osl.size and np.isfinite(osl).any() else 0.0
    nu_max = float(np.max(np.abs(fld.nu))) if fld.nu.size else 0.0
    Mc = dx * np.cumsum(rho)
    x = grid.x
    centroid = float(dx * (x * rho).sum() / mass) if mass != 0 else 0.0
    return StepReport(
        t=float(state.t),
        mass=mass,
        min_rho=float(rho.min()),
        max_rho=float(rho.max()),
        max_abs_velocity=float(np.max(np.abs(a_half))) if a_half.size else 0.0,
        osl_max=osl_max,
        osl_bound=2.0 * law.alpha * nu_max,
        tv_cumulative=total_variation(np.concatenate(([0.0], Mc))),
        support_leak=support_leak(rho, grid),
        centroid=centroid,
    )


def check_report(rep: StepReport, c: float, mass0: float, rho0_max: float,
                 prev: Optional[StepReport] = None, attractive: bool = True) -> List[str]:
    """Names and values of the invariants that ``rep`` violates."""
    bad = []
    scale = abs(mass0) if mass0 != 0 else 1.0
    if abs(rep.mass - mass0) > 1e-12 * scale:
        bad.append(f"mass drift {abs(rep.mass - mass0) / scale:.3e} > 1e-12")
    if rep.min_rho < -1e-14 * rho0_max:
        bad.append(f"min_rho {rep.min_rho:.3e} < -1e-14*max")
    if rep.max_abs_velocity > c + 1e-12:
        bad.append(f"max|a| {rep.max_abs_velocity:.15g} > c = {c:.15g}")
    if attractive and rep.osl_max > rep.osl_bound + 1e-10:
        bad.append(f"osl {rep.osl_max:.6g} > bound {rep.osl_bound:.6g}")
    if prev is not None and rep.tv_cumulative > prev.tv_cumulative * (1 + 1e-13) + 1e-15:
        bad.append(f"TV of cumulative mass grew {prev.tv_cumulative!r} -> {rep.tv_cumulative!r}")
    return bad


def blowup_indicator(times: Sequence[float], max_rho: Sequence[float], dx: float,
                     K: float = 0.5, mass: float = 1.0) -> Optional[float]:
    """First time a single cell holds at least a fraction ``K`` of the mass.

    That is ``max rho >= K * mass / dx``.  Needs at least 10 samples.
    """
    times = np.asarray(times, dtype=float)
    max_rho = np.asarray(max_rho, dtype=float)
    if times.size < 10:
        raise ContractError("blow-up detection needs at least 10 snapshots")
    hit = np.nonzero(max_rho >= K * mass / dx)[0]
    return float(times[hit[0]]) if hit.size else None


def cluster_fraction(rho, dx: float, width: int = 5) -> float:
    """Largest fraction of the mass found in ``width`` contiguous cells."""
    rho = np.asarray(rho, dtype=float)
    total = rho.sum()
    if total == 0:
        return 0.0
    window = np.convolve(rho, np.ones(width), mode="valid")
    return float(window.max() / total)


def half_centroids(rho, grid: Grid1D, center: float = 0.0):
    """Centroids of the mass left and right of ``center``; a node at ``center`` is shared."""
    rho = np.asarray(rho, dtype=float)
    x = grid.x
    wl = np.where(x < center, 1.0, np.where(x == center, 0.5, 0.0)) * rho
    wr = np.where(x > center, 1.0, np.where(x == center, 0.5, 0.0)) * rho
    cl = float((wl * x).sum() / wl.sum()) if wl.sum() > 0 else float("nan")
    cr = float((wr * x).sum() / wr.sum()) if wr.sum() > 0 else float("nan")
    return cl, cr


def wasserstein1_atoms(x1, m1, x2, m2, rtol: float = 1e-10) -> float:
    """W1 between two discrete measures ``sum m1 delta_x1`` and ``sum m2 delta_x2``."""
    x1, m1, x2, m2 = (np.asarray(z, dtype=float) for z in (x1, m1, x2, m2))
    t1, t2 = m1.sum(), m2.sum()
    if abs(t1 - t2) > rtol * max(abs(t1), abs(t2)):
        raise ContractError(f"masses differ: {t1!r} vs {t2!r}")
    pts = np.concatenate((x1, x2))
    w = np.concatenate((m1, -m2))
    order = np.argsort(pts, kind="stable")
    pts = pts[order]
    F = np.cumsum(w[order])
    return float(np.sum(np.abs(F[:-1]) * np.diff(pts)))


def fitted_order(h, err) -> float:
    """Least-squares slope of ``log err`` against ``log h``."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if h.size < 2 or np.any(err <= 0):
        return float("nan")
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


@dataclass(frozen=True)
class RefinementRow:
    nx: int
    dx: float
    error: float


@dataclass
class RefinementTable:
    rows: List[RefinementRow]
    order: float
    horizon: float


def refinement_study(rho_ini: Callable, domain, law: VelocityLaw, pot: PointyPotential,
                     grids: Sequence[int], horizon: float,
                     mode: str = "volpert_literal") -> RefinementTable:
    """W1 errors at ``horizon`` against the finest grid, with the fitted order.

    Every run ends exactly at ``horizon`` (the last step is shortened).
    """
    grids = sorted(int(n) for n in grids)
    if len(grids) < 3:
        raise ContractError("need >= 3 grids for a refinement study")
    finals = {}
    for nx in grids:
        g0 = Grid1D.from_domain(domain[0], domain[1], nx)
        rho0 = cell_averages(rho_ini, g0)
        mass = g0.dx * rho0.sum()
        c = sup_velocity_bound(law, mass, pot.w0)
        dt = cfl_dt(c, g0.dx)
        grid = g0.with_dt(dt)
        solver = FieldSolver(pot, grid)
        state = initial_state(rho0, solver)
        n_full = int(math.floor(horizon / dt + 1e-12))
        for _ in range(n_full):
            state = macro_step(state, law, solver, c, mode)
        rest = horizon - n_full * dt
        if rest > 1e-14:
            short = grid.with_dt(rest)
            state = macro_step(state, law, FieldSolver(pot, short), c, mode)
        finals[nx] = (grid.x, grid.dx * state.rho)
    ref_x, ref_m = finals[grids[-1]]
    rows = []
    for nx in grids[:-1]:
        x, m = finals[nx]
        rows.append(RefinementRow(nx, (domain[1] - domain[0]) / nx,
                                  wasserstein1_atoms(x, m, ref_x, ref_m, rtol=1e-9)))
    order = fitted_order([r.dx for r in rows], [r.error for r in rows])
    return RefinementTable(rows=rows, order=order, horizon=horizon)


@dataclass(frozen=True)
class APRow:
    eps: float
    gap: float


def compare_ap(rho0, grid: Grid1D, vgrid: VelocityGrid, model, pot: PointyPotential,
               eps_list: Sequence[float], steps: int = 100, splitting: str = "lie",
               mode: str = "volpert_literal", closure: str = "free_space") -> List[APRow]:
    """Max-norm density gap between kinetic runs and the ``eps -> 0`` limit scheme.

    The comparator advances with :func:`aggrekin.macro.nodal_step` using
    ``c = vmax`` and the limit velocity computed from its own potential, on
    the kinetic time step.
    """
    dt = 0.95 * grid.dx / vgrid.vmax
    g = grid.with_dt(dt)
    solver = FieldSolver(pot, g, closure)
    state = initial_state(np.asarray(rho0, dtype=float), solver)
    limit = [state.rho]
    for _ in range(steps):
        ahat = ap_velocity(state.field, model, vgrid, mode)
        state = nodal_step(state, ahat, solver, vgrid.vmax)
        limit.append(state.rho)
    limit = np.array(limit)
    rows = []
    for eps in eps_list:
        traj = run_kinetic(rho0, grid, vgrid, model, pot, eps, horizon=0.0, splitting=splitting,
                           mode=mode, snapshot_every=dt, closure=closure, steps=steps)
        kin = np.array([s.rho for s in traj.snapshots])
        if kin.shape != limit.shape:
            raise ContractError("kinetic and limit runs recorded different step counts")
        rows.append(APRow(float(eps), float(np.max(np.abs(kin - limit)))))
    return rows
