"""Asymptotic-preserving splitting scheme for the BGK relaxation model

    eps * (f_t + v f_x) = rho * E(v, dS/dx) - f.

One step relaxes exactly towards the discrete equilibrium ``e[i, j] * rho[i]``
and then transports with a Lax-Friedrichs step of viscosity ``lam * vmax / 2``.
The time step ``0.95 * dx / vmax`` does not depend on ``eps``; as ``eps -> 0``
the density follows the node-flux Lax-Friedrichs scheme with velocity
``ahat[i] = I(v e[i, :])`` (see :func:`aggrekin.macro.nodal_step`).

Arrays ``f`` have shape ``(nx + 1, n_velocities)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy import interpolate

from .grid import ContractError, Grid1D, VelocityGrid, trapezoid
from .macro import CFLError, InvariantError, Trajectory, flux_update
from .potential import FieldSolver, PointyPotential, PotentialField

_GL3_NODES, _GL3_WEIGHTS = np.polynomial.legendre.leggauss(3)
_NEAR_EQUAL = 1e-7


@dataclass(frozen=True)
class EquilibriumModel:
    """Equilibrium ``E(v, x)`` and its primitive ``calE(v, x) = int_0^x E(v, y) dy``.

    Both callables broadcast over numpy arrays.  ``normalized`` records whether
    ``int_V E(v, x) dv = 1`` holds exactly in the continuous setting.
    """

    E: Callable
    calE: Callable
    normalized: bool = True
    name: str = "custom"

    @classmethod
    def two_speed_chemo(cls, k: float = 10.0, amplitude: float = 1.0 / np.pi) -> "EquilibriumModel":
        """Run-and-tumble equilibrium ``E(v, x) = 1/2 + amplitude * atan(k v x)`` on ``{-v, +v}``.

        With the default amplitude ``E`` lies in ``[0, 1]`` and the limiting
        velocity is ``a(x) = (2/pi) atan(k v x) * v``.  Larger amplitudes make
        ``E`` negative for large slopes.
        """
        k = float(k)
        amp = float(amplitude)

        def E(v, x):
            return 0.5 + amp * np.arctan(k * np.asarray(v) * np.asarray(x))

        def calE(v, x):
            v = np.asarray(v, dtype=float)
            x = np.asarray(x, dtype=float)
            kv = k * v
            z = kv * x
            with np.errstate(divide="ignore", invalid="ignore"):
                prim = np.where(kv == 0.0, 0.0, (z * np.arctan(z) - 0.5 * np.log1p(z * z)) / kv)
            return 0.5 * x + amp * prim

        return cls(E=E, calE=calE, normalized=True, name=f"two_speed_chemo(k={k:g})")

    @classmethod
    def smooth_continuous(cls, vmax: float = 1.0, k: float = 10.0) -> "EquilibriumModel":
        """``E(v, x) = 3/(4V) (1 - v^2/V^2) (1 + (v/V) theta(x))`` with ``theta = (2/pi) atan(k x)``.

        Nonnegative and normalised on ``[-V, V]``; the limiting velocity is
        ``a(x) = (V/5) theta(x)``.
        """
        V = float(vmax)
        k = float(k)

        def shape(v):
            v = np.asarray(v, dtype=float)
            return 0.75 / V * (1.0 - (v / V) ** 2)

        def E(v, x):
            v = np.asarray(v, dtype=float)
            theta = (2.0 / np.pi) * np.arctan(k * np.asarray(x, dtype=float))
            return shape(v) * (1.0 + (v / V) * theta)

        def calE(v, x):
            v = np.asarray(v, dtype=float)
            x = np.asarray(x, dtype=float)
            kx = k * x
            Theta = (2.0 / np.pi) * (x * np.arctan(kx) - np.log1p(kx * kx) / (2.0 * k))
            return shape(v) * (x + (v / V) * Theta)

        return cls(E=E, calE=calE, normalized=True, name=f"smooth_continuous(V={V:g},k={k:g})")

    @classmethod
    def from_callable(cls, E: Callable, span: float, velocities, npts: int = 4096,
                      name: str = "custom") -> "EquilibriumModel":
        """Tabulate ``calE(v_j, .)`` on ``[-span, span]`` for each listed velocity.

        Cells are integrated with 5-point Gauss-Legendre and interpolated by
        cubic Hermite pieces using ``E`` as the derivative.  Only the listed
        velocities can be evaluated afterwards.
        """
        vs = np.asarray(velocities, dtype=float)
        xs = np.linspace(-span, span, npts + 1)
        if not np.any(xs == 0.0):
            xs = np.union1d(xs, [0.0])
        nodes, weights = np.polynomial.legendre.leggauss(5)
        h = np.diff(xs)
        mids = 0.5 * (xs[:-1] + xs[1:])
        pts = mids[:, None] + 0.5 * h[:, None] * nodes[None, :]
        E_vec = np.vectorize(E, otypes=[float])
        zero = int(np.searchsorted(xs, 0.0))
        splines = {}
        for v in vs:
            cell = 0.5 * h * (E_vec(v, pts) @ weights)
            prim = np.concatenate(([0.0], np.cumsum(cell)))
            prim -= prim[zero]
            splines[float(v)] = interpolate.CubicHermiteSpline(xs, prim, E_vec(v, xs),
                                                               extrapolate=False)

        def calE(v, x):
            v, x = np.broadcast_arrays(np.asarray(v, dtype=float), np.asarray(x, dtype=float))
            if np.any(np.abs(x) > span):
                raise ValueError(f"calE evaluated outside its table [-{span}, {span}]")
            out = np.empty(v.shape)
            for vv in np.unique(v):
                if float(vv) not in splines:
                    raise ValueError(f"velocity {vv!r} was not tabulated")
                sel = v == vv
                out[sel] = splines[float(vv)](x[sel])
            return out

        return cls(E=lambda v, x: E_vec(v, x), calE=calE, normalized=False, name=name)

    def limit_velocity(self, x, vgrid: VelocityGrid) -> np.ndarray:
        """``a(x) = I(v E(v, x))`` on the velocity grid."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        v = vgrid.v
        return trapezoid(v[None, :] * self.E(v[None, :], x[:, None]), vgrid)


@dataclass(frozen=True)
class KineticState:
    t: float
    eps: float
    f: np.ndarray
    rho: np.ndarray
    field: PotentialField
    mass: float


def equilibrium_E_discrete(model: EquilibriumModel, v, u_left, u_right,
                           mode: str = "volpert_literal"):
    """Flux-consistent equilibrium ``(calE(v, u_right) - calE(v, u_left)) / (u_right - u_left)``.

    Bitwise equal slopes give 0 (``volpert_literal``) or ``E(v, u)``
    (``volpert_smooth``).  Nearly equal slopes use a Gauss mean of ``E``.
    Broadcasts over all three arguments.
    """
    v, ul, ur = np.broadcast_arrays(np.asarray(v, dtype=float), np.asarray(u_left, dtype=float),
                                    np.asarray(u_right, dtype=float))
    scalar = v.ndim == 0
    v, ul, ur = (np.atleast_1d(z) for z in (v, ul, ur))
    du = ur - ul
    out = np.empty(v.shape)
    equal = du == 0.0
    near = ~equal & (np.abs(du) <= _NEAR_EQUAL * (1.0 + np.abs(ul) + np.abs(ur)))
    far = ~(equal | near)
    if np.any(far):
        out[far] = (model.calE(v[far], ur[far]) - model.calE(v[far], ul[far])) / du[far]
    if np.any(near):
        mid = 0.5 * (ul[near] + ur[near])
        pts = mid[:, None] + 0.5 * du[near][:, None] * _GL3_NODES[None, :]
        out[near] = 0.5 * (model.E(v[near][:, None], pts) @ _GL3_WEIGHTS)
    if np.any(equal):
        if mode == "volpert_smooth":
            out[equal] = model.E(v[equal], ul[equal])
        elif mode == "volpert_literal":
            out[equal] = 0.0
        else:
            raise ValueError(f"unknown equilibrium mode {mode!r}")
    return float(out[0]) if scalar else out


def normalize_rows(E_rows, vgrid: VelocityGrid) -> np.ndarray:
    """Scale each row to unit velocity integral; all-zero rows become uniform.

    The uniform row is ``1 / I(1)``, i.e. ``1/(nv dv)`` on a continuous grid
    and ``1/2`` for the two-speed set.
    """
    E_rows = np.asarray(E_rows, dtype=float)
    one_d = E_rows.ndim == 1
    rows = np.atleast_2d(E_rows)
    total = trapezoid(rows, vgrid)
    out = np.empty_like(rows)
    ok = total != 0.0
    out[ok] = rows[ok] / total[ok, None]
    out[~ok] = 1.0 / trapezoid(np.ones(vgrid.size), vgrid)
    return out[0] if one_d else out


def equilibrium_rows(fld: PotentialField, model: EquilibriumModel, vgrid: VelocityGrid,
                     mode: str = "volpert_literal"):
    """Raw rows ``E[i, j]`` and normalised rows ``e[i, j]`` for every node.

    Node ``i`` uses the face slopes ``i - 1/2`` and ``i + 1/2``.  Negative
    entries, which only occur when ``E`` itself is negative somewhere in the
    realised slope range, are clamped to zero with a warning.
    """
    ul = fld.half[:-1, None]
    ur = fld.half[1:, None]
    E = equilibrium_E_discrete(model, vgrid.v[None, :], ul, ur, mode)
    neg = E < 0.0
    if np.any(neg):
        rows = np.nonzero(neg.any(axis=1))[0]
        i = int(rows[np.argmin(E[rows].min(axis=1))])
        warnings.warn(
            f"equilibrium negative at {rows.size} node(s), worst at node {i} with slopes "
            f"({fld.half[i]:.6g}, {fld.half[i + 1]:.6g}); clamped to 0 and renormalised",
            RuntimeWarning,
            stacklevel=2,
        )
        E = np.where(neg, 0.0, E)
    return E, normalize_rows(E, vgrid)


def moments(state: KineticState, vgrid: VelocityGrid):
    """``(rho, J, q)``: the zeroth, first and second velocity moments."""
    f = state.f
    v = vgrid.v
    return trapezoid(f, vgrid), trapezoid(f * v, vgrid), trapezoid(f * v * v, vgrid)


def ap_velocity(fld: PotentialField, model: EquilibriumModel, vgrid: VelocityGrid,
                mode: str = "volpert_literal") -> np.ndarray:
    """Limit velocity ``ahat[i] = I(v e[i, :])`` seen by the density when ``eps -> 0``.

    Computed as ``(A(u_r) - A(u_l)) / ((u_r - u_l) I(E[i, :]))`` with
    ``A(x) = I(v calE(v, x))`` where the slopes are well separated, and from
    the rows themselves otherwise.  Nodes with a zero equilibrium row get 0.
    """
    E, e = equilibrium_rows(fld, model, vgrid, mode)
    v = vgrid.v
    ul = fld.half[:-1]
    ur = fld.half[1:]
    du = ur - ul
    total = trapezoid(E, vgrid)
    out = np.zeros(ul.size)
    live = total != 0.0
    far = live & (np.abs(du) > _NEAR_EQUAL * (1.0 + np.abs(ul) + np.abs(ur)))
    if np.any(far):
        def A(x):
            return trapezoid(v[None, :] * model.calE(v[None, :], x[:, None]), vgrid)

        out[far] = (A(ur[far]) - A(ul[far])) / (du[far] * total[far])
    rest = live & ~far
    if np.any(rest):
        out[rest] = trapezoid(v[None, :] * e[rest], vgrid)
    return out


def kinetic_dt(grid: Grid1D, vgrid: VelocityGrid, safety: float = 0.95) -> float:
    return safety * grid.dx / vgrid.vmax


def make_state(f, eps: float, solver: FieldSolver, vgrid: VelocityGrid, t: float = 0.0,
               mass: Optional[float] = None) -> KineticState:
    f = np.asarray(f, dtype=float)
    if f.shape != (solver.grid.n, vgrid.size):
        raise ContractError(f"f must have shape {(solver.grid.n, vgrid.size)}, got {f.shape}")
    if not eps > 0:
        raise ContractError(f"eps must be positive, got {eps}")
    rho = trapezoid(f, vgrid)
    if mass is None:
        mass = float(solver.grid.dx * rho.sum())
    return KineticState(t=t, eps=float(eps), f=f, rho=rho, field=solver(rho), mass=mass)


def relax_step(state: KineticState, dt: float, model: EquilibriumModel, vgrid: VelocityGrid,
               mode: str = "volpert_literal") -> KineticState:
    """Exact solution of ``eps f_t = e rho - f`` over ``dt`` with ``rho`` and ``e`` frozen."""
    _, e = equilibrium_rows(state.field, model, vgrid, mode)
    Pi = e * state.rho[:, None]
    decay = math.exp(-dt / state.eps)
    f = decay * state.f + (-math.expm1(-dt / state.eps)) * Pi
    # rho and hence S are unchanged by relaxation
    return replace(state, f=f, t=state.t + dt)


def transport_step(state: KineticState, grid: Grid1D, vgrid: VelocityGrid,
                   solver: Optional[FieldSolver] = None, dt: Optional[float] = None) -> KineticState:
    """Lax-Friedrichs step for ``f_t + v f_x = 0`` with closed boundary faces.

    ``dt`` defaults to ``grid.dt``.  The density and, if ``solver`` is given,
    the potential are recomputed afterwards.
    """
    dt = grid.dt if dt is None else dt
    lam = dt / grid.dx
    vm = vgrid.vmax
    if lam * vm > 1.0 + 1e-12:
        raise CFLError(f"transport_step: lambda*vmax = {lam * vm:.6g} exceeds 1; shrink dt")
    v = vgrid.v[None, :]
    out_right = np.broadcast_to(0.5 * lam * (vm + v), (grid.nx, vgrid.size))
    in_left = np.broadcast_to(0.5 * lam * (vm - v), (grid.nx, vgrid.size))
    f = flux_update(state.f, out_right, in_left)
    lo = float(f.min())
    if lo < -1e-14 * float(np.max(np.abs(state.f))):
        raise InvariantError(f"transport_step: negative distribution {lo:.3e}")
    rho = trapezoid(f, vgrid)
    fld = state.field if solver is None else solver(rho)
    return replace(state, f=f, rho=rho, field=fld, t=state.t + dt)


def ap_step_lie(state: KineticState, grid: Grid1D, vgrid: VelocityGrid, model: EquilibriumModel,
                solver: FieldSolver, mode: str = "volpert_literal") -> KineticState:
    """Relax over ``dt``, transport over ``dt``, then recompute the potential."""
    dt = grid.dt
    half = relax_step(state, dt, model, vgrid, mode)
    new = transport_step(half, grid, vgrid, solver)
    return replace(new, t=state.t + dt)


def ap_step_strang(state: KineticState, grid: Grid1D, vgrid: VelocityGrid,
                   model: EquilibriumModel, solver: FieldSolver,
                   mode: str = "volpert_literal") -> KineticState:
    """Relax ``dt/2``, transport ``dt``, relax ``dt/2`` (potential refreshed after transport)."""
    dt = grid.dt
    s = relax_step(state, 0.5 * dt, model, vgrid, mode)
    s = transport_step(s, grid, vgrid, solver)
    s = relax_step(s, 0.5 * dt, model, vgrid, mode)
    return replace(s, t=state.t + dt)


SPLITTINGS = {"lie": ap_step_lie, "strang": ap_step_strang}


def initial_distribution(rho0, vgrid: VelocityGrid, how: str = "uniform", fld=None,
                         model: Optional[EquilibriumModel] = None,
                         mode: str = "volpert_literal") -> np.ndarray:
    """``f0`` with velocity integral ``rho0``: ``"uniform"`` in ``v`` or at ``"equilibrium"``."""
    rho0 = np.asarray(rho0, dtype=float)
    if how == "uniform":
        row = normalize_rows(np.zeros(vgrid.size), vgrid)
        return rho0[:, None] * row[None, :]
    if how == "equilibrium":
        if fld is None or model is None:
            raise ContractError("equilibrium start needs the initial field and the model")
        _, e = equilibrium_rows(fld, model, vgrid, mode)
        return rho0[:, None] * e
    raise ContractError(f"unknown initial distribution {how!r}")


def run_kinetic(rho0, grid: Grid1D, vgrid: VelocityGrid, model: EquilibriumModel,
                pot: PointyPotential, eps: float, horizon: float, splitting: str = "lie",
                mode: str = "volpert_literal", snapshot_every: Optional[float] = None,
                closure: str = "free_space", init: str = "uniform",
                on_step: Optional[Callable] = None, safety: float = 0.95,
                steps: Optional[int] = None) -> Trajectory:
    """Run the splitting scheme with ``dt = safety * dx / vmax``.

    ``steps`` overrides ``horizon`` when given.  ``on_step(state, grid)`` is
    called on the initial state and after every step.
    """
    if splitting not in SPLITTINGS:
        raise ContractError(f"unknown splitting {splitting!r}; expected one of {sorted(SPLITTINGS)}")
    dt = kinetic_dt(grid, vgrid, safety)
    grid = grid.with_dt(dt)
    solver = FieldSolver(pot, grid, closure)
    rho0 = np.asarray(rho0, dtype=float)
    fld0 = solver(rho0)
    f0 = initial_distribution(rho0, vgrid, init, fld0, model, mode)
    state = make_state(f0, eps, solver, vgrid)
    step = SPLITTINGS[splitting]
    if steps is None:
        steps = int(math.ceil(horizon / dt - 1e-9)) if horizon > 0 else 0
    every = None if snapshot_every is None else max(1, int(round(snapshot_every / dt)))
    traj = Trajectory(grid=grid, c=vgrid.vmax,
                      meta={"model": model.name, "splitting": splitting, "eps": eps, "dt": dt,
                            "lambda_vmax": grid.lam * vgrid.vmax, "closure": closure})
    traj.snapshots.append(state)
    if on_step is not None:
        traj.reports.append(on_step(state, grid))
    for n in range(1, steps + 1):
        state = step(state, grid, vgrid, model, solver, mode)
        if on_step is not None:
            traj.reports.append(on_step(state, grid))
        if n == steps or (every is not None and n % every == 0):
            traj.snapshots.append(state)
    traj.steps = steps
    return traj
