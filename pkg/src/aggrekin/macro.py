"""Finite-volume scheme for the aggregation equation ``rho_t + (a(W'*rho) rho)_x = 0``.

The interface velocity is the chain-rule (Vol'pert) quotient

    a[i+1/2] = (A(u[i+1]) - A(u[i])) / (u[i+1] - u[i]),   u = centred dS/dx,

which is what lets the scheme carry Dirac masses with the right speed after
blow-up.  The density update is the Lax-Friedrichs form

    rho[i]^{n+1} = rho[i] (1 - lam c + lam/4 (a[i-1/2] - a[i+1/2]))
                 + lam/2 (c + a[i-1/2]/2) rho[i-1] + lam/2 (c - a[i+1/2]/2) rho[i+1],

whose coefficients are nonnegative when ``lam <= 2/(3c)``.  Note that the
flux difference carries a factor ``lam/2``: the update is consistent with the
aggregation equation advected at half speed, ``rho_t + (a rho)_x / 2 = 0``.
The two boundary faces carry no flux at all, so mass is conserved exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from scipy import interpolate

from .grid import Grid1D
from .potential import FieldSolver, PointyPotential, PotentialField

VELOCITY_MODES = ("volpert_literal", "volpert_smooth", "naive")

_GL3_NODES, _GL3_WEIGHTS = np.polynomial.legendre.leggauss(3)
# below this relative gap the quotient is replaced by a quadrature mean of a
_NEAR_EQUAL = 1e-7


class CFLError(ValueError):
    """The time step violates the stability restriction of the scheme."""


class InvariantError(RuntimeError):
    """A property guaranteed by the scheme failed at run time."""


@dataclass(frozen=True)
class VelocityLaw:
    """The nonlinearity ``a`` together with its antiderivative ``A`` (``A(0) = 0``)."""

    a: Callable[[np.ndarray], np.ndarray]
    A: Callable[[np.ndarray], np.ndarray]
    alpha: float
    attractive: bool = True
    name: str = "custom"

    @classmethod
    def identity(cls) -> "VelocityLaw":
        return cls(
            a=lambda x: np.asarray(x, dtype=float) * 1.0,
            A=lambda x: 0.5 * np.asarray(x, dtype=float) ** 2,
            alpha=1.0,
            attractive=True,
            name="identity",
        )

    @classmethod
    def arctan(cls, k: float, sign: float = 1.0) -> "VelocityLaw":
        """``a(x) = sign * (2/pi) * atan(k x)``; negative ``sign`` gives a repulsive law."""
        k = float(k)
        s = float(sign)

        def a(x):
            return s * (2.0 / np.pi) * np.arctan(k * np.asarray(x, dtype=float))

        def A(x):
            kx = k * np.asarray(x, dtype=float)
            return s * (2.0 / (np.pi * k)) * (kx * np.arctan(kx) - 0.5 * np.log1p(kx * kx))

        label = f"atan({k:g})" if s == 1.0 else f"{s:g}*atan({k:g})"
        return cls(a=a, A=A, alpha=abs(s) * 2.0 * k / np.pi, attractive=s > 0, name=label)

    @classmethod
    def from_callable(cls, a: Callable, span: float, alpha: Optional[float] = None,
                      attractive: Optional[bool] = None, npts: int = 16384,
                      name: str = "custom") -> "VelocityLaw":
        """Tabulate ``A`` on ``[-span, span]`` and interpolate with cubic Hermite pieces.

        Each table cell is integrated with 5-point Gauss-Legendre; ``A`` is
        then interpolated using the exact derivative ``a`` at the nodes.
        """
        a_vec = np.vectorize(a, otypes=[float])
        xs = np.linspace(-span, span, npts + 1)
        if not np.any(xs == 0.0):
            xs = np.union1d(xs, [0.0])
        nodes, weights = np.polynomial.legendre.leggauss(5)
        h = np.diff(xs)
        mids = 0.5 * (xs[:-1] + xs[1:])
        cell = 0.5 * h * (a_vec(mids[:, None] + 0.5 * h[:, None] * nodes[None, :]) @ weights)
        A_nodes = np.concatenate(([0.0], np.cumsum(cell)))
        A_nodes -= A_nodes[np.searchsorted(xs, 0.0)]
        spline = interpolate.CubicHermiteSpline(xs, A_nodes, a_vec(xs), extrapolate=False)
        da = np.diff(a_vec(xs))
        if alpha is None:
            alpha = float(max(0.0, np.max(da / h)))
        if attractive is None:
            attractive = bool(np.all(da >= -1e-14))

        def A(x):
            x = np.asarray(x, dtype=float)
            if np.any(np.abs(x) > span):
                raise ValueError(f"A evaluated outside its table [-{span}, {span}]")
            return spline(x)

        return cls(a=lambda x: a_vec(np.asarray(x, dtype=float)), A=A, alpha=alpha,
                   attractive=attractive, name=name)


@dataclass(frozen=True)
class MacroState:
    t: float
    rho: np.ndarray
    field: PotentialField
    mass: float


def sup_velocity_bound(law: VelocityLaw, M: float, w0: float, samples: int = 4096) -> float:
    """``max |a|`` over ``[-M(1+w0), M(1+w0)]`` by dense sampling, with a ``1e-9`` safety margin."""
    R = M * (1.0 + w0)
    if R == 0.0:
        return float(abs(law.a(np.array([0.0]))[0]))
    xs = np.linspace(-R, R, samples + 1)
    return float(np.max(np.abs(law.a(xs)))) * (1.0 + 1e-9)


def cfl_dt(c: float, dx: float, safety: float = 0.95, dt_max: float = 1e-2) -> float:
    """Largest admissible step ``safety * 2/(3c) * dx``; ``dt_max`` when nothing moves."""
    if c <= 0.0:
        return dt_max
    return safety * (2.0 / (3.0 * c)) * dx


def volpert_velocity(u1, u2, law: VelocityLaw, mode: str = "volpert_literal"):
    """Chain-rule interface velocity between slopes ``u1`` (left) and ``u2`` (right).

    Equal slopes give 0 in ``volpert_literal`` mode and ``a(u1)`` in
    ``volpert_smooth`` mode.  Nearly equal slopes use a 3-point Gauss mean of
    ``a`` over the interval to avoid cancellation in the quotient.
    """
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    du = u2 - u1
    scalar = u1.ndim == 0 and u2.ndim == 0
    u1, u2, du = np.atleast_1d(u1, u2, du)
    out = np.empty(np.broadcast(u1, u2).shape)
    equal = du == 0.0
    near = ~equal & (np.abs(du) <= _NEAR_EQUAL * (1.0 + np.abs(u1) + np.abs(u2)))
    far = ~(equal | near)
    if np.any(far):
        out[far] = (law.A(u2[far]) - law.A(u1[far])) / du[far]
    if np.any(near):
        mid = 0.5 * (u1[near] + u2[near])
        half = 0.5 * du[near]
        pts = mid[:, None] + half[:, None] * _GL3_NODES[None, :]
        out[near] = 0.5 * (law.a(pts) @ _GL3_WEIGHTS)
    if np.any(equal):
        if mode == "volpert_smooth":
            out[equal] = law.a(u1[equal])
        elif mode == "volpert_literal":
            out[equal] = 0.0
        else:
            raise ValueError(f"unknown velocity mode {mode!r}")
    return float(out[0]) if scalar else out


def naive_velocity(u, law: VelocityLaw):
    """``a(u)`` evaluated at the face slope: the discretisation that gives wrong Dirac dynamics."""
    out = law.a(np.asarray(u, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def flux_halfface(a_half, rho_l, rho_r):
    return a_half * 0.5 * (rho_l + rho_r)


def face_velocities(fld: PotentialField, law: VelocityLaw, mode: str = "volpert_literal") -> np.ndarray:
    """Velocities on the ``nx`` interior faces ``i + 1/2``."""
    if mode == "naive":
        return np.asarray(law.a(fld.interior_half), dtype=float)
    u = fld.centered
    return volpert_velocity(u[:-1], u[1:], law, mode)


def resolved_faces(fld: PotentialField, mode: str) -> np.ndarray:
    """Faces where the velocity is an actual chain-rule quotient (slopes differ)."""
    if mode == "naive":
        return np.ones(fld.centered.size - 1, dtype=bool)
    u = fld.centered
    return u[:-1] != u[1:]


def flux_update(q: np.ndarray, out_right: np.ndarray, in_left: np.ndarray) -> np.ndarray:
    """Conservative update from per-face coefficients.

    For the face between nodes ``i`` and ``i+1`` the numerical flux is
    ``out_right * q[i] - in_left * q[i+1]``.  Both boundary faces are closed.
    Works row-wise along axis 0 for 2-D ``q``.  With nonnegative
    coefficients and ``out_right + in_left`` of the adjacent faces at most one,
    the result is a nonnegative combination of the old values.
    """
    n = q.shape[0]
    shape = (n + 1,) + out_right.shape[1:]
    alpha = np.zeros(shape)
    beta = np.zeros(shape)
    alpha[1:-1] = out_right
    beta[1:-1] = in_left
    keep = 1.0 - alpha[1:] - beta[:-1]
    new = keep * q
    new[:-1] += beta[1:-1] * q[1:]
    new[1:] += alpha[1:-1] * q[:-1]
    return new


def _check_cfl(lam: float, c: float, limit: float, what: str):
    if lam * c > limit * (1.0 + 1e-12):
        raise CFLError(f"{what}: lambda*c = {lam * c:.6g} exceeds {limit:.6g}; shrink dt")


def _check_positive(rho: np.ndarray, scale: float, what: str):
    floor = -1e-14 * scale
    lo = float(rho.min())
    if lo < floor:
        raise InvariantError(f"{what}: negative density {lo:.3e} (tolerance {floor:.3e})")


def macro_step(state: MacroState, law: VelocityLaw, solver: FieldSolver, c: float,
               mode: str = "volpert_literal") -> MacroState:
    """Advance one step of the Lax-Friedrichs scheme and recompute the potential."""
    grid = solver.grid
    lam = grid.lam
    _check_cfl(lam, c, 2.0 / 3.0, "macro_step")
    if mode not in VELOCITY_MODES:
        raise ValueError(f"unknown velocity mode {mode!r}")
    a = face_velocities(state.field, law, mode)
    rho = flux_update(state.rho, 0.5 * lam * (c + 0.5 * a), 0.5 * lam * (c - 0.5 * a))
    _check_positive(rho, float(np.max(np.abs(state.rho))), "macro_step")
    return MacroState(t=state.t + grid.dt, rho=rho, field=solver(rho), mass=state.mass)


def nodal_step(state: MacroState, node_velocity: np.ndarray, solver: FieldSolver,
               c: float) -> MacroState:
    """Lax-Friedrichs step with node-centred fluxes ``(a rho)[i+1] - (a rho)[i-1]``.

    This is the scheme the kinetic splitting reduces to when ``eps -> 0`` (with
    ``c`` equal to the largest speed).  Stable for ``lam * c <= 1``.
    """
    grid = solver.grid
    lam = grid.lam
    _check_cfl(lam, c, 1.0, "nodal_step")
    a = np.asarray(node_velocity, dtype=float)
    rho = flux_update(state.rho, 0.5 * lam * (c + a[:-1]), 0.5 * lam * (c - a[1:]))
    _check_positive(rho, float(np.max(np.abs(state.rho))), "nodal_step")
    return MacroState(t=state.t + grid.dt, rho=rho, field=solver(rho), mass=state.mass)


def cell_averages(func: Callable, grid: Grid1D, order: int = 8) -> np.ndarray:
    """``(1/dx) * int_{x_i}^{x_{i+1}} func`` with ``rho[0] = rho[nx] = 0``."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    x = grid.x
    mids = x[:-1] + 0.5 * grid.dx
    pts = mids[:, None] + 0.5 * grid.dx * nodes[None, :]
    vals = np.asarray(func(pts), dtype=float)
    out = np.zeros(grid.n)
    out[:-1] = 0.5 * vals @ weights
    out[0] = 0.0
    return out


def initial_state(rho0, solver: FieldSolver) -> MacroState:
    rho0 = np.asarray(rho0, dtype=float)
    grid = solver.grid
    return MacroState(t=0.0, rho=rho0.copy(), field=solver(rho0), mass=float(grid.dx * rho0.sum()))


@dataclass
class Trajectory:
    """Snapshots plus per-step callbacks' output of one run."""

    grid: Grid1D
    snapshots: List = field(default_factory=list)
    reports: List = field(default_factory=list)
    c: float = 0.0
    steps: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def final(self):
        return self.snapshots[-1]


def run_macro(rho0, grid: Grid1D, law: VelocityLaw, pot: PointyPotential, horizon: float,
              mode: str = "volpert_literal", snapshot_every: Optional[float] = None,
              closure: str = "free_space", c: Optional[float] = None,
              on_step: Optional[Callable] = None, safety: float = 0.95,
              dt_max: float = 1e-2) -> Trajectory:
    """Run the scheme to ``horizon`` with the CFL step.

    ``grid.dt`` is ignored and replaced by ``cfl_dt``.  ``on_step(state, grid)``
    is called for the initial state and after every step; whatever it returns
    is appended to ``Trajectory.reports``.
    """
    rho0 = np.asarray(rho0, dtype=float)
    mass = float(grid.dx * rho0.sum())
    if c is None:
        c = sup_velocity_bound(law, mass, pot.w0)
    dt = cfl_dt(c, grid.dx, safety=safety, dt_max=dt_max)
    grid = grid.with_dt(dt)
    solver = FieldSolver(pot, grid, closure)
    state = initial_state(rho0, solver)
    traj = Trajectory(grid=grid, c=c, meta={"law": law.name, "mode": mode, "closure": closure,
                                           "attractive": law.attractive, "dt": dt,
                                           "lambda_c": grid.lam * c})
    if not law.attractive:
        traj.meta["note"] = "non-monotone velocity law: no convergence theory applies"
    nsteps = int(math.ceil(horizon / dt - 1e-9)) if horizon > 0 else 0
    every = None if snapshot_every is None else max(1, int(round(snapshot_every / dt)))
    traj.snapshots.append(state)
    if on_step is not None:
        traj.reports.append(on_step(state, grid))
    for n in range(1, nsteps + 1):
        state = macro_step(state, law, solver, c, mode)
        if on_step is not None:
            traj.reports.append(on_step(state, grid))
        if n == nsteps or (every is not None and n % every == 0):
            traj.snapshots.append(state)
    traj.steps = nsteps
    return traj
