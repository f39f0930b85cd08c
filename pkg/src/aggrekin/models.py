"""Preset problems and two independent oracles.

* :func:`preset` wires up the standard experiments: the linear case
  ``W = -|x|/2, a = id``, attractive and repulsive chemotaxis with
  ``W = exp(-|x|)/2``, and the kinetic run-and-tumble variants.
* :func:`particle_evolve` integrates the point-mass dynamics
  ``m_i x_i' = -[A(dS/dx)]_{x_i}`` with merging on collision.
* :func:`burgers_reference_step` is the Lax-Friedrichs scheme for the Burgers
  equation that the slope ``u = dS/dx`` obeys in the linear case.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .grid import ContractError, Grid1D, VelocityGrid
from .kinetic import EquilibriumModel
from .macro import VelocityLaw, cell_averages
from .potential import ConfigurationError, PointyPotential

DOMAIN = (-2.5, 2.5)


def gaussian_bumps(bumps) -> Callable:
    """``sum amp * exp(-k (x - center)^2)`` over ``(amp, center, k)`` triples."""
    bumps = tuple((float(a), float(c), float(k)) for a, c, k in bumps)

    def rho(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for amp, center, k in bumps:
            out = out + amp * np.exp(-k * (x - center) ** 2)
        return out

    rho.bumps = bumps
    return rho


ONE_BUMP = ((1.0, 0.0, 10.0),)
THREE_BUMPS = ((1.0, 1.25, 10.0), (0.8, 0.0, 20.0), (1.0, -1.0, 10.0))
TWO_BUMPS = ((1.0, 0.7, 10.0), (1.0, -0.7, 10.0))


@dataclass(frozen=True)
class ProblemPreset:
    name: str
    potential: PointyPotential
    law: VelocityLaw
    initial: Callable
    horizon: float
    domain: Tuple[float, float] = DOMAIN
    equilibrium: Optional[EquilibriumModel] = None
    vgrid: Optional[VelocityGrid] = None
    scheme: str = "macro"
    eps: Optional[float] = None
    nx: int = 800
    snapshot_every: float = 0.02
    description: str = ""

    def grid(self, nx: Optional[int] = None) -> Grid1D:
        return Grid1D.from_domain(*self.domain, nx or self.nx)

    def initial_density(self, grid: Grid1D) -> np.ndarray:
        return cell_averages(self.initial, grid)


def _chemo_law() -> VelocityLaw:
    return VelocityLaw.arctan(10.0)


def _build_presets() -> Dict[str, ProblemPreset]:
    zero = PointyPotential.zero()
    screened = PointyPotential.exp_half()
    ident = VelocityLaw.identity()
    presets = [
        ProblemPreset("vpfp_one_bump", zero, ident, gaussian_bumps(ONE_BUMP), 2.0,
                      description="W = -|x|/2, a = id, one bump collapsing to a Dirac"),
        ProblemPreset("vpfp_three_bumps", zero, ident, gaussian_bumps(THREE_BUMPS), 8.0,
                      description="W = -|x|/2, a = id, three bumps merging"),
        ProblemPreset("chemo_two_bumps", screened, _chemo_law(), gaussian_bumps(TWO_BUMPS), 6.0,
                      description="W = exp(-|x|)/2, a = (2/pi) atan(10x), two bumps"),
        ProblemPreset("chemo_three_bumps", screened, _chemo_law(), gaussian_bumps(THREE_BUMPS), 8.0,
                      description="W = exp(-|x|)/2, a = (2/pi) atan(10x), three bumps"),
        ProblemPreset("chemo_kinetic_two_speed", screened, _chemo_law(), gaussian_bumps(TWO_BUMPS), 6.0,
                      equilibrium=EquilibriumModel.two_speed_chemo(10.0), vgrid=VelocityGrid.two(1.0),
                      scheme="kinetic_lie", eps=1e-3,
                      description="two-speed run-and-tumble kinetic model, two bumps"),
        ProblemPreset("kinetic_smooth_continuous", screened, VelocityLaw.arctan(10.0, 0.2),
                      gaussian_bumps(TWO_BUMPS), 2.0,
                      equilibrium=EquilibriumModel.smooth_continuous(1.0, 10.0),
                      vgrid=VelocityGrid(1.0, 32), scheme="kinetic_lie", eps=1e-3,
                      description="smooth equilibrium on the continuous velocity set [-1, 1]"),
        ProblemPreset("repulsive_k10", screened, VelocityLaw.arctan(10.0, -1.0),
                      gaussian_bumps(ONE_BUMP), 2.0,
                      description="a = -(2/pi) atan(10x): spreading, no blow-up"),
        ProblemPreset("repulsive_k50", screened, VelocityLaw.arctan(50.0, -1.0),
                      gaussian_bumps(ONE_BUMP), 2.0,
                      description="a = -(2/pi) atan(50x): spreading, no blow-up"),
        ProblemPreset("repulsive_two_bumps", screened, VelocityLaw.arctan(10.0, -1.0),
                      gaussian_bumps(TWO_BUMPS), 1.5,
                      description="a = -(2/pi) atan(10x), two bumps"),
    ]
    return {p.name: p for p in presets}


PRESETS: Dict[str, ProblemPreset] = _build_presets()


def preset_names() -> List[str]:
    return list(PRESETS)


def preset(name: str) -> ProblemPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown preset {name!r}; valid names: {', '.join(PRESETS)}"
        ) from None


# ----------------------------------------------------------------------------
# particle oracle

KERNELS = ("exp_half", "abs")


@dataclass
class ParticleSystem:
    """Point masses ``m_i`` at increasing positions ``x_i``.

    ``kernel`` selects ``W = exp(-|x|)/2`` or ``W = -|x|/2`` (the latter is an
    unverified extension).  ``speed`` multiplies every velocity; ``0.5``
    matches the half-speed transport of the finite-volume scheme.
    """

    masses: np.ndarray
    positions: np.ndarray
    law: VelocityLaw
    kernel: str = "exp_half"
    speed: float = 1.0

    def __post_init__(self):
        self.masses = np.asarray(self.masses, dtype=float).copy()
        self.positions = np.asarray(self.positions, dtype=float).copy()
        if self.masses.shape != self.positions.shape or self.masses.ndim != 1:
            raise ContractError("masses and positions must be 1-D arrays of equal length")
        if np.any(self.masses <= 0):
            raise ContractError("masses must be positive")
        if np.any(np.diff(self.positions) <= 0):
            raise ContractError("positions must be strictly increasing")
        if self.kernel not in KERNELS:
            raise ContractError(f"unknown kernel {self.kernel!r}")

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())


def one_sided_slopes(masses, positions, kernel: str = "exp_half"):
    """``(dS/dx(x_i-), dS/dx(x_i+))`` for ``S = W * sum m_j delta_{x_j}``."""
    m = np.asarray(masses, dtype=float)
    x = np.asarray(positions, dtype=float)
    d = x[None, :] - x[:, None]  # d[i, j] = x_j - x_i
    if kernel == "exp_half":
        infl = np.sign(d) * np.exp(-np.abs(d))
    elif kernel == "abs":
        infl = np.sign(d)
    else:
        raise ContractError(f"unknown kernel {kernel!r}")
    far = 0.5 * (infl * m[None, :]).sum(axis=1)
    return far + 0.5 * m, far - 0.5 * m


def particle_rhs(sys: ParticleSystem, positions: Optional[np.ndarray] = None) -> np.ndarray:
    """``x_i' = -speed * (A(S'(x_i+)) - A(S'(x_i-))) / m_i``."""
    x = sys.positions if positions is None else positions
    left, right = one_sided_slopes(sys.masses, x, sys.kernel)
    return -sys.speed * (sys.law.A(right) - sys.law.A(left)) / sys.masses


@dataclass
class ParticleTrajectory:
    times: List[float] = field(default_factory=list)
    positions: List[np.ndarray] = field(default_factory=list)
    masses: List[np.ndarray] = field(default_factory=list)
    merges: List[Tuple[float, float, float]] = field(default_factory=list)

    def at(self, t: float):
        """Positions and masses at the last recorded time ``<= t``."""
        k = int(np.searchsorted(np.asarray(self.times), t, side="right")) - 1
        k = max(k, 0)
        return self.positions[k], self.masses[k]


def _rk4(sys: ParticleSystem, x: np.ndarray, h: float) -> np.ndarray:
    k1 = particle_rhs(sys, x)
    k2 = particle_rhs(sys, x + 0.5 * h * k1)
    k3 = particle_rhs(sys, x + 0.5 * h * k2)
    k4 = particle_rhs(sys, x + h * k3)
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _merge(sys: ParticleSystem, tol: float):
    """Merge adjacent pairs closer than ``tol``; returns the merged positions and masses."""
    xs = list(sys.positions)
    ms = list(sys.masses)
    events = []
    i = 0
    while i < len(xs) - 1:
        if xs[i + 1] - xs[i] <= tol:
            m = ms[i] + ms[i + 1]
            x = (ms[i] * xs[i] + ms[i + 1] * xs[i + 1]) / m
            xs[i:i + 2] = [x]
            ms[i:i + 2] = [m]
            events.append((x, m))
        else:
            i += 1
    return np.array(xs), np.array(ms), events


def particle_evolve(sys: ParticleSystem, horizon: float, dt: Optional[float] = None,
                    merge_tol: float = 1e-9, record_every: Optional[float] = None) -> ParticleTrajectory:
    """RK4 integration with merging of colliding particles.

    The right-hand side jumps when two particles pass each other, so a step
    never closes more than half of any gap; approaching pairs therefore
    converge geometrically and are merged once closer than ``merge_tol``.
    """
    sys = ParticleSystem(sys.masses, sys.positions, sys.law, sys.kernel, sys.speed)
    traj = ParticleTrajectory()
    t = 0.0

    def record():
        traj.times.append(t)
        traj.positions.append(sys.positions.copy())
        traj.masses.append(sys.masses.copy())

    record()
    last_record = 0.0
    while t < horizon - 1e-15:
        vel = particle_rhs(sys)
        vmax = float(np.max(np.abs(vel))) if vel.size else 0.0
        h = dt if dt is not None else min(1e-3, 0.01 / vmax if vmax > 0 else 1e-3)
        if sys.positions.size > 1:
            gap = np.diff(sys.positions)
            closing = vel[:-1] - vel[1:]
            approaching = closing > 0
            if np.any(approaching):
                h = min(h, 0.5 * float(np.min(gap[approaching] / closing[approaching])))
        h = min(h, horizon - t)
        sys.positions = _rk4(sys, sys.positions, h)
        t += h
        if sys.positions.size > 1 and np.min(np.diff(sys.positions)) <= merge_tol:
            xs, ms, events = _merge(sys, merge_tol)
            sys.positions, sys.masses = xs, ms
            traj.merges.extend((t, x, m) for x, m in events)
            record()
            last_record = t
            continue
        if record_every is None or t - last_record >= record_every - 1e-12 or t >= horizon - 1e-15:
            record()
            last_record = t
    return traj


# ----------------------------------------------------------------------------
# Burgers reference

def burgers_reference_step(u, c: float, grid: Grid1D, A: Optional[Callable] = None,
                           boundary: str = "fixed",
                           wall_slopes: Optional[Tuple[float, float]] = None) -> np.ndarray:
    """One Lax-Friedrichs step for ``u_t + (A(u))_x / 2 = 0`` on the nodes.

    Interior nodes use

        u[i] (1 - lam c) + lam c/2 (u[i-1] + u[i+1]) - lam/4 (A(u[i+1]) - A(u[i-1])).

    ``boundary = "fixed"`` keeps ``u[0]`` and ``u[nx]`` unchanged.
    ``boundary = "wall"`` uses the boundary fluxes of a closed wall behind
    which the slope is known (``wall_slopes = (g_left, g_right)``):
    ``A(u)/2 - c (u - g_left)`` on the left and ``A(u)/2 + c (u - g_right)``
    on the right.
    """
    if A is None:
        def A(z):
            return 0.5 * z * z
    u = np.asarray(u, dtype=float)
    lam = grid.lam
    Au = A(u)
    # flux on the face between nodes i and i+1
    H = 0.25 * (Au[:-1] + Au[1:]) - 0.5 * c * (u[1:] - u[:-1])
    new = u.copy()
    new[1:-1] = u[1:-1] - lam * (H[1:] - H[:-1])
    if boundary == "fixed":
        return new
    if boundary != "wall":
        raise ContractError(f"unknown boundary {boundary!r}")
    if wall_slopes is None:
        raise ContractError("wall boundary needs wall_slopes = (g_left, g_right)")
    g_left, g_right = wall_slopes
    H_left = 0.5 * Au[0] - c * (u[0] - g_left)
    H_right = 0.5 * Au[-1] + c * (u[-1] - g_right)
    new[0] = u[0] - lam * (H[0] - H_left)
    new[-1] = u[-1] - lam * (H_right - H[-1])
    return new


def slopes_from_density(rho, grid: Grid1D) -> np.ndarray:
    """Centred slopes of ``S = -|x|/2 * rho`` on the nodes, from cumulative masses.

    ``u[i] = M/2 - (M[i-1] + M[i]) / 2`` with ``M[-1] = 0``.
    """
    rho = np.asarray(rho, dtype=float)
    Mc = grid.dx * np.cumsum(rho)
    prev = np.concatenate(([0.0], Mc[:-1]))
    return 0.5 * Mc[-1] - 0.5 * (prev + Mc)
