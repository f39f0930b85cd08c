"""Grids, velocity quadrature and cumulative-mass utilities.

Quantities live on the nodes ``x_i = x0 + i*dx`` for ``i = 0..nx``.  Densities
are cell values, so the mass carried by node ``i`` is ``dx * rho[i]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ContractError(ValueError):
    """An input violates the documented shape or value contract."""


class MassMismatchError(ValueError):
    """Two densities that should carry equal mass do not."""


@dataclass(frozen=True)
class Grid1D:
    x0: float
    dx: float
    nx: int
    dt: float
    lam: float = field(init=False)

    def __post_init__(self):
        if not self.dx > 0:
            raise ContractError(f"dx must be positive, got {self.dx}")
        if not self.dt > 0:
            raise ContractError(f"dt must be positive, got {self.dt}")
        if self.nx < 3:
            raise ContractError(f"nx must be >= 3, got {self.nx}")
        object.__setattr__(self, "lam", self.dt / self.dx)

    @classmethod
    def from_domain(cls, left: float, right: float, nx: int, dt: float = 1.0) -> "Grid1D":
        return cls(float(left), (right - left) / nx, int(nx), float(dt))

    @property
    def n(self) -> int:
        """Number of nodes (``nx + 1``)."""
        return self.nx + 1

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx + 1)

    def with_dt(self, dt: float) -> "Grid1D":
        return Grid1D(self.x0, self.dx, self.nx, float(dt))


@dataclass(frozen=True)
class VelocityGrid:
    """Velocity nodes on ``[-vmax, vmax]`` or the two-speed set ``{-vmax, +vmax}``."""

    vmax: float
    nv: int = 1
    two_speed: bool = False

    def __post_init__(self):
        if not self.vmax > 0:
            raise ContractError(f"vmax must be positive, got {self.vmax}")
        if self.nv < 1:
            raise ContractError(f"nv must be >= 1, got {self.nv}")
        if self.two_speed and self.nv != 1:
            raise ContractError("the two-speed set has exactly one interval")

    @classmethod
    def two(cls, v: float = 1.0) -> "VelocityGrid":
        return cls(float(v), 1, True)

    @property
    def dv(self) -> float:
        return 2.0 * self.vmax / self.nv

    @property
    def v(self) -> np.ndarray:
        if self.two_speed:
            return np.array([-self.vmax, self.vmax])
        return -self.vmax + self.dv * np.arange(self.nv + 1)

    @property
    def size(self) -> int:
        return 2 if self.two_speed else self.nv + 1

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights such that ``trapezoid(F) == weights @ F``."""
        if self.two_speed:
            return np.ones(2)
        w = np.full(self.nv + 1, self.dv)
        w[0] = w[-1] = 0.5 * self.dv
        return w


def trapezoid(values, vgrid: VelocityGrid, axis: int = -1):
    """Trapezoidal rule over the velocity nodes.

    For the two-speed set the "integral" is the plain sum ``F(-v) + F(+v)``.
    Works along ``axis`` for arrays of velocity rows.
    """
    values = np.asarray(values, dtype=float)
    if values.shape[axis] != vgrid.size:
        raise ContractError(
            f"expected {vgrid.size} velocity values along axis {axis}, got {values.shape[axis]}"
        )
    values = np.moveaxis(values, axis, -1)
    if vgrid.two_speed:
        return values[..., 0] + values[..., 1]
    dv = vgrid.dv
    return 0.5 * dv * (values[..., 0] + values[..., -1]) + dv * values[..., 1:-1].sum(axis=-1)


def cumulative_mass(rho, grid: Grid1D) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (grid.n,):
        raise ContractError(f"rho must have length {grid.n}, got {rho.shape}")
    return grid.dx * np.cumsum(rho)


def wasserstein1(rho1, rho2, grid: Grid1D, rtol: float = 1e-10) -> float:
    """W1 distance between two equal-mass node densities (L1 gap of the CDFs)."""
    m1 = cumulative_mass(rho1, grid)
    m2 = cumulative_mass(rho2, grid)
    scale = max(abs(m1[-1]), abs(m2[-1]))
    if abs(m1[-1] - m2[-1]) > rtol * scale:
        raise MassMismatchError(f"masses differ: {m1[-1]!r} vs {m2[-1]!r}")
    return float(grid.dx * np.abs(m1 - m2).sum())
