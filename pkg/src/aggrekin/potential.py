"""Pointy potentials and the discrete elliptic problem for ``S = W * rho``.

The potential satisfies ``W'' = -delta_0 + w``.  On the grid this becomes

    -(S[i+1] - 2 S[i] + S[i-1]) / dx**2 + nu[i] = rho[i],

with ``nu`` a discrete ``w * rho``.  Everything the schemes need from ``S`` is
carried by :class:`PotentialField`: the node values, ``nu``, the face slopes
``(S[i+1] - S[i]) / dx`` and the centred node slopes.

Two boundary closures are available:

``"free_space"`` (default)
    Ghost values reproduce the infinite-lattice solution for data supported
    inside the domain.  For ``w = W = exp(-|x|)/2`` this is an exact Robin
    condition; otherwise the two far-field slopes are chosen antisymmetric,
    which is exact for ``w = 0``.  Isolated masses then feel no spurious drift.
``"anchored"``
    ``S[-1] = S[0] = S[1] = 0`` and forward elimination from the left, i.e.
    zero slope at the left edge.  Kept for comparison; it induces a drift of
    the whole mass towards the left.
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, linalg

from .grid import ContractError, Grid1D

CLOSURES = ("free_space", "anchored")

_GL5_NODES, _GL5_WEIGHTS = np.polynomial.legendre.leggauss(5)


class ConfigurationError(ValueError):
    """An option combination that the solver does not support."""


@dataclass(frozen=True)
class PointyPotential:
    """``W'' = -delta_0 + w``.

    kind
        ``"zero"`` (``w = 0``, i.e. ``W = -|x|/2``), ``"exp_half"``
        (``w = W = exp(-|x|)/2``) or ``"custom"``.
    self_consistent
        Only for ``exp_half``: use ``nu = S`` and solve the screened Poisson
        equation directly instead of convolving with the weight matrix.
    """

    kind: str = "zero"
    w: Optional[Callable] = None
    w0: float = 0.0
    self_consistent: bool = True

    def __post_init__(self):
        if self.kind not in ("zero", "exp_half", "custom"):
            raise ConfigurationError(f"unknown potential kind {self.kind!r}")
        if self.kind == "custom":
            if self.w is None:
                raise ConfigurationError("custom potential needs a callable w")
            if self.w0 is None or self.w0 < 0:
                raise ConfigurationError("custom potential needs w0 = ||w||_L1 >= 0")
        if self.kind == "zero":
            object.__setattr__(self, "w0", 0.0)
        if self.kind == "exp_half":
            object.__setattr__(self, "w0", 1.0)

    @classmethod
    def zero(cls) -> "PointyPotential":
        return cls("zero")

    @classmethod
    def exp_half(cls, self_consistent: bool = True) -> "PointyPotential":
        return cls("exp_half", self_consistent=self_consistent)

    @classmethod
    def custom(cls, w: Callable, w0: Optional[float] = None) -> "PointyPotential":
        if w0 is None:
            w0 = integrate.quad(lambda z: abs(w(z)), -np.inf, np.inf, limit=200)[0]
        return cls("custom", w=w, w0=float(w0))

    @property
    def uses_self(self) -> bool:
        return self.kind == "exp_half" and self.self_consistent

    @property
    def w_total(self) -> float:
        """Signed integral of ``w``."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "exp_half":
            return 1.0
        return integrate.quad(self.w, -np.inf, np.inf, limit=200)[0]


@dataclass(frozen=True)
class PotentialField:
    """Discrete potential at one time level.

    ``half`` has ``nx + 2`` entries: ``half[k]`` is the slope on the face
    ``k - 1/2``, so ``half[0]`` and ``half[-1]`` are the ghost faces outside
    the domain.  ``centered[i] = (S[i+1] - S[i-1]) / (2 dx)`` using the same
    ghost values.
    """

    S: np.ndarray
    nu: np.ndarray
    half: np.ndarray
    centered: np.ndarray

    @property
    def interior_half(self) -> np.ndarray:
        """Slopes on the ``nx`` faces between nodes ``i`` and ``i+1``."""
        return self.half[1:-1]


def _exp_half_antiderivative(z):
    z = np.asarray(z, dtype=float)
    return 0.5 * np.sign(z) * -np.expm1(-np.abs(z))


def _cell_integrals(pot: PointyPotential, dx: float, d: np.ndarray) -> np.ndarray:
    """``int_{(d-1)dx}^{d dx} w`` for integer offsets ``d``."""
    lo = (d - 1) * dx
    hi = d * dx
    if pot.kind == "zero":
        return np.zeros_like(lo)
    if pot.kind == "exp_half":
        return _exp_half_antiderivative(hi) - _exp_half_antiderivative(lo)
    mid = 0.5 * (lo + hi)
    pts = mid[:, None] + 0.5 * dx * _GL5_NODES[None, :]
    vals = np.vectorize(pot.w, otypes=[float])(pts)
    return 0.5 * dx * vals @ _GL5_WEIGHTS


def build_weights(pot: PointyPotential, grid: Grid1D) -> np.ndarray:
    """Matrix ``W[k, i] = int_{(i-1-k)dx}^{(i-k)dx} w(z) dz`` so that ``nu = rho @ W``."""
    n = grid.n
    offsets = np.arange(-(n - 1), n)
    table = _cell_integrals(pot, grid.dx, offsets.astype(float))
    table[np.abs(table) < 1e-16] = 0.0
    k = np.arange(n)
    return table[(k[None, :] - k[:, None]) + (n - 1)]


def convolve_nu(weights: np.ndarray, rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if weights.shape != (rho.size, rho.size):
        raise ContractError(f"weights {weights.shape} do not match rho of length {rho.size}")
    return rho @ weights


@functools.lru_cache(maxsize=32)
def _screened_banded(dx: float, n: int) -> tuple:
    """Banded matrix of ``-D2 + I`` with the exact exterior decay as ghost closure."""
    r = 1.0 + 0.5 * dx * dx + dx * np.sqrt(1.0 + 0.25 * dx * dx)
    inv_dx2 = 1.0 / (dx * dx)
    ab = np.empty((3, n))
    ab[0, :] = -inv_dx2
    ab[1, :] = 2.0 * inv_dx2 + 1.0
    ab[2, :] = -inv_dx2
    ab[1, 0] = ab[1, -1] = (2.0 - 1.0 / r) * inv_dx2 + 1.0
    ab.setflags(write=False)
    return ab, r


def _slopes_from_S(S: np.ndarray, ghost_left: float, ghost_right: float, dx: float):
    ext = np.concatenate(([ghost_left], S, [ghost_right]))
    half = np.diff(ext) / dx
    centered = 0.5 * (half[:-1] + half[1:])
    return half, centered


def _field_from_source(rho, nu, grid: Grid1D, closure: str) -> PotentialField:
    """Integrate ``-S'' = rho - nu`` when ``nu`` is known beforehand."""
    dx = grid.dx
    src = nu - rho
    if closure == "free_space":
        g_left = -0.5 * dx * src.sum()
    elif closure == "anchored":
        # S[-1] = S[0] = S[1] = 0; the node-0 equation is dropped.
        g_left = 0.0
        src = src.copy()
        src[0] = 0.0
    else:
        raise ConfigurationError(f"unknown closure {closure!r}")
    half = np.empty(grid.n + 1)
    half[0] = g_left
    half[1:] = g_left + dx * np.cumsum(src)
    S = np.empty(grid.n)
    S[0] = 0.0
    S[1:] = dx * np.cumsum(half[1:-1])
    centered = 0.5 * (half[:-1] + half[1:])
    return PotentialField(S=S, nu=np.asarray(nu, dtype=float), half=half, centered=centered)


def solve_potential(rho, nu, grid: Grid1D, closure: str = "free_space") -> np.ndarray:
    """Node values of ``S`` for a given ``nu`` (``S[0]`` is pinned to zero)."""
    rho = np.asarray(rho, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if rho.shape != (grid.n,) or nu.shape != (grid.n,):
        raise ContractError(f"rho and nu must have length {grid.n}")
    return _field_from_source(rho, nu, grid, closure).S


def _solve_self(rho, grid: Grid1D, closure: str):
    dx = grid.dx
    if closure == "free_space":
        ab, r = _screened_banded(dx, grid.n)
        S = linalg.solve_banded((1, 1), ab, rho, check_finite=False)
        return S, S[0] / r, S[-1] / r
    if closure == "anchored":
        S = np.zeros(grid.n + 1)
        h2 = dx * dx
        for i in range(1, grid.n):
            S[i + 1] = (2.0 + h2) * S[i] - S[i - 1] - h2 * rho[i]
        return S[:-1], 0.0, S[-1]
    raise ConfigurationError(f"unknown closure {closure!r}")


def solve_potential_self(rho, grid: Grid1D, pot: Optional[PointyPotential] = None,
                         closure: str = "free_space"):
    """Solve ``-(S[i+1] - 2S[i] + S[i-1])/dx**2 + S[i] = rho[i]``; returns ``(S, nu)`` with ``nu = S``."""
    if pot is not None and pot.kind != "exp_half":
        raise ConfigurationError("nu = S is only valid when w = W = exp(-|x|)/2")
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (grid.n,):
        raise ContractError(f"rho must have length {grid.n}")
    S, _, _ = _solve_self(rho, grid, closure)
    return S, S


def dx_centered(S, grid: Grid1D, ghost_left: Optional[float] = None,
                ghost_right: Optional[float] = None) -> np.ndarray:
    """``(S[i+1] - S[i-1]) / (2 dx)`` at every node.

    Without ghost values the end nodes get slope zero.
    """
    S = np.asarray(S, dtype=float)
    if S.shape != (grid.n,):
        raise ContractError(f"S must have length {grid.n}")
    out = np.zeros(grid.n)
    out[1:-1] = (S[2:] - S[:-2]) / (2.0 * grid.dx)
    if ghost_left is not None:
        out[0] = (S[1] - ghost_left) / (2.0 * grid.dx)
    if ghost_right is not None:
        out[-1] = (ghost_right - S[-2]) / (2.0 * grid.dx)
    return out


def dx_half(S, grid: Grid1D) -> np.ndarray:
    """``(S[i+1] - S[i]) / dx`` for ``i = 0..nx-1``."""
    S = np.asarray(S, dtype=float)
    if S.shape != (grid.n,):
        raise ContractError(f"S must have length {grid.n}")
    return np.diff(S) / grid.dx


class FieldSolver:
    """Caches the weight matrix so that repeated solves on one grid are cheap."""

    def __init__(self, pot: PointyPotential, grid: Grid1D, closure: str = "free_space"):
        if closure not in CLOSURES:
            raise ConfigurationError(f"unknown closure {closure!r}; expected one of {CLOSURES}")
        self.pot = pot
        self.grid = grid
        self.closure = closure
        self.weights = None
        if pot.kind != "zero" and not pot.uses_self:
            self.weights = build_weights(pot, grid)

    def __call__(self, rho) -> PotentialField:
        rho = np.asarray(rho, dtype=float)
        grid = self.grid
        if self.pot.uses_self:
            S, gl, gr = _solve_self(rho, grid, self.closure)
            half, centered = _slopes_from_S(S, gl, gr, grid.dx)
            return PotentialField(S=S, nu=S, half=half, centered=centered)
        if self.weights is None:
            nu = np.zeros(grid.n)
        else:
            nu = convolve_nu(self.weights, rho)
        return _field_from_source(rho, nu, grid, self.closure)


def compute_field(rho, pot: PointyPotential, grid: Grid1D,
                  closure: str = "free_space") -> PotentialField:
    return FieldSolver(pot, grid, closure)(rho)


def support_leak(rho, grid: Grid1D, cells: int = 5) -> float:
    """Mass carried by the ``cells`` outermost nodes on either side."""
    rho = np.asarray(rho, dtype=float)
    return float(grid.dx * (np.abs(rho[:cells]).sum() + np.abs(rho[-cells:]).sum()))


def warn_if_leaking(rho, grid: Grid1D, mass: float, rtol: float = 1e-8, cells: int = 5) -> bool:
    leak = support_leak(rho, grid, cells)
    if mass > 0 and leak > rtol * mass:
        warnings.warn(
            f"mass near the boundary is {leak:.3e} (> {rtol:g} of the total); "
            "the solution is not compactly supported in the domain",
            RuntimeWarning,
            stacklevel=2,
        )
        return True
    return False
