import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from aggrekin.grid import Grid1D
from aggrekin.potential import (ConfigurationError, FieldSolver, PointyPotential, build_weights,
                                compute_field, convolve_nu, dx_centered, dx_half,
                                solve_potential, solve_potential_self, support_leak,
                                warn_if_leaking)


def random_density(rng, g, support=(0.2, 0.8)):
    """Nonnegative density vanishing near both ends."""
    rho = rng.random(g.n)
    lo, hi = int(support[0] * g.nx), int(support[1] * g.nx)
    rho[:lo] = 0.0
    rho[hi:] = 0.0
    return rho


def stencil_residual(S, nu, rho, g, left, right):
    ext = np.concatenate(([left], S, [right]))
    return -(ext[2:] - 2 * ext[1:-1] + ext[:-2]) / g.dx ** 2 + nu - rho


def test_zero_potential_has_zero_weights():
    g = Grid1D.from_domain(-1, 1, 20)
    pot = PointyPotential.zero()
    assert pot.w0 == 0.0
    assert not np.any(build_weights(pot, g))
    rho = np.random.default_rng(0).random(g.n)
    fld = FieldSolver(pot, g)(rho)
    np.testing.assert_array_equal(fld.nu, 0.0)


def test_constant_w_weights():
    g = Grid1D(0.0, 0.5, 6, 1.0)
    pot = PointyPotential.custom(lambda z: 1.0, w0=1.0)
    np.testing.assert_allclose(build_weights(pot, g), 0.5, rtol=1e-14)


def test_exp_half_weight_closed_form_matches_quadrature():
    g = Grid1D(0.0, 1.0, 6, 1.0)
    W = build_weights(PointyPotential.exp_half(self_consistent=False), g)
    expected = 0.5 * (1 - np.exp(-1.0))
    assert W[0, 1] == pytest.approx(expected, rel=1e-15)
    assert W[0, 1] == pytest.approx(0.3160603, abs=1e-7)
    for d in range(-3, 4):
        k, i = 3, 3 + d
        quad = integrate.quad(lambda z: 0.5 * np.exp(-abs(z)), (i - 1 - k), (i - k), points=[0.0])[0]
        assert W[k, i] == pytest.approx(quad, rel=1e-12, abs=1e-16)


def test_custom_weights_gauss_legendre_vs_quad():
    g = Grid1D(0.0, 0.3, 8, 1.0)
    w = lambda z: np.cos(z) * np.exp(-z * z)
    W = build_weights(PointyPotential.custom(w), g)
    for k, i in [(0, 0), (2, 5), (7, 1)]:
        lo, hi = (i - 1 - k) * g.dx, (i - k) * g.dx
        assert W[k, i] == pytest.approx(integrate.quad(w, lo, hi)[0], rel=1e-10)


def test_convolve_unit_dirac_gives_weight_row():
    g = Grid1D.from_domain(-1, 1, 16)
    W = build_weights(PointyPotential.exp_half(False), g)
    rho = np.zeros(g.n)
    rho[5] = 1.0 / g.dx
    nu = convolve_nu(W, rho)
    direct = np.array([sum(rho[k] * W[k, i] for k in range(g.n)) for i in range(g.n)])
    np.testing.assert_allclose(nu, W[5] / g.dx, rtol=1e-15)
    np.testing.assert_allclose(nu, direct, rtol=1e-15)
    np.testing.assert_array_equal(convolve_nu(W, np.zeros(g.n)), 0.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(8, 80))
def test_weighted_nu_bound(seed, nx):
    g = Grid1D.from_domain(-3, 3, nx)
    rng = np.random.default_rng(seed)
    rho = rng.random(g.n) * (rng.random(g.n) < 0.5)
    M = g.dx * rho.sum()
    pot = PointyPotential.exp_half(False)
    nu = convolve_nu(build_weights(pot, g), rho)
    assert g.dx * np.abs(nu).sum() <= M * pot.w0 * (1 + 1e-12) + 1e-300


def test_self_solver_requires_exp_half():
    g = Grid1D.from_domain(-1, 1, 10)
    with pytest.raises(ConfigurationError):
        solve_potential_self(np.zeros(g.n), g, PointyPotential.zero())


@pytest.mark.parametrize("closure", ["free_space", "anchored"])
def test_zero_data_gives_zero_potential(closure):
    g = Grid1D.from_domain(-1, 1, 12)
    np.testing.assert_array_equal(solve_potential(np.zeros(g.n), np.zeros(g.n), g, closure), 0.0)
    S, nu = solve_potential_self(np.zeros(g.n), g, closure=closure)
    np.testing.assert_array_equal(S, 0.0)
    assert nu is S


@pytest.mark.parametrize("closure", ["free_space", "anchored"])
@pytest.mark.parametrize("kind", ["zero", "exp_half", "exp_half_weights"])
def test_stencil_residual(closure, kind):
    g = Grid1D.from_domain(-2, 2, 64)
    rng = np.random.default_rng(3)
    rho = random_density(rng, g)
    pot = {"zero": PointyPotential.zero(), "exp_half": PointyPotential.exp_half(),
           "exp_half_weights": PointyPotential.exp_half(False)}[kind]
    fld = compute_field(rho, pot, g, closure)
    S = fld.S
    left = S[0] - g.dx * fld.half[0]
    right = S[-1] + g.dx * fld.half[-1]
    res = stencil_residual(S, fld.nu, rho, g, left, right)
    first = 1 if closure == "anchored" else 0  # the anchored closure drops node 0
    assert np.max(np.abs(res[first:])) <= 1e-10 * np.max(rho) * (1 / g.dx ** 2) * g.dx ** 2 + 1e-10


def dense_screened(rho, g):
    """Dense solve of -D2 S + S = rho with the exact exterior decay as ghost closure."""
    n, h = g.n, g.dx
    r = 1 + h * h / 2 + h * np.sqrt(1 + h * h / 4)
    A = np.zeros((n, n))
    for i in range(n):
        A[i, i] = 2 / h ** 2 + 1
        if i > 0:
            A[i, i - 1] = -1 / h ** 2
        if i < n - 1:
            A[i, i + 1] = -1 / h ** 2
    A[0, 0] -= 1 / (r * h ** 2)
    A[-1, -1] -= 1 / (r * h ** 2)
    return np.linalg.solve(A, rho)


@pytest.mark.parametrize("nx", [4, 16, 32, 64])
def test_self_solver_matches_dense(nx):
    g = Grid1D.from_domain(-2, 2, nx)
    rho = np.random.default_rng(nx).random(g.n)
    S, _ = solve_potential_self(rho, g)
    np.testing.assert_allclose(S, dense_screened(rho, g), rtol=1e-12, atol=1e-14)


def test_self_solver_unit_dirac_is_lattice_green_function():
    # exact infinite-lattice Green function for rho = delta/h: h r**(-|i-k|) / (r - 1/r)
    g = Grid1D.from_domain(-3, 3, 32)
    h = g.dx
    r = 1 + h * h / 2 + h * np.sqrt(1 + h * h / 4)
    rho = np.zeros(g.n)
    rho[11] = 1.0 / h
    S, _ = solve_potential_self(rho, g)
    green = h * r ** (-np.abs(np.arange(g.n) - 11)) / (r - 1 / r)
    np.testing.assert_allclose(S, green, rtol=1e-12)


def test_self_solver_flat_interior():
    g = Grid1D.from_domain(-20, 20, 800)
    rho = np.where(np.abs(g.x) < 15, 0.7, 0.0)
    S, _ = solve_potential_self(rho, g)
    mid = np.abs(g.x) < 2
    np.testing.assert_allclose(S[mid], 0.7, atol=1e-6)
    np.testing.assert_allclose(S[mid], dense_screened(rho, g)[mid], rtol=1e-12)


def dense_anchored(rho, nu, g):
    """Dense oracle for the anchored closure: S0 = S1 = 0, equations at nodes 1..nx."""
    n, h = g.n, g.dx
    A = np.zeros((n, n))
    b = np.zeros(n)
    A[0, 0] = 1.0
    A[1, 1] = 1.0
    for i in range(1, n - 1):
        A[i + 1, i - 1] = -1 / h ** 2
        A[i + 1, i] = 2 / h ** 2
        A[i + 1, i + 1] = -1 / h ** 2
        b[i + 1] = rho[i] - nu[i]
    return np.linalg.solve(A, b)


@pytest.mark.parametrize("nx", [8, 32, 64])
def test_anchored_solve_matches_dense(nx):
    g = Grid1D.from_domain(-1, 1, nx)
    rho = np.random.default_rng(nx).random(g.n)
    nu = np.random.default_rng(nx + 1).random(g.n) * 0.3
    S = solve_potential(rho, nu, g, "anchored")
    ref = dense_anchored(rho, nu, g)
    np.testing.assert_allclose(S, ref, rtol=1e-12, atol=1e-12 * np.abs(ref).max())


def test_free_space_zero_potential_matches_direct_sum():
    # for w = 0 the slope is S'(x) = (1/2) sum m_j sgn(x_j - x): antisymmetric far field
    g = Grid1D.from_domain(-1, 1, 40)
    rho = random_density(np.random.default_rng(7), g)
    fld = compute_field(rho, PointyPotential.zero(), g)
    M = g.dx * np.cumsum(rho)
    np.testing.assert_allclose(fld.interior_half, 0.5 * M[-1] - M[:-1], rtol=1e-13, atol=1e-15)
    assert fld.half[0] == pytest.approx(0.5 * M[-1])
    assert fld.half[-1] == pytest.approx(-0.5 * M[-1])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["zero", "exp_half", "weights"]),
       st.sampled_from(["free_space", "anchored"]))
def test_slope_bound(seed, kind, closure):
    g = Grid1D.from_domain(-2.5, 2.5, 100)
    rho = random_density(np.random.default_rng(seed), g) * 3
    M = g.dx * rho.sum()
    pot = {"zero": PointyPotential.zero(), "exp_half": PointyPotential.exp_half(),
           "weights": PointyPotential.exp_half(False)}[kind]
    if closure == "anchored" and pot.uses_self:
        return  # nu = S is not bounded by M w0 when S is shot from one end
    fld = compute_field(rho, pot, g, closure)
    assert np.max(np.abs(fld.half)) <= M * (1 + pot.w0) + 1e-10
    assert np.max(np.abs(fld.centered)) <= M * (1 + pot.w0) + 1e-10


@pytest.mark.parametrize("kind,closure", [
    ("zero", "free_space"), ("weights", "free_space"), ("exp_half", "free_space"),
    ("zero", "anchored"), ("exp_half", "anchored"),
])
def test_centered_slope_cumulative_identity(kind, closure):
    # u[i+1] = u[0] + dx (nu[0] + nu[i+1])/2 + dx sum_{1..i} nu - (M[i] + M[i+1] - M[0]) / 2
    g = Grid1D.from_domain(-2, 2, 60)
    rho = random_density(np.random.default_rng(11), g)
    pot = {"zero": PointyPotential.zero(), "exp_half": PointyPotential.exp_half(),
           "weights": PointyPotential.exp_half(False)}[kind]
    fld = compute_field(rho, pot, g, closure)
    u, nu = fld.centered, fld.nu
    M = g.dx * np.cumsum(rho)
    N = g.dx * np.cumsum(nu)
    i = np.arange(g.n - 1)
    rhs = u[0] - 0.5 * (M[i + 1] + M[i] - M[0]) + 0.5 * (2 * N[i] + g.dx * nu[i + 1] - g.dx * nu[0])
    np.testing.assert_allclose(u[1:], rhs, atol=1e-10)


@pytest.mark.parametrize("kind", ["zero", "weights"])
def test_anchored_closure_pins_left_end(kind):
    g = Grid1D.from_domain(-2, 2, 40)
    rho = random_density(np.random.default_rng(5), g)
    pot = PointyPotential.zero() if kind == "zero" else PointyPotential.exp_half(False)
    fld = compute_field(rho, pot, g, "anchored")
    assert fld.S[0] == 0.0 and fld.S[1] == 0.0
    assert fld.half[0] == 0.0 and fld.half[1] == 0.0


def test_finite_differences():
    g = Grid1D.from_domain(0, 1, 10)
    x = g.x
    np.testing.assert_array_equal(dx_centered(np.full(g.n, 3.0), g), 0.0)
    np.testing.assert_allclose(dx_centered(x, g)[1:-1], 1.0, rtol=1e-13)
    np.testing.assert_allclose(dx_centered(x ** 2, g)[1:-1], 2 * x[1:-1], rtol=1e-12, atol=1e-14)
    assert dx_centered(x, g)[0] == 0.0
    np.testing.assert_allclose(dx_half(x ** 2, g), x[:-1] + x[1:], rtol=1e-12)


def test_support_warning():
    g = Grid1D.from_domain(-1, 1, 50)
    rho = np.ones(g.n)
    assert support_leak(rho, g) == pytest.approx(10 * g.dx)
    with pytest.warns(RuntimeWarning):
        assert warn_if_leaking(rho, g, g.dx * rho.sum())
    rho[:10] = 0
    rho[-10:] = 0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert not warn_if_leaking(rho, g, g.dx * rho.sum())
