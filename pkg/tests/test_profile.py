import numpy as np
import pytest
from hypothesis import given, strategies as st

from yamabe_blowup.bubble import dimension, eval_kernel, z_dil
from yamabe_blowup.errors import DomainError
from yamabe_blowup.integrate import sphere_rule
from yamabe_blowup.profile import (CurvatureData, assemble_E0, dilation_rate_coefficient, equation_residual,
                                   eval_Psi0, kernel_singular_values, scaled_error, solve_Q0)
from yamabe_blowup.quadrature import compute_constants


@pytest.fixture(scope="module")
def flat5():
    return solve_Q0(5, CurvatureData.flat(5, 1.0))


@pytest.fixture(scope="module")
def curved5():
    return solve_Q0(5, CurvatureData(np.diag([1.0, -1.0, 0.5, 0.0, -0.5]), 0.0, 1.0))


def _projection(N, f, n, radii=600, degree=6):
    """int f Z_n over R^5 by a log-radius rule times a sphere rule."""
    dim = dimension(N)
    x, wx = np.polynomial.legendre.leggauss(radii)
    s = 0.5 * (x + 1) * 24 - 12  # log r in [-12, 12]
    r, wr = np.exp(s), 0.5 * 24 * wx * np.exp(s) * np.exp(s) ** (N - 1)
    om, wom = sphere_rule(N - 1, degree)
    y = (r[:, None, None] * om[None]).reshape(-1, N)
    wts = (wr[:, None] * wom[None]).ravel()
    return float(wts @ (f(y) * eval_kernel(dim, n, y)))


def test_curvature_validation():
    with pytest.raises(DomainError):
        CurvatureData(np.array([[0.0, 1.0], [0.0, 0.0]]), 0.0, 1.0)
    with pytest.raises(DomainError):
        CurvatureData.flat(5, h=0.0)


@pytest.mark.parametrize("N", [5, 6])
def test_E0_orthogonal_to_dilation_under_rate_law(N):
    curv = CurvatureData.flat(N, 1.0)
    f = lambda y: scaled_error(N, curv, y)
    scale = compute_constants(N).c2.value
    assert abs(_projection(N, f, N + 1)) < 1e-8 * scale


def test_E0_orthogonal_to_translations_by_parity():
    N = 5
    curv = CurvatureData(np.diag([1.0, 2.0, -1.0, 0.0, 0.5]), 2.5, 1.0)
    f = lambda y: scaled_error(N, curv, y)
    for n in range(1, N + 1):
        assert abs(_projection(N, f, n)) < 1e-10


def test_E0_at_origin_by_direct_substitution():
    N = 5
    dim = dimension(N)
    curv = CurvatureData.flat(N, 1.0)
    mubar, k = 0.3, dilation_rate_coefficient(N, 1.0)
    mdot = -k * mubar**3
    h3 = -3 / 32
    kinv = 1 / dim.kappa
    expected = mubar**2 * (2 * N * h3 - kinv) * (N + 2) * dim.kappa / 4 * dim.alpha
    expected += mdot / mubar * dim.p * dim.alpha ** (dim.p - 1) * dim.alpha * (N - 2) / 2
    assert assemble_E0(N, curv, mubar, mdot, np.zeros((1, N)))[0] == pytest.approx(expected, rel=1e-13)


def test_flat_profile_has_no_traceless_mode(flat5):
    assert np.all(flat5.q2 == 0)


def test_decay_ratio_bounded(flat5):
    r = np.geomspace(1e2, 1e4, 41)
    ratio = np.abs(flat5.radial("q0", r)) * r**3 / np.log(2 + r)
    assert ratio.max() / ratio.min() < 3


def test_back_substitution_residual(curved5):
    assert max(equation_residual(curved5)) < 1e-6
    assert np.any(curved5.q2 != 0)


def test_solve_is_well_conditioned(flat5):
    assert flat5.condition < 1e8


def test_single_near_zero_singular_value():
    s = kernel_singular_values(5, CurvatureData.flat(5, 1.0), nodes=300)
    assert s[0] < 1e-3 * s[1]


def test_grid_doubling(flat5):
    fine = solve_Q0(5, CurvatureData.flat(5, 1.0), nodes=4000)
    r = np.linspace(0.1, 100, 50)
    a, b = flat5.radial("q0", r), fine.radial("q0", r)
    assert np.max(np.abs(a - b)) < 1e-5 * np.max(np.abs(b))


def test_unweighted_orthogonality_to_dilation(flat5):
    # radial profile: integrate in s = log r far past rmax, where the tail law takes over
    N = 5
    dim = dimension(N)
    edges = np.linspace(-12, 45, 58)
    x, wx = np.polynomial.legendre.leggauss(40)
    total = scale = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        r = np.exp(0.5 * (x + 1) * (hi - lo) + lo)
        f = flat5.radial("q0", r) * z_dil(dim, r) * r**N * 0.5 * (hi - lo)
        total += wx @ f
        scale += wx @ np.abs(f)
    assert abs(total) < 1e-8 * scale


def test_psi_is_quadratic_in_mubar(flat5):
    y = np.array([[0.3, 0.1, 0, 0, 0], [2e4, 0, 0, 0, 0]])
    a, flag = eval_Psi0(flat5, 0.1, y)
    b, _ = eval_Psi0(flat5, 0.2, y)
    assert np.allclose(b, 4 * a, rtol=1e-14)
    assert list(flag) == [False, True]
    assert np.isfinite(eval_Psi0(flat5, 1.0, np.zeros((1, 5)))[0]).all()


def test_rmax_floor():
    with pytest.raises(DomainError):
        solve_Q0(5, CurvatureData.flat(5), rmax=100)


@given(st.floats(0.5, 3.0))
def test_profile_scales_with_potential(h):
    # with zero Ricci the source is linear in h, so Q scales linearly too
    base = solve_Q0(5, CurvatureData.flat(5, 1.0), nodes=400, rmax=1e3)
    other = solve_Q0(5, CurvatureData.flat(5, h), nodes=400, rmax=1e3)
    assert np.allclose(other.q0, h * base.q0, rtol=1e-9, atol=1e-12)
