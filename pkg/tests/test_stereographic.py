import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special

from yamabe_blowup.bubble import dimension, w
from yamabe_blowup.errors import DomainError
from yamabe_blowup.stereographic import (AngularHarmonic, LiftMap, PlaneTerm, SphereTerm, ZonalBasis,
                                         conformal_factor, inhom_residual, mode_purity, mode_rate,
                                         plane_inner_solve, pullback, pushed_bubble_constant, pushforward,
                                         sphere_linear_solve, sphere_quadrature, to_plane, to_sphere,
                                         verify_conformal_covariance)

vec5 = st.lists(st.floats(-1e3, 1e3), min_size=5, max_size=5)


@given(vec5)
def test_round_trip(coords):
    y = np.array([coords])
    back = to_plane(to_sphere(y))
    assert np.allclose(back, y, rtol=1e-9, atol=1e-12)
    assert np.linalg.norm(to_sphere(y)) == pytest.approx(1.0)


@pytest.mark.parametrize("radius", [1e-6, 1.0, 1e6])
def test_round_trip_extreme_radii(radius):
    y = radius * np.array([[0.6, -0.8, 0, 0, 0]])
    assert np.allclose(to_plane(to_sphere(y)), y, rtol=1e-10)


def test_north_pole_has_no_preimage():
    with pytest.raises(DomainError):
        to_plane(np.array([[0, 0, 0, 0, 0, 1.0]]))


def test_lift_map_inverse():
    m = LiftMap(5)
    y = np.array([[0.3, 0.1, -2.0, 0.0, 1.0]])
    assert np.allclose(m.inverse()(m(y)), y)
    with pytest.raises(DomainError):
        LiftMap(5, "sideways")


@pytest.mark.parametrize("N", [5, 6, 7])
def test_pushed_bubble_is_constant(N):
    dim = dimension(N)
    pts, _ = sphere_quadrature(N, 4)
    vals = pushforward(lambda q: w(dim, np.linalg.norm(q, axis=-1)), to_plane(pts), N)
    assert np.ptp(vals) / pushed_bubble_constant(N) < 1e-12
    assert np.mean(vals) == pytest.approx((N * (N - 2) / 4) ** ((N - 2) / 4), rel=1e-12)


def test_pullback_inverts_pushforward():
    y = np.random.default_rng(0).standard_normal((20, 5))
    f = lambda q: np.exp(-np.sum(q * q, axis=-1))
    phi = lambda yt: pushforward(f, to_plane(yt), 5)
    assert np.allclose(pullback(phi, y, 5), f(y))


def test_conformal_factor_is_the_metric_scale():
    # |d Pi(y) v| = Lambda(y) |v| for any tangent vector
    y = np.array([0.4, -1.2, 0.3, 0.0, 2.0])
    v = np.array([0.1, 0.2, -0.3, 0.5, 0.05])
    h = 1e-6
    dv = (to_sphere(y + h * v) - to_sphere(y - h * v)) / (2 * h)
    assert np.linalg.norm(dv) == pytest.approx(conformal_factor(y) * np.linalg.norm(v), rel=1e-8)


def test_mode_purity_bounds():
    pts, wts = sphere_quadrature(5, 4)
    assert mode_purity(pts[:, 0], pts[:, 0], wts) == pytest.approx(1.0)
    assert abs(mode_purity(pts[:, 0], pts[:, 1], wts)) < 1e-12
    with pytest.raises(DomainError):
        mode_purity(0 * pts[:, 0], pts[:, 0], wts)


def test_harmonic_moments():
    area4 = 2 * math.pi ** 2.5 / math.gamma(2.5)  # |S^4|
    mean, first, sq = AngularHarmonic.coordinate(2).moments(5)
    assert abs(mean) < 1e-13
    assert first[2] == pytest.approx(area4 / 5)
    assert sq == pytest.approx(area4 / 5)


@pytest.mark.parametrize("N", [5, 6])
def test_conformal_covariance(N):
    assert verify_conformal_covariance(N) < 1e-6


def test_mode_rates():
    assert mode_rate(5, 1) == 0.0
    assert mode_rate(5, 0) > 0
    assert all(mode_rate(5, l) < 0 for l in range(2, 10))


def test_zonal_basis_round_trip():
    basis = ZonalBasis(5, 1, 20, 80)
    f = lambda z: np.sqrt(1 - z * z) * (z**3 - 0.2 * z)
    coef = basis.project(f)
    z = np.linspace(-0.9, 0.9, 7)
    assert np.allclose(basis.synthesize(coef, z), f(z), atol=1e-13)


def test_sphere_solver_against_closed_form():
    N, l = 5, 3
    lam = (N - 1) / 2
    term = SphereTerm(AngularHarmonic.constant(), lambda z: special.eval_gegenbauer(l, lam, z))
    t = np.linspace(0.0, 2.0, 9)
    sol = sphere_linear_solve([term], N, 0.0, t, Lmax=8)
    p, r = dimension(N).p, mode_rate(N, l)
    yt = to_sphere(np.array([[0.3, 0.2, -0.1, 0.5, 0.4]]))
    for k, tk in enumerate(t):
        exact = (math.exp(r * tk) - 1) / (r * p) * special.eval_gegenbauer(l, lam, yt[0, -1])
        assert sol(yt, k)[0] == pytest.approx(exact, rel=1e-10, abs=1e-14)


def test_sphere_solver_preserves_orthogonality():
    N = 5
    lam = (N - 1) / 2
    f = lambda z: np.exp(2 * z)
    zq, wq = special.roots_gegenbauer(200, lam)
    a1 = (wq @ (f(zq) * zq)) / (wq @ (zq * zq))
    term = SphereTerm(AngularHarmonic.constant(), lambda z: f(z) - a1 * z, lambda t: np.exp(-t))
    t = np.linspace(1.0, 3.0, 11)
    sol = sphere_linear_solve([term], N, 1.0, t, Lmax=32)
    scale = np.max(np.abs(sol.coef[0]))
    assert max(np.max(np.abs(sol.moments(k)[1:])) for k in range(len(t))) < 1e-10 * scale


def test_non_orthogonal_source_names_the_coordinate():
    term = SphereTerm(AngularHarmonic.constant(), lambda z: z)
    with pytest.raises(DomainError, match=r"y~_6"):
        sphere_linear_solve([term], 5, 0.0, np.linspace(0, 1, 3), Lmax=4)


def test_time_grid_validation():
    with pytest.raises(DomainError):
        sphere_linear_solve([], 5, 1.0, np.array([0.0, 1.0]))


def test_plane_solve_residual():
    N = 5
    Y = AngularHarmonic(2, lambda om: om[..., 0] * om[..., 1])
    terms = [PlaneTerm(Y, lambda r: (1 + r * r) ** -3.0, lambda t: np.exp(-t))]
    t = np.linspace(1.0, 2.0, 11)
    sol = plane_inner_solve(terms, N, 1.0, t, Lmax=48)
    y = np.random.default_rng(1).standard_normal((10, N))
    for k in (3, 10):
        res = inhom_residual(sol, terms, y, k, h=1e-2)
        assert np.max(np.abs(res)) < 1e-3 * np.max(np.abs(terms[0](y, t[k])))


def test_plane_solve_rejects_translation_mode():
    term = PlaneTerm(AngularHarmonic.coordinate(0), lambda r: (1 + r * r) ** -3.0)
    with pytest.raises(DomainError, match="Z_1"):
        plane_inner_solve([term], 5, 1.0, np.linspace(1, 2, 3))
