from fractions import Fraction
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from yamabe_blowup.dynamics import (Exponents, ParameterPath, RicciMatrix, holder_seminorm, mu0, mu_bar,
                                    norm_nu_sigma, rate_amplitude, rk4, solve_lambda, solve_xi,
                                    stability_predicate)
from yamabe_blowup.errors import DomainError


@pytest.mark.parametrize("N", [5, 6, 7])
def test_default_exponents_are_admissible(N):
    ex = Exponents(N)
    assert ex.violations() == []
    assert ex.a == N - 4 and ex.alpha == pytest.approx(N - 5 + 0.1)
    assert ex.rho == pytest.approx((N - 2) / 2 - ex.alpha)


@pytest.mark.parametrize("kw,fragment", [
    (dict(a=0.1), "a must lie"),
    (dict(alpha=1.0), "alpha + beta"),
    (dict(b=2.0), "b must equal beta"),
    (dict(delta0=1.0), "delta0"),
    (dict(eps0=1.5), "small parameters"),
])
def test_exponent_violations_are_named(kw, fragment):
    ex = Exponents(5, **kw)
    assert any(fragment in v for v in ex.violations())
    with pytest.raises(DomainError):
        ex.validate()


def test_mu0_closed_form():
    assert mu0(5, 1.0) ** 2 == pytest.approx(15 / 64, rel=1e-13)
    assert rate_amplitude(5, 4.0) == pytest.approx(math.sqrt(15 / 64) / 2, rel=1e-13)
    with pytest.raises(DomainError):
        mu0(5, -1.0)
    with pytest.raises(DomainError):
        mu_bar(5, 0.0, 1.0)


def test_mubar_solves_dilation_law():
    N, h0 = 5, 1.3
    t = np.geomspace(10, 1000, 41)
    mb = mu_bar(N, h0, t)
    # mubar' = -h0 mubar^3 / (2 K) with K = mu0^2 t = 15/64
    ref = rk4(lambda s, y: -h0 / (2 * 15 / 64) * y**3, [mb[0]], t, substeps=64)[:, 0]
    assert np.max(np.abs(ref / mb - 1)) < 1e-6


@pytest.mark.parametrize("nu", [1.5, 1.9])
def test_lambda_closed_form_against_rk4(nu):
    f = lambda s: np.asarray(s, float) ** (-(nu + 2) / 2)
    t = np.geomspace(5.0, 500.0, 61)
    lam, lam_dot = solve_lambda(f, 5.0, t)
    ref = rk4(lambda s, y: f(s) - 1.5 * y / s, [0.0], t, substeps=64)[:, 0]
    assert np.max(np.abs(lam - ref)) < 1e-6 * np.max(np.abs(ref))
    assert np.allclose(lam_dot, f(t) - 1.5 * lam / t)


def test_xi_closed_form_both_branches():
    N = 5
    rm = RicciMatrix.from_matrix(np.diag([-0.5, -0.2, 0.0, 0.7, 1.4]))
    d = np.arange(1.0, N + 1)
    f = lambda s: np.outer(np.asarray(s, float) ** -1.95, d)
    t = np.geomspace(10.0, 1000.0, 81)
    xi, xi_dot = solve_xi(f, rm, 1.9, 10.0, t)
    ref = rk4(lambda s, y: f(np.array([s]))[0] - rm.m @ y / s, xi[0], t, substeps=64)
    assert np.max(np.abs(xi - ref)) < 1e-6 * np.max(np.abs(ref))
    # the fast branch starts from the improper integral, so it is not pinned to zero at t0
    assert abs(xi[0, 0]) > 0 and xi[0, -1] == 0.0


def test_xi_rejects_resonant_eigenvalue():
    rm = RicciMatrix.from_matrix(np.diag([-0.05, 1, 1, 1, 1]))
    with pytest.raises(DomainError):
        solve_xi(lambda s: np.zeros((len(np.atleast_1d(s)), 5)), rm, 1.9, 1.0, np.array([1.0, 2.0]))


@given(st.floats(0.1, 10.0))
def test_xi_operator_is_linear(scale):
    rm = RicciMatrix.from_matrix(np.diag([0.3, 1.2, 1.5, 2.0, 0.0]))
    d = np.array([1.0, -1.0, 0.5, 0.0, 2.0])
    f = lambda s: np.outer(np.asarray(s, float) ** -2, d)
    g = lambda s: scale * f(s)
    t = np.geomspace(2.0, 20.0, 9)
    a, _ = solve_xi(f, rm, 1.9, 2.0, t)
    b, _ = solve_xi(g, rm, 1.9, 2.0, t)
    assert np.allclose(b, scale * a, rtol=1e-12, atol=1e-300)


def test_eigendecomposition_residual():
    rng = np.random.default_rng(1)
    m = rng.standard_normal((5, 5))
    rm = RicciMatrix.from_matrix(m + m.T)
    assert rm.decomposition_residual() < 1e-13


def test_path_requires_positive_dilation():
    t = np.array([1.0, 2.0])
    with pytest.raises(DomainError):
        ParameterPath.from_solutions(5, 1.0, t, lam=-np.ones(2))


@pytest.mark.parametrize("N", [5, 6, 7, 8])
def test_stability_boundary_is_exact(N):
    edge = -Fraction(6, N - 4)
    rep = stability_predicate(N, [[edge if i == j else 0 for j in range(N)] for i in range(N)], 1)
    assert rep.exact and rep.stable and rep.min_sigma == 1 and rep.margin == 0


def test_stability_float_path_and_unstable_case():
    ric = np.diag([-7.0, -6.5, -8.0, -6.1, -9.0])
    assert stability_predicate(5, ric, 1.0).stable
    ric[3, 3] = -5.9
    rep = stability_predicate(5, ric, 1.0)
    assert not rep.stable and not rep.exact


@given(st.floats(0.01, 1.0))
def test_holder_seminorm_of_linear_path(slope):
    t = np.linspace(1.0, 3.0, 21)
    semi = holder_seminorm(t, slope * t, 2.0)  # sigma = 2 gives the Lipschitz constant
    assert semi[-1] == pytest.approx(slope, rel=1e-9)


def test_norm_nu_sigma_of_power():
    t = np.geomspace(10, 1000, 50)
    vals = mu0(5, t) ** 2
    n = norm_nu_sigma(5, t, vals, 2.0, 0.5)
    assert 1.0 <= n < 1.1
