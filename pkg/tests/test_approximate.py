import numpy as np
import pytest
from hypothesis import given, strategies as st

from yamabe_blowup.approximate import (aronson_benilan_ratio, build_approx, cutoff, cutoff_jumps, inner_sup,
                                       model_state, outer_sup, sphere_profile, verify_error_orders, weight_w)
from yamabe_blowup.bubble import dimension
from yamabe_blowup.dynamics import mu0
from yamabe_blowup.errors import DomainError
from yamabe_blowup.manifolds import Sphere, Torus

N = 5


@pytest.fixture(scope="module")
def approx2():
    return build_approx(Torus(N), 1.0, [np.zeros(N)], [lambda t: model_state(N, 1.0, t)], level=2)


@pytest.fixture(scope="module")
def approx1():
    return build_approx(Torus(N), 1.0, [np.zeros(N)], [lambda t: model_state(N, 1.0, t)], level=1)


@given(st.floats(-5.0, 10.0), st.floats(0.05, 4.0))
def test_cutoff_bounds(r, delta):
    eta, d1, _ = cutoff(np.array([r]), delta)
    assert 0.0 <= eta[0] <= 1.0
    assert d1[0] <= 1e-15
    if r <= delta:
        assert eta[0] == 1.0
    if r >= 2 * delta:
        assert eta[0] == 0.0


def test_cutoff_derivatives_match_differences():
    r = np.linspace(1.05, 1.95, 9)
    h = 1e-5
    eta, d1, d2 = cutoff(r, 1.0)
    assert np.allclose(d1, (cutoff(r + h)[0] - cutoff(r - h)[0]) / (2 * h), atol=1e-8)
    assert np.allclose(d2, (cutoff(r + h)[0] - 2 * eta + cutoff(r - h)[0]) / h**2, atol=1e-4)


def test_pole_value_is_the_scaled_bubble(approx1):
    t = 1e3
    st_ = model_state(N, 1.0, t)
    dim = dimension(N)
    u = approx1.value(np.zeros((1, N)), t)[0]
    assert u == pytest.approx(dim.alpha * st_.mu ** (-(N - 2) / 2), rel=1e-12)


def test_far_field_is_the_scaled_green_function(approx1):
    t = 1e3
    x = np.array([[1.0, 0.5, -0.3, 0.2, 0.9]])
    dim = dimension(N)
    A = dim.alpha * model_state(N, 1.0, t).mu ** ((N - 2) / 2)
    expected = dim.kappa / dim.gamma * approx1.greens[0](x)[0] * A
    assert approx1.value(x, t)[0] == pytest.approx(expected, rel=1e-12)


def test_no_jumps_across_cutoff_shells(approx2):
    for jump, kink in cutoff_jumps(approx2, 1e4).values():
        assert jump < 1e-8
        assert kink < 1e-3


@pytest.mark.parametrize("level,minimum", [(1, 1.8), (2, 2.7)])
def test_inner_orders(approx1, approx2, level, minimum):
    approx = approx1 if level == 1 else approx2
    fit = verify_error_orders(approx, [1e3, 1e4, 1e5], radii=24, directions=8)
    assert fit.order >= minimum


def test_outer_residual_decays(approx2):
    a, b = outer_sup(approx2, 1e3, radii=16, directions=8), outer_sup(approx2, 1e5, radii=16, directions=8)
    assert b < a


def test_level_two_improves_inner_residual(approx1, approx2):
    t = 1e5
    assert inner_sup(approx2, t, radii=24, directions=8) < inner_sup(approx1, t, radii=24, directions=8, subtract=None)


def test_two_bubble_superposition():
    man = Torus(N)
    z1, z2 = np.zeros(N), np.full(N, np.pi)
    s = lambda t: model_state(N, 1.0, t)
    both = build_approx(man, 1.0, [z1, z2], [s, s], level=1)
    one = build_approx(man, 1.0, [z1], [s], level=1)
    t = 1e3
    near = np.array([[0.01, 0, 0, 0, 0]])
    assert both.value(near, t)[0] / one.value(near, t)[0] - 1 < 1e-3
    # equal bubbles at antipodal torus points: the solution is symmetric under the swap
    x = np.array([[0.7, 0.2, -0.1, 0.3, 0.0]])
    assert both.value(x, t)[0] == pytest.approx(both.value(z2 - x, t)[0], rel=1e-10)


def test_separation_and_model_are_checked():
    s = lambda t: model_state(N, 1.0, t)
    with pytest.raises(DomainError, match="closer"):
        build_approx(Torus(N), 1.0, [np.zeros(N), np.full(N, 0.1)], [s, s])
    with pytest.raises(DomainError):
        build_approx(Sphere(N), 1.0, [np.zeros(N)], [s])
    with pytest.raises(DomainError):
        build_approx(Torus(N), -1.0, [np.zeros(N)], [s])


def test_aronson_benilan_ratio_is_order_one(approx2):
    ratio = aronson_benilan_ratio(approx2, 1e3)
    assert 1.0 < ratio < 10.0


def test_weight_floor():
    s = 2.5
    far = weight_w(0.01, 3.0, 3.0, s, 0.0, 0.25)
    assert far == pytest.approx(0.01**s * 2 ** (3 * s) * 0.25 ** (-s))
    near = weight_w(0.01, 0.0, 0.0, s, 0.0, 0.25)
    assert near == pytest.approx(1.0)


def test_sphere_profile_positive_and_peaked():
    theta = np.linspace(0, np.pi, 200)
    st_ = model_state(N, 1.0, 1e3)
    u = sphere_profile(N, 1.0, theta, st_, level=2)
    assert np.all(u > 0)
    assert np.argmax(u) == 0
    assert u[0] == pytest.approx(dimension(N).alpha * st_.mu ** (-(N - 2) / 2), rel=1e-2)


def test_model_state_rate():
    st_ = model_state(N, 1.0, 100.0)
    assert st_.mu == pytest.approx(float(mu0(N, 100.0)))
    assert st_.mu_dot == pytest.approx(-st_.mu / 200)
