import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from yamabe_blowup.bubble import (BubbleParams, dimension, eval_bubble, eval_kernel, fd_laplacian,
                                  kernel_laplacian, kernel_sampler, linearized_apply, residual_yamabe, w, z0_norm)
from yamabe_blowup.errors import DomainError

DIMS = [5, 6, 7]


def _points(N, count=40, seed=0):
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((count, N))
    return y * rng.uniform(0.05, 6.0, (count, 1)) / np.linalg.norm(y, axis=1, keepdims=True)


@pytest.mark.parametrize("N,p,kappa", [(5, 7 / 3, 16 / 3), (6, 2.0, 5.0), (7, 9 / 5, 24 / 5)])
def test_dimension_constants(N, p, kappa):
    dim = dimension(N)
    assert dim.p == pytest.approx(p, rel=1e-15)
    assert dim.kappa == pytest.approx(kappa, rel=1e-15)
    assert dim.alpha == pytest.approx((N * (N - 2)) ** ((N - 2) / 4))


@pytest.mark.parametrize("N", [2, 4, 10, 5.5])
def test_dimension_rejects_out_of_range(N):
    with pytest.raises(DomainError):
        dimension(N)


@pytest.mark.parametrize("N", DIMS)
def test_bubble_solves_critical_equation(N):
    y = _points(N)
    dim = dimension(N)
    scale = np.max(w(dim, np.linalg.norm(y, axis=1)) ** dim.p)
    assert np.max(np.abs(residual_yamabe(dim, y))) < 1e-12 * scale


@pytest.mark.parametrize("N", DIMS)
@pytest.mark.parametrize("n", range(0, 7))
def test_kernel_laplacian_matches_finite_differences(N, n):
    if n > N + 1:
        pytest.skip("no such kernel function")
    dim = dimension(N)
    y = _points(N, 10, seed=n)
    fd = fd_laplacian(lambda q: eval_kernel(dim, n, q), y, h=1e-3)
    exact = kernel_laplacian(dim, n, y)
    assert np.max(np.abs(fd - exact)) < 1e-4 * max(1.0, np.max(np.abs(exact)))


@pytest.mark.parametrize("N", DIMS)
def test_translation_and_dilation_kernels_are_in_the_kernel(N):
    dim = dimension(N)
    y = _points(N)
    for n in range(1, N + 2):
        assert np.max(np.abs(linearized_apply(dim, kernel_sampler(dim, n), y))) < 1e-10


@pytest.mark.parametrize("N", DIMS)
def test_ground_state_eigenvalue(N):
    # L Z0 = (p - 1) Z0 in the W^{1-p} scaled form
    dim = dimension(N)
    y = _points(N)
    out = linearized_apply(dim, kernel_sampler(dim, 0), y)
    assert np.allclose(out, (dim.p - 1) * eval_kernel(dim, 0, y), rtol=1e-11, atol=0)


def test_z0_normalization_closed_form():
    # int W^{p+1} = alpha^{p+1} |S^{N-1}| B(N/2, N/2) / 2
    N = 5
    dim = dimension(N)
    beta = math.gamma(N / 2) ** 2 / math.gamma(N)
    integral = dim.alpha ** (dim.p + 1) * dim.sphere_area * beta / 2
    assert z0_norm(N) == pytest.approx(1 / math.sqrt(integral), rel=1e-12)


@given(st.floats(0.01, 100.0), st.floats(0.0, 50.0))
def test_dilated_bubble_scaling(mu, r):
    dim = dimension(5)
    val = eval_bubble(dim, BubbleParams(mu), np.array([[r, 0, 0, 0, 0]]))[0]
    assert val == pytest.approx(mu ** -1.5 * w(dim, r / mu), rel=1e-13)


@given(st.lists(st.floats(-5, 5), min_size=5, max_size=5))
def test_bubble_is_radial_and_positive(coords):
    dim = dimension(5)
    y = np.array([coords])
    perm = y[:, ::-1]
    a, b = eval_bubble(dim, BubbleParams(1.0), y), eval_bubble(dim, BubbleParams(1.0), perm)
    assert a[0] > 0 and a[0] == pytest.approx(b[0], rel=1e-14)


def test_bad_inputs():
    dim = dimension(5)
    with pytest.raises(DomainError):
        BubbleParams(0.0)
    with pytest.raises(DomainError):
        eval_kernel(dim, 7, np.zeros((1, 5)))
    with pytest.raises(DomainError):
        eval_bubble(dim, BubbleParams(1.0), np.array([[np.nan, 0, 0, 0, 0]]))
