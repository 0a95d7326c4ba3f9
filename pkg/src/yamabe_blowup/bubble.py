"""Standard bubble, its dilates and translates, and the linearized kernel.

Points are numpy arrays whose last axis has length ``N``.  All profile
derivatives come from closed-form radial formulas; :func:`fd_laplacian` is
provided only for cross-checks.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
import math

import numpy as np

from .errors import DomainError

N_MIN, N_MAX = 5, 9


@dataclass(frozen=True)
class DimensionParams:
    """Dimension-derived constants for the critical exponent problem."""

    N: int

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or not N_MIN <= self.N <= N_MAX:
            raise DomainError(f"dimension must be an integer in [{N_MIN}, {N_MAX}], got {self.N!r}")

    @cached_property
    def p_exact(self):
        return Fraction(self.N + 2, self.N - 2)

    @cached_property
    def kappa_exact(self):
        return Fraction(4 * (self.N - 1), self.N - 2)

    @property
    def p(self):
        return float(self.p_exact)

    @property
    def kappa(self):
        return float(self.kappa_exact)

    @property
    def alpha(self):
        N = self.N
        return (N * (N - 2)) ** ((N - 2) / 4)

    @property
    def sphere_area(self):
        """Area of the unit sphere S^{N-1} in R^N."""
        return 2 * math.pi ** (self.N / 2) / math.gamma(self.N / 2)

    @property
    def gamma(self):
        return 1.0 / ((self.N - 2) * self.sphere_area)


def dimension(N):
    if isinstance(N, (float, np.floating)) and float(N).is_integer():
        N = int(N)
    if not isinstance(N, (int, np.integer)):
        raise DomainError(f"dimension must be an integer, got {N!r}")
    return _dimension(int(N))


@lru_cache(maxsize=None)
def _dimension(N):
    return DimensionParams(N)


@dataclass(frozen=True)
class BubbleParams:
    mu: float
    xi: np.ndarray = field(default=None)

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError(f"bubble scale must be positive, got {self.mu}")


def _as_points(x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("non-finite coordinates")
    return x


def _norm(y):
    return np.sqrt(np.sum(np.asarray(y, dtype=float) ** 2, axis=-1))


# --- radial profiles ---------------------------------------------------------

def w(dim, r):
    """Standard bubble as a function of the radius."""
    return dim.alpha * (1.0 + r * r) ** (-(dim.N - 2) / 2)


def w_r(dim, r):
    return -(dim.N - 2) * dim.alpha * r * (1.0 + r * r) ** (-dim.N / 2)


def w_r_over_r(dim, r):
    return -(dim.N - 2) * dim.alpha * (1.0 + r * r) ** (-dim.N / 2)


def w_rr(dim, r):
    N, s = dim.N, 1.0 + r * r
    return -(N - 2) * dim.alpha * (s ** (-N / 2) - N * r * r * s ** (-N / 2 - 1))


def radial_laplacian(dim, f_rr, f_r_over_r):
    return f_rr + (dim.N - 1) * f_r_over_r


def lap_w(dim, r):
    return radial_laplacian(dim, w_rr(dim, r), w_r_over_r(dim, r))


def z_dil(dim, r):
    """Dilation kernel Z_{N+1} as a function of the radius."""
    N = dim.N
    return dim.alpha * (N - 2) / 2 * (1.0 - r * r) * (1.0 + r * r) ** (-N / 2)


def z_dil_r(dim, r):
    N, s = dim.N, 1.0 + r * r
    a = dim.alpha * (N - 2) / 2
    return a * (-2 * r * s ** (-N / 2) - N * r * (1 - r * r) * s ** (-N / 2 - 1))


def lap_z_dil(dim, r):
    # Z = r W' + (N-2)/2 W and Delta(r f') = r (Delta f)' + 2 Delta f.
    N, s = dim.N, 1.0 + r * r
    c = -N * (N - 2) * dim.alpha
    lap = c * s ** (-(N + 2) / 2)
    r_dlap = c * (-(N + 2)) * r * r * s ** (-(N + 4) / 2)
    return r_dlap + 2 * lap + (N - 2) / 2 * lap


def _g_trans(dim, r):
    return w_r_over_r(dim, r)


def _lap_factor_trans(dim, r):
    # Delta(y_i g(r)) = y_i (g'' + (N+1) g'/r)
    N, s = dim.N, 1.0 + r * r
    c = N * (N - 2) * dim.alpha
    g_r_over_r = c * s ** (-(N + 2) / 2)
    g_rr = c * (s ** (-(N + 2) / 2) - (N + 2) * r * r * s ** (-(N + 4) / 2))
    return g_rr + (N + 1) * g_r_over_r


@lru_cache(maxsize=None)
def z0_norm(N):
    """Constant c with Z_0 = c W and int W^{p-1} Z_0^2 = 1."""
    from .integrate import integrate

    dim = dimension(N)
    val = integrate(lambda r: w(dim, r) ** (dim.p + 1) * r ** (N - 1), 0.0, np.inf, rtol=1e-13)
    return 1.0 / math.sqrt(dim.sphere_area * val)


# --- pointwise API -------------------------------------------------------------

def eval_bubble(dim, bp, x):
    """Dilated and translated bubble mu^{-(N-2)/2} W((x - xi)/mu)."""
    x = _as_points(x)
    y = x if bp.xi is None else x - np.asarray(bp.xi, dtype=float)
    r = _norm(y) / bp.mu
    return bp.mu ** (-(dim.N - 2) / 2) * w(dim, r)


def eval_kernel(dim, n, y):
    """Kernel function Z_n: n=0 ground state, 1..N translations, N+1 dilation."""
    y = _as_points(y)
    if not (isinstance(n, (int, np.integer)) and 0 <= n <= dim.N + 1):
        raise DomainError(f"kernel index must lie in 0..{dim.N + 1}, got {n!r}")
    r = _norm(y)
    if n == 0:
        return z0_norm(dim.N) * w(dim, r)
    if n == dim.N + 1:
        return z_dil(dim, r)
    return y[..., n - 1] * _g_trans(dim, r)


def kernel_laplacian(dim, n, y):
    y = _as_points(y)
    r = _norm(y)
    if n == 0:
        return z0_norm(dim.N) * lap_w(dim, r)
    if n == dim.N + 1:
        return lap_z_dil(dim, r)
    if 1 <= n <= dim.N:
        return y[..., n - 1] * _lap_factor_trans(dim, r)
    raise DomainError(f"kernel index must lie in 0..{dim.N + 1}, got {n!r}")


def residual_yamabe(dim, y):
    """Delta W + W^p evaluated from the analytic radial Laplacian."""
    r = _norm(_as_points(y))
    return lap_w(dim, r) + w(dim, r) ** dim.p


def linearized_apply(dim, sampler, y):
    """W^{1-p} (Delta f + p W^{p-1} f) for a sampler returning (f, Delta f)."""
    y = _as_points(y)
    value, lap = sampler(y)
    wy = w(dim, _norm(y))
    return wy ** (1 - dim.p) * lap + dim.p * value


def kernel_sampler(dim, n):
    return lambda y: (eval_kernel(dim, n, y), kernel_laplacian(dim, n, y))


def fd_laplacian(f, y, h=1e-3):
    """Second-order central-difference Laplacian of a scalar field sampler."""
    y = _as_points(y)
    f0 = f(y)
    out = np.zeros_like(f0, dtype=float)
    for i in range(y.shape[-1]):
        e = np.zeros(y.shape[-1])
        e[i] = h
        out = out + (f(y + e) - 2 * f0 + f(y - e)) / h**2
    return out
