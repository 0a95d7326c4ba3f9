"""Radial integral constants c1..c5 and the cancellation identities built on them."""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
import math

import numpy as np

from .bubble import dimension, w, w_r, w_r_over_r, z_dil
from .errors import DomainError
from .integrate import integrate, refine


@dataclass(frozen=True)
class Constant:
    value: float
    error: float

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class ConstantsTable:
    N: int
    c1: Constant
    c2: Constant
    c3: Constant
    c4: Constant
    c5: Constant
    hc1: Fraction
    hc2: Fraction
    hc3: Fraction

    def values(self):
        return {k: getattr(self, k).value for k in ("c1", "c2", "c3", "c4", "c5")}


def hat_constants(N):
    """Exact rationals for the quadratic Green's-function coefficients."""
    return (
        Fraction(1, 12),
        Fraction(-1, 24 * (N - 1)),
        Fraction(-(N - 2), 8 * (N - 1) * (N - 4)),
    )


def radial_integrand(dim, profile):
    """Integrand of the radial reduction  int_{R^N} f = |S^{N-1}| int f r^{N-1} dr."""
    area, N = dim.sphere_area, dim.N
    return lambda r: area * profile(r) * r ** (N - 1)


def radial_integral(dim, profile, rtol=1e-13):
    return integrate(radial_integrand(dim, profile), 0.0, np.inf, rtol=rtol)


def _integrands(dim):
    p, N = dim.p, dim.N
    return {
        "c1": lambda r: p * w(dim, r) ** (p - 1) * z_dil(dim, r) ** 2,
        "c2": lambda r: -w(dim, r) * z_dil(dim, r),
        "c3": lambda r: r * w_r(dim, r) * z_dil(dim, r),
        "c4": lambda r: r * r * w(dim, r) ** p * z_dil(dim, r),
        # Z_1^2 averages to |grad W|^2 / N over spheres.
        "c5": lambda r: p / N * w(dim, r) ** (p - 1) * w_r(dim, r) ** 2,
    }


@lru_cache(maxsize=None)
def compute_constants(N, rtol=1e-13):
    dim = dimension(N)
    vals = {}
    for name, prof in _integrands(dim).items():
        res = radial_integral(dim, prof, rtol=rtol)
        vals[name] = Constant(float(res), float(res.error))
    return ConstantsTable(N, *vals.values(), *hat_constants(N))


def doubled_constants(N, rtol=1e-13):
    """The same constants with every adaptive panel bisected once."""
    dim = dimension(N)
    out = {}
    for name, prof in _integrands(dim).items():
        f = radial_integrand(dim, prof)
        res = integrate(f, 0.0, np.inf, rtol=rtol)
        out[name] = refine(f, 0.0, np.inf, res)
    return out


def c2_closed_form(N):
    """int W^2 through the Beta function: alpha^2 |S^{N-1}| B(N/2, N/2-2)/2."""
    dim = dimension(N)
    beta = math.gamma(N / 2) * math.gamma(N / 2 - 2) / math.gamma(N - 2)
    return dim.alpha**2 * dim.sphere_area * beta / 2


def verify_identity_c2(N, table=None):
    """|c2 - int W^2| / c2, the second integral taken independently."""
    table = table or compute_constants(N)
    dim = dimension(N)
    w2 = radial_integral(dim, lambda r: w(dim, r) ** 2)
    c2 = table.c2.value
    return abs(c2 - w2) / c2


def green_brackets(N):
    """The two rational brackets that must vanish identically (exact Fractions)."""
    hc1, hc2, hc3 = hat_constants(N)
    kinv = Fraction(N - 2, 4 * (N - 1))
    bracket_s = 2 * hc1 + 2 * N * hc2 - 4 * (N - 2) * hc2 - kinv
    bracket_h = 2 * N * hc3 - 4 * (N - 2) * hc3 - kinv
    return bracket_s, bracket_h


def verify_cancellations(N, table=None):
    """Relative residuals (S, h, green_S, green_h) of the dilation-orthogonality identities."""
    table = table or compute_constants(N)
    c2, c3, c4 = table.c2.value, table.c3.value, table.c4.value
    h1, h2, h3 = (float(x) for x in (table.hc1, table.hc2, table.hc3))
    kinv = (N - 2) / (4 * (N - 1))
    res_s = (
        -(2 * h1 + 2 * N * h2 - kinv) * c2
        + (4 * h1 / N + 4 * h2 - 1 / (3 * N)) * c3
        + 4 / (N - 2) * (h1 / N + h2) * c4
    )
    res_h = -(2 * N * h3 - kinv) * c2 + 4 * h3 * c3 + 4 / (N - 2) * h3 * c4 - kinv * c2
    gs, gh = green_brackets(N)
    return abs(res_s) / c2, abs(res_h) / c2, abs(float(gs)), abs(float(gh))


def verify_E0_decay(N, radii=None, control=False, ric=None, directions=16, seed=0):
    """Log-log slope of the spherical sup of the scaled leading error on large radii."""
    from .profile import CurvatureData, scaled_error

    radii = np.geomspace(1e2, 1e4, 21) if radii is None else np.asarray(radii, float)
    if radii.size < 4 or radii.max() / radii.min() < 10:
        raise DomainError("decay fit needs at least 4 radii spanning a decade")
    ric = np.zeros((N, N)) if ric is None else np.asarray(ric, float)
    curv = CurvatureData(ric=ric, scal=float(np.trace(ric)), hval=1.0)
    rng = np.random.default_rng(seed)
    dirs = np.vstack([np.eye(N), rng.normal(size=(directions, N))])
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    sups = []
    for r in radii:
        vals = scaled_error(N, curv, r * dirs, drop_hc3=control)
        sups.append(np.max(np.abs(vals)))
    slope = np.polyfit(np.log(radii), np.log(sups), 1)[0]
    return float(slope)
