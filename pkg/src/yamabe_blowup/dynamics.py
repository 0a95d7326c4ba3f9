"""Dilation law, the λ and ξ solution operators, and the Ricci stability test."""

from dataclasses import dataclass
from fractions import Fraction
import math

import numpy as np

from .errors import DomainError
from .integrate import integrate
from .quadrature import compute_constants


@dataclass(frozen=True)
class Exponents:
    """Small parameters and weight exponents used throughout the construction."""

    N: int
    eps0: float = 0.1
    eps1: float = 0.05
    sigma0: float = 0.5
    nu1: float | None = None
    nu2: float | None = None
    a: float | None = None
    b: float | None = None
    alpha: float | None = None
    beta: float | None = None
    delta0: float = 0.25

    def __post_init__(self):
        N, e = self.N, self.eps0
        defaults = dict(nu1=2 - e, nu2=2 - e, a=N - 4, b=3 - e, alpha=N - 5 + e, beta=3 - e)
        for k, v in defaults.items():
            if getattr(self, k) is None:
                object.__setattr__(self, k, float(v))

    @property
    def rho(self):
        return (self.N - 2) / 2 - self.alpha

    @property
    def p(self):
        return (self.N + 2) / (self.N - 2)

    def delta3_bound(self):
        N, p = self.N, self.p
        gap = self.a + self.b - (N - 2)
        return min(2.0, self.beta, self.beta * (p - 1), gap, (p - 1) * gap)

    def violations(self):
        """Names of violated constraints; empty when the block is admissible."""
        N, out = self.N, []
        tol = 1e-12
        if not (0 < self.eps0 < 1 and 0 < self.sigma0 < 1 and 0 < self.eps1 < 1):
            out.append("small parameters eps0, eps1, sigma0 must lie in (0, 1)")
        if not (self.sigma0 + self.eps0 - tol <= self.a < N - 2):
            out.append("a must lie in [sigma0 + eps0, N - 2)")
        if abs(self.alpha + self.beta - (N - 2)) > tol:
            out.append("alpha + beta must equal N - 2")
        if abs(self.b - self.beta) > tol:
            out.append("b must equal beta")
        if not 0 < self.alpha < self.a:
            out.append("alpha must lie in (0, a)")
        if not 0 < self.beta <= self.b + tol:
            out.append("beta must lie in (0, b]")
        if not self.delta3_bound() > 0:
            out.append("delta3 range is empty: need a + b > N - 2 and beta > 0")
        if not min((1 - self.eps1) * (self.a - self.alpha), self.nu2) > 0:
            out.append("delta4 range is empty: need a > alpha and nu2 > 0")
        if not self.nu1 > 0 or not self.nu2 > 0:
            out.append("nu1 and nu2 must be positive")
        if not 0 < self.delta0 < math.pi / 4:
            out.append("delta0 must lie below a quarter of the injectivity radius")
        return out

    def validate(self):
        bad = self.violations()
        if bad:
            raise DomainError("; ".join(bad))
        return self


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("time must be positive")
    return t


def mu0(N, t):
    """Model dilation sqrt(2 c1 / ((N+2) c2 t))."""
    c = compute_constants(N)
    t = _check_time(t)
    return np.sqrt(2 * c.c1.value / ((N + 2) * c.c2.value * t))


def mu_bar(N, h0, t):
    if not h0 > 0:
        raise DomainError("h(z0) must be positive")
    return mu0(N, t) / math.sqrt(h0)


def rate_amplitude(N, h0):
    """The constant sqrt(2 c1 / ((N+2) c2 h0)) with mubar(t) sqrt(t) equal to it."""
    return float(mu_bar(N, h0, 1.0))


def rk4(rhs, y0, tgrid, substeps=8):
    """Classical fixed-step RK4 through the points of ``tgrid``."""
    y = np.array(y0, dtype=float)
    out = [y.copy()]
    for ta, tb in zip(tgrid[:-1], tgrid[1:]):
        hstep = (tb - ta) / substeps
        t = ta
        for _ in range(substeps):
            k1 = rhs(t, y)
            k2 = rhs(t + hstep / 2, y + hstep / 2 * k1)
            k3 = rhs(t + hstep / 2, y + hstep / 2 * k2)
            k4 = rhs(t + hstep, y + hstep * k3)
            y = y + hstep / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += hstep
        out.append(y.copy())
    return np.array(out)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


def _cell_integrals(g, grid):
    """Integrals of g over consecutive cells of ``grid`` (12-point Gauss-Legendre)."""
    a, b = grid[:-1], grid[1:]
    c, hw = (a + b) / 2, (b - a) / 2
    nodes = c[:, None] + hw[:, None] * _GL_X[None, :]
    vals = g(nodes.ravel()).reshape(nodes.shape + np.shape(g(np.array([c[0]])))[1:])
    return np.tensordot(_GL_W, np.moveaxis(vals, 1, 0), axes=1) * hw.reshape((-1,) + (1,) * (vals.ndim - 2))


def _grid(t0, tgrid):
    tgrid = _check_time(tgrid)
    if abs(tgrid[0] - t0) > 1e-12 * t0 or np.any(np.diff(tgrid) <= 0):
        raise DomainError("time grid must start at t0 and increase")
    return tgrid


@dataclass
class ParameterPath:
    t: np.ndarray
    lam: np.ndarray
    lam_dot: np.ndarray
    xi: np.ndarray
    xi_dot: np.ndarray
    mubar: np.ndarray
    mubar_dot: np.ndarray

    @property
    def mu(self):
        return self.mubar + self.lam

    @classmethod
    def from_solutions(cls, N, h0, t, lam=None, lam_dot=None, xi=None, xi_dot=None):
        t = np.asarray(t, float)
        z1 = np.zeros_like(t)
        zN = np.zeros((t.size, N))
        mb = mu_bar(N, h0, t)
        path = cls(t, z1 if lam is None else lam, z1 if lam_dot is None else lam_dot,
                   zN if xi is None else xi, zN if xi_dot is None else xi_dot, mb, -mb / (2 * t))
        if np.any(path.mu <= 0):
            raise DomainError("dilation must stay positive along the path")
        return path

    def at(self, t):
        """Linear interpolation of every channel at time t (for sampling between nodes)."""
        def lin(a):
            a = np.asarray(a)
            if a.ndim == 1:
                return np.interp(t, self.t, a)
            return np.array([np.interp(t, self.t, a[:, i]) for i in range(a.shape[1])])
        return {k: lin(getattr(self, k)) for k in ("lam", "lam_dot", "xi", "xi_dot", "mubar", "mubar_dot")}


def solve_lambda(f, t0, tgrid):
    """λ(t) = t^{-3/2} ∫_{t0}^t s^{3/2} f(s) ds and its derivative f - 3λ/(2t)."""
    t = _grid(t0, tgrid)
    cells = _cell_integrals(lambda s: s**1.5 * f(s), t)
    lam = t**-1.5 * np.concatenate([[0.0], np.cumsum(cells)])
    return lam, f(t) - 1.5 * lam / t


@dataclass(frozen=True)
class RicciMatrix:
    m: np.ndarray
    sigma: np.ndarray
    vecs: np.ndarray

    @classmethod
    def from_ricci(cls, N, ric, h0):
        ric = np.asarray(ric, dtype=float)
        m = -(N - 4) / (6 * h0) * ric
        return cls.from_matrix(m)

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=float)
        if not np.allclose(m, m.T, atol=1e-14):
            raise DomainError("translation matrix must be symmetric")
        s, v = np.linalg.eigh(m)
        return cls(m, s, v)

    def decomposition_residual(self):
        return float(np.max(np.abs(self.vecs @ np.diag(self.sigma) @ self.vecs.T - self.m)))


def solve_xi(f, ricmat, nu, t0, tgrid):
    """Decaying solution of ξ' + M ξ / t = f with the per-eigenvalue branch choice.

    ``f`` maps an array of times of shape (k,) to shape (k, N).
    """
    t = _grid(t0, tgrid)
    crit = nu / 2 - 1
    if np.any(np.abs(ricmat.sigma - crit) < 1e-6):
        raise DomainError("an eigenvalue equals nu/2 - 1; shift nu by a small epsilon")
    V = ricmat.vecs
    rot = lambda s: f(s) @ V  # components along eigenvectors
    xi_t = np.zeros((t.size, V.shape[0]))
    for i, sig in enumerate(ricmat.sigma):
        g = lambda s, i=i, sig=sig: s**sig * rot(s)[:, i]
        cells = _cell_integrals(g, t)
        if sig >= crit:
            acc = np.concatenate([[0.0], np.cumsum(cells)])
            xi_t[:, i] = t**-sig * acc
        else:
            tail = integrate(lambda s: g(np.asarray(s, float)), t[-1], np.inf, rtol=1e-12, atol=1e-300)
            acc = np.concatenate([np.cumsum(cells[::-1])[::-1], [0.0]]) + float(tail)
            xi_t[:, i] = -t**-sig * acc
    xi = xi_t @ V.T
    xi_dot = f(t) - (xi @ ricmat.m.T) / t[:, None]
    return xi, xi_dot


def holder_seminorm(t, values, sigma, t0=None):
    """Sampled [g]_{C^{sigma/2}} over the window (max(t0, t-1), t) at each grid time."""
    t = np.asarray(t, float)
    v = np.asarray(values, float)
    if v.ndim == 1:
        v = v[:, None]
    t0 = t[0] if t0 is None else t0
    out = np.zeros(t.size)
    for k in range(t.size):
        lo = max(t0, t[k] - 1.0)
        idx = np.nonzero((t >= lo) & (t <= t[k]))[0]
        if idx.size < 2:
            continue
        ts, vs = t[idx], v[idx]
        dt = np.abs(ts[:, None] - ts[None, :])
        dv = np.sum(np.abs(vs[:, None, :] - vs[None, :, :]), axis=-1)
        np.fill_diagonal(dt, np.inf)
        out[k] = np.max(dv / dt ** (sigma / 2))
    return out


def norm_nu_sigma(N, t, values, nu, sigma):
    """sup mu0^{-nu} (|g| + sampled Hölder seminorm); vector values are summed."""
    v = np.asarray(values, float)
    absval = np.abs(v) if v.ndim == 1 else np.sum(np.abs(v), axis=1)
    semi = holder_seminorm(t, v, sigma)
    return float(np.max(mu0(N, t) ** (-nu) * (absval + semi)))


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    min_sigma: object
    margin: object
    exact: bool


def stability_predicate(N, ric, h0):
    """Largest Ricci eigenvalue <= -6 h0/(N-4), equivalently min sigma >= 1.

    Diagonal input given as integers or Fractions is evaluated exactly.
    """
    entries = np.asarray(ric, dtype=object)
    diagonal = all(entries[i, j] == 0 for i in range(N) for j in range(N) if i != j)
    rational = all(isinstance(x, (int, Fraction, np.integer)) for x in entries.ravel()) and isinstance(
        h0, (int, Fraction, np.integer))
    if diagonal and rational:
        eig = [Fraction(entries[i, i]) for i in range(N)]
        h0 = Fraction(h0)
        sig = [-Fraction(N - 4, 6) / h0 * e for e in eig]
        min_sigma = min(sig)
        by_ricci = max(eig) <= -Fraction(6, N - 4) * h0
        exact = True
    else:
        eig = np.linalg.eigvalsh(np.asarray(ric, dtype=float))
        min_sigma = float(np.min(-(N - 4) / (6 * float(h0)) * eig))
        by_ricci = bool(eig.max() <= -6 * float(h0) / (N - 4) * (1 - 1e-14))
        exact = False
    by_sigma = min_sigma >= 1 if exact else min_sigma >= 1 - 1e-12
    if by_ricci != by_sigma:
        raise AssertionError("Ricci and sigma phrasings of the predicate disagree")
    return StabilityReport(bool(by_sigma), min_sigma, min_sigma - 1, exact)


def verify_ode_reduction(N, path, n, times, **kw):
    """Fitted mu0-power of |∫E2 Z_n - reduced term| along ``times`` (flat torus)."""
    from .approximate import projection_defects

    defects = projection_defects(N, path, n, times, **kw)
    m0 = mu0(N, np.asarray(times, float))
    slope = np.polyfit(np.log(m0), np.log(np.abs(defects) + 1e-300), 1)[0]
    return float(slope), defects
