"""Stereographic lift R^N -> S^N, the weighted push-forward, and spectral linear solves.

Fields on the sphere are kept in a separated form: a sum of terms
``g(t) * Y(omega) * f(z)`` with ``z = y~_{N+1}``, ``omega`` the direction of
``(y~_1, ..., y~_N)`` and ``Y`` a spherical harmonic of degree ``m`` on
S^{N-1}.  The degree-l harmonics carrying the angular factor ``Y`` are
``(1 - z^2)^{m/2} C^{lam+m}_{l-m}(z) Y(omega)`` with ``lam = (N-1)/2``, so
each term is projected onto one Gegenbauer family and evolved mode by mode.
"""

from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np
from scipy import special

from .bubble import dimension, w, z0_norm
from .errors import DomainError, NumericError
from .integrate import integrate, sphere_rule


# --- the lift --------------------------------------------------------------------------

def to_sphere(y):
    """Pi(y) = (2y / (1+|y|^2), (|y|^2 - 1) / (|y|^2 + 1))."""
    y = np.asarray(y, float)
    r2 = np.sum(y * y, axis=-1, keepdims=True)
    return np.concatenate([2 * y / (1 + r2), (r2 - 1) / (r2 + 1)], axis=-1)


def to_plane(yt):
    """Inverse of ``to_sphere``; the north pole (0, ..., 0, 1) has no preimage."""
    yt = np.asarray(yt, float)
    head, z = yt[..., :-1], yt[..., -1:]
    s2 = np.sum(head * head, axis=-1, keepdims=True)
    if np.any((s2 == 0) & (z > 0)):
        raise DomainError("the north pole is the image of infinity")
    # 1 - z = s2 / (1 + z) avoids cancellation near the north pole
    with np.errstate(divide="ignore", invalid="ignore"):
        one_minus_z = np.where(z > 0, s2 / (1 + z), 1 - z)
    return head / one_minus_z


@dataclass(frozen=True)
class LiftMap:
    N: int
    direction: str = "to_sphere"

    def __post_init__(self):
        dimension(self.N)
        if self.direction not in ("to_sphere", "to_plane"):
            raise DomainError("direction must be 'to_sphere' or 'to_plane'")

    def __call__(self, pts):
        return to_sphere(pts) if self.direction == "to_sphere" else to_plane(pts)

    def inverse(self):
        return LiftMap(self.N, "to_plane" if self.direction == "to_sphere" else "to_sphere")


def conformal_factor(y):
    """Lambda(y) = 2 / (1 + |y|^2), the metric scale of the lift."""
    y = np.asarray(y, float)
    return 2 / (1 + np.sum(y * y, axis=-1))


def pushforward(f, y, N=None):
    """(Pi_* f)(Pi(y)) = ((1+|y|^2)/2)^{(N-2)/2} f(y) for a sampler ``f`` of plane points."""
    y = np.atleast_2d(np.asarray(y, float))
    N = y.shape[-1] if N is None else N
    return conformal_factor(y) ** (-(N - 2) / 2) * f(y)


def pullback(phi, y, N=None):
    """Inverse of the push-forward: plane values of a sampler ``phi`` of sphere points."""
    y = np.atleast_2d(np.asarray(y, float))
    N = y.shape[-1] if N is None else N
    return conformal_factor(y) ** ((N - 2) / 2) * phi(to_sphere(y))


def pushed_bubble_constant(N):
    """The constant value of Pi_* W, (N(N-2)/4)^{(N-2)/4}."""
    return (N * (N - 2) / 4) ** ((N - 2) / 4)


def mode_purity(values, target, weights):
    """Weighted correlation between sampled ``values`` and ``target``; 1 means proportional."""
    num = np.sum(weights * values * target)
    den = math.sqrt(np.sum(weights * values**2) * np.sum(weights * target**2))
    if den == 0:
        raise DomainError("zero field has no direction")
    return float(num / den)


def sphere_quadrature(N, degree=12):
    """Product rule on S^N in R^{N+1}; exact for polynomials of degree < 2*degree."""
    return sphere_rule(N, degree)


# --- separated sphere fields --------------------------------------------------------------

@dataclass(frozen=True)
class AngularHarmonic:
    """A degree-m spherical harmonic on S^{N-1}, evaluated on unit vectors."""

    m: int
    func: object
    label: str = ""

    @classmethod
    def constant(cls):
        return cls(0, lambda om: np.ones(om.shape[:-1]), "1")

    @classmethod
    def coordinate(cls, i):
        return cls(1, lambda om: om[..., i], f"w{i + 1}")

    def moments(self, N, degree=None):
        """(int Y, int Y omega_n for n = 1..N, int Y^2) over S^{N-1}."""
        pts, wts = sphere_rule(N - 1, degree or self.m + 4)
        vals = self.func(pts)
        return float(wts @ vals), wts @ (vals[:, None] * pts), float(wts @ vals**2)


def _split(yt):
    yt = np.atleast_2d(np.asarray(yt, float))
    head, z = yt[:, :-1], yt[:, -1]
    s = np.linalg.norm(head, axis=1)
    om = np.where(s[:, None] > 0, head / np.where(s > 0, s, 1.0)[:, None], 0.0)
    if om.shape[1]:
        om[s == 0, 0] = 1.0
    return z, om


@dataclass(frozen=True)
class SphereTerm:
    """g(t) * Y(omega) * f(z); ``time`` None means g = 1."""

    Y: AngularHarmonic
    profile: object
    time: object = None

    def g(self, t):
        t = np.asarray(t, float)
        return np.ones_like(t) if self.time is None else np.asarray(self.time(t), float) * np.ones_like(t)

    def __call__(self, yt, t=None):
        z, om = _split(yt)
        amp = 1.0 if t is None else float(self.g(t))
        return amp * self.Y.func(om) * self.profile(z)


def _gegenbauer_norm(n, a):
    """int_{-1}^{1} C^a_n(z)^2 (1-z^2)^{a-1/2} dz."""
    return math.exp(
        math.log(math.pi) + (1 - 2 * a) * math.log(2) + math.lgamma(n + 2 * a)
        - math.lgamma(n + 1) - math.log(n + a) - 2 * math.lgamma(a)
    )


@dataclass(frozen=True)
class ZonalBasis:
    """Degree l = m..Lmax harmonics (1-z^2)^{m/2} C^{lam+m}_{l-m}(z) for one angular degree m."""

    N: int
    m: int
    Lmax: int
    nodes: int

    @cached_property
    def param(self):
        return (self.N - 1) / 2 + self.m

    @cached_property
    def rule(self):
        # Gauss-Gegenbauer nodes carry the full weight (1-z^2)^{(N-2)/2 + m}
        z, wz = special.roots_gegenbauer(self.nodes, self.param)
        return z, wz

    @cached_property
    def degrees(self):
        return np.arange(self.m, self.Lmax + 1)

    @cached_property
    def table(self):
        """C^{param}_{l-m}(z_i) for every degree, shape (len(degrees), nodes)."""
        z = self.rule[0]
        return np.array([special.eval_gegenbauer(l - self.m, self.param, z) for l in self.degrees])

    @cached_property
    def norms(self):
        return np.array([_gegenbauer_norm(l - self.m, self.param) for l in self.degrees])

    def project(self, f):
        """Coefficients of f(z) in the (1-z^2)^{m/2} C_{l-m}(z) basis (weight (1-z^2)^{(N-2)/2})."""
        z, wz = self.rule
        g = f(z) / (1 - z * z) ** (self.m / 2)
        return self.table @ (wz * g) / self.norms

    def synthesize(self, coef, z):
        z = np.asarray(z, float)
        vals = np.array([special.eval_gegenbauer(l - self.m, self.param, z) for l in self.degrees])
        return (1 - z * z) ** (self.m / 2) * (coef @ vals)

    def tail_fraction(self, coef, width=8):
        """Share of the L2 energy in the top ``width`` degrees."""
        e = coef**2 * self.norms
        tot = e.sum()
        return float(e[-width:].sum() / tot) if tot > 0 else 0.0


def sphere_eigenvalue(N, l):
    return -l * (l + N - 1)


def mode_rate(N, l):
    """Decay rate (kappa/N)(N - l(l+N-1)) of degree l under the lifted linear flow."""
    return dimension(N).kappa / N * (N + sphere_eigenvalue(N, l))


def _weighted_cell(r, g, a, b, order=12):
    """int_a^b exp(r (b - s)) g(s) ds with panels resolving the exponential layer."""
    length = b - a
    if r < 0:
        span = min(length, 60.0 / -r)
        pieces = max(1, int(math.ceil(span * -r / 2)))
        edges = b - np.linspace(0.0, span, pieces + 1)
    else:
        pieces = max(1, int(math.ceil(length * max(r, 1e-300) / 2)))
        edges = b - np.linspace(0.0, length, pieces + 1)
    x, wq = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[1:], edges[:-1]
    s = (hi - lo)[:, None] / 2 * x[None, :] + (hi + lo)[:, None] / 2
    ws = (hi - lo)[:, None] / 2 * wq[None, :]
    return float(np.sum(ws * np.exp(r * (b - s)) * g(s.ravel()).reshape(s.shape)))


@dataclass
class SphereSolution:
    """Modal solution path of the lifted linear problem on S^N."""

    N: int
    terms: list
    bases: list
    t: np.ndarray
    coef: list  # per term, array (len(t), len(degrees))
    source_coef: list
    c0: np.ndarray
    tail: float

    def __call__(self, yt, k):
        z, om = _split(yt)
        total = np.zeros(len(z))
        for term, basis, c in zip(self.terms, self.bases, self.coef):
            total += term.Y.func(om) * basis.synthesize(c[k], z)
        return total

    def time_derivative(self, yt, k):
        """phi_t from the modal ODEs (no differencing)."""
        z, om = _split(yt)
        p = dimension(self.N).p
        total = np.zeros(len(z))
        for term, basis, c, a in zip(self.terms, self.bases, self.coef, self.source_coef):
            rates = np.array([mode_rate(self.N, l) if l > 0 else 0.0 for l in basis.degrees])
            dc = rates * c[k] + a * float(term.g(self.t[k])) / p
            if basis.m == 0:
                dc[0] = 0.0
            total += term.Y.func(om) * basis.synthesize(dc, z)
        return total

    def moments(self, k):
        """(int phi dS, int phi y~_n dS for n = 1..N+1) at time index k."""
        N = self.N
        m0 = np.zeros(N + 2)
        for term, basis, c in zip(self.terms, self.bases, self.coef):
            mean_y, mom_y, _ = term.Y.moments(N)
            if basis.m == 0:
                m0[0] += mean_y * c[k][0] * basis.norms[0]
                if basis.Lmax >= 1:
                    m0[N + 1] += mean_y * c[k][1] * basis.norms[1] / (2 * basis.param)
            if basis.m == 1:
                m0[1:N + 1] += mom_y * c[k][0] * basis.norms[0]
        return m0


def _source_moments(N, terms, nodes):
    """Per term: (int f(z) dmu, int f z dmu, int f sqrt(1-z^2) dmu) with dmu = (1-z^2)^{(N-2)/2} dz."""
    z, wz = special.roots_gegenbauer(nodes, (N - 1) / 2)
    out = []
    for term in terms:
        f = term.profile(z)
        out.append((wz @ f, wz @ (f * z), wz @ (f * np.sqrt(1 - z * z))))
    return out


def mode_one_projection(N, terms, t, nodes=512):
    """int H~(., t) dS and int H~(., t) y~_n dS (n = 1..N+1), plus the L2 norm of H~."""
    t = np.atleast_1d(np.asarray(t, float))
    mom = _source_moments(N, terms, nodes)
    mean = np.zeros(len(t))
    first = np.zeros((len(t), N + 1))
    z, wz = special.roots_gegenbauer(nodes, (N - 1) / 2)
    # L2 norms by a product rule on omega and the z rule
    om, wom = sphere_rule(N - 1, max(4, max(term.Y.m for term in terms) + 2))
    vals = np.zeros((len(t), len(z), len(om)))
    for term, (f0, fz, fs) in zip(terms, mom):
        g = term.g(t)
        mean_y, mom_y, _ = term.Y.moments(N)
        mean += g * mean_y * f0
        first[:, N] += g * mean_y * fz
        first[:, :N] += np.outer(g, mom_y * fs)
        vals += g[:, None, None] * np.outer(term.profile(z), term.Y.func(om))[None]
    l2 = np.sqrt(np.einsum("tij,i,j->t", vals**2, wz, wom))
    return mean, first, l2


def sphere_linear_solve(terms, N, t0, tgrid, Lmax=64, nodes=None, tol=1e-8):
    """Solve p phi_t = (kappa p/N)(Delta phi + N phi) + H~ - c~0(t), phi(t0) = 0, mode by mode."""
    dim = dimension(N)
    p = dim.p
    t = np.asarray(tgrid, float)
    if t[0] != t0 or np.any(np.diff(t) <= 0):
        raise DomainError("time grid must start at t0 and increase")
    if Lmax < 2:
        raise DomainError("need Lmax >= 2")
    nodes = nodes or 4 * Lmax + 64
    for term in terms:
        if term.Y.m > Lmax:
            raise DomainError("angular degree exceeds the harmonic truncation")
    area = 2 * math.pi ** ((N + 1) / 2) / math.gamma((N + 1) / 2)
    if terms:
        mean, first, l2 = mode_one_projection(N, terms, t, nodes)
        scale = np.max(l2) * math.sqrt(area / (N + 1))
        bad = np.max(np.abs(first)) / scale if scale > 0 else 0.0
        if bad > tol:
            n_bad = int(np.argmax(np.max(np.abs(first), axis=0))) + 1
            raise DomainError(f"source is not orthogonal to y~_{n_bad}: relative projection {bad:.2e} > {tol:.0e}")
        c0 = mean / area
    else:
        c0 = np.zeros(len(t))
    bases, coefs, srcs = [], [], []
    tail = 0.0
    for term in terms:
        basis = ZonalBasis(N, term.Y.m, Lmax, nodes)
        a = basis.project(term.profile)
        tail = max(tail, basis.tail_fraction(a))
        rates = np.array([mode_rate(N, l) for l in basis.degrees])
        c = np.zeros((len(t), len(a)))
        for k in range(1, len(t)):
            for i, l in enumerate(basis.degrees):
                if l == 0:
                    continue  # removed exactly by c~0
                r = rates[i]
                forced = a[i] / p * _weighted_cell(r, term.g, t[k - 1], t[k])
                c[k, i] = math.exp(r * (t[k] - t[k - 1])) * c[k - 1, i] + forced
        bases.append(basis)
        coefs.append(c)
        srcs.append(a)
    return SphereSolution(N, list(terms), bases, t, coefs, srcs, c0, tail)


# --- plane problem --------------------------------------------------------------------------

@dataclass(frozen=True)
class PlaneTerm:
    """g(t) * R(|y|) * Y(y / |y|) on R^N."""

    Y: AngularHarmonic
    radial: object
    time: object = None

    def g(self, t):
        t = np.asarray(t, float)
        return np.ones_like(t) if self.time is None else np.asarray(self.time(t), float) * np.ones_like(t)

    def __call__(self, y, t=None):
        y = np.atleast_2d(np.asarray(y, float))
        r = np.linalg.norm(y, axis=1)
        om = np.where(r[:, None] > 0, y / np.where(r > 0, r, 1.0)[:, None], 0.0)
        amp = 1.0 if t is None else float(self.g(t))
        return amp * self.radial(r) * self.Y.func(om)

    def lifted(self, N):
        """The same source as a sphere term: (1 - z)^{-(N-2)/2} R(sqrt((1+z)/(1-z)))."""
        R = self.radial

        def prof(z):
            z = np.asarray(z, float)
            rho = np.sqrt((1 + z) / (1 - z))
            return (1 - z) ** (-(N - 2) / 2) * R(rho)

        return SphereTerm(self.Y, prof, self.time)


def kernel_projections(N, terms, t, rmax=np.inf):
    """int H W^{p-1} Z_n dy for n = 0..N+1 by radial quadrature (angular parts exact)."""
    from .bubble import _g_trans, z_dil

    dim = dimension(N)
    p = dim.p
    area = dim.sphere_area
    t = np.atleast_1d(np.asarray(t, float))
    out = np.zeros((len(t), N + 2))
    for term in terms:
        mean_y, mom_y, _ = term.Y.moments(N)
        g = term.g(t)
        wp = lambda r: w(dim, r) ** (p - 1)
        rad0 = float(integrate(lambda r: term.radial(r) * wp(r) * z0_norm(N) * w(dim, r) * r ** (N - 1), 0, rmax))
        radd = float(integrate(lambda r: term.radial(r) * wp(r) * z_dil(dim, r) * r ** (N - 1), 0, rmax))
        radt = float(integrate(lambda r: term.radial(r) * wp(r) * _g_trans(dim, r) * r**N, 0, rmax))
        out[:, 0] += g * mean_y * rad0
        out[:, N + 1] += g * mean_y * radd
        out[:, 1:N + 1] += np.outer(g, mom_y * radt)
    return out


@dataclass
class PlaneSolution:
    N: int
    sphere: SphereSolution
    t: np.ndarray
    c0: np.ndarray
    e0: np.ndarray

    def phi(self, y, k):
        return pullback(lambda yt: self.sphere(yt, k), y, self.N)

    def __call__(self, y, k):
        dim = dimension(self.N)
        y = np.atleast_2d(np.asarray(y, float))
        z0 = z0_norm(self.N) * w(dim, np.linalg.norm(y, axis=1))
        return self.phi(y, k) + self.e0[k] * z0

    def time_derivative(self, y, k):
        dim = dimension(self.N)
        y = np.atleast_2d(np.asarray(y, float))
        z0 = z0_norm(self.N) * w(dim, np.linalg.norm(y, axis=1))
        e0_dot = dim.kappa * self.e0[k] + self.c0[k] / dim.p
        return pullback(lambda yt: self.sphere.time_derivative(yt, k), y, self.N) + e0_dot * z0


def _e0_path(N, terms, weights, t, floor=1e-14):
    """e0(t) = -(1/p) int_t^inf exp(kappa (t - tau)) c0(tau) d tau, c0 = sum_j weights_j g_j."""
    dim = dimension(N)
    horizon = -math.log(floor) / dim.kappa
    out = np.zeros(len(t))
    for term, wj in zip(terms, weights):
        if wj == 0:
            continue
        for k, tk in enumerate(t):
            res = integrate(lambda s: np.exp(-dim.kappa * s) * term.g(tk + s), 0.0, horizon, rtol=1e-12)
            out[k] += wj * float(res)
    tails = [float(np.max(np.abs(term.g(t + horizon)))) for term in terms]
    if tails and max(tails) * math.exp(-dim.kappa * horizon) > 1e-10 * max(1.0, np.max(np.abs(out))):
        raise NumericError("c0 grows too fast for the improper e0 integral", horizon=horizon)
    return -out / dim.p


def plane_inner_solve(terms, N, t0, tgrid, Lmax=64, nodes=None, tol=1e-8):
    """psi with p W^{p-1} psi_t = (N+2)kappa/4 (Delta psi + p W^{p-1} psi) + W^{p-1} H, psi(t0) = e0(t0) Z0."""
    dim = dimension(N)
    t = np.asarray(tgrid, float)
    proj = kernel_projections(N, terms, t)
    # size of each term: |R| against the kernels times the RMS of its angular factor
    area = dim.sphere_area
    scale = max(1e-300, max(
        float(np.max(np.abs(kernel_projections(
            N, [PlaneTerm(AngularHarmonic.constant(), lambda r, R=tm.radial: np.abs(R(r)), tm.time)], t))))
        * math.sqrt(tm.Y.moments(N)[2] / area)
        for tm in terms)) if terms else 1.0
    viol = np.max(np.abs(proj[:, 1:]), axis=0) / scale
    if np.any(viol > tol):
        n_bad = int(np.argmax(viol)) + 1
        raise DomainError(f"source fails orthogonality against W^(p-1) Z_{n_bad}: {viol[n_bad - 1]:.2e}")
    lifted = [tm.lifted(N) for tm in terms]
    # the plane and sphere checks are the same statement; skip the redundant one
    sphere = sphere_linear_solve(lifted, N, t0, t, Lmax, nodes, tol=np.inf)
    c0 = proj[:, 0]
    weights = [kernel_projections(N, [PlaneTerm(tm.Y, tm.radial)], [t0])[0, 0] for tm in terms]
    e0 = _e0_path(N, terms, weights, t)
    return PlaneSolution(N, sphere, t, c0, e0)


def inhom_residual(sol, terms, y, k, h=1e-3):
    """W^{1-p} times the residual of the plane equation at time index k (FD Laplacian)."""
    N = sol.N
    dim = dimension(N)
    p, kappa = dim.p, dim.kappa
    y = np.atleast_2d(np.asarray(y, float))
    lap = fd_laplacian4(lambda q: sol(q, k), y, h)
    Wp = w(dim, np.linalg.norm(y, axis=1)) ** (p - 1)
    H = sum(tm(y, sol.t[k]) for tm in terms) if terms else 0.0
    res = p * Wp * sol.time_derivative(y, k) - (N + 2) * kappa / 4 * (lap + p * Wp * sol(y, k)) - Wp * H
    return res / Wp


def fd_laplacian4(f, y, h=1e-3):
    """Fourth-order central-difference Laplacian."""
    y = np.atleast_2d(np.asarray(y, float))
    f0 = f(y)
    total = -30 * y.shape[1] * f0
    for i in range(y.shape[1]):
        e = np.zeros(y.shape[1])
        e[i] = h
        total = total + 16 * (f(y + e) + f(y - e)) - (f(y + 2 * e) + f(y - 2 * e))
    return total / (12 * h * h)


# --- conformal covariance ------------------------------------------------------------------

def harmonic_basis(N, Lmax=4):
    """Test harmonics on S^N as (degree, sampler) pairs: zonal and one m=1 family."""
    lam = (N - 1) / 2
    out = []
    for l in range(Lmax + 1):
        out.append((l, lambda yt, l=l: special.eval_gegenbauer(l, lam, yt[..., -1])))
        if l >= 1:
            out.append((l, lambda yt, l=l: yt[..., 0] * special.eval_gegenbauer(l - 1, lam + 1, yt[..., -1])))
    return out


def verify_conformal_covariance(N, Lmax=4, points=None, h=2e-3, seed=0):
    """Max relative gap between Pi_*(W^{1-p}(Delta f + p W^{p-1} f)) and 4/(N(N-2))(Delta_S + N) Pi_* f.

    ``f`` runs over pull-backs of spherical harmonics, for which the right side is
    an eigenvalue multiple; the plane Laplacian is a fourth-order difference.
    """
    dim = dimension(N)
    p = dim.p
    if points is None:
        rng = np.random.default_rng(seed)
        points = rng.standard_normal((16, N)) * rng.uniform(0.2, 2.0, (16, 1))
    worst = 0.0
    for l, Y in harmonic_basis(N, Lmax):
        f = lambda q, Y=Y: pullback(Y, q, N)
        lap = fd_laplacian4(f, points, h)
        Wr = w(dim, np.linalg.norm(points, axis=1))
        lhs = pushforward(lambda q: Wr ** (1 - p) * (lap + p * Wr ** (p - 1) * f(q)), points, N)
        rhs = 4 / (N * (N - 2)) * (N + sphere_eigenvalue(N, l)) * Y(to_sphere(points))
        scale = max(1.0, float(np.max(np.abs(rhs))))
        worst = max(worst, float(np.max(np.abs(lhs - rhs))) / scale)
    return worst


def norm_ratio(sol, terms, a, b, radii=None, directions=8, seed=0):
    """Sampled ||psi||_{#',a,b} / ||H||_{#,a+2,b} (L-infinity parts), the realized linear-bound constant."""
    from .approximate import WeightSpec, _direction_set, weighted_norm

    N = sol.N
    radii = np.geomspace(1e-2, 1e3, 40) if radii is None else np.asarray(radii, float)
    ys = (radii[:, None, None] * _direction_set(N, directions, seed)[None]).reshape(-1, N)
    spec = WeightSpec(alpha=1.0, a=a, b=b)
    num = den = 0.0
    for k, tk in enumerate(sol.t):
        H = sum(tm(ys, tk) for tm in terms)
        num = max(num, weighted_norm(sol(ys, k), "sharp_prime", spec, N=N, t=tk, y=ys))
        den = max(den, weighted_norm(H, "sharp", spec, N=N, t=tk, y=ys))
    if den == 0:
        raise DomainError("zero source")
    return num / den
