"""Flat tori and the round sphere: conformal Laplacian, Green's functions, energy.

Torus fields live on uniform tensor grids and are differentiated with FFTs.
Sphere fields are zonal (functions of the polar angle) and are expanded in
Gegenbauer polynomials, which diagonalize the Laplace-Beltrami operator.
"""

from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np
from scipy import special

from .bubble import dimension
from .errors import DomainError, NumericError
from .quadrature import hat_constants


@dataclass(frozen=True)
class Perturbation:
    """Potential h: a constant or a callable of points (last axis N)."""

    h: object
    z0: np.ndarray = None

    def __call__(self, x):
        x = np.asarray(x, float)
        if callable(self.h):
            return np.asarray(self.h(x), float)
        return np.full(x.shape[:-1], float(self.h))

    @property
    def constant(self):
        return not callable(self.h)

    def at_center(self, N):
        z0 = np.zeros(N) if self.z0 is None else np.asarray(self.z0, float)
        val = float(self(z0[None, :])[0])
        if not val > 0:
            raise DomainError("h must be positive at the blow-up point")
        return val


# --- flat torus ----------------------------------------------------------------

@dataclass(frozen=True)
class TorusGrid:
    shape: tuple
    periods: tuple

    @cached_property
    def axes(self):
        return [np.arange(n) * L / n for n, L in zip(self.shape, self.periods)]

    @cached_property
    def points(self):
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    @cached_property
    def wavenumbers(self):
        return [2 * np.pi * np.fft.fftfreq(n, d=L / n) for n, L in zip(self.shape, self.periods)]

    @cached_property
    def ksq(self):
        ks = np.meshgrid(*self.wavenumbers, indexing="ij")
        return sum(k * k for k in ks)

    @property
    def cell(self):
        return float(np.prod([L / n for n, L in zip(self.shape, self.periods)]))


@dataclass(frozen=True)
class Torus:
    N: int
    periods: tuple = None

    kind = "flat_torus"

    def __post_init__(self):
        dimension(self.N)
        per = (2 * np.pi,) * self.N if self.periods is None else tuple(float(L) for L in self.periods)
        if len(per) != self.N or min(per) <= 0:
            raise DomainError("torus needs N positive periods")
        object.__setattr__(self, "periods", per)

    scal = 0.0

    def ric_at(self, z=None):
        return np.zeros((self.N, self.N))

    @property
    def vol(self):
        return float(np.prod(self.periods))

    def grid(self, n):
        return TorusGrid((int(n),) * self.N, self.periods)

    def wrap(self, x):
        """Representative of x - 0 in the centred fundamental cell."""
        L = np.asarray(self.periods)
        return x - L * np.round(x / L)


def _check_grid(grid, u):
    if tuple(np.shape(u)) != tuple(grid.shape):
        raise DomainError(f"field of shape {np.shape(u)} does not match grid {grid.shape}")


def torus_laplacian(grid, u):
    _check_grid(grid, u)
    return np.real(np.fft.ifftn(-grid.ksq * np.fft.fftn(u)))


def torus_gradient_sq(grid, u):
    uh = np.fft.fftn(u)
    out = np.zeros(grid.shape)
    for axis, k in enumerate(grid.wavenumbers):
        shape = [1] * len(grid.shape)
        shape[axis] = -1
        out += np.real(np.fft.ifftn(1j * k.reshape(shape) * uh)) ** 2
    return out


# --- round sphere (zonal) --------------------------------------------------------

@dataclass(frozen=True)
class ZonalGrid:
    """Gauss-Gegenbauer nodes in x = cos(theta) for zonal fields on S^N."""

    N: int
    n: int

    @cached_property
    def _rule(self):
        lam = (self.N - 1) / 2
        x, wts = special.roots_gegenbauer(self.n, lam)
        order = np.argsort(-x)  # north pole first
        return x[order], wts[order]

    @property
    def x(self):
        return self._rule[0]

    @property
    def theta(self):
        return np.arccos(self.x)

    @property
    def weights(self):
        """Quadrature weights for int_{S^N} f dS on zonal f."""
        area = dimension(self.N).sphere_area  # |S^{N-1}|
        return self._rule[1] * area

    @cached_property
    def basis(self):
        """Values of normalized Gegenbauer polynomials, shape (n modes, n nodes)."""
        lam = (self.N - 1) / 2
        V = np.array([special.eval_gegenbauer(l, lam, self.x) for l in range(self.n)])
        norms = np.sqrt(np.sum(V * V * self._rule[1][None, :], axis=1))
        return V / norms[:, None]

    @property
    def eigenvalues(self):
        l = np.arange(self.n)
        return -l * (l + self.N - 1)

    def analysis(self, u):
        return self.basis @ (self._rule[1] * u)

    def synthesis(self, coef):
        return coef @ self.basis


@dataclass(frozen=True)
class Sphere:
    N: int

    kind = "round_sphere"

    def __post_init__(self):
        dimension(self.N)

    @property
    def scal(self):
        return float(self.N * (self.N - 1))

    def ric_at(self, z=None):
        return (self.N - 1) * np.eye(self.N)

    @property
    def vol(self):
        return 2 * math.pi ** ((self.N + 1) / 2) / math.gamma((self.N + 1) / 2)

    def grid(self, n):
        return ZonalGrid(self.N, int(n))


def sphere_laplacian(grid, u):
    if np.shape(u) != (grid.n,):
        raise DomainError(f"zonal field of shape {np.shape(u)} does not match {grid.n} nodes")
    return grid.synthesis(grid.eigenvalues * grid.analysis(u))


# --- operator, energy, eigenvalue --------------------------------------------------

def _h_on(man, grid, hpert):
    if isinstance(man, Torus):
        return hpert(grid.points)
    # zonal potentials are callables of the polar angle
    if hpert.constant:
        return np.full(grid.n, float(hpert.h))
    return np.asarray(hpert.h(grid.theta), float)


def conformal_laplacian_apply(man, hpert, u, grid):
    """kappa Delta u - (S + h) u on the model's spectral grid."""
    kappa = dimension(man.N).kappa
    lap = torus_laplacian(grid, u) if isinstance(man, Torus) else sphere_laplacian(grid, u)
    return kappa * lap - (man.scal + _h_on(man, grid, hpert)) * u


def energy(man, hpert, u, grid):
    """Rayleigh quotient of kappa|grad u|^2 + (S + h) u^2 over the L^{p+1} norm squared."""
    dim = dimension(man.N)
    u = np.asarray(u, float)
    if not np.any(u != 0):
        raise DomainError("energy of the zero field is undefined")
    if isinstance(man, Torus):
        _check_grid(grid, u)
        wq = grid.cell
        num = np.sum(dim.kappa * torus_gradient_sq(grid, u) + (man.scal + _h_on(man, grid, hpert)) * u * u) * wq
        den = np.sum(np.abs(u) ** (dim.p + 1)) * wq
    else:
        wq = grid.weights
        num = np.sum(wq * u * (-conformal_laplacian_apply(man, hpert, u, grid)))
        den = np.sum(wq * np.abs(u) ** (dim.p + 1))
    return float(num / den ** (2 / (dim.p + 1)))


def yamabe_sphere(N):
    """N(N-1)|S^N|^{2/N}, the energy of constants on the round sphere."""
    return N * (N - 1) * Sphere(N).vol ** (2 / N)


def principal_eigenvalue(man, hpert, grid, tol=1e-12, maxiter=200, seed=0):
    """Lowest eigenvalue of -L by inverse iteration with Rayleigh quotients."""
    from scipy.sparse.linalg import LinearOperator, cg

    hvals = _h_on(man, grid, hpert)
    kappa = dimension(man.N).kappa
    if isinstance(man, Torus):
        shape, size = grid.shape, int(np.prod(grid.shape))
        apply = lambda v: -conformal_laplacian_apply(man, hpert, v.reshape(shape), grid).ravel()
        shift = man.scal + float(np.mean(hvals))
        symbol = kappa * grid.ksq + shift
        precond = lambda v: np.real(np.fft.ifftn(np.fft.fftn(v.reshape(shape)) / symbol)).ravel()
        A = LinearOperator((size, size), matvec=apply, dtype=float)
        M = LinearOperator((size, size), matvec=precond, dtype=float)
        solve = lambda b: cg(A, b, M=M, rtol=1e-14, atol=0, maxiter=500)[0]
        inner = lambda a, b: float(np.dot(a, b))
    else:
        size = grid.n
        B = grid.basis
        D = B.T @ np.diag(grid.eigenvalues) @ (B * grid._rule[1][None, :])
        Amat = -kappa * D + np.diag(man.scal + hvals)
        solve = lambda b: np.linalg.solve(Amat, b)
        apply = lambda v: Amat @ v
        wq = grid._rule[1]
        inner = lambda a, b: float(np.sum(wq * a * b))
    v = 1.0 + 0.01 * np.random.default_rng(seed).standard_normal(size)
    lam_old = np.inf
    for _ in range(maxiter):
        v = solve(v)
        v /= math.sqrt(inner(v, v))
        lam = inner(v, apply(v))
        if abs(lam - lam_old) <= tol * max(1.0, abs(lam)):
            return lam
        lam_old = lam
    raise NumericError("inverse iteration stagnated", last_values=[lam_old, lam])


def dense_conformal_matrix(man, hpert, grid):
    """Dense matrix of -L on a small torus grid (oracle for the iterative solver)."""
    size = int(np.prod(grid.shape))
    cols = []
    for j in range(size):
        e = np.zeros(size)
        e[j] = 1.0
        cols.append(-conformal_laplacian_apply(man, hpert, e.reshape(grid.shape), grid).ravel())
    return np.array(cols).T


# --- torus Green's function ------------------------------------------------------------

def _upper_gamma_ladder(a0, count, x):
    """Gamma(a0 - j, x) for j = 0..count-1 (unregularized), x > 0."""
    x = np.asarray(x, float)
    out = [None] * count
    frac = a0 - math.floor(a0)
    top = {}
    for j in range(count):
        a = a0 - j
        if a > 0:
            out[j] = special.gammaincc(a, x) * special.gamma(a)
    if a0 - (count - 1) > 0:
        return out
    # downward recurrence Gamma(a, x) = (Gamma(a+1, x) - x^a e^{-x}) / a
    start = frac if frac > 0 else 0.0
    cur = special.gammaincc(start, x) * special.gamma(start) if start > 0 else special.exp1(x)
    a = start
    top[round(a, 6)] = cur
    ex = np.exp(-x)
    while a > a0 - count + 1 - 1e-9:
        cur = (cur - x ** (a - 1) * ex) / (a - 1)
        a -= 1
        top[round(a, 6)] = cur
    for j in range(count):
        if out[j] is None:
            out[j] = top[round(a0 - j, 6)]
    return out


def _exp_integral_ladder(p0, count, u):
    """E_{p0 + j}(u) for j = 0..count-1 by upward recurrence; stable for u < 1."""
    u = np.asarray(u, float)
    out = []
    p = p0
    for j in range(count):
        if j == 0 or p <= 1:
            if abs(p - 1) < 1e-12:
                cur = special.exp1(u)
            else:
                cur = u ** (p - 1) * special.gammaincc(1 - p, u) * special.gamma(1 - p)
        else:
            cur = (np.exp(-u) - u * out[-1]) / (p - 1)
        out.append(cur)
        p += 1
    return out


@dataclass(frozen=True)
class TorusGreen:
    """G with -(kappa Delta - h) G = delta_{z0} on a flat torus, constant h > 0.

    The heat kernel is split at ``split``: short times are summed over nearby
    images in closed form (a series in h of incomplete gamma functions), long
    times through one-dimensional theta series, so every factor is separable.
    """

    man: Torus
    h: float
    z0: np.ndarray = field(default=None)
    terms: int = 30

    def __post_init__(self):
        if not self.h > 0:
            raise DomainError("constant h must be positive for an invertible operator")
        object.__setattr__(self, "z0", np.zeros(self.man.N) if self.z0 is None else np.asarray(self.z0, float))

    @cached_property
    def kappa(self):
        return dimension(self.man.N).kappa

    @cached_property
    def split(self):
        L = min(self.man.periods)
        return (1.5 * L) ** 2 / (4 * self.kappa * 40.0)

    @cached_property
    def images(self):
        N = self.man.N
        offs = np.array(np.meshgrid(*([[-1, 0, 1]] * N), indexing="ij")).reshape(N, -1).T
        order = np.argsort(np.sum(offs != 0, axis=1), kind="stable")
        return offs[order] * np.asarray(self.man.periods)

    def _short(self, r, n_dim, skip_leading=False):
        """int_0^split e^{-hs} (4 pi kappa s)^{-n/2} e^{-r^2/(4 kappa s)} ds."""
        k, s = self.kappa, self.split
        r = np.asarray(r, float)
        u = r * r / (4 * k * s)
        a0 = n_dim / 2 - 1
        total = np.zeros_like(r)
        first = 1 if skip_leading else 0
        small = u < 1
        if np.any(~small):
            # Gamma(a0 - j, u) (r^2/4k)^{j - a0}
            gam = _upper_gamma_ladder(a0, self.terms, u[~small])
            base = r[~small] ** 2 / (4 * k)
            for j in range(first, self.terms):
                coef = (-self.h) ** j / math.factorial(j)
                total[~small] += coef * base ** (j - a0) * gam[j]
        if np.any(small):
            # same terms written as s^{j - a0} E_{j + 1 - a0}(u), free of overflow as r -> 0
            ens = _exp_integral_ladder(1 - a0, self.terms, u[small])
            for j in range(first, self.terms):
                coef = (-self.h) ** j / math.factorial(j)
                total[small] += coef * s ** (j - a0) * ens[j]
        return total * (4 * math.pi * k) ** (-n_dim / 2)

    def _theta(self, x, L, s, deriv=False):
        k = self.kappa
        nmax = int(math.ceil(L / (2 * math.pi) * math.sqrt(40.0 / (k * self.split)))) + 1
        n = np.arange(1, nmax + 1)
        q = 2 * np.pi * n / L
        decay = np.exp(-k * np.multiply.outer(s, q * q))  # (S, n)
        phase = np.multiply.outer(x, q)  # (P, n)
        if deriv:
            return -2 / L * (np.sin(phase) * q) @ decay.T  # (P, S)
        return (1 + 2 * np.cos(phase) @ decay.T) / L

    @cached_property
    def _time_rule(self):
        s0, rate = self.split, self.h + self.kappa * (2 * np.pi / max(self.man.periods)) ** 2
        edges = [s0]
        while edges[-1] < s0 + 45.0 / rate:
            edges.append(s0 + (edges[-1] - s0) * 1.6 + 0.25 * s0)
        edges = np.array(edges)
        x, wq = np.polynomial.legendre.leggauss(20)
        a, b = edges[:-1], edges[1:]
        nodes = ((a + b)[:, None] + (b - a)[:, None] * x[None, :]) / 2
        weights = (b - a)[:, None] * wq[None, :] / 2
        return nodes.ravel(), weights.ravel()

    def _smooth(self, d, grad=False):
        """Long-time part: int_split^inf e^{-hs} K_s(d) ds with K_s the periodic heat kernel."""
        s, wq = self._time_rule
        ew = np.exp(-self.h * s) * wq
        thetas = [self._theta(d[:, i], L, s) for i, L in enumerate(self.man.periods)]
        prod = np.prod(thetas, axis=0)
        inv_vol = 1.0 / self.man.vol
        value = (prod - inv_vol) @ ew + math.exp(-self.h * self.split) / (self.h * self.man.vol)
        if not grad:
            return value
        g = np.zeros_like(d)
        for i, L in enumerate(self.man.periods):
            others = np.prod([t for j, t in enumerate(thetas) if j != i], axis=0) if self.man.N > 1 else 1.0
            g[:, i] = (self._theta(d[:, i], L, s, deriv=True) * others) @ ew
        return value, g

    def _displacements(self, x, pole_ok=False):
        x = np.atleast_2d(np.asarray(x, float))
        d = self.man.wrap(x - self.z0)
        r = np.linalg.norm(d, axis=1)
        if not pole_ok and np.any(r == 0):
            raise DomainError("Green's function is singular at the pole z0")
        return d, r

    @cached_property
    def reach(self):
        # images farther than this contribute below e^{-32} of the kernel prefactor
        return math.sqrt(4 * self.kappa * self.split * 32.0)

    def _images_sum(self, d, n_dim, skip_center=False, skip_leading=False):
        out = np.zeros(d.shape[0])
        reach = self.reach
        for k, off in enumerate(self.images):
            if skip_center and k == 0:
                continue
            rr = np.linalg.norm(d + off, axis=1)
            mask = rr < reach
            if np.any(mask):
                out[mask] += self._short(rr[mask], n_dim, skip_leading and k == 0)
        return out

    def __call__(self, x):
        d, _ = self._displacements(x)
        return self._images_sum(d, self.man.N) + self._smooth(d)

    def gradient(self, x):
        """d/dx G using d/dr g_n(r) = -2 pi r g_{n+2}(r) for the image part."""
        d, _ = self._displacements(x)
        return self._image_gradient(d) + self._smooth(d, grad=True)[1]

    def _image_gradient(self, d, skip_leading=False):
        grad = np.zeros_like(d)
        for k, off in enumerate(self.images):
            y = d + off
            rr = np.linalg.norm(y, axis=1)
            mask = rr < self.reach
            if np.any(mask):
                g = self._short(rr[mask], self.man.N + 2, skip_leading and k == 0)
                grad[mask] += -2 * math.pi * g[:, None] * y[mask]
        return grad

    def laplacian(self, x):
        """Away from z0 the Green's function solves kappa Delta G = h G."""
        return self.h / self.kappa * self(x)

    def normalized_deviation(self, x):
        """P(x) = gamma^{-1} kappa |x|^{N-2} G(x) - 1, free of the leading cancellation; P(z0) = 0."""
        N = self.man.N
        dim = dimension(N)
        d, r = self._displacements(x, pole_ok=True)
        out = np.zeros(len(r))
        on = r > 0
        d, r = d[on], r[on]
        lead = -special.gammainc(N / 2 - 1, r * r / (4 * self.kappa * self.split))
        rest = self._images_sum(d, N, skip_leading=True) + self._smooth(d)
        out[on] = lead + self.kappa / dim.gamma * r ** (N - 2) * rest
        return out

    def deviation_and_gradient(self, x):
        """(P, grad P) with the singular parts cancelled analytically."""
        N = self.man.N
        c = self.kappa / dimension(N).gamma
        d, r = self._displacements(x)
        a, u = N / 2 - 1, r * r / (4 * self.kappa * self.split)
        lead = -special.gammainc(a, u)
        lead_r = -2 / r * u**a * np.exp(-u) / special.gamma(a)
        smooth, smooth_grad = self._smooth(d, grad=True)
        rest = self._images_sum(d, N, skip_leading=True) + smooth
        rest_grad = self._image_gradient(d, skip_leading=True) + smooth_grad
        P = lead + c * r ** (N - 2) * rest
        grad = (lead_r / r)[:, None] * d + c * (
            (N - 2) * (r ** (N - 4) * rest)[:, None] * d + (r ** (N - 2))[:, None] * rest_grad)
        return P, grad

    def fourier_oracle(self, x, kmax):
        """Direct lattice sum of the long-time part (slow; for cross-checks only)."""
        d, _ = self._displacements(x)
        axes = [2 * np.pi * np.arange(-kmax, kmax + 1) / L for L in self.man.periods]
        ks = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.man.N)
        lam = self.kappa * np.sum(ks * ks, axis=1) + self.h
        amp = np.exp(-lam * self.split) / lam / self.man.vol
        return np.cos(d @ ks.T) @ amp


def greens_function_torus(man, h0, z0, x):
    return TorusGreen(man, float(h0), z0)(x)


# --- expansion fit ---------------------------------------------------------------------

@dataclass(frozen=True)
class ExpansionFit:
    radii: np.ndarray
    coefficients: np.ndarray  # (len(radii), N, N)
    residuals: np.ndarray
    order: float
    target: float

    @property
    def finest(self):
        return self.coefficients[0]


def _shell_directions(N, count, seed):
    rng = np.random.default_rng(seed)
    dirs = np.vstack([np.eye(N), -np.eye(N), rng.standard_normal((count, N))])
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def expand_P(green, radii, directions=120, seed=0, residual_budget=None):
    """Least-squares quadratic coefficients of P on each shell radius.

    The fitted order is the log-log slope of the deviation of the diagonal mean
    from the exact coefficient as the radius shrinks.
    """
    N = green.man.N
    radii = np.sort(np.asarray(radii, float))
    dirs = _shell_directions(N, directions, seed)
    iu = np.triu_indices(N)
    coeffs, res = [], []
    for r in radii:
        pts = green.z0 + r * dirs
        P = green.normalized_deviation(pts)
        y = r * dirs
        design = np.stack([y[:, i] * y[:, j] * (1 if i == j else 2) for i, j in zip(*iu)], axis=1)
        sol, *_ = np.linalg.lstsq(design, P, rcond=None)
        C = np.zeros((N, N))
        C[iu] = sol
        C = C + C.T - np.diag(np.diag(C))
        coeffs.append(C)
        res.append(float(np.max(np.abs(design @ sol - P)) / (r * r)))
    coeffs = np.array(coeffs)
    res = np.array(res)
    target = float(hat_constants(N)[2]) * green.h
    dev = np.abs(np.trace(coeffs, axis1=1, axis2=2) / N - target)
    order = float(np.polyfit(np.log(radii), np.log(dev + 1e-300), 1)[0]) if len(radii) > 1 else float("nan")
    if residual_budget is not None and np.any(res > residual_budget):
        raise NumericError("quadratic fit residual exceeds the cubic budget", residuals=res.tolist())
    return ExpansionFit(radii, coeffs, res, order, target)


# --- sphere Green's function (zonal) ---------------------------------------------------

@dataclass(frozen=True)
class SphereGreen:
    """Zonal Green's function of kappa Delta - (S + h) on the unit sphere, constant h."""

    N: int
    h: float = 0.0

    @cached_property
    def _params(self):
        N = self.N
        kappa = dimension(N).kappa
        lam = (N * (N - 1) + self.h) / kappa
        disc = complex((N - 1) ** 2 - 4 * lam)
        a = ((N - 1) + np.sqrt(disc)) / 2
        b = ((N - 1) - np.sqrt(disc)) / 2
        c = N / 2
        lead = special.gamma(c) * special.gamma(a + b - c) / (special.gamma(a) * special.gamma(b))
        scale = dimension(N).gamma / kappa * 2 ** (2 - N) / lead
        return a, b, c, scale

    def _hyp(self, a, b, c, s):
        if abs(np.imag(a)) < 1e-15:
            return special.hyp2f1(a.real, b.real, c, s)
        import mpmath

        return np.array([float(mpmath.re(mpmath.hyp2f1(a, b, c, float(v)))) for v in np.ravel(s)]).reshape(np.shape(s))

    def __call__(self, theta):
        theta = np.asarray(theta, float)
        if np.any(theta <= 0):
            raise DomainError("Green's function is singular at the pole")
        a, b, c, scale = self._params
        s = (1 + np.cos(theta)) / 2
        return np.real(scale) * self._hyp(a, b, c, s)

    def derivative(self, theta):
        """d/dtheta G."""
        theta = np.asarray(theta, float)
        a, b, c, scale = self._params
        s = (1 + np.cos(theta)) / 2
        dF = np.real(a * b) / c * self._hyp(a + 1, b + 1, c + 1, s)
        return np.real(scale) * dF * (-np.sin(theta) / 2)

    def second_derivative(self, theta):
        """From the zonal equation kappa (G'' + (N-1) cot G') = (S + h) G."""
        theta = np.asarray(theta, float)
        N = self.N
        kappa = dimension(N).kappa
        return (N * (N - 1) + self.h) / kappa * self(theta) - (N - 1) / np.tan(theta) * self.derivative(theta)

    def normalized_deviation(self, theta):
        dim = dimension(self.N)
        return dim.kappa / dim.gamma * np.asarray(theta) ** (self.N - 2) * self(theta) - 1
