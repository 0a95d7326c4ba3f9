"""First and second approximate solutions, the flow residual and weighted norms.

On the flat torus normal coordinates are Euclidean, so the approximate
solution is ``c G(x) v(x, t)`` with ``c = kappa / gamma`` and ``v`` the cut-off
blend of a rescaled bubble (plus correction) with a constant.  Inside the
inner ball we use the equivalent form ``(1 + P(x)) mu^{-(N-2)/2} V(y)``; it
avoids the cancellation between a singular Green's function and a vanishing
``|x|^{N-2}`` factor and lets residuals of size ``mu^3`` be resolved.
"""

from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np

from .bubble import dimension, lap_w, w, w_r, z_dil
from .dynamics import Exponents, mu0, mu_bar
from .errors import DomainError
from .integrate import sphere_rule
from .manifolds import SphereGreen, Torus, TorusGreen
from .profile import CurvatureData, leading_F0, leading_F1, solve_Q0


# --- smooth cutoff ---------------------------------------------------------------

def _bump(s):
    s = np.asarray(s, float)
    pos = s > 0
    safe = np.where(pos, s, 1.0)
    f = np.where(pos, np.exp(-1 / safe), 0.0)
    f1 = np.where(pos, f / safe**2, 0.0)
    f2 = np.where(pos, f * (1 / safe**4 - 2 / safe**3), 0.0)
    return f, f1, f2


def cutoff(r, delta=1.0):
    """eta(r / delta) with eta = 1 on (-inf, 1], 0 on [2, inf); returns (eta, eta', eta'')."""
    s = np.asarray(r, float) / delta
    a, a1, a2 = _bump(2 - s)
    b, b1, b2 = _bump(s - 1)
    a1, a2 = -a1, a2
    D, D1, D2 = a + b, a1 + b1, a2 + b2
    eta = a / D
    d1 = (a1 * D - a * D1) / D**2
    d2 = (a2 * D - a * D2) / D**2 - 2 * D1 * (a1 * D - a * D1) / D**3
    return eta, d1 / delta, d2 / delta**2


# --- parameter states ----------------------------------------------------------------

@dataclass(frozen=True)
class ParamState:
    """Dilation and translation parameters and their time derivatives at one time."""

    t: float
    mubar: float
    mubar_dot: float
    lam: float = 0.0
    lam_dot: float = 0.0
    xi: np.ndarray = None
    xi_dot: np.ndarray = None

    @property
    def mu(self):
        return self.mubar + self.lam

    @property
    def mu_dot(self):
        return self.mubar_dot + self.lam_dot


def model_state(N, h0, t, lam=0.0, lam_dot=0.0, xi=None, xi_dot=None):
    mb = float(mu_bar(N, h0, t))
    z = np.zeros(N)
    st = ParamState(float(t), mb, -mb / (2 * t), lam, lam_dot,
                    z if xi is None else np.asarray(xi, float), z if xi_dot is None else np.asarray(xi_dot, float))
    if not st.mu > 0:
        raise DomainError("dilation must be positive")
    return st


def path_state(path, t):
    """ParamState sampled from a ParameterPath by linear interpolation."""
    d = path.at(t)
    return ParamState(float(t), float(d["mubar"]), float(d["mubar_dot"]), float(d["lam"]), float(d["lam_dot"]),
                      np.asarray(d["xi"], float), np.asarray(d["xi_dot"], float))


# --- bubble-plus-correction profile -------------------------------------------------

@dataclass
class CoreProfile:
    """V = W + mubar^2 Q in the bubble variable, with derivatives."""

    N: int
    Q: object = None  # CorrectionProfile or None for the first approximation

    def evaluate(self, y, mubar):
        dim = dimension(self.N)
        y = np.asarray(y, float)
        r = np.sqrt(np.sum(y * y, axis=-1))
        rs = np.where(r > 0, r, 1.0)
        V = w(dim, r)
        gV = (w_r(dim, r) / rs)[..., None] * y
        lV = lap_w(dim, r)
        Qv = np.zeros_like(r)
        if self.Q is not None:
            Qv = self.Q.value(y)
            V = V + mubar**2 * Qv
            gV = gV + mubar**2 * self.Q.gradient(y)
            lV = lV + mubar**2 * self.Q.laplacian(y)
        return V, gV, lV, Qv


# --- approximate solutions -----------------------------------------------------------

@dataclass
class BubbleSpec:
    z0: np.ndarray
    state: object  # callable t -> ParamState


@dataclass
class ApproximateSolution:
    man: Torus
    h: float
    bubbles: list
    level: int
    delta0: float = 0.25
    profile: object = None
    greens: list = field(default_factory=list)

    @cached_property
    def dim(self):
        return dimension(self.man.N)

    @property
    def c(self):
        return self.dim.kappa / self.dim.gamma

    @cached_property
    def core(self):
        return CoreProfile(self.man.N, self.profile if self.level == 2 else None)

    # -- single-bubble pieces --

    def _pieces(self, k, x, t, need_lap=True):
        """Value, time derivative and Laplacian of bubble k at torus points x (v-form)."""
        N, dim = self.man.N, self.dim
        st = self.bubbles[k].state(t)
        G = self.greens[k]
        d = self.man.wrap(np.atleast_2d(x) - G.z0)
        r = np.linalg.norm(d, axis=1)
        mu, mb = st.mu, st.mubar
        y = (d - st.xi) / mu
        V, gV, lV, Qv = self.core.evaluate(y, mb)
        A = dim.alpha * mu ** ((N - 2) / 2)
        Phi = mu ** (-(N - 2) / 2) * V
        gPhi = mu ** (-N / 2) * gV
        lPhi = mu ** (-(N + 2) / 2) * lV
        ydv = np.sum(y * gV, axis=1)
        Phi_t = mu ** (-(N - 2) / 2) * (
            -(st.mu_dot / mu) * (ydv + (N - 2) / 2 * V) - gV @ st.xi_dot / mu + 2 * mb * st.mubar_dot * Qv)
        A_t = dim.alpha * (N - 2) / 2 * mu ** ((N - 4) / 2) * st.mu_dot
        eta, e1, e2 = cutoff(r, self.delta0)
        rN = r ** (N - 2)
        F = rN * Phi - A
        v = (1 - eta) * A + eta * rN * Phi
        v_t = A_t * (1 - eta) + eta * rN * Phi_t
        if not need_lap:
            # c G = (1 + P) / |x|^{N-2} keeps the value finite at the pole
            one_p = 1 + G.normalized_deviation(G.z0 + d)
            rs = np.where(r > 0, r, 1.0) ** (N - 2)
            outer = np.where(eta < 1, (1 - eta) / rs, 0.0)
            return one_p * (outer * A + eta * Phi), one_p * (outer * A_t + eta * Phi_t), None
        Gv = G(G.z0 + d)
        u = self.c * Gv * v
        u_t = self.c * Gv * v_t
        rs = np.where(r > 0, r, 1.0)
        xhat = d / rs[:, None]
        gF = (N - 2) * (r ** (N - 4) * Phi)[:, None] * d + rN[:, None] * gPhi
        lF = (N - 2) * (2 * N - 4) * r ** (N - 4) * Phi + 2 * (N - 2) * r ** (N - 4) * np.sum(d * gPhi, axis=1) + rN * lPhi
        gv = e1[:, None] * xhat * F[:, None] + eta[:, None] * gF
        lv = (e2 + (N - 1) * e1 / rs) * F + 2 * e1 * np.sum(xhat * gF, axis=1) + eta * lF
        gG = G.gradient(G.z0 + d)
        lap = self.c * (self.h / dim.kappa * Gv * v + 2 * np.sum(gG * gv, axis=1) + Gv * lv)
        return u, u_t, lap

    def value(self, x, t):
        return sum(self._pieces(k, x, t, need_lap=False)[0] for k in range(len(self.bubbles)))

    def time_derivative(self, x, t):
        return sum(self._pieces(k, x, t, need_lap=False)[1] for k in range(len(self.bubbles)))

    def fields(self, x, t):
        parts = [self._pieces(k, x, t) for k in range(len(self.bubbles))]
        return tuple(sum(p[i] for p in parts) for i in range(3))

    def residual(self, x, t):
        """S(u) = -p u^{p-1} u_t + (N+2)/4 (kappa Delta u - h u + kappa u^p), pointwise."""
        u, u_t, lap = self.fields(x, t)
        return flow_residual_values(self.man.N, u, u_t, lap, self.man.scal + self.h)

    # -- inner form --

    def inner_scaled_residual(self, y, t, k=0):
        """mu^{(N+2)/2} S(u) at x = mu y + xi for a single-bubble solution.

        Uses u = (1 + P) mu^{-(N-2)/2} V(y) and Delta P = (h/kappa)(1+P) + 2(N-2) x.grad P/|x|^2,
        which holds on a flat torus with constant h.
        """
        if len(self.bubbles) != 1:
            raise DomainError("inner form is defined for a single bubble")
        N, dim = self.man.N, self.dim
        p, kappa = dim.p, dim.kappa
        st = self.bubbles[k].state(t)
        G = self.greens[k]
        y = np.atleast_2d(np.asarray(y, float))
        mu = st.mu
        x = mu * y + st.xi
        r = np.linalg.norm(x, axis=1)
        if np.any(r > self.delta0 * (1 + 1e-12)):
            raise DomainError("inner form requires |x| <= delta0")
        P, gP = G.deviation_and_gradient(G.z0 + x)
        lP = self.h / kappa * (1 + P) + 2 * (N - 2) * np.sum(x * gP, axis=1) / r**2
        V, gV, lV, Qv = self.core.evaluate(y, st.mubar)
        one = 1 + P
        ydv = np.sum(y * gV, axis=1)
        drift = -(st.mu_dot / mu) * (ydv + (N - 2) / 2 * V) - gV @ st.xi_dot / mu + 2 * st.mubar * st.mubar_dot * Qv
        time_part = -p * one**p * V ** (p - 1) * drift
        space = kappa * (mu**2 * lP * V + 2 * mu * np.sum(gP * gV, axis=1) + one * lV)
        space += -(self.man.scal + self.h) * mu**2 * one * V + kappa * one**p * V**p
        return time_part + (N + 2) / 4 * space


def flow_residual_values(N, u, u_t, lap, potential):
    dim = dimension(N)
    return -dim.p * u ** (dim.p - 1) * u_t + (N + 2) / 4 * (dim.kappa * lap - potential * u + dim.kappa * u**dim.p)


def build_approx(man, h0, z0s, states, level=2, delta0=0.25, profile=None, min_separation=4.0):
    """Single- or multi-bubble approximate solution on a flat torus with constant h."""
    if not isinstance(man, Torus):
        raise DomainError("pointwise approximate solutions are built on the flat torus; use sphere_profile on S^N")
    if level not in (1, 2):
        raise DomainError("level must be 1 or 2")
    if not h0 > 0:
        raise DomainError("h(z0) must be positive")
    z0s = [np.asarray(z, float) for z in z0s]
    if len(z0s) != len(states):
        raise DomainError("one parameter path per bubble center is required")
    for i in range(len(z0s)):
        for j in range(i):
            if np.linalg.norm(man.wrap(z0s[i] - z0s[j])) < min_separation * delta0:
                raise DomainError(f"bubble centers {j} and {i} are closer than {min_separation} delta0")
    if level == 2 and profile is None:
        profile = solve_Q0(man.N, CurvatureData.flat(man.N, h0))
    greens = [TorusGreen(man, h0, z) for z in z0s]
    bubbles = [BubbleSpec(z, s) for z, s in zip(z0s, states)]
    return ApproximateSolution(man, h0, bubbles, level, delta0, profile, greens)


def sphere_profile(N, h0, theta, state, level=2, delta0=0.25, profile=None):
    """Zonal u^{(1)} or u^{(2)} on the unit sphere, centered at the north pole, xi = 0."""
    dim = dimension(N)
    theta = np.asarray(theta, float)
    if level == 2 and profile is None:
        profile = solve_Q0(N, CurvatureData.round_sphere(N, h0))
    core = CoreProfile(N, profile if level == 2 else None)
    mu = state.mu
    y = np.zeros(theta.shape + (N,))
    y[..., 0] = theta / mu
    V = core.evaluate(y, state.mubar)[0]
    A = dim.alpha * mu ** ((N - 2) / 2)
    eta = cutoff(theta, delta0)[0]
    G = SphereGreen(N, h0)
    # c G |x|^{N-2} = 1 + P keeps the pole value finite
    pos = theta > 0
    one_p = np.ones_like(theta)
    one_p[pos] = 1 + G.normalized_deviation(theta[pos])
    far = np.zeros_like(theta)
    far[pos] = dim.kappa / dim.gamma * G(theta[pos]) * A
    return (1 - eta) * far + eta * one_p * mu ** (-(N - 2) / 2) * V


# --- leading error terms ---------------------------------------------------------------

def leading_E0_E1(N, curv, st, y):
    """E0[mu] + the displayed leading part of E1 (remainders excluded)."""
    dim = dimension(N)
    y = np.asarray(y, float)
    r = np.linalg.norm(y, axis=-1)
    rs = np.where(r > 0, r, 1.0)
    pw = dim.p * w(dim, r) ** (dim.p - 1)
    e0 = st.mu_dot / st.mu * pw * z_dil(dim, r) + st.mu**2 * leading_F0(N, curv, y)
    grad_w = (w_r(dim, r) / rs)[..., None] * y
    e1 = (grad_w @ st.xi_dot) * pw / st.mu + leading_F1(N, curv, st.mu, st.xi, y)
    return e0 + e1


def assemble_E2(N, curv, st, y):
    """Leading terms of E2: the lambda and xi channels, 2 mubar lambda F0 and F1."""
    dim = dimension(N)
    y = np.asarray(y, float)
    r = np.linalg.norm(y, axis=-1)
    rs = np.where(r > 0, r, 1.0)
    pw = dim.p * w(dim, r) ** (dim.p - 1)
    mb = st.mubar
    lam_term = (st.lam_dot - st.mubar_dot / mb * st.lam) / mb * pw * z_dil(dim, r)
    grad_w = (w_r(dim, r) / rs)[..., None] * y
    xi_term = (grad_w @ st.xi_dot) * pw / st.mu
    return lam_term + xi_term + 2 * mb * st.lam * leading_F0(N, curv, y) + leading_F1(N, curv, st.mu, st.xi, y)


# --- weights and norms -------------------------------------------------------------------

def weight_w(mu, dist_to_center, dist_to_z0, alpha, gamma, delta0):
    """w_{alpha,gamma} = mu^alpha max(eta_delta0(d) / (mu^{a+g} + |x - xi|^{a+g}), 2^{3(a+g)} delta0^{-(a+g)})."""
    s = alpha + gamma
    eta = cutoff(dist_to_z0, delta0)[0]
    inner = eta / (mu**s + np.asarray(dist_to_center, float) ** s)
    floor = 2 ** (3 * s) * delta0 ** (-s)
    return mu**alpha * np.maximum(inner, floor)


@dataclass(frozen=True)
class WeightSpec:
    alpha: float
    gamma: float = 0.0
    rho: float = 0.0
    delta0: float = 0.25
    a: float = 1.0
    b: float = 2.9

    def __post_init__(self):
        if not self.gamma >= 0:
            raise DomainError("gamma must be non-negative")

    @classmethod
    def from_exponents(cls, ex: Exponents, gamma=0.0):
        return cls(ex.alpha, gamma, ex.rho, ex.delta0, ex.a, ex.b)


def weighted_norm(values, kind, spec, *, N, t, mu=None, x=None, xi=None, u=None, y=None, t0=None):
    """Sampled L-infinity part of the star, star', double-star, sharp and sharp' norms.

    Manifold kinds take points ``x`` (relative to z0), time(s) ``t`` and, for
    ``star``, the approximate solution values ``u``.  Plane kinds take ``y``.
    """
    values = np.asarray(values, float)
    if values.size == 0:
        raise DomainError("empty sampling window")
    t = np.asarray(t, float)
    m0 = mu0(N, t)
    dim = dimension(N)
    if kind in ("star", "star_prime", "double_star"):
        x = np.atleast_2d(np.asarray(x, float))
        mu = m0 if mu is None else mu
        xi = np.zeros(x.shape[-1]) if xi is None else np.asarray(xi, float)
        dz = np.linalg.norm(x, axis=-1)
        dc = np.linalg.norm(x - xi, axis=-1)
        gamma = 2.0 if kind == "star" else 0.0
        wgt = weight_w(mu, dc, dz, spec.alpha, gamma, spec.delta0)
        if kind == "double_star":
            m0 = mu0(N, t0 if t0 is not None else float(np.min(t)))
        scale = m0**spec.rho * wgt
        body = values if kind != "star" else np.asarray(u, float) ** (dim.p - 1) * values
        return float(np.max(np.abs(body) / scale))
    if kind in ("sharp", "sharp_prime"):
        y = np.atleast_2d(np.asarray(y, float))
        r = np.linalg.norm(y, axis=-1)
        if kind == "sharp":
            body = (1 + r ** (spec.a + 2)) * w(dim, r) ** (dim.p - 1) * values
        else:
            body = (1 + r**spec.a) * values
        return float(np.max(m0 ** (-spec.b) * np.abs(body)))
    raise DomainError(f"unknown norm kind {kind!r}")


# --- order fits ---------------------------------------------------------------------------

def _direction_set(N, count, seed):
    rng = np.random.default_rng(seed)
    dirs = np.vstack([np.eye(N), -np.eye(N), rng.standard_normal((count, N))])
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


@dataclass(frozen=True)
class OrderFit:
    times: np.ndarray
    mu0: np.ndarray
    values: np.ndarray
    order: float


def _fit(times, N, values):
    m = mu0(N, np.asarray(times, float))
    order = float(np.polyfit(np.log(m), np.log(np.asarray(values) + 1e-300), 1)[0])
    return OrderFit(np.asarray(times, float), m, np.asarray(values), order)


def inner_sup(approx, t, eps1=0.05, radii=64, directions=24, seed=0, subtract="E2"):
    """Weighted sup over |y| <= min(mu0^{eps1-1}, delta0/mu) of the inner residual minus its leading part."""
    N = approx.man.N
    st = approx.bubbles[0].state(t)
    m0 = float(mu0(N, t))
    rmax = min(m0 ** (eps1 - 1), 0.999 * (approx.delta0 - np.linalg.norm(st.xi)) / st.mu)
    rs = np.concatenate([[1e-3], np.geomspace(1e-2, rmax, radii)])
    dirs = _direction_set(N, directions, seed)
    y = (rs[:, None, None] * dirs[None, :, :]).reshape(-1, N)
    res = approx.inner_scaled_residual(y, t)
    curv = CurvatureData.flat(N, approx.h)
    if subtract == "E2":
        lead = assemble_E2(N, curv, st, y)
    elif subtract == "E0E1":
        lead = leading_E0_E1(N, curv, st, y)
    else:
        lead = 0.0
    wgt = (1 + np.linalg.norm(y, axis=1)) ** (N - 4)
    return float(np.max(np.abs(res - lead) * wgt))


def verify_error_orders(approx, times, region="inner", eps1=0.05, **kw):
    """Fitted mu0-power of the inner or outer residual along ``times``."""
    N = approx.man.N
    if region == "inner":
        subtract = "E2" if approx.level == 2 else "E0E1"
        vals = [inner_sup(approx, t, eps1, subtract=subtract, **kw) for t in times]
    elif region == "outer":
        vals = [outer_sup(approx, t, eps1, **kw) for t in times]
    else:
        raise DomainError("region must be 'inner' or 'outer'")
    if min(mu0(N, np.asarray(times, float))) ** eps1 <= 0 or len(times) < 2:
        raise DomainError("need at least two times")
    return _fit(times, N, vals)


def outer_sup(approx, t, eps1=0.05, radii=48, directions=24, seed=0):
    """sup of |(1 - eta_{mu0^eps1}) S(u)| over shells out to the torus half-period."""
    N = approx.man.N
    m0 = float(mu0(N, t))
    r_in = m0**eps1
    half = 0.5 * min(approx.man.periods) * 0.999
    if r_in >= half:
        raise DomainError("insufficient scale separation: outer region is empty")
    rs = np.geomspace(r_in, half, radii)
    dirs = _direction_set(N, directions, seed)
    x = (rs[:, None, None] * dirs[None, :, :]).reshape(-1, N)
    keep = np.all(np.abs(x) <= half, axis=1)
    x = x[keep]
    res = approx.residual(approx.greens[0].z0 + x, t)
    eta = cutoff(np.linalg.norm(x, axis=1), r_in)[0]
    return float(np.max(np.abs((1 - eta) * res)))


def aronson_benilan_ratio(approx, t, samples=400, seed=0):
    """sup |u_t| / u over random torus points and shells near the center, divided by mu0^2."""
    N = approx.man.N
    rng = np.random.default_rng(seed)
    L = np.asarray(approx.man.periods)
    pts = rng.uniform(-0.5, 0.5, (samples, N)) * L
    st = approx.bubbles[0].state(t)
    shells = np.geomspace(st.mu * 1e-2, approx.delta0 * 2.5, 40)
    dirs = _direction_set(N, 8, seed)
    pts = np.vstack([pts, (shells[:, None, None] * dirs[None]).reshape(-1, N)])
    z = approx.greens[0].z0
    pts = pts[np.linalg.norm(approx.man.wrap(pts), axis=1) > 0]
    u = approx.value(z + pts, t)
    ut = approx.time_derivative(z + pts, t)
    if np.any(u <= 0):
        raise DomainError("approximate solution is not positive on the sample")
    return float(np.max(np.abs(ut) / u) / mu0(N, t) ** 2)


def projection_defects(N, path, n, times, h0=1.0, delta0=0.25, radial_nodes=72, angular=6, profile=None, chunk=4096):
    """(mubar/mu)^{(N-2)/2} int eta (1+P)^{-p} mu^{(N+2)/2} S(u2) Z_n dy-bar minus the reduced term.

    The cutoff radius is delta0/2 in x; the integral uses Gauss-Legendre in
    log-radius and a product Gauss rule on the unit sphere.
    """
    from .bubble import eval_kernel
    from .quadrature import compute_constants

    man = Torus(N)
    states = path if callable(path) else (lambda t: path_state(path, t))
    approx = build_approx(man, h0, [np.zeros(N)], [states], level=2, delta0=delta0, profile=profile)
    consts = compute_constants(N)
    dirs, dweights = sphere_rule(N - 1, angular)
    xg, wg = np.polynomial.legendre.leggauss(radial_nodes)
    out = []
    for t in times:
        st = states(t)
        mb, mu = st.mubar, st.mu
        R = delta0 / mb
        # ybar radius: s in [log 1e-3, log R] plus the ball of radius 1e-3 (negligible)
        lo, hi = math.log(1e-3), math.log(R)
        s = (hi - lo) / 2 * xg + (hi + lo) / 2
        rb = np.exp(s)
        rw = (hi - lo) / 2 * wg * rb**N  # dr = r ds, times r^{N-1}
        ybar = (rb[:, None, None] * dirs[None, :, :]).reshape(-1, N)
        wts = (rw[:, None] * dweights[None, :]).ravel()
        x = mb * ybar + st.xi
        y = (x - st.xi) / mu
        keep = np.linalg.norm(x, axis=1) <= delta0 * 0.999
        res = np.zeros(len(ybar))
        P = np.zeros(len(ybar))
        idx = np.flatnonzero(keep)
        for part in np.array_split(idx, max(1, len(idx) // chunk)):
            res[part] = approx.inner_scaled_residual(y[part], t)
            P[part] = approx.greens[0].normalized_deviation(approx.greens[0].z0 + x[part])
        eta = cutoff(np.linalg.norm(x, axis=1), delta0 / 2)[0]
        Zn = eval_kernel(dimension(N), n, ybar)
        integral = (mb / mu) ** ((N - 2) / 2) * np.sum(wts * eta * (1 + P) ** (-dimension(N).p) * res * Zn)
        if n == N + 1:
            reduced = consts.c1.value / mb * (st.lam_dot + 1.5 * st.lam / st.t)
        else:
            reduced = consts.c5.value / mb * st.xi_dot[n - 1]  # the Ricci term vanishes on a flat torus
        out.append(integral - reduced)
    return np.array(out)


def cutoff_jumps(approx, t, eps=1e-7, directions=12, seed=0):
    """Largest one-sided differences of u and its radial slope across the delta0 and 2 delta0 shells."""
    N = approx.man.N
    z = approx.greens[0].z0
    dirs = _direction_set(N, directions, seed)
    out = {}
    for shell in (approx.delta0, 2 * approx.delta0):
        r = np.array([shell - 2 * eps, shell - eps, shell + eps, shell + 2 * eps])
        pts = (r[:, None, None] * dirs[None]).reshape(-1, N)
        u = approx.value(z + pts, t).reshape(4, -1)
        # linear extrapolation from the inside removes the smooth O(eps) change
        jump = np.max(np.abs(u[2] - (3 * u[1] - 2 * u[0])) / np.abs(u[1]))
        slope_in, slope_out = (u[1] - u[0]) / eps, (u[3] - u[2]) / eps
        kink = np.max(np.abs(slope_out - slope_in) / np.abs(u[1]))
        out[shell] = (float(jump), float(kink))
    return out
