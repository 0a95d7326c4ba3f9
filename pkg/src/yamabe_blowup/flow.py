"""Zonal simulation of p u^{p-1} u_t = (N+2)/4 (kappa Delta u - (S+h) u + kappa u^p) on S^N.

Space is a finite-volume discretization in theta with cells clustered at the
north pole; the conformal Laplacian part is implicit and the power
nonlinearity explicit, so each step solves one tridiagonal M-matrix system
and positivity is automatic.  Blow-up solutions sit on a threshold between
collapse and dispersal (the constant mode grows like exp(kappa t)), so
``run_blowup`` shoots: it bisects an amplitude factor on short segments and
keeps the part of the trajectory where the two bracketing runs agree.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property
import math

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import brentq
from scipy.special import betainc, beta as beta_fn

from .bubble import dimension, w
from .errors import DomainError, NumericError


class SchemeBreakdown(NumericError):
    """Positivity could not be kept even at the smallest admissible step."""


def _sin_power_integral(N, a, b):
    """int_a^b sin^{N-1} on [0, pi], via the regularized incomplete beta function."""
    n = N - 1
    total = beta_fn(0.5, n / 2 + 0.5)

    def upto(x):
        x = np.asarray(x, float)
        c = np.cos(x)
        half = 0.5 * total * betainc(n / 2 + 0.5, 0.5, np.sin(x) ** 2)
        return np.where(c >= 0, half, total - half)

    return upto(b) - upto(a)


@dataclass(frozen=True)
class ThetaGrid:
    """Nodes theta_0 = 0 < ... < theta_{n-1} = pi, geometric-like clustering at the pole."""

    N: int
    n: int = 2000
    stretch: float = 5.5

    def __post_init__(self):
        dimension(self.N)
        if self.n < 16:
            raise DomainError("need at least 16 nodes")

    @cached_property
    def theta(self):
        s = np.linspace(0.0, 1.0, self.n)
        b = self.stretch
        return math.pi * np.expm1(b * s) / math.expm1(b)

    @cached_property
    def faces(self):
        th = self.theta
        return 0.5 * (th[1:] + th[:-1])

    @cached_property
    def volumes(self):
        f = np.concatenate([[0.0], self.faces, [math.pi]])
        return _sin_power_integral(self.N, f[:-1], f[1:]) * dimension(self.N).sphere_area

    @cached_property
    def conductances(self):
        """|S^{N-1}| sin^{N-1}(face) / (theta_{i+1} - theta_i) on each interior face."""
        th = self.theta
        return dimension(self.N).sphere_area * np.sin(self.faces) ** (self.N - 1) / np.diff(th)

    @cached_property
    def bands(self):
        return self.laplacian_bands()

    def laplacian_bands(self):
        """(lower, diag, upper) of the conservative zonal Laplace-Beltrami operator."""
        c, v = self.conductances, self.volumes
        lower = c / v[1:]
        upper = c / v[:-1]
        diag = -np.concatenate([[0.0], c]) / v - np.concatenate([c, [0.0]]) / v
        return lower, diag, upper

    def apply_laplacian(self, u):
        lo, d, up = self.bands
        out = d * u
        out[1:] += lo * u[:-1]
        out[:-1] += up * u[1:]
        return out

    def integrate(self, f):
        return float(np.sum(self.volumes * f))


@dataclass
class FlowState:
    grid: ThetaGrid
    u: np.ndarray
    t: float
    dt: float
    h: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.u = np.asarray(self.u, float)
        if self.u.shape != (self.grid.n,):
            raise DomainError("field does not match the grid")
        if not np.all(self.u > 0):
            raise DomainError("flow states must be positive")

    @property
    def N(self):
        return self.grid.N

    def copy(self):
        return replace(self, u=self.u.copy(), diagnostics=dict(self.diagnostics))


def mu_fit(N, u):
    """(alpha / max u)^{2/(N-2)}."""
    return (dimension(N).alpha / float(np.max(u))) ** (2 / (N - 2))


def _rhs_parts(state, u):
    dim = dimension(state.N)
    S = state.N * (state.N - 1)
    D = (state.N - 2) / 4 * u ** (1 - dim.p)  # (N+2)/(4p)
    return dim, S, D


def step(state, scheme="imex", min_dt=1e-12):
    """Advance one step; halves dt until the new field is positive."""
    dt = state.dt
    while dt >= min_dt:
        try:
            u_new = _advance(state, dt, scheme)
        except np.linalg.LinAlgError:
            u_new = None
        if u_new is not None and np.all(np.isfinite(u_new)) and np.all(u_new > 0):
            return FlowState(state.grid, u_new, state.t + dt, state.dt, state.h,
                             {"u_prev": state.u, "dt_used": dt})
        dt /= 2
    raise SchemeBreakdown("positivity lost at the minimum step", t=state.t, min_u=float(np.min(state.u)),
                          max_u=float(np.max(state.u)))


def _advance(state, dt, scheme):
    u = state.u
    dim, S, D = _rhs_parts(state, u)
    lo, d, up = state.grid.bands
    kappa = dim.kappa
    potential = S + state.h
    if scheme == "imex":
        ab = np.zeros((3, len(u)))
        ab[0, 1:] = -dt * D[:-1] * kappa * up
        ab[1] = 1 - dt * D * (kappa * d - potential)
        ab[2, :-1] = -dt * D[1:] * kappa * lo
        rhs = u + dt * D * kappa * u**dim.p
        return solve_banded((1, 1), ab, rhs)
    if scheme == "imex2":
        # local Richardson extrapolation of the first-order step: second order, still L-stable
        full = _advance(state, dt, "imex")
        half = _advance(state, dt / 2, "imex")
        if np.any(half <= 0):
            return None
        half = _advance(replace(state, u=half), dt / 2, "imex")
        return 2 * half - full
    if scheme == "fully_implicit":
        v = u.copy()
        for _ in range(30):
            Dv = (state.N - 2) / 4 * v ** (1 - dim.p)
            Lv = state.grid.apply_laplacian(v)
            bracket = kappa * Lv - potential * v + kappa * v**dim.p
            F = v - u - dt * Dv * bracket
            dD = (1 - dim.p) * Dv / v
            ab = np.zeros((3, len(u)))
            ab[0, 1:] = -dt * Dv[:-1] * kappa * up
            ab[1] = 1 - dt * (Dv * (kappa * d - potential + kappa * dim.p * v ** (dim.p - 1)) + dD * bracket)
            ab[2, :-1] = -dt * Dv[1:] * kappa * lo
            dv = solve_banded((1, 1), ab, -F)
            v = v + dv
            if np.any(v <= 0):
                return None
            if np.max(np.abs(dv) / v) < 1e-13:
                return v
        return None
    raise DomainError(f"unknown scheme {scheme!r}")


def energy(state):
    """Yamabe-type quotient (kappa |grad u|^2 + (S+h) u^2) / ||u||_{p+1}^2."""
    dim = dimension(state.N)
    g, u = state.grid, state.u
    grad_part = float(np.sum(g.conductances * np.diff(u) ** 2))
    num = dim.kappa * grad_part + (state.N * (state.N - 1) + state.h) * g.integrate(u * u)
    den = g.integrate(u ** (dim.p + 1))
    return num / den ** (2 / (dim.p + 1))


def diagnostics(state):
    """min u, mu_fit, sup |u_t|/u over mu_fit^2 (from the last step) and energy."""
    N = state.N
    mf = mu_fit(N, state.u)
    prev = state.diagnostics.get("u_prev")
    if prev is None:
        ratio = 0.0
    else:
        ut = (state.u - prev) / state.diagnostics["dt_used"]
        ratio = float(np.max(np.abs(ut) / state.u)) / mf**2
    return {"t": state.t, "mu_fit": mf, "max_u": float(np.max(state.u)), "min_u": float(np.min(state.u)),
            "ab_ratio": ratio, "energy": energy(state)}


# --- initial data ------------------------------------------------------------------------

def initial_state(N, h0, t0, grid=None, level=2, dt=None, delta0=0.25):
    """u^{(level)}(., t0) centered at the north pole."""
    from .approximate import model_state, sphere_profile

    grid = grid or ThetaGrid(N)
    st = model_state(N, h0, t0)
    theta = grid.theta.copy()
    theta[-1] = math.pi * (1 - 1e-12)  # the Green factor is regular at the south pole
    u = sphere_profile(N, h0, theta, st, level=level, delta0=delta0)
    dt = dt if dt is not None else 0.05 * st.mu**2
    return FlowState(grid, u, float(t0), dt, float(h0))


def constant_state(N, grid=None, h=0.0, dt=1e-3):
    """The constant solution (N(N-2)/4)^{(N-2)/4} of the h = 0 problem."""
    grid = grid or ThetaGrid(N)
    c = (N * (N - 2) / 4) ** ((N - 2) / 4)
    return FlowState(grid, np.full(grid.n, c), 0.0, dt, h)


# --- shooting -----------------------------------------------------------------------------

@dataclass(frozen=True)
class ShootingConfig:
    rate_exit: float = 0.5       # |d log max u / dt| beyond this classifies a trial
    level_exit: float = 3.0      # or max u leaving [m0 / level_exit, m0 * level_exit]
    horizon: float = 12.0        # longest trial, in flow time
    settle: float = 0.5          # transients in the first ``settle`` time units are not classified
    divergence: float = 1e-4     # relative max-u gap between bracketing runs that ends a segment
    bracket: float = 1e-3        # initial amplitude bracket [-bracket, bracket], widened as needed
    tol: float = 1e-15
    dt_safety: float = 400.0     # dt = safety * mu_fit^2 at segment start, capped by dt_max
    dt_max: float = 0.02
    scheme: str = "imex2"


def _trial(state, s, cfg, record=False):
    """Run u(1+s) until it is classified; returns (+1 up / -1 down / 0 undecided, times, max_u, states)."""
    cur = FlowState(state.grid, state.u * (1 + s), state.t, state.dt, state.h)
    m0 = float(np.max(cur.u))
    times, maxes, states = [cur.t], [m0], [cur] if record else []
    t_end = state.t + cfg.horizon
    prev_log = math.log(m0)
    while cur.t < t_end:
        cur = step(cur, cfg.scheme)
        m = float(np.max(cur.u))
        times.append(cur.t)
        maxes.append(m)
        if record:
            states.append(cur)
        lg = math.log(m)
        rate = (lg - prev_log) / cur.diagnostics["dt_used"]
        prev_log = lg
        if cur.t - state.t < cfg.settle:
            continue
        if rate > cfg.rate_exit or m > m0 * cfg.level_exit:
            return 1, np.array(times), np.array(maxes), states
        if rate < -cfg.rate_exit or m < m0 / cfg.level_exit:
            return -1, np.array(times), np.array(maxes), states
    return 0, np.array(times), np.array(maxes), states


def _segment(state, cfg):
    """Locate the threshold amplitude factor; return accepted states and the number of trials.

    A trial leaving the band after time tau carries an unstable component of
    size ~ exp(-kappa tau), so side * exp(-kappa tau) is close to linear in
    the factor and Brent's method converges in a handful of trials.
    """
    kappa = dimension(state.N).kappa
    count = [0]
    cache = {}

    def indicator(s):
        if s not in cache:
            side, times, _, _ = _trial(state, s, cfg)
            count[0] += 1
            cache[s] = side * math.exp(-kappa * (times[-1] - state.t)) if side else 0.0
        return cache[s]

    width = cfg.bracket
    while True:
        lo, hi = -width, width
        if indicator(lo) < 0 < indicator(hi):
            break
        if indicator(lo) == 0 or indicator(hi) == 0:
            break
        width *= 4
        if width > 0.9:
            raise NumericError("amplitude bracket does not straddle the threshold", t=state.t)
    if indicator(lo) == 0:
        root = lo
    elif indicator(hi) == 0:
        root = hi
    else:
        root = brentq(indicator, lo, hi, xtol=cfg.tol, rtol=4 * np.finfo(float).eps, maxiter=200)
    # bracketing pair around the root, one ulp-scale step either side
    eps = max(cfg.tol, 8 * np.finfo(float).eps)
    r_lo = _trial(state, root - eps, cfg, record=True)
    r_hi = _trial(state, root + eps, cfg, record=True)
    n = min(len(r_lo[1]), len(r_hi[1]))
    gap = np.abs(r_lo[2][:n] / r_hi[2][:n] - 1)
    bad = np.flatnonzero(gap > cfg.divergence)
    stop = max(int(bad[0]) if bad.size else n, 2)
    return r_lo[3][1:stop], count[0] + 2


def run_blowup(N, h0, t0, tmax, grid=None, cfg=None, init=None, level=2, log=None, max_segments=100000):
    """Shoot along the threshold trajectory from u^{(2)}(., t0) to tmax; returns a list of diagnostics rows."""
    if not tmax > t0:
        raise DomainError("tmax must exceed t0")
    cfg = cfg or ShootingConfig()
    state = init if init is not None else initial_state(N, h0, t0, grid, level=level)
    rows = [diagnostics(state)]
    snapshots = {state.t: state.u.copy()}
    segments = 0
    while state.t < tmax:
        mf = mu_fit(N, state.u)
        state = replace(state, dt=min(cfg.dt_max, cfg.dt_safety * mf**2))
        accepted, trials = _segment(state, cfg)
        for st in accepted:
            if st.t > tmax:
                break
            rows.append(diagnostics(st))
        state = accepted[-1]
        snapshots[state.t] = state.u.copy()
        segments += 1
        if log is not None:
            log(f"t={state.t:.4g} mu_fit={mf:.4g} trials={trials}")
        if segments >= max_segments:
            raise NumericError("segment budget exhausted", t=state.t)
    return BlowupRun(N, h0, rows, state, snapshots)


@dataclass
class BlowupRun:
    N: int
    h0: float
    rows: list
    final: FlowState
    snapshots: dict

    def column(self, key):
        return np.array([r[key] for r in self.rows])

    def rate_fit(self, window=10.0):
        """Log-log slope of mu_fit vs t over [t_end / window, t_end] and the mean of mu_fit sqrt(t)."""
        t, m = self.column("t"), self.column("mu_fit")
        sel = t >= t[-1] / window
        slope = float(np.polyfit(np.log(t[sel]), np.log(m[sel]), 1)[0])
        amp = float(np.mean(m[sel] * np.sqrt(t[sel])))
        return slope, amp

    def core_deviation(self, state=None, ymax=10.0):
        """sup over theta/mu_fit <= ymax of |u mu^{(N-2)/2} / W(theta/mu) - 1|."""
        st = state or self.final
        dim = dimension(self.N)
        mf = mu_fit(self.N, st.u)
        th = st.grid.theta
        sel = th <= ymax * mf
        y = th[sel] / mf
        return float(np.max(np.abs(st.u[sel] * mf ** ((self.N - 2) / 2) / w(dim, y) - 1)))


def naive_run(N, h0, t0, duration, grid=None, dt=None):
    """Plain time stepping from u^{(2)}(., t0) without shooting; shows the threshold instability."""
    state = initial_state(N, h0, t0, grid, dt=dt)
    rows = [diagnostics(state)]
    while state.t < t0 + duration:
        state = step(state)
        rows.append(diagnostics(state))
        if rows[-1]["max_u"] > 1e3 * rows[0]["max_u"] or rows[-1]["max_u"] < rows[0]["max_u"] / 1e3:
            break
    return rows
