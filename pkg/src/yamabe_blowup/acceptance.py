"""The twelve acceptance criteria as runnable checks.

Each ``criterion_k(quick=False)`` returns a :class:`Criterion` holding named
:class:`Check` entries. ``quick`` trades resolution and time span for speed;
the thresholds never change.
"""

from dataclasses import dataclass, field
from fractions import Fraction
import math
import time

import numpy as np
from scipy import special

from .bubble import dimension, eval_kernel, w
from .dynamics import (Exponents, ParameterPath, RicciMatrix, mu0, mu_bar, rate_amplitude, rk4,
                       solve_lambda, solve_xi, stability_predicate, verify_ode_reduction)
from .quadrature import compute_constants, verify_cancellations, verify_E0_decay, verify_identity_c2

DIMS = (5, 6, 7)
SIMULATION_TMAX = 1000.0


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool
    target: float = None

    def as_dict(self):
        out = {"value": _plain(self.value), "tolerance": _plain(self.tolerance), "pass": bool(self.passed)}
        if self.target is not None:
            out["target"] = _plain(self.target)
        return out


def _plain(x):
    if isinstance(x, Fraction):
        return str(x)
    return float(x)


def below(name, value, tol):
    return Check(name, float(value), tol, bool(value < tol))


def at_least(name, value, floor):
    return Check(name, float(value), floor, bool(value >= floor))


def near(name, value, target, tol):
    return Check(name, float(value), tol, bool(abs(value - target) <= tol), target)


@dataclass
class Criterion:
    number: int
    title: str
    checks: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def line(self):
        bad = [c.name for c in self.checks if not c.passed]
        tail = "" if not bad else "  failing: " + ", ".join(bad)
        return f"{'PASS' if self.passed else 'FAIL'} {self.number:2d} {self.title} ({self.seconds:.1f}s){tail}"

    def as_dict(self):
        return {"title": self.title, "pass": self.passed, "checks": {c.name: c.as_dict() for c in self.checks}}


def _timed(number, title):
    def deco(fn):
        def run(quick=False, **kw):
            start = time.perf_counter()
            crit = Criterion(number, title, fn(quick, **kw))
            crit.seconds = time.perf_counter() - start
            return crit
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        run.number, run.title = number, title
        return run
    return deco


@_timed(1, "cancellation identities")
def criterion_1(quick):
    out = []
    for N in DIMS:
        start = time.perf_counter()
        table = compute_constants.__wrapped__(N)
        res = verify_cancellations(N, table)
        elapsed = time.perf_counter() - start
        for label, r in zip(("S", "h", "green_S", "green_h"), res):
            out.append(below(f"N{N}_{label}", r, 1e-8))
        out.append(below(f"N{N}_seconds", elapsed, 1.0))
    return out


@_timed(2, "c2 equals the integral of W^2")
def criterion_2(quick):
    return [below(f"N{N}", verify_identity_c2(N), 1e-9) for N in DIMS]


@_timed(3, "leading-error decay and its negative control")
def criterion_3(quick):
    out = []
    for N in DIMS:
        out.append(near(f"N{N}_slope", verify_E0_decay(N), -N, 0.1))
        out.append(near(f"N{N}_control", verify_E0_decay(N, control=True), -(N - 2), 0.1))
    return out


@_timed(4, "correction profile decay and back-substitution")
def criterion_4(quick):
    from .profile import CurvatureData, equation_residual, solve_Q0

    out = []
    for N in DIMS:
        ric = np.diag(np.linspace(-1.0, 1.0, N))
        prof = solve_Q0(N, CurvatureData(ric, 0.0, 1.0), nodes=2000)
        r = np.geomspace(1e2, 1e4, 41)
        ratio = np.abs(prof.radial("q0", r)) * r ** (N - 2) / np.log(2 + r)
        out.append(below(f"N{N}_ratio_spread", ratio.max() / ratio.min(), 3.0))
        out.append(below(f"N{N}_residual", max(equation_residual(prof)), 1e-6))
    return out


def _forcing(t, nu):
    return t ** (-(nu + 2) / 2)


@_timed(5, "parameter ODE closed forms against RK4")
def criterion_5(quick, N=5, h0=1.0, t0=10.0):
    ex = Exponents(N)
    out = []
    tgrid = np.geomspace(t0, 100 * t0, 41 if quick else 81)

    f = lambda s: 0.7 * _forcing(np.asarray(s, float), ex.nu1)
    lam, _ = solve_lambda(f, t0, tgrid)
    ref = rk4(lambda s, y: f(s) - 1.5 * y / s, [0.0], tgrid, substeps=64)[:, 0]
    out.append(below("lambda_rel", np.max(np.abs(lam - ref)) / np.max(np.abs(ref)), 1e-6))

    ric = np.diag(np.linspace(-2.0, 1.0, N))
    rm = RicciMatrix.from_ricci(N, ric, h0)
    direction = np.linspace(1.0, -0.5, N)
    fx = lambda s: np.outer(_forcing(np.asarray(s, float), ex.nu2), direction)
    xi, _ = solve_xi(fx, rm, ex.nu2, t0, tgrid)
    ref = rk4(lambda s, y: fx(np.array([s]))[0] - rm.m @ y / s, xi[0], tgrid, substeps=64)
    out.append(below("xi_rel", np.max(np.abs(xi - ref)) / np.max(np.abs(ref)), 1e-6))

    c = compute_constants(N)
    rate = (N + 2) * c.c2.value * h0 / (4 * c.c1.value)
    mb = mu_bar(N, h0, tgrid)
    ref = rk4(lambda s, y: -rate * y**3, [mb[0]], tgrid, substeps=64)[:, 0]
    out.append(below("mubar_rel", np.max(np.abs(mb - ref) / mb), 1e-6))

    # With every sigma >= 1 the forcing t^{-q} gives |xi| <= |d| t^{1-q} / (sigma + 1 - q),
    # so |xi| t^{1-eps0} stays below |d| t0^{2-eps0-q} / (sigma + 1 - q).
    sigma = 6.5 / 6
    stable = RicciMatrix.from_ricci(N, -6.5 / (N - 4) * h0 * np.eye(N), h0)
    xi, _ = solve_xi(fx, stable, ex.nu2, t0, tgrid)
    q = (ex.nu2 + 2) / 2
    bound = np.linalg.norm(direction) * t0 ** (2 - ex.eps0 - q) / (sigma + 1 - q)
    scaled = np.linalg.norm(xi, axis=1) * tgrid ** (1 - ex.eps0)
    out.append(Check("xi_scaled_over_bound", float(scaled.max() / bound), 1.0, bool(scaled.max() <= bound)))
    return out


def reduction_path(N, times, nu1=1.9, eps0=0.1):
    """Parameter path with the decay rates of the construction, used for the projection test."""
    t = np.asarray(times, float)
    lam = 0.3 * t ** (-(1 + nu1) / 2)
    xi = np.zeros((t.size, N))
    xi[:, 0] = 0.5 * t ** (-(1 - eps0))
    xi[:, 1] = -0.2 * t ** (-(1 - eps0))
    return ParameterPath.from_solutions(N, 1.0, t, lam, -(1 + nu1) / 2 * lam / t, xi,
                                        -(1 - eps0) * xi / t[:, None])


@_timed(6, "projections of the second-order error")
def criterion_6(quick, N=5):
    ex = Exponents(N)
    times = np.array([1e3, 1e4, 1e5, 1e6])
    kw = dict(radial_nodes=48, angular=4) if quick else {}
    path = reduction_path(N, times, ex.nu1, ex.eps0)
    out = []
    for n in (1, 2):
        slope, _ = verify_ode_reduction(N, path, n, times, **kw)
        out.append(at_least(f"n{n}_order", slope, 3 - 0.2))
    slope, _ = verify_ode_reduction(N, path, N + 1, times, **kw)
    out.append(at_least(f"n{N + 1}_order", slope, min(3, ex.b + ex.nu1 - 1) - 0.2))
    return out


@_timed(7, "torus Green's function expansion")
def criterion_7(quick, N=5, h0=1.0):
    from .manifolds import Torus, TorusGreen, expand_P

    fit = expand_P(TorusGreen(Torus(N), h0), np.geomspace(0.01, 0.1, 5), directions=60 if quick else 120)
    C = fit.finest
    diag = np.diag(C)
    off = np.max(np.abs(C - np.diag(diag)))
    return [
        below("diagonal_rel", np.max(np.abs(diag / fit.target - 1)), 0.02),
        below("offdiag_rel", off / np.mean(np.abs(diag)), 1e-3),
        near("order", fit.order, 1.0, 0.2),
    ]


@_timed(8, "approximate-solution residual orders")
def criterion_8(quick, dims=(5, 6, 7)):
    from .approximate import build_approx, inner_sup, model_state, verify_error_orders
    from .manifolds import Torus

    out = []
    times = np.array([1e3, 1e4, 1e5, 1e6]) if quick else np.array([1e2, 1e3, 1e4, 1e5, 1e6])
    for N in dims:
        man = Torus(N)
        state = lambda t, N=N: model_state(N, 1.0, t)
        a1 = build_approx(man, 1.0, [np.zeros(N)], [state], level=1)
        a2 = build_approx(man, 1.0, [np.zeros(N)], [state], level=2)
        fit = verify_error_orders(a2, times, region="inner")
        out.append(at_least(f"N{N}_level2_order", fit.order, 3 - 0.3))
        t = times[-4:]
        r1 = np.array([inner_sup(a1, s, subtract=None) for s in t])
        r2 = np.array([inner_sup(a2, s, subtract="E2") for s in t])
        gain = np.polyfit(np.log(mu0(N, t)), np.log(r2 / r1), 1)[0]
        out.append(near(f"N{N}_gain_order", gain, 2.0, 0.3))
    return out


def _pushed_kernel_purity(N, degree):
    from .stereographic import conformal_factor, mode_purity, sphere_quadrature, to_plane

    dim = dimension(N)
    pts, wts = sphere_quadrature(N, degree)
    y = to_plane(pts)
    lift = conformal_factor(y) ** (-(N - 2) / 2)
    worst = 0.0
    for n in range(1, N + 2):
        vals = lift * eval_kernel(dim, n, y)
        worst = max(worst, 1 - abs(mode_purity(vals, pts[:, n - 1], wts)))
    return worst


def _orthogonality_drift(N, Lmax):
    from .stereographic import AngularHarmonic, SphereTerm, sphere_linear_solve

    lam = (N - 1) / 2
    f = lambda z: np.exp(2 * z)
    zq, wq = special.roots_gegenbauer(200, lam)
    a1 = (wq @ (f(zq) * zq)) / (wq @ (zq * zq))
    zq2, wq2 = special.roots_gegenbauer(200, lam + 1)
    b1 = (wq2 @ zq2**2) / np.sum(wq2)
    terms = [
        SphereTerm(AngularHarmonic.constant(), lambda z: f(z) - a1 * z, lambda t: np.exp(-t)),
        SphereTerm(AngularHarmonic.coordinate(0), lambda z: np.sqrt(1 - z * z) * (z**2 - b1),
                   lambda t: np.sin(3 * t)),
    ]
    t = np.linspace(1.0, 3.0, 21)
    sol = sphere_linear_solve(terms, N, 1.0, t, Lmax=Lmax)
    scale = max(np.max(np.abs(c)) for c in sol.coef)
    return max(np.max(np.abs(sol.moments(k)[1:])) for k in range(len(t))) / scale


def lift_checks(N, quick=False):
    """Pushed bubble constant and value, kernel mode purity, and orthogonality conservation."""
    from .stereographic import pushed_bubble_constant, pushforward, sphere_quadrature, to_plane

    dim = dimension(N)
    degree = 4 if quick else 6
    pts, _ = sphere_quadrature(N, degree)
    vals = pushforward(lambda q: w(dim, np.linalg.norm(q, axis=-1)), to_plane(pts), N)
    const = pushed_bubble_constant(N)
    exact = (N * (N - 2) / 4) ** ((N - 2) / 4)
    return [
        below(f"N{N}_constancy", np.ptp(vals) / const, 1e-12),
        below(f"N{N}_value", abs(np.mean(vals) - exact) / exact, 1e-10),
        below(f"N{N}_purity", _pushed_kernel_purity(N, degree), 1e-10),
        below(f"N{N}_orthogonality", _orthogonality_drift(N, 24 if quick else 40), 1e-10),
    ]


@_timed(9, "stereographic lift suite")
def criterion_9(quick):
    return [c for N in DIMS for c in lift_checks(N, quick)]


def simulation_checks(run, window=10.0):
    """Rate, amplitude, core shape, positivity and time-derivative checks on a blow-up run."""
    slope, amp = run.rate_fit(window=window)
    target = rate_amplitude(run.N, run.h0)
    ab = run.column("ab_ratio")
    min_u = float(run.column("min_u").min())
    half = len(ab) // 2
    return [
        near("slope", slope, -0.5, 0.05),
        near("amplitude_rel", amp / target - 1, 0.0, 0.10),
        below("core_deviation", run.core_deviation(), 0.05),
        Check("min_u", min_u, 0.0, bool(min_u > 0)),
        # bounded is read as: no growth from the first half of the run to the second
        below("ab_ratio_growth", ab[half:].max() / ab[:half].max(), 2.0),
    ]


@_timed(10, "zonal blow-up simulation")
def criterion_10(quick, N=5, h0=1.0, t0=6.0, tmax=None, nodes=2000):
    from .flow import ThetaGrid, run_blowup

    tmax = tmax or (60.0 if quick else SIMULATION_TMAX)
    run = run_blowup(N, h0, t0, tmax, grid=ThetaGrid(N, 1000 if quick else nodes))
    return simulation_checks(run)


@_timed(11, "stationary constant solution")
def criterion_11(quick, N=5):
    from .flow import constant_state, step

    st = constant_state(N)
    u0 = st.u.copy()
    for _ in range(1000):
        st = step(st)
    return [below("drift", np.max(np.abs(st.u - u0)), 1e-6)]


@_timed(12, "stability predicate boundary case")
def criterion_12(quick):
    out = []
    for N in DIMS:
        edge = -Fraction(6, N - 4)
        ric = [[edge if i == j else 0 for j in range(N)] for i in range(N)]
        rep = stability_predicate(N, ric, 1)
        out.append(Check(f"N{N}_min_sigma", rep.min_sigma, Fraction(1), bool(rep.exact and rep.min_sigma == 1)))
    return out


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11, criterion_12)


def run_all(quick=False, select=None, log=None):
    """Run the selected criteria (all by default) in order."""
    results = []
    for k, fn in enumerate(CRITERIA, start=1):
        if select is not None and k not in select:
            continue
        crit = fn(quick)
        if log is not None:
            log(crit.line())
        results.append(crit)
    return results
