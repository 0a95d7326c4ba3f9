"""Leading bubble error and the correction profile Q.

The correction solves  Delta Q + p W^{p-1} Q = -4/((N+2) kappa) * E(y)  where
E is the time-independent scaled leading error.  The source splits into a
radial part and a degree-two harmonic built from the traceless Ricci matrix;
each channel is a radial two-point problem solved by fourth-order finite
differences in the stretched variable ``r = r0 sinh(x)``.
"""

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import make_interp_spline

from .bubble import dimension, w, w_r, z_dil
from .errors import DomainError, NumericError
from .quadrature import compute_constants


@dataclass(frozen=True)
class CurvatureData:
    ric: np.ndarray
    scal: float
    hval: float

    def __post_init__(self):
        ric = np.asarray(self.ric, dtype=float)
        if ric.ndim != 2 or ric.shape[0] != ric.shape[1] or not np.allclose(ric, ric.T, atol=1e-12):
            raise DomainError("Ricci matrix must be square and symmetric")
        if not self.hval > 0:
            raise DomainError("h(z0) must be positive")
        object.__setattr__(self, "ric", ric)

    @classmethod
    def flat(cls, N, h=1.0):
        return cls(np.zeros((N, N)), 0.0, h)

    @classmethod
    def round_sphere(cls, N, h=1.0):
        return cls((N - 1) * np.eye(N), float(N * (N - 1)), h)

    @property
    def traceless(self):
        n = self.ric.shape[0]
        return self.ric - np.trace(self.ric) / n * np.eye(n)


def _coeffs(N):
    t = compute_constants(N)
    h1, h2, h3 = (float(x) for x in (t.hc1, t.hc2, t.hc3))
    return t, h1, h2, h3


def leading_F0(N, curv, y, drop_hc3=False):
    """The time-independent quadratic-order error profile F0(y)."""
    dim = dimension(N)
    _, h1, h2, h3 = _coeffs(N)
    if drop_hc3:
        h3 = 0.0
    y = np.asarray(y, dtype=float)
    r2 = np.sum(y * y, axis=-1)
    r = np.sqrt(r2)
    S, h, kinv = curv.scal, curv.hval, 1 / dim.kappa
    W = w(dim, r)
    ydw = r * w_r(dim, r)
    ryy = np.einsum("...i,ij,...j->...", y, curv.ric, y)
    bracket = (
        ((2 * h1 + 2 * N * h2 - kinv) * S + (2 * N * h3 - kinv) * h) * W
        + 4 * (h2 * S + h3 * h) * ydw
        + 4 / (N - 2) * (h1 * ryy + (h2 * S + h3 * h) * r2) * W ** dim.p
    )
    return (N + 2) * dim.kappa / 4 * bracket


def leading_F1(N, curv, mu, xi, y):
    """First-order translation error F1 for center offset ``xi``."""
    dim = dimension(N)
    _, h1, h2, h3 = _coeffs(N)
    y = np.asarray(y, dtype=float)
    xi = np.asarray(xi, dtype=float)
    r = np.sqrt(np.sum(y * y, axis=-1))
    S, h = curv.scal, curv.hval
    grad_dot = np.einsum("...i,i->...", y, xi) * (w_r(dim, r) / np.where(r > 0, r, 1.0))
    grad_dot = np.where(r > 0, grad_dot, 0.0)
    ry_xi = np.einsum("...i,ij,j->...", y, curv.ric, xi)
    y_xi = np.einsum("...i,i->...", y, xi)
    bracket = (h2 * S + h3 * h) * grad_dot + 2 / (N - 2) * (
        h1 * ry_xi + (h2 * S + h3 * h) * y_xi
    ) * w(dim, r) ** dim.p
    return (N + 2) * dim.kappa * mu * bracket


def dilation_rate_coefficient(N, hval):
    """k with  mubar^{-1} d(mubar)/dt = -k mubar^2."""
    t = compute_constants(N)
    return (N + 2) * t.c2.value / (4 * t.c1.value) * hval


def assemble_E0(N, curv, mubar, mubar_dot, y, drop_hc3=False):
    dim = dimension(N)
    y = np.asarray(y, dtype=float)
    r = np.sqrt(np.sum(y * y, axis=-1))
    W = w(dim, r)
    drift = mubar_dot / mubar * dim.p * W ** (dim.p - 1) * z_dil(dim, r)
    return drift + mubar**2 * leading_F0(N, curv, y, drop_hc3)


def scaled_error(N, curv, y, drop_hc3=False):
    """mubar^{-2} E0[mubar] with the dilation law imposed (independent of t)."""
    k = dilation_rate_coefficient(N, curv.hval)
    return assemble_E0(N, curv, 1.0, -k, y, drop_hc3)


# --- radial sources ---------------------------------------------------------

def _source_l0(N, curv):
    dim = dimension(N)
    k = dilation_rate_coefficient(N, curv.hval)
    trace_over_n = np.trace(curv.ric) / N
    iso = CurvatureData(trace_over_n * np.eye(N), curv.scal, curv.hval)
    pref = -4 / ((N + 2) * dim.kappa)

    def s0(r):
        y = np.zeros(np.shape(r) + (N,))
        y[..., 0] = r
        e = -k * dim.p * w(dim, r) ** (dim.p - 1) * z_dil(dim, r) + leading_F0(N, iso, y)
        return pref * e

    return s0


def _traceless_norm(curv):
    return float(np.linalg.norm(curv.traceless))


def _source_l2(N, curv):
    dim = dimension(N)
    _, h1, _, _ = _coeffs(N)
    tn = _traceless_norm(curv)
    return lambda r: -4 * h1 * tn / (N - 2) * r * r * w(dim, r) ** dim.p


def _constraint_direction(N):
    dim = dimension(N)
    return lambda r: dim.p * w(dim, r) ** (dim.p - 1) * z_dil(dim, r)


# --- finite differences on the stretched grid -------------------------------

def fd_weights(offsets, m):
    """Weights for the m-th derivative at 0 from samples at integer ``offsets``."""
    offsets = np.asarray(offsets, dtype=float)
    k = len(offsets)
    V = np.vander(offsets, k, increasing=True).T
    rhs = np.zeros(k)
    rhs[m] = math.factorial(m)
    return np.linalg.solve(V, rhs)


class StretchedGrid:
    """Cell-centred nodes x_k = (k + 1/2) h, r = r0 sinh(x), even mirror at r = 0."""

    def __init__(self, rmax, nodes, r0=1.0):
        self.r0 = r0
        xmax = math.asinh(rmax / r0)
        self.h = xmax / (nodes - 0.5)
        self.x = (np.arange(nodes) + 0.5) * self.h
        self.r = r0 * np.sinh(self.x)
        self.rp = r0 * np.cosh(self.x)
        self.rpp = self.r
        self.n = nodes

    def stencil_rows(self, order):
        """Sparse first- and second-derivative matrices in x of the given even order."""
        n, half = self.n, order // 2
        width = order + 1
        rows, cols, d1, d2 = [], [], [], []
        for k in range(n):
            lo = k - half
            if k + half > n - 1:
                lo = n - 1 - order - 1
                offs = np.arange(lo, lo + width + 1) - k
            else:
                offs = np.arange(lo, lo + width) - k
            w1 = fd_weights(offs, 1)
            w2 = fd_weights(offs, 2)
            for o, a1, a2 in zip(offs, w1, w2):
                j = k + o
                if j < 0:
                    j = -j - 1  # mirror: x_{-j-1} = -x_j
                rows.append(k)
                cols.append(j)
                d1.append(a1 / self.h)
                d2.append(a2 / self.h**2)
        D1 = sp.csr_matrix((d1, (rows, cols)), shape=(n, n))
        D2 = sp.csr_matrix((d2, (rows, cols)), shape=(n, n))
        return D1, D2

    def radial_operator(self, N, ell, order=4):
        """Rows of r'^2 [d_rr + (N-1)/r d_r - l(l+N-2)/r^2 + p W^{p-1}]."""
        dim = dimension(N)
        D1, D2 = self.stencil_rows(order)
        r, rp, rpp = self.r, self.rp, self.rpp
        first = (-rpp / rp + (N - 1) * rp / r)
        pot = rp**2 * (dim.p * w(dim, r) ** (dim.p - 1) - ell * (ell + N - 2) / r**2)
        A = D2 + sp.diags(first) @ D1 + sp.diags(pot)
        return A.tocsr(), D1

    def midpoint_weights(self):
        """Weights for int_0^{r(X)} g(r) dr with X = x_{n-1} + h/2."""
        return self.h * self.rp


@dataclass
class CorrectionProfile:
    N: int
    curv: CurvatureData
    grid: StretchedGrid
    q0: np.ndarray
    q2: np.ndarray
    tau: float
    condition: float
    traceless_unit: np.ndarray = field(repr=False)
    _splines: dict = field(default_factory=dict, repr=False)

    @property
    def rmax(self):
        return float(self.grid.r[-1])

    def _spline(self, name):
        if name not in self._splines:
            vals = getattr(self, name)
            x = np.concatenate([-self.grid.x[:6][::-1], self.grid.x])
            v = np.concatenate([vals[:6][::-1], vals])
            self._splines[name] = make_interp_spline(x, v, k=5)
        return self._splines[name]

    def _tail(self, name):
        """Coefficients (A, B) of the far-field law q ~ (A log r + B) r^{2-N}."""
        N, g = self.N, self.grid
        vals = getattr(self, name)
        R = g.r[-1]
        dq = self._spline(name).derivative()(g.x[-1]) / g.rp[-1]
        A = R ** (N - 1) * dq + (N - 2) * R ** (N - 2) * vals[-1]
        B = vals[-1] * R ** (N - 2) - A * math.log(R)
        return A, B

    def radial(self, name, r, deriv=0):
        """Mode ``name`` ('q0' or 'q2') and its r-derivatives; tail law past rmax."""
        r = np.asarray(r, dtype=float)
        N, g = self.N, self.grid
        inside = r <= g.r[-1]
        x = np.arcsinh(np.minimum(r, g.r[-1]) / g.r0)
        s = self._spline(name)
        rp = g.r0 * np.cosh(x)
        if deriv == 0:
            val = s(x)
        elif deriv == 1:
            val = s.derivative()(x) / rp
        else:
            raise DomainError("only value and first derivative are interpolated")
        if np.all(inside):
            return val
        A, B = self._tail(name)
        ro = np.where(inside, 1.0, r)
        if deriv == 0:
            far = (A * np.log(ro) + B) * ro ** (2 - N)
        else:
            far = (A + (2 - N) * (A * np.log(ro) + B)) * ro ** (1 - N)
        return np.where(inside, val, far)

    def extrapolated(self, y):
        return np.sqrt(np.sum(np.asarray(y, float) ** 2, axis=-1)) > self.rmax

    def harmonic(self, y):
        """Normalized traceless quadratic harmonic omega^T T omega / |T| at y/|y|."""
        y = np.asarray(y, dtype=float)
        r2 = np.sum(y * y, axis=-1)
        safe = np.where(r2 > 0, r2, 1.0)
        return np.einsum("...i,ij,...j->...", y, self.traceless_unit, y) / safe

    def value(self, y):
        y = np.asarray(y, dtype=float)
        r = np.sqrt(np.sum(y * y, axis=-1))
        out = self.radial("q0", r)
        if np.any(self.q2):
            out = out + self.radial("q2", r) * self.harmonic(y)
        return out

    def gradient(self, y):
        y = np.asarray(y, dtype=float)
        r = np.sqrt(np.sum(y * y, axis=-1))
        rs = np.where(r > 0, r, 1.0)[..., None]
        omega = y / rs
        g = self.radial("q0", r, 1)[..., None] * omega
        if np.any(self.q2):
            H = self.harmonic(y)[..., None]
            T = self.traceless_unit
            dH = 2 * (omega @ T - H * omega) / rs
            g = g + self.radial("q2", r, 1)[..., None] * H * omega + self.radial("q2", r)[..., None] * dH
        return g

    def laplacian(self, y):
        """Delta Q from the profile equation itself (exact up to the small multiplier)."""
        dim = dimension(self.N)
        y = np.asarray(y, dtype=float)
        r = np.sqrt(np.sum(y * y, axis=-1))
        src = -4 / ((self.N + 2) * dim.kappa) * scaled_error(self.N, self.curv, y)
        src = src + self.tau * _constraint_direction(self.N)(r)
        return src - dim.p * w(dim, r) ** (dim.p - 1) * self.value(y)


def _solve_mode(N, grid, ell, source, constrained):
    n = grid.n
    A, D1 = grid.radial_operator(N, ell)
    A = A.tolil()
    r, rp = grid.r, grid.rp
    rhs = rp**2 * source(r)
    # Robin closure at the last node, matched to the decaying far-field law.
    R = r[-1]
    sigma = source(np.array([R]))[0] * R**N
    D1_last = D1.getrow(n - 1).toarray().ravel() / rp[-1]
    if ell == 0:
        robin = R * D1_last
        robin[-1] += N - 2
        target = sigma * R ** (2 - N) / (2 - N)
    else:
        robin = R * D1_last
        robin[-1] += N
        target = -sigma * R ** (2 - N) / N
    A[n - 1, :] = robin
    rhs[-1] = target
    if not constrained:
        M = A.tocsc()
        return spla.spsolve(M, rhs), 0.0, _cond_estimate(M)
    dim = dimension(N)
    zeta = _constraint_direction(N)
    col = -rp**2 * zeta(r)
    col[-1] = 0.0
    zr = z_dil(dim, r)
    wts = dim.sphere_area * grid.midpoint_weights() * zr * r ** (N - 1)
    # tail of the pairing beyond the last cell, linear in (q_R, q'_R)
    Re = grid.r0 * math.sinh(grid.x[-1] + grid.h / 2)
    m = N - 3
    kz = dim.alpha * (N - 2) / 2
    int_log = Re ** (1 - m) * (math.log(Re) / (m - 1) + 1 / (m - 1) ** 2)
    int_one = Re ** (1 - m) / (m - 1)
    # A = R^{N-1} q' + (N-2) R^{N-2} q ;  B = R^{N-2} q - A log R
    coefA = int_log - math.log(R) * int_one
    coefB = int_one
    tail_q = -kz * dim.sphere_area * (coefA * (N - 2) * R ** (N - 2) + coefB * R ** (N - 2))
    tail_dq = -kz * dim.sphere_area * coefA * R ** (N - 1)
    norm_row = wts.copy()
    norm_row[-1] += tail_q
    norm_row += tail_dq * D1_last
    # unknowns are scaled by the decay law so that all columns are comparable
    decay = (1 + r) ** (2.0 - N)
    norm_row = norm_row * decay
    scale = 1.0 / np.max(np.abs(norm_row))
    B = sp.bmat([[A.tocsr() @ sp.diags(decay), sp.csr_matrix(col[:, None])],
                 [sp.csr_matrix(norm_row[None, :] * scale), None]]).tocsr()
    rows = 1.0 / abs(B).max(axis=1).toarray().ravel()
    B = (sp.diags(rows) @ B).tocsc()
    sol = spla.spsolve(B, rows * np.append(rhs, 0.0))
    if not np.all(np.isfinite(sol)):
        raise NumericError("radial correction system is singular; refine the grid")
    return sol[:-1] * decay, float(sol[-1]), _cond_estimate(B)


def _cond_estimate(M):
    lu = spla.splu(M.tocsc())
    n = M.shape[0]
    inv = spla.LinearOperator((n, n), matvec=lu.solve, rmatvec=lambda v: lu.solve(v, trans="T"))
    return float(spla.onenormest(M) * spla.onenormest(inv))


def solve_Q0(N, curv, rmax=1e4, nodes=2000, r0=1.0):
    """Solve the correction equation in the radial and traceless quadratic channels."""
    if rmax < 1e3:
        raise DomainError("rmax must be at least 1e3")
    dim = dimension(N)
    del dim
    grid = StretchedGrid(rmax, nodes, r0)
    q0, tau, cond = _solve_mode(N, grid, 0, _source_l0(N, curv), constrained=True)
    tn = _traceless_norm(curv)
    if tn > 1e-14:
        q2, _, _ = _solve_mode(N, grid, 2, _source_l2(N, curv), constrained=False)
        unit = curv.traceless / tn
    else:
        q2 = np.zeros(nodes)
        unit = np.zeros((N, N))
    return CorrectionProfile(N, curv, grid, q0, q2, tau, cond, unit)


def eval_Psi0(profile, mubar, y):
    """mubar^2 Q(y); second return value flags points beyond the solved range."""
    return mubar**2 * profile.value(y), profile.extrapolated(y)


def kernel_singular_values(N, curv, rmax=1e4, nodes=600, r0=1.0):
    """Smallest singular values of the unbordered radial operator (dense, small grids)."""
    grid = StretchedGrid(rmax, nodes, r0)
    A, D1 = grid.radial_operator(N, 0)
    A = A.tolil()
    R = grid.r[-1]
    robin = R * D1.getrow(nodes - 1).toarray().ravel() / grid.rp[-1]
    robin[-1] += N - 2
    A[nodes - 1, :] = robin
    s = np.linalg.svd(A.toarray(), compute_uv=False)
    return np.sort(s)


def equation_residual(profile, order=6):
    """Weighted relative residual of the radial equations with an independent stencil."""
    N, g = profile.N, profile.grid
    out = []
    sources = {"q0": _source_l0(N, profile.curv), "q2": _source_l2(N, profile.curv)}
    zeta = _constraint_direction(N)
    for name, ell in (("q0", 0), ("q2", 2)):
        q = getattr(profile, name)
        A, _ = g.radial_operator(N, ell, order=order)
        s = sources[name](g.r)
        if name == "q0":
            s = s + profile.tau * zeta(g.r)
        res = (A @ q) / g.rp**2 - s
        wgt = (1 + g.r) ** N
        interior = slice(0, g.n - order)
        scale = np.max(np.abs(s * wgt)[interior])
        if scale == 0:
            out.append(float(np.max(np.abs(res[interior] * wgt[interior]))))
        else:
            out.append(float(np.max(np.abs(res * wgt)[interior]) / scale))
    return tuple(out)
