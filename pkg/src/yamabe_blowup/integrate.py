"""Adaptive Gauss-Kronrod (7/15) quadrature and a product rule on spheres.

Every integrand in this package is a smooth combination of rational powers
of ``1 + r**2``, so a globally adaptive G7K15 rule with bisection of the
worst panel converges quickly.  The tail ``[1, inf)`` is folded onto
``(0, 1]`` with ``r = 1/s``.
"""

import heapq
import math

import numpy as np
from scipy import special

from .errors import NumericError

# Kronrod abscissae (non-negative half) and weights; the Gauss nodes are the
# odd-indexed Kronrod nodes.
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
_KW = np.concatenate([_WK[:-1], _WK[::-1]])
_GW = np.zeros(15)
_GW[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


def gk15(f, a, b):
    """One G7K15 panel; returns (kronrod estimate, |kronrod - gauss|)."""
    c, h = 0.5 * (a + b), 0.5 * (b - a)
    fx = f(c + h * _NODES)
    k = h * np.dot(_KW, fx)
    g = h * np.dot(_GW, fx)
    return k, abs(k - g)


def _adaptive(f, a, b, rtol, atol, max_panels):
    k, e = gk15(f, a, b)
    heap = [(-e, a, b, k)]
    total, err = k, e
    history = [total]
    while err > max(atol, rtol * abs(total)):
        if len(heap) >= max_panels:
            raise NumericError(
                "adaptive quadrature did not converge",
                last_values=history[-2:], error_estimate=err,
            )
        e0, lo, hi, k0 = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        k1, e1 = gk15(f, lo, mid)
        k2, e2 = gk15(f, mid, hi)
        total += k1 + k2 - k0
        err += e1 + e2 + e0
        heapq.heappush(heap, (-e1, lo, mid, k1))
        heapq.heappush(heap, (-e2, mid, hi, k2))
        history.append(total)
    panels = sorted((lo, hi) for _, lo, hi, _ in heap)
    return total, err, panels


def _folded(f, start):
    """Integrand on s in (0, 1] equivalent to f on [start, inf) via r = start - 1 + 1/s."""

    def g(s):
        out = np.zeros_like(s)
        nz = s > 0
        out[nz] = f(start - 1.0 + 1.0 / s[nz]) / s[nz] ** 2
        return out

    return g


class QuadResult(float):
    """Float carrying an error estimate and the final panel list."""

    def __new__(cls, value, error, panels):
        obj = super().__new__(cls, value)
        obj.error = error
        obj.panels = panels
        return obj


def integrate(f, a, b, rtol=1e-13, atol=0.0, max_panels=4000):
    """Integrate a vectorized ``f`` over ``[a, b]`` with ``b`` possibly ``inf``."""
    if np.isinf(b):
        head = _adaptive(f, a, a + 1.0, rtol, atol, max_panels)
        tail = _adaptive(_folded(f, a + 1.0), 0.0, 1.0, rtol, atol, max_panels)
        return QuadResult(head[0] + tail[0], head[1] + tail[1], (head[2], tail[2]))
    value, err, panels = _adaptive(f, a, b, rtol, atol, max_panels)
    return QuadResult(value, err, panels)


def refine(f, a, b, result):
    """Re-sum ``result`` with every final panel bisected (node doubling)."""

    def resum(fun, panels):
        s = 0.0
        for lo, hi in panels:
            mid = 0.5 * (lo + hi)
            s += gk15(fun, lo, mid)[0] + gk15(fun, mid, hi)[0]
        return s

    if np.isinf(b):
        head_panels, tail_panels = result.panels
        return resum(f, head_panels) + resum(_folded(f, a + 1.0), tail_panels)
    return resum(f, result.panels)


def sphere_rule(m, degree):
    """Product Gauss rule on the unit sphere S^m in R^{m+1}: (points, weights)."""
    if m == 1:
        k = 2 * degree
        ang = 2 * np.pi * (np.arange(k) + 0.5) / k
        return np.column_stack([np.cos(ang), np.sin(ang)]), np.full(k, 2 * np.pi / k)
    a = (m - 2) / 2
    xs, ws = special.roots_jacobi(degree, a, a)
    sub, subw = sphere_rule(m - 1, degree)
    pts = []
    wts = []
    for x, wx in zip(xs, ws):
        s = math.sqrt(1 - x * x)
        pts.append(np.column_stack([np.full(len(sub), x), s * sub]))
        wts.append(wx * subw)
    return np.vstack(pts), np.concatenate(wts)
