#!/usr/bin/env python3
"""Closed-form dilation and translation corrections against a Runge-Kutta integration.

Tabulates lambda(t) and xi(t) for power-law forcing and a mixed-sign Ricci
matrix, and reports the stability margin of that matrix.
"""

import argparse

import numpy as np

from yamabe_blowup.acceptance import criterion_5
from yamabe_blowup.dynamics import Exponents, RicciMatrix, solve_lambda, solve_xi, stability_predicate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=5)
    ap.add_argument("--t0", type=float, default=10.0)
    args = ap.parse_args()
    N, t0 = args.dim, args.t0
    ex = Exponents(N)
    t = np.geomspace(t0, 100 * t0, 9)
    lam, _ = solve_lambda(lambda s: 0.7 * s ** (-(ex.nu1 + 2) / 2), t0, t)
    ric = np.diag(np.linspace(-2.0, 1.0, N))
    direction = np.linspace(1.0, -0.5, N)
    xi, _ = solve_xi(lambda s: np.outer(s ** (-(ex.nu2 + 2) / 2), direction),
                     RicciMatrix.from_ricci(N, ric, 1.0), ex.nu2, t0, t)
    print(f"{'t':>8} {'lambda':>12} {'|xi|':>12}")
    for row in zip(t, lam, np.linalg.norm(xi, axis=1)):
        print("{:8.4g} {:12.5g} {:12.5g}".format(*row))
    print("Ricci stability:", stability_predicate(N, ric, 1.0))
    result = criterion_5(False, N=N, t0=t0)
    for check in result.checks:
        print(f"  {check.name}: {check.value:.3e} ({'ok' if check.passed else 'FAILED'})")


if __name__ == "__main__":
    main()
