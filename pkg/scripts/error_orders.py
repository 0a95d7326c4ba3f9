#!/usr/bin/env python3
"""Inner residual sizes of the first and second approximate solutions on the flat torus.

Prints the weighted sup of each residual and the fitted power of mu0, plus the
gain ratio between the two levels.  In dimension 5 the gain is one power of
mu0 rather than two: the |x|^{N-2} term of the Green's function expansion is
not removed by the quadratic correction.
"""

import argparse

import numpy as np

from yamabe_blowup.approximate import build_approx, inner_sup, model_state
from yamabe_blowup.dynamics import mu0
from yamabe_blowup.manifolds import Torus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dims", default="5,6,7")
    ap.add_argument("--times", default="1e2,1e3,1e4,1e5,1e6")
    args = ap.parse_args()
    times = [float(x) for x in args.times.split(",")]
    for N in (int(x) for x in args.dims.split(",")):
        state = lambda t, N=N: model_state(N, 1.0, t)
        one = build_approx(Torus(N), 1.0, [np.zeros(N)], [state], level=1)
        two = build_approx(Torus(N), 1.0, [np.zeros(N)], [state], level=2)
        r1 = np.array([inner_sup(one, t, subtract=None) for t in times])
        r2 = np.array([inner_sup(two, t, subtract="E2") for t in times])
        m = mu0(N, np.array(times))
        print(f"N = {N}")
        print(f"{'t':>8} {'mu0':>10} {'level 1':>11} {'level 2':>11} {'ratio':>10}")
        for row in zip(times, m, r1, r2, r2 / r1):
            print("{:8.0e} {:10.4g} {:11.4g} {:11.4g} {:10.4g}".format(*row))
        print(f"level-2 order {np.polyfit(np.log(m), np.log(r2), 1)[0]:.3f}, "
              f"gain order {np.polyfit(np.log(m[-4:]), np.log(r2[-4:] / r1[-4:]), 1)[0]:.3f}\n")


if __name__ == "__main__":
    main()
