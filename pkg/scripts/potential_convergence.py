"""Relative error of the finite potential g_{m:n} against its limit 1/(m mu_log).

Prints one row per n; columns are m = 1..5.  For Beta models the error falls
off very fast in n and then sits on a rounding floor (1e-12 to 1e-10) that
creeps up with n as the recursion accumulates more terms.
"""

import argparse

import numpy as np

from ramgaps import ram
from ramgaps.hazard import HazardModel, mu_log


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", default="beta:2,3")
    ap.add_argument("--n", type=int, nargs="+", default=[10, 100, 1000, 10_000, 100_000])
    args = ap.parse_args()

    model = HazardModel.parse(args.model)
    ml = mu_log(model)
    m = np.arange(1, 6)
    print(f"model {model.label()}  mu_log = {ml:.12g}")
    print(f"{'n':>8s} " + " ".join(f"{'m=' + str(j):>10s}" for j in m))
    for n in args.n:
        g = ram.potential_vector(model, n)
        err = np.abs(g[1:6] * m * ml - 1.0)
        print(f"{n:8d} " + " ".join(f"{e:10.3e}" for e in err))


if __name__ == "__main__":
    main()
