"""Empirical P(G_hat_{j:n} >= k) at finite n next to the limiting zero-modified geometric law.

    python3 scripts/gap_table.py --model beta:2,3 --n 500 --reps 20000
"""

import argparse
import math

import numpy as np

from ramgaps import ram
from ramgaps.hazard import HazardModel
from ramgaps.limitchain import LimitLaw
from ramgaps.parallel import concat_sharded


def _gaps(rng, size, model, n, cols):
    return ram.gaps_from_boxes(ram.sample_boxes(model, n, size, rng))[:, :cols]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--model", default="beta:2,3")
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--reps", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--j", type=int, default=4)
    ap.add_argument("--k", type=int, default=4)
    args = ap.parse_args()

    model = HazardModel.parse(args.model)
    law = LimitLaw(model)
    gaps = concat_sharded(_gaps, args.reps, args.seed, args.workers, model=model, n=args.n, cols=args.j)
    print(f"model {model.label()}  n={args.n}  reps={args.reps}  seed={args.seed}")
    print(f"{'j':>3s} {'k':>3s} {'empirical':>10s} {'limit':>10s} {'z':>7s}")
    for j in range(1, args.j + 1):
        for k in range(1, args.k + 1):
            hat = float(np.mean(gaps[:, j - 1] >= k))
            p = law.gap_tail(j, k)
            se = math.sqrt(p * (1 - p) / args.reps)
            print(f"{j:3d} {k:3d} {hat:10.5f} {p:10.5f} {(hat - p) / se:7.2f}")
    print("mean gaps:", " ".join(f"{gaps[:, j].mean():.4f}/{law.mean_gap(j + 1):.4f}" for j in range(args.j)))


if __name__ == "__main__":
    main()
