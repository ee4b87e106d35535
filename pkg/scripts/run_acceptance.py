"""Run every verification suite and write a JSON manifest.

    python3 scripts/run_acceptance.py --seed 42 --workers 4 --out manifest.json
"""

import argparse
import json
import sys
import time

from ramgaps.verify import SUITES, manifest, run_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--scale", type=float, default=1.0, help="multiplier on replicate counts")
    ap.add_argument("--suite", action="append", choices=SUITES, help="repeatable; default all")
    ap.add_argument("--out", default="manifest.json")
    ap.add_argument("--verbose", action="store_true", help="print every check, not just failures")
    args = ap.parse_args()

    results = []
    for number, name in enumerate(args.suite or SUITES, start=1):
        t0 = time.perf_counter()
        res = run_suite(name, seed=args.seed, workers=args.workers, scale=args.scale)
        results.append(res)
        status = "PASS" if res.passed else "FAIL"
        print(f"{number:2d} {name:<14s} [{status}] {len(res.checks):4d} checks  {time.perf_counter() - t0:6.1f}s")
        for c in res.checks:
            if args.verbose or not c.passed:
                print("     ", c.line())
    with open(args.out, "w") as fh:
        json.dump(manifest(results, args.seed), fh, indent=2, sort_keys=True)
    print(f"manifest written to {args.out}")
    return 0 if all(r.passed for r in results) else 2


if __name__ == "__main__":
    sys.exit(main())
