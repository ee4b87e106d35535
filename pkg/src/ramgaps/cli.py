"""Command-line front end.

    ramgaps simulate   --model gem:1 --n 8 --replicates 5 --seed 7
    ramgaps exact      --model gem:1 --op entrance --m 2
    ramgaps limit      --model beta:2,3 --op gap --j 3 --k 2
    ramgaps interleave --model gem:1 --k 5 --j 8 --seed 1
    ramgaps records    --p0 geometric:0.5 --flavor weak --j 10
    ramgaps verify     --suite gem-gaps --seed 42
    ramgaps identities

Exit codes: 0 success, 1 invalid configuration, 2 a verification check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__, limitchain, ram, records
from .hazard import HazardModel, mu_log, mu_moment
from .limitchain import LimitLaw
from .parallel import run_sharded
from .pointproc import limit_sequences
from .verify import SUITES, manifest, run_suite, suite_identities


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _json_default(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"cannot serialise {type(v)}")


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def _dump(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, default=_json_default, indent=2) + "\n"


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _model(args) -> HazardModel:
    try:
        return HazardModel.parse(args.model)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"bad --model {args.model!r}: {exc}") from exc


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise ConfigError("missing " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


# -- simulate ------------------------------------------------------------------


def _simulate_shard(rng, size, model, n, max_j):
    boxes = ram.sample_boxes(model, n, size, rng)
    rows = []
    for row in boxes:
        conf = ram.Configuration.from_boxes(row)
        st = ram.sample_statistics(conf, max_j)
        rows.append({"M": conf.m_max, "counts": list(conf.counts), "gaps": list(conf.gaps), **st})
    return rows


def cmd_simulate(args) -> int:
    _need(args, "n", "seed")
    if args.n < 1 or args.replicates < 1:
        raise ConfigError("--n and --replicates must be >= 1")
    model = _model(args)
    shards = run_sharded(_simulate_shard, args.replicates, args.seed, args.workers, model=model, n=args.n, max_j=args.max_j)
    rows = [r for shard in shards for r in shard]
    for i, r in enumerate(rows):
        r["replicate"] = i
    meta = {"command": "simulate", "model": model.to_dict(), "n": args.n, "replicates": args.replicates,
            "seed": args.seed, "workers": args.workers}
    if args.format == "json":
        _emit(_dump({**meta, "rows": rows}), args.out)
        return 0
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    stat_cols = ["L", "K0"] + [f"K{j}" for j in range(1, args.max_j + 1)]
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["replicate", "M", *stat_cols, "counts", "gaps"])
    for r in rows:
        writer.writerow([r["replicate"], r["M"], *[r[c] for c in stat_cols],
                         " ".join(map(str, r["counts"])), " ".join(map(str, r["gaps"]))])
    _emit(buf.getvalue(), args.out)
    return 0


# -- exact / limit -------------------------------------------------------------


def _exact_value(args, model: HazardModel):
    op = args.op
    if op == "mu":
        _need(args, "i", "j")
        return {"i": args.i, "j": args.j}, mu_moment(model, args.i, args.j)
    if op == "mulog":
        return {}, mu_log(model)
    if op == "config":
        _need(args, "counts")
        counts = _int_list(args.counts)
        return {"counts": counts, "gaps": ram.gaps_from_counts(counts)}, ram.exact_config_probability(model, counts)
    if op == "qstar":
        _need(args, "l", "m")
        return {"l": args.l, "m": args.m}, ram.qstar_transition(model, args.l, args.m)
    if op == "decrement":
        _need(args, "l", "m")
        return {"l": args.l, "m": args.m}, ram.decrement_transition(model, args.l, args.m)
    if op == "potential":
        _need(args, "n", "m")
        return {"n": args.n, "m": args.m}, ram.finite_potential(model, args.n, args.m)
    if op == "reversed":
        _need(args, "n", "l", "m")
        return {"n": args.n, "l": args.l, "m": args.m}, ram.reversed_transition(model, args.n, args.l, args.m)
    if op == "gaps":
        _need(args, "counts")
        return {"counts": _int_list(args.counts)}, ram.gaps_from_counts(_int_list(args.counts))
    if op == "counts":
        _need(args, "gaps")
        return {"gaps": _int_list(args.gaps)}, ram.counts_from_gaps(_int_list(args.gaps))
    return _limit_value(args, model)


def _limit_value(args, model: HazardModel):
    law = LimitLaw(model, moment_bound=8)
    op = args.op
    if op == "entrance":
        _need(args, "m")
        return {"m": args.m}, law.entrance_pmf(args.m)
    if op == "transition":
        _need(args, "m", "n")
        return {"m": args.m, "n": args.n}, law.transition_pmf(args.m, args.n)
    if op == "fdd":
        _need(args, "counts")
        return {"counts": _int_list(args.counts)}, law.fdd_counts_pmf(_int_list(args.counts))
    if op == "gap":
        _need(args, "j", "k")
        return {"j": args.j, "k": args.k}, law.gap_tail(args.j, args.k)
    if op == "hitting":
        _need(args, "j")
        return {"j": args.j}, law.hitting(args.j)
    if op == "meangap":
        _need(args, "j")
        return {"j": args.j}, law.mean_gap(args.j)
    if op == "meanq":
        _need(args, "j")
        return {"j": args.j}, law.mean_Q(args.j)
    if op == "n0tail":
        _need(args, "k")
        return {"k": args.k}, law.n0_tail(args.k)
    if op == "n0tail-integral":
        _need(args, "k")
        return {"k": args.k}, law.n0_tail_integral(args.k)
    if op == "smallcounts":
        _need(args, "j")
        return {"j": args.j}, law.mean_small_counts(args.j)
    if op == "gem-recursion":
        theta = args.theta if args.theta is not None else model.theta
        if theta is None:
            raise ConfigError("gem-recursion needs --theta or a GEM model")
        return {"theta": theta, "n_max": args.n or 30}, limitchain.gem_recursion_check(theta, args.n or 30)
    raise ConfigError(f"unknown --op {op!r}")


def _law_command(args, fn, command: str) -> int:
    _need(args, "op")
    model = _model(args)
    values, value = fn(args, model)
    if isinstance(value, np.generic):
        value = value.item()
    payload = {"command": command, "law": args.op, "args": values, "model": model.to_dict(), "value": value}
    if args.format == "csv":
        _emit(f"law,value\n{args.op},{value!r}\n", args.out)
    else:
        _emit(_dump(payload), args.out)
    return 0


def cmd_exact(args) -> int:
    return _law_command(args, _exact_value, "exact")


def cmd_limit(args) -> int:
    return _law_command(args, _limit_value, "limit")


# -- interleave ------------------------------------------------------------------


def _interleave_shard(rng, size, model, k, j):
    return [limit_sequences(model, rng, k, j).to_dict() for _ in range(size)]


def cmd_interleave(args) -> int:
    _need(args, "seed")
    model = _model(args)
    k = 5 if args.k is None else args.k
    j = 8 if args.j is None else args.j
    if k < 0 or j < 1:
        raise ConfigError("need --k >= 0 and --j >= 1")
    shards = run_sharded(_interleave_shard, args.replicates, args.seed, args.workers, model=model, k=k, j=j)
    traces = [t for s in shards for t in s]
    payload = {"command": "interleave", "model": model.to_dict(), "seed": args.seed, "k_bars": k, "j_stars": j,
               "traces": traces}
    _emit(_dump(payload), args.out)
    return 0


# -- records -----------------------------------------------------------------------


def _p0(text: str) -> records.DiscreteLaw:
    kind, _, rest = text.partition(":")
    try:
        if kind == "geometric":
            return records.DiscreteLaw.geometric(float(rest))
        if kind == "probs":
            return records.DiscreteLaw.from_probs([float(x) for x in rest.split(",")])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"bad --p0 {text!r}; use geometric:P or probs:p1,p2,...")


def cmd_records(args) -> int:
    j_max = args.j or 10
    if args.flavor == "limit":
        model = _model(args)
        spec = records.limit_chain_spec(LimitLaw(model, moment_bound=8))
        source = {"model": model.to_dict()}
    else:
        spec = records.record_chain_spec(_p0(args.p0), args.flavor)
        source = {"p0": args.p0}
    h = records.hitting_probabilities(spec, j_max)
    g = records.solve_potential(spec, j_max)
    stay = [spec.p(j, j) for j in range(1, j_max + 1)]
    payload = {
        "command": "records",
        "flavor": args.flavor,
        **source,
        "states": list(range(1, j_max + 1)),
        "hitting": h[1:].tolist(),
        "stay": stay,
        "potential": g[1:].tolist(),
        "potential_residual": float(records.potential_residuals(spec, g, j_max).max()),
        "transition": [[spec.p(i, jj) for jj in range(1, j_max + 1)] for i in range(1, j_max + 1)],
    }
    _emit(_dump(payload), args.out)
    return 0


# -- verify / identities --------------------------------------------------------------


def cmd_verify(args) -> int:
    _need(args, "seed")
    names = SUITES if args.suite == "all" else (args.suite,)
    results = []
    for name in names:
        res = run_suite(name, seed=args.seed, workers=args.workers, scale=args.scale)
        results.append(res)
        for c in res.checks:
            print(c.line(), file=sys.stderr)
    _emit(_dump(manifest(results, args.seed)), args.out)
    return 0 if all(r.passed for r in results) else 2


def cmd_identities(args) -> int:
    checks = suite_identities()
    payload = {"command": "identities", "checks": [c.to_dict() for c in checks], "pass": all(c.passed for c in checks)}
    _emit(_dump(payload), args.out)
    return 0 if payload["pass"] else 2


# -- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ramgaps", description="Gaps and tail counts of samples from residual allocation models.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, model=True, stochastic=False):
        if model:
            sp.add_argument("--model", default="gem:1",
                            help="gem:THETA, beta:A,B, atoms:H1,H2/W1,W2 or a JSON object")
        if stochastic:
            sp.add_argument("--seed", type=int, help="required for reproducible output")
            sp.add_argument("--workers", type=int, default=1)
            sp.add_argument("--replicates", type=int, default=1)
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--out", help="write here instead of stdout")

    def indices(sp):
        for name in ("n", "m", "l", "i", "j", "k"):
            sp.add_argument(f"--{name}", type=int)
        sp.add_argument("--counts", help="comma-separated counts")
        sp.add_argument("--gaps", help="comma-separated gaps")
        sp.add_argument("--theta", type=float)

    sp = sub.add_parser("simulate", help="simulate samples of size n and their statistics")
    common(sp, stochastic=True)
    sp.add_argument("--n", type=int)
    sp.add_argument("--steps", type=int, help="unused; accepted for a uniform interface")
    sp.add_argument("--max-j", type=int, default=5)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("exact", help="exact finite-n quantities (config, qstar, decrement, potential, reversed, ...)")
    common(sp)
    sp.add_argument("--op", required=True)
    indices(sp)
    sp.set_defaults(func=cmd_exact)

    sp = sub.add_parser("limit", help="limit laws (entrance, transition, fdd, gap, meanq, n0tail, ...)")
    common(sp)
    sp.add_argument("--op", "--law", dest="op", required=True)
    indices(sp)
    sp.set_defaults(func=cmd_limit)

    sp = sub.add_parser("interleave", help="sample Yule / renewal interleavings")
    common(sp, stochastic=True)
    sp.add_argument("--k", type=int, help="bars (renewal points) to resolve")
    sp.add_argument("--j", type=int, help="stars (Yule births) to resolve")
    sp.set_defaults(func=cmd_interleave)

    sp = sub.add_parser("records", help="occupation laws of record chains or the limit chain")
    common(sp)
    sp.add_argument("--p0", default="geometric:0.5")
    sp.add_argument("--flavor", choices=("weak", "strict", "limit"), default="weak")
    sp.add_argument("--j", type=int)
    sp.set_defaults(func=cmd_records)

    sp = sub.add_parser("verify", help="run verification suites and write a manifest")
    common(sp, model=False, stochastic=True)
    sp.add_argument("--suite", choices=(*SUITES, "all"), default="all")
    sp.add_argument("--scale", type=float, default=1.0, help="multiplier on replicate counts")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("identities", help="pure numeric identity residuals")
    common(sp, model=False)
    sp.set_defaults(func=cmd_identities)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "workers", 1) < 1:
            raise ConfigError("--workers must be >= 1")
        return args.func(args)
    except ConfigError as exc:
        print(f"ramgaps: {exc}", file=sys.stderr)
        return 1
    except (ValueError, IndexError) as exc:
        print(f"ramgaps: invalid configuration: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
