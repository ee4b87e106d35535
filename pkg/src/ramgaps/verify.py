"""Verification suites: exact identities and seeded Monte Carlo checks.

Each suite returns a list of :class:`~ramgaps.stats.GofReport`.  Every
random draw comes from a generator seeded by (seed, suite, check), so a
suite's output depends only on the seed, the worker count and ``scale``
(a multiplier on replicate counts, 1.0 for the full-size runs).
"""

from __future__ import annotations

import itertools
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from . import hazard, limitchain, pointproc, ram, records
from .hazard import HazardModel
from .limitchain import LimitLaw
from .parallel import concat_sharded
from .stats import (
    EmpiricalDist,
    GofReport,
    chi_square_gof,
    chi_square_independence,
    chi_square_two_sample,
    exact_check,
    ks_one_sample,
    ks_two_sample,
    mean_check,
    proportion_check,
)

SUITES = (
    "gem-gaps",
    "finite-law",
    "constructions",
    "potential",
    "moments",
    "growth",
    "identities",
    "yule",
    "ignatov",
    "records",
)
INT_CAP = 2**62


@dataclass
class SuiteResult:
    suite: str
    seed: int
    checks: list[GofReport] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "seed": self.seed,
            "pass": self.passed,
            "seconds": round(self.seconds, 3),
            "checks": [c.to_dict() for c in self.checks],
        }


def _entropy(seed: int, suite: str, *tags) -> list[int]:
    return [seed, SUITES.index(suite), *tags]


def _rng(seed: int, suite: str, *tags) -> np.random.Generator:
    return np.random.default_rng(_entropy(seed, suite, *tags))


def _to_int(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.where(q < INT_CAP, q, INT_CAP).astype(np.int64)


def _reps(base: int, scale: float, floor: int = 1000) -> int:
    return max(floor, int(round(base * scale)))


# -- sharded workers (module level so they pickle) ---------------------------


def _gaps_worker(rng, size, model, n, cols):
    return ram.gaps_from_boxes(ram.sample_boxes(model, n, size, rng))[:, :cols]


def _config_worker(rng, size, model, n):
    return ram.gaps_from_boxes(ram.sample_boxes(model, n, size, rng))


def _chain_worker(rng, size, model, k):
    return _to_int(LimitLaw(model, moment_bound=4).simulate_chain(k, rng, size))


def _yule_renewal_worker(rng, size, model, k):
    return _to_int(pointproc.yule_at_renewal(model, k, rng, size))


def _reversed_worker(rng, size, model, n, k):
    return _to_int(ram.sample_reversed_tail_counts(model, n, k, size, rng))


def _stats_worker(rng, size, model, j_max, stop_level):
    out = LimitLaw(model, moment_bound=4).run_statistics(rng, size, j_max, stop_level)
    return np.concatenate([out["G"], out["K"]], axis=1)


# -- exact cell tables -----------------------------------------------------------


def chain_cells(law: LimitLaw, k: int, total: int, min_expected: float = 5.0) -> dict:
    """Exact P(Q_0..Q_k = q) for every path whose expected count is >= min_expected.

    Depth-first over prefixes; a prefix is dropped once its own expected count
    is too small, so the listed cells are a fixed, data-independent partition.
    """
    cells: dict[tuple, float] = {}

    def children(last):
        cum = 0.0
        q = max(last, 1)
        while True:
            p = law.transition_pmf(last, q) if last else law.entrance_pmf(q)
            cum += p
            yield q, p, 1.0 - cum
            q += 1

    def walk(prefix, mass):
        if len(prefix) == k + 1:
            cells[tuple(prefix)] = mass
            return
        last = prefix[-1] if prefix else 0
        for q, p, rest in children(last):
            if mass * p * total >= min_expected:
                walk(prefix + [q], mass * p)
            if mass * rest * total < min_expected:
                break

    walk([], 1.0)
    return cells


def config_cells(model: HazardModel, n: int, max_boxes: int) -> dict:
    """Exact law of the gap vector over all configurations with M_n <= max_boxes."""
    out = {}
    for counts in ram.enumerate_configurations(n, max_boxes):
        out[tuple(ram.gaps_from_counts(counts))] = ram.exact_config_probability(model, counts)
    return out


# -- verification suites ---------------------------------------------------------


def suite_gem_gaps(seed=42, workers=1, scale=1.0) -> list[GofReport]:
    """GEM(theta): P(G_hat_{i:n} >= k) = (theta/(i+theta))^k and G_hat_1, G_hat_2 independent."""
    reps = _reps(100_000, scale)
    out = []
    for a, theta in enumerate((0.5, 1.0, 2.0)):
        model = HazardModel.gem(theta)
        for b, n in enumerate((10, 100)):
            gaps = concat_sharded(_gaps_worker, reps, _entropy(seed, "gem-gaps", a, b), workers,
                                  model=model, n=n, cols=4)
            for i, k in itertools.product(range(1, 5), range(1, 5)):
                prob = (theta / (i + theta)) ** k
                hits = int(np.count_nonzero(gaps[:, i - 1] >= k))
                out.append(proportion_check(f"gem({theta:g}) n={n} P(G{i}>={k})", hits, reps, prob, n_se=4.0))
            out.append(chi_square_independence(gaps[:, 0], gaps[:, 1], name=f"gem({theta:g}) n={n} G1 indep G2"))
    return out


def suite_finite_law(seed=42, workers=1, scale=1.0) -> list[GofReport]:
    """Configuration frequencies at n = 3 against the exact mixed-multinomial law."""
    reps = _reps(1_000_000, scale)
    out = []
    models = [("gem(1)", HazardModel.gem(1.0)), ("atoms(0.3,0.7)", HazardModel.discrete([0.3, 0.7], [0.5, 0.5]))]
    for a, (label, model) in enumerate(models):
        cells = config_cells(model, 3, 60)
        gaps = concat_sharded(_config_worker, reps, _entropy(seed, "finite-law", a), workers, model=model, n=3)
        emp = EmpiricalDist.from_samples(gaps)
        out.append(chi_square_gof(emp, cells, name=f"{label} n=3 configuration law"))
        out.append(exact_check(f"{label} n=3 exact law sums to 1 (M<=60)", abs(1.0 - math.fsum(cells.values())), 1e-6))
    return out


def suite_constructions(seed=42, workers=1, scale=1.0) -> list[GofReport]:
    """(Q_0..Q_3) from the mixed-NB chain, Yule-at-renewal and finite-n reversal agree with each other and with the exact law."""
    reps = _reps(100_000, scale)
    n_big = 10_000
    out = []
    for a, model in enumerate((HazardModel.gem(1.0), HazardModel.beta(2.0, 3.0))):
        law = LimitLaw(model, moment_bound=4)
        label = model.label()
        samples = {
            "nb-chain": concat_sharded(_chain_worker, reps, _entropy(seed, "constructions", a, 0), workers,
                                       model=model, k=3),
            "yule-renewal": concat_sharded(_yule_renewal_worker, reps, _entropy(seed, "constructions", a, 1), workers,
                                           model=model, k=3),
            f"reversed-n{n_big}": concat_sharded(_reversed_worker, reps, _entropy(seed, "constructions", a, 2),
                                                 workers, model=model, n=n_big, k=3),
        }
        emps = {key: EmpiricalDist.from_samples(v) for key, v in samples.items()}
        for x, y in itertools.combinations(emps, 2):
            out.append(chi_square_two_sample(emps[x], emps[y], name=f"{label} {x} vs {y}"))
        cells = chain_cells(law, 3, reps)
        for key, emp in emps.items():
            out.append(chi_square_gof(emp, cells, name=f"{label} {key} vs exact fdd"))
    return out


def suite_potential(seed=42, workers=1, scale=1.0) -> list[GofReport]:
    """g_{m:n} -> 1/(m mu_log) for Beta(2,3), with the error shrinking in n."""
    model = HazardModel.beta(2.0, 3.0)
    ml = hazard.mu_log(model)
    m = np.arange(1, 6)

    def rel_err(n):
        g = ram.potential_vector(model, n)
        return np.abs(g[1:6] * m * ml - 1.0)

    big, small = rel_err(100_000), rel_err(100)
    out = [exact_check(f"beta(2,3) |g_(m:1e5) m mu_log - 1|, m={j}", float(e), 0.05) for j, e in zip(m, big)]
    out.append(
        exact_check(
            "beta(2,3) max error at n=1e5 below max error at n=1e2",
            float(max(0.0, big.max() - small.max())),
            0.0,
            note=f"n=1e5: {big.max():.3g}, n=1e2: {small.max():.3g}",
        )
    )
    return out


def suite_moments(seed=42, workers=1, scale=1.0) -> list[GofReport]:
    """Simulated means of G_j, Q_j, K_j and K_0 against their closed forms."""
    out = []
    reps = _reps(100_000, scale)
    # E G_j = 1/(j mu_log), for a non-GEM and a GEM model
    for a, model in enumerate((HazardModel.beta(2.0, 3.0), HazardModel.gem(3.0))):
        law = LimitLaw(model, moment_bound=4)
        arr = concat_sharded(_stats_worker, reps, _entropy(seed, "moments", 0, a), workers,
                             model=model, j_max=5, stop_level=6.0)
        for j in range(1, 6):
            out.append(mean_check(f"{model.label()} E G_{j}", arr[:, j - 1], law.mean_gap(j)))
    # E Q_j for GEM(3)
    model = HazardModel.gem(3.0)
    law = LimitLaw(model, moment_bound=4)
    q = concat_sharded(_chain_worker, _reps(1_000_000, scale), _entropy(seed, "moments", 1), workers, model=model, k=3)
    for j in range(4):
        out.append(mean_check(f"gem(3) E Q_{j}", q[:, j].astype(float), law.mean_Q(j)))
    # E K_j and E K_0 for GEM(2)
    model = HazardModel.gem(2.0)
    law = LimitLaw(model, moment_bound=4)
    arr = concat_sharded(_stats_worker, reps, _entropy(seed, "moments", 2), workers,
                         model=model, j_max=4, stop_level=1e12)
    kk = arr[:, 4:]
    for j in range(1, 5):
        out.append(mean_check(f"gem(2) E K_{j}", kk[:, j], law.mean_small_counts(j)))
    out.append(mean_check("gem(2) E K_0", kk[:, 0], law.mean_small_counts(0)))
    return out


def suite_growth(seed=42, workers=1, scale=1.0) -> list[GofReport]:
    """GEM(1): median of Q_200^(1/200) over 1000 paths lies in [0.9e, 1.1e]."""
    law = LimitLaw(HazardModel.gem(1.0), moment_bound=4)
    paths = _reps(1000, scale, floor=200)
    log_q = law.simulate_log_growth(200, _rng(seed, "growth", 0), paths)
    ratio = float(np.exp(np.median(log_q) / 200.0) / math.e)
    return [exact_check("gem(1) median Q_200^(1/200) / e within 10% of 1", abs(ratio - 1.0), 0.1,
                        note=f"ratio={ratio:.5f}")]


def suite_identities(seed=42, workers=1, scale=1.0) -> list[GofReport]:
    """Pure numeric identities; no randomness."""
    out = []
    for theta in (0.5, 1.0, 2.0, 5.0):
        res = np.abs(limitchain.theta_msum_residuals(theta, 50)).max()
        out.append(exact_check(f"theta-sum identity theta={theta:g}, m<=50", res, 1e-10))
    for model in (HazardModel.gem(1.0), HazardModel.beta(2.0, 3.0)):
        res = limitchain.hitting_self_consistency(model, 30).max()
        out.append(exact_check(f"{model.label()} last-exit hitting equations, n<=30", res, 1e-10))
    for theta in (0.5, 1.0, 2.0, 5.0):
        law = LimitLaw(HazardModel.gem(theta), moment_bound=4)
        err = max(abs(law.n0_tail_integral(k) - limitchain.n0_tail_gem(theta, k)) for k in range(1, 11))
        out.append(exact_check(f"gem({theta:g}) P(N0>k) integral vs closed form, k<=10", err, 1e-8))
    for model in (HazardModel.gem(2.0), HazardModel.gem(1.0), HazardModel.beta(2.0, 3.0)):
        law = LimitLaw(model, moment_bound=8)
        err = 0.0
        for length in range(1, 7):
            for tup in itertools.product(range(7), repeat=length):
                if tup[0] == 0 or sum(tup) > 6:
                    continue
                q = np.cumsum(tup)
                a = law.fdd_counts_pmf(tup)
                b = law.fdd_markov(q)
                err = max(err, abs(a - b))
        out.append(exact_check(f"{model.label()} fdd formula vs Markov factorisation, sum<=6", err, 1e-12))
    out.append(exact_check("gem(1) characterising recursion, 2<=n<=30", limitchain.gem_recursion_check(1.0, 30), 1e-10))
    beta_res = np.abs(limitchain.recursion_residuals(HazardModel.beta(2.0, 3.0), 10)).max()
    out.append(GofReport("beta(2,3) violates the recursion (residual > 1e-3)", beta_res, abs_error=beta_res,
                         p_value=float(beta_res <= 1e-3), threshold=0.5, mode="reject"))
    for model in (HazardModel.beta(2.0, 3.0), HazardModel.gem(2.0)):
        series, bound = hazard.mu_log_series(model)
        quad = hazard.mu_log_quadrature(model)
        closed = hazard.mu_log(model)
        out.append(exact_check(f"{model.label()} mu_log series vs quadrature", abs(series - quad), 1e-9,
                               note=f"tail bound {bound:.2g}"))
        out.append(exact_check(f"{model.label()} mu_log closed form vs quadrature", abs(closed - quad), 1e-9))
    return out


def suite_yule(seed=42, workers=1, scale=1.0) -> list[GofReport]:
    """Four Yule constructions agree; E N_Y(1) = e; NB(m, e^{-t}) increments."""
    reps = _reps(100_000, scale)
    out = []
    times = {
        c: pointproc.sample_yule_times(5, _rng(seed, "yule", 0, i), reps, c, n=5 if c == "order-statistics" else None)
        for i, c in enumerate(pointproc.YULE_CONSTRUCTIONS)
    }
    for x, y in itertools.combinations(pointproc.YULE_CONSTRUCTIONS, 2):
        for j in range(1, 6):
            out.append(ks_two_sample(times[x][:, j], times[y][:, j], name=f"Y_{j}: {x} vs {y}"))
    counts = pointproc.yule_count(1.0, _rng(seed, "yule", 1), reps)
    se = counts.std(ddof=1) / math.sqrt(reps)
    z = (counts.mean() - math.e) / se
    out.append(GofReport("E N_Y(1) = e within 3 SE", float(z), p_value=float(2 * sps.norm.sf(abs(z))),
                         threshold=float(2 * sps.norm.sf(3.0)), sizes=(reps,),
                         note=f"mean={counts.mean():.5f}"))
    # increments over (s, s+t] given N_Y(s) = 2, read off exponential-spacing paths
    s, t, m = 0.5, 0.5, 2
    y = pointproc.sample_yule_times(400, _rng(seed, "yule", 2), 4 * reps)
    at_s = (y <= s).sum(axis=1)
    at_st = (y <= s + t).sum(axis=1)
    pick = at_s == m
    inc = at_st[pick] - m
    pmf = {(v,): float(sps.nbinom.pmf(v, m, math.exp(-t))) for v in range(0, 200)}
    out.append(chi_square_gof(EmpiricalDist.from_samples(inc), pmf, name="N_Y(s+t)-N_Y(s) | N_Y(s)=2 ~ NB(2, e^-t)"))
    inc2 = pointproc.yule_increments(m, t, _rng(seed, "yule", 3), reps)
    out.append(chi_square_gof(EmpiricalDist.from_samples(inc2), pmf, name="birth-chain increments ~ NB(2, e^-t)"))
    return out


def suite_ignatov(seed=42, workers=1, scale=1.0) -> list[GofReport]:
    """GEM(theta) renewal process is Poisson(theta): spacings and stationary delay are Exp(theta)."""
    reps = _reps(100_000, scale)
    out = []
    for a, theta in enumerate((1.0, 2.0)):
        model = HazardModel.gem(theta)
        cdf = lambda x, th=theta: -np.expm1(-th * x)
        sp = hazard.sample_spacing(model, _rng(seed, "ignatov", a, 0), reps)
        out.append(ks_one_sample(sp, cdf, name=f"gem({theta:g}) spacings ~ Exp({theta:g})"))
        d = hazard.sample_stationary_delay(model, _rng(seed, "ignatov", a, 1), reps)
        out.append(ks_one_sample(d, cdf, name=f"gem({theta:g}) stationary delay ~ Exp({theta:g})"))
    return out


def suite_records(seed=42, workers=1, scale=1.0) -> list[GofReport]:
    """Record chains, occupation laws and the converse reconstruction."""
    reps = _reps(100_000, scale)
    out = []
    geo = records.DiscreteLaw.geometric(0.5)
    weak = records.record_chain_spec(geo, "weak")
    strict = records.record_chain_spec(geo, "strict")
    sim = records.simulate_record_chain(geo, "weak", _rng(seed, "records", 0), reps, 3)["G"]
    for x, y in itertools.combinations(range(3), 2):
        out.append(chi_square_independence(sim[:, x], sim[:, y], name=f"weak records geometric(1/2): G{x+1} indep G{y+1}"))
    h = records.hitting_probabilities(weak, 3)
    for j in range(1, 4):
        hj, stay = h[j], weak.p(j, j)
        pmf = {(0,): 1.0 - hj}
        pmf.update({(k,): hj * stay ** (k - 1) * (1.0 - stay) for k in range(1, 80)})
        out.append(chi_square_gof(EmpiricalDist.from_samples(sim[:, j - 1]), pmf,
                                  name=f"weak records G{j} zero-modified geometric"))
    ssim = records.simulate_record_chain(geo, "strict", _rng(seed, "records", 1), reps, 3)["G"]
    out.append(exact_check("strict records: every G_j in {0, 1}", float(ssim.max() > 1), 0.0))
    hs = records.hitting_probabilities(strict, 3)
    for j in range(1, 4):
        pmf = {(0,): 1.0 - hs[j], (1,): hs[j]}
        out.append(chi_square_gof(EmpiricalDist.from_samples(ssim[:, j - 1]), pmf, name=f"strict records G{j} Bernoulli"))

    # converse reconstruction, on a window of 60 states
    J = 60
    hw = records.hitting_probabilities(weak, J)[1:]
    p_weak = records.reconstruct_transition(hw, hw)
    err = max(abs(p_weak(i, j) - weak.p(i, j)) for i in range(1, J + 1) for j in range(i, J + 1))
    out.append(exact_check("reconstruction with p_ii = h_i gives the weak record kernel", err, 1e-10))
    hs = records.hitting_probabilities(strict, J)[1:]
    p_strict = records.reconstruct_transition(hs, np.zeros(J))
    err = max(abs(p_strict(i, j) - strict.p(i, j)) for i in range(1, J + 1) for j in range(i, J + 1))
    out.append(exact_check("reconstruction with p_ii = 0 gives the strict record kernel", err, 1e-10))
    for theta in (1.0, 2.0):
        law = LimitLaw(HazardModel.gem(theta), moment_bound=4)
        jj = np.arange(1, 21)
        hh = theta / (jj + theta)
        with warnings.catch_warnings():
            # a 20-state window cannot show prod(1 - h_j) -> 0 for small theta
            warnings.simplefilter("ignore", RuntimeWarning)
            p = records.reconstruct_transition(hh, hh)
        err = max(abs(p(i, j) - law.transition_pmf(i, j)) for i in range(1, 21) for j in range(i, 21))
        out.append(exact_check(f"reconstruction gives the gem({theta:g}) limit kernel, i<=j<=20", err, 1e-10))

    # the reconstructed chain watched at its jumps is the strict record chain
    diag = np.full(J, 0.4)
    spec = records.IncreasingChainSpec(geo, records.reconstruct_transition(hw, diag))
    paths = records.simulate_increasing_chain(spec, _rng(seed, "records", 2), reps, 12, 40)
    kern = records.jump_kernel(paths, 40)
    for i in range(1, 4):
        row = kern[i]
        emp = EmpiricalDist.from_samples(np.repeat(np.arange(41), row.astype(np.int64)))
        pmf = {(j,): records.strict_record_transition(geo, i, j) for j in range(i + 1, 41)}
        out.append(chi_square_gof(emp, pmf, name=f"jump kernel from state {i} is the strict record kernel"))

    # independence holds only at the GEM point: Beta(2,3) limit gaps are dependent
    model = HazardModel.beta(2.0, 3.0)
    arr = concat_sharded(_stats_worker, _reps(1_000_000, scale), _entropy(seed, "records", 3), workers,
                         model=model, j_max=2, stop_level=3.0)
    out.append(chi_square_independence(arr[:, 0], arr[:, 1], name="beta(2,3) limit gaps G1, G2 dependent",
                                       mode="reject"))
    return out


SUITE_FUNCS = {
    "gem-gaps": suite_gem_gaps,
    "finite-law": suite_finite_law,
    "constructions": suite_constructions,
    "potential": suite_potential,
    "moments": suite_moments,
    "growth": suite_growth,
    "identities": suite_identities,
    "yule": suite_yule,
    "ignatov": suite_ignatov,
    "records": suite_records,
}


def run_suite(name: str, seed: int = 42, workers: int = 1, scale: float = 1.0) -> SuiteResult:
    if name not in SUITE_FUNCS:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or 'all'")
    t0 = time.perf_counter()
    checks = SUITE_FUNCS[name](seed=seed, workers=workers, scale=scale)
    return SuiteResult(name, seed, checks, time.perf_counter() - t0)


def manifest(results: list[SuiteResult], seed: int) -> dict:
    """Run manifest: {suite, seed, checks: [...], pass}."""
    checks = [c for r in results for c in r.checks]
    return {
        "suite": results[0].suite if len(results) == 1 else "all",
        "seed": seed,
        "checks": [c.to_dict() for c in checks],
        "suites": [{"suite": r.suite, "pass": r.passed} for r in results],
        "pass": all(r.passed for r in results),
    }
