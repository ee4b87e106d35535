import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps

from ramgaps import stats as S
from ramgaps.parallel import run_sharded, shard_sizes


def geom_pmf(p):
    return lambda k: p * (1 - p) ** (k[0] - 1)


def geom_cells(n=200):
    return [(k,) for k in range(1, n)]


def test_chi2_sf_matches_scipy():
    for x, k in [(0.5, 1), (3.0, 4), (40.0, 20), (1e3, 900)]:
        assert S.chi2_sf(x, k) == pytest.approx(sps.chi2.sf(x, k), rel=1e-10)


def test_gof_self_calibration():
    pmf = geom_pmf(0.5)
    low = 0
    for seed in range(200):
        x = np.random.default_rng(seed).geometric(0.5, 10**5)
        rep = S.chi_square_gof(S.EmpiricalDist.from_samples(x), pmf, geom_cells())
        low += rep.p_value < 0.01
    assert low / 200 <= 0.05


def test_gof_power():
    x = np.random.default_rng(3).geometric(0.5, 10**4)
    rep = S.chi_square_gof(S.EmpiricalDist.from_samples(x), geom_pmf(1 / 3), geom_cells())
    assert rep.p_value < 1e-6 and not rep.passed


def test_gof_single_bucket_rejected():
    emp = S.EmpiricalDist.from_samples([1] * 100)
    with pytest.raises(ValueError):
        S.chi_square_gof(emp, {(1,): 1.0})


@given(st.lists(st.integers(1, 8), min_size=10, max_size=300), st.integers(1, 9))
def test_merge_invariance(xs, cut):
    a, b = xs[:cut], xs[cut:]
    whole = S.EmpiricalDist.from_samples(xs)
    merged = S.EmpiricalDist.from_samples(a) + S.EmpiricalDist.from_samples(b)
    assert merged.counts == whole.counts
    pmf = geom_pmf(0.4)
    r1 = S.chi_square_gof(whole, pmf, geom_cells(12), min_expected=1.0)
    r2 = S.chi_square_gof(merged, pmf, geom_cells(12), min_expected=1.0)
    assert (r1.statistic, r1.dof, r1.p_value) == (r2.statistic, r2.dof, r2.p_value)


@given(st.lists(st.floats(0, 50), min_size=1, max_size=30), st.floats(0.5, 10))
def test_merge_buckets_conserve(obs, min_e):
    exp = [o + 0.3 for o in obs]
    o2, e2 = S.merge_buckets(obs, exp, min_e)
    assert math.isclose(o2.sum(), sum(obs), rel_tol=1e-12, abs_tol=1e-9)
    assert math.isclose(e2.sum(), sum(exp), rel_tol=1e-12, abs_tol=1e-9)
    if e2.size > 1:
        assert e2.min() >= min_e


def test_independence_calibration():
    low = 0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        rep = S.chi_square_independence(rng.geometric(0.5, 2000), rng.poisson(2.0, 2000))
        low += rep.p_value < 0.01
    assert low / 200 <= 0.05


def test_independence_power():
    rng = np.random.default_rng(0)
    x = rng.poisson(3.0, 5000)
    y = x + rng.poisson(1.0, 5000)
    assert S.chi_square_independence(x, y, mode="reject").passed


def test_two_sample_tests():
    rng = np.random.default_rng(0)
    a, b = rng.poisson(3.0, 20000), rng.poisson(3.0, 20000)
    assert S.chi_square_two_sample(S.EmpiricalDist.from_samples(a), S.EmpiricalDist.from_samples(b)).p_value > 1e-3
    c = rng.poisson(3.2, 20000)
    assert S.chi_square_two_sample(S.EmpiricalDist.from_samples(a), S.EmpiricalDist.from_samples(c)).p_value < 1e-6
    assert S.ks_two_sample(rng.normal(size=5000), rng.normal(size=5000)).p_value > 1e-3
    assert S.ks_two_sample(rng.normal(size=5000), rng.normal(0.2, size=5000)).p_value < 1e-6


def test_ks_one_sample_matches_scipy():
    x = np.random.default_rng(5).exponential(size=3000)
    rep = S.ks_one_sample(x, lambda t: -np.expm1(-t))
    ref = sps.kstest(x, "expon")
    assert rep.statistic == pytest.approx(ref.statistic, rel=1e-12)
    assert rep.p_value == pytest.approx(ref.pvalue, rel=0.05)


def test_empty_inputs_rejected():
    with pytest.raises(ValueError):
        S.ks_two_sample([], [1.0])
    with pytest.raises(ValueError):
        S.mean_ci([])
    with pytest.raises(ValueError):
        S.tv_distance(S.EmpiricalDist(), {(1,): 1.0})


def test_tv_distance():
    emp = S.EmpiricalDist.from_samples([1, 1, 2, 3])
    assert S.tv_distance(emp, emp.pmf()) == 0.0
    assert S.tv_distance(emp, {(4,): 1.0}) == pytest.approx(1.0)


def test_mean_ci_coverage():
    hits = 0
    for seed in range(200):
        x = np.random.default_rng(seed).exponential(size=10**5)
        m, w = S.mean_ci(x, 0.99)
        hits += abs(m - 1.0) <= w
    assert hits / 200 >= 0.95


def test_report_pass_rules_and_json():
    r = S.GofReport("t", 1.0, 3, 0.2, threshold=1e-3, sizes=(10,), seed=7)
    assert r.passed and r.line().startswith("[PASS]")
    assert S.GofReport("t", 1.0, 3, 1e-4).passed is False
    assert S.GofReport("t", 1.0, 3, 1e-4, mode="reject").passed
    e = S.exact_check("x", 1e-12, 1e-10)
    assert e.passed and not S.exact_check("x", 1e-9, 1e-10).passed
    d = json.loads(r.to_json())
    assert d["p_value"] == 0.2 and d["seed"] == 7


def test_proportion_check():
    assert S.proportion_check("p", 5000, 10000, 0.5).passed
    assert not S.proportion_check("p", 5300, 10000, 0.5).passed


def _draws(rng, size):
    return rng.random(size)


@given(st.integers(1, 50), st.integers(1, 6))
def test_shard_sizes(total, workers):
    sizes = shard_sizes(total, workers)
    assert sum(sizes) == total and max(sizes) - min(sizes) <= 1


def test_sharded_runs_deterministic():
    a = run_sharded(_draws, 10, seed=3, workers=1)
    b = run_sharded(_draws, 10, seed=3, workers=1)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    c = run_sharded(_draws, 10, seed=3, workers=2)
    d = run_sharded(_draws, 10, seed=3, workers=2)
    assert all(np.array_equal(x, y) for x, y in zip(c, d))
