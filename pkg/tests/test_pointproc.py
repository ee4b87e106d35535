import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps

from ramgaps import pointproc as pp
from ramgaps.hazard import HazardModel
from ramgaps.stats import ks_one_sample, ks_two_sample

GEM1 = HazardModel.gem(1.0)


def test_yule_trivial(rng):
    for c in pp.YULE_CONSTRUCTIONS:
        assert pp.sample_yule(0, rng, c).birth_times.tolist() == [0.0]
    assert pp.yule_count(0.0, rng) == 1
    with pytest.raises(ValueError):
        pp.sample_yule_times(5, rng, 1, "order-statistics", n=3)
    with pytest.raises(ValueError):
        pp.sample_yule_times(2, rng, 1, "bogus")


@pytest.mark.parametrize("construction", pp.YULE_CONSTRUCTIONS)
def test_yule_mean_is_harmonic(construction, rng):
    y3 = pp.sample_yule_times(3, rng, 10**5, construction)[:, 3]
    assert abs(y3.mean() - 11 / 6) < 3.5 * y3.std() / math.sqrt(y3.size)


def test_yule_constructions_agree(rng):
    draws = {c: pp.sample_yule_times(5, rng, 20000, c) for c in pp.YULE_CONSTRUCTIONS}
    base = draws["exponential"]
    for c in pp.YULE_CONSTRUCTIONS[1:]:
        for j in range(1, 6):
            assert ks_two_sample(base[:, j], draws[c][:, j]).p_value > 1e-4


def test_order_statistics_with_larger_n(rng):
    a = pp.sample_yule_times(3, rng, 20000, "order-statistics", n=10)[:, 3]
    b = pp.sample_yule_times(3, rng, 20000, "exponential")[:, 3]
    assert ks_two_sample(a, b).p_value > 1e-4


def test_yule_count_mean(rng):
    n = pp.yule_count(1.0, rng, 10**5)
    assert abs(n.mean() - math.e) < 3 * n.std() / math.sqrt(n.size)


def test_yule_increment_negative_binomial(rng):
    m, t = 2, 0.5
    inc = pp.yule_increments(m, t, rng, 40000)
    p = math.exp(-t)
    for k in range(6):
        prob = sps.nbinom.pmf(k, m, p)
        assert abs(np.mean(inc == k) - prob) < 4 * math.sqrt(prob * (1 - prob) / inc.size)


def test_renewal_deterministic_spacing(rng):
    unit = HazardModel.discrete([1 - math.exp(-1)], [1.0])
    path = pp.sample_renewal(unit, 5.0, "stationary", rng)
    d = np.diff(path.points)
    assert np.allclose(d, 1.0)
    assert 0 < path.points[0] <= 1
    with pytest.raises(pp.InsufficientHorizon):
        path.count(6.0)


def test_stationary_counts(rng):
    model = HazardModel.gem(2.0)
    counts = np.array([pp.sample_renewal(model, 5.0, "stationary", rng).count(5.0) for _ in range(4000)])
    assert abs(counts.mean() - 10.0) < 3.5 * counts.std() / math.sqrt(counts.size)


@pytest.mark.parametrize("theta", [1.0, 2.0])
def test_gem_renewal_is_poisson(theta, rng):
    pts = pp.sample_renewal_points(HazardModel.gem(theta), 4, rng, 20000)
    exp_cdf = lambda x: -np.expm1(-theta * x)
    assert ks_one_sample(pts[:, 0], exp_cdf).p_value > 1e-4
    assert ks_one_sample(np.diff(pts, axis=1).ravel(), exp_cdf).p_value > 1e-4


def test_worked_interleaving():
    trace = pp.InterleavingTrace("YYSYSSSYYYYSYYY")
    gaps, trailing = trace.gaps()
    assert gaps == [0, 1, 3, 0, 0, 0, 1, 0, 0]
    counts, last = trace.counts()
    assert counts == [2, 1, 0, 0, 4] and last == 3
    assert trace.format_counts() == ["2", "1", "0", "0", "4", "3+"]
    assert trace.tail_counts() == [2, 3, 3, 3, 7]


traces = st.text(alphabet="YS", min_size=0, max_size=30).map(lambda s: "Y" + s)


@given(traces)
def test_trace_duality(symbols):
    trace = pp.InterleavingTrace(symbols)
    counts, last = trace.counts()
    gaps, trailing = trace.gaps()
    assert pp.InterleavingTrace.from_gaps(gaps, trailing).symbols == symbols
    if "S" in symbols:
        assert pp.InterleavingTrace.from_counts(counts, last).symbols == symbols
    # G_1 + ... + G_j = number of bars before star j
    cum = np.cumsum(gaps) if gaps else []
    stars = [i for i, c in enumerate(symbols) if c == "Y"]
    for j, total in enumerate(cum, start=1):
        assert total == symbols[: stars[j]].count("S")


def test_bad_traces():
    for bad in ("", "SY", "YXS"):
        with pytest.raises(ValueError):
            pp.InterleavingTrace(bad)
    with pytest.raises(ValueError):
        pp.merge_trace([0.0, 1.0], [1.0], 2.0)


def test_build_limit_sequences_fixed_paths():
    yule = pp.YulePath(np.array([0.0, 0.1, 0.5, 1.5, 1.6, 1.7, 1.8, 2.5, 2.6, 2.7]))
    renewal = pp.RenewalPath(np.array([0.2, 0.7, 0.8, 0.9, 2.0, 3.0]), 3.0)
    seq = pp.build_limit_sequences(yule, renewal, 4, 8)
    # the trace runs to the later of S*_4 and Y_8
    assert seq.trace.symbols == "YYSYSSSYYYYSYY"
    assert seq.G == [0, 1, 3, 0, 0, 0, 1, 0]
    assert seq.N == [2, 1, 0, 0, 4]
    assert seq.Q == [2, 3, 3, 3, 7]
    assert seq.N_censored_tail == 2
    with pytest.raises(pp.InsufficientHorizon):
        pp.build_limit_sequences(yule, renewal, 5, 8)


def test_all_bars_after_last_star():
    yule = pp.YulePath(np.array([0.0, 0.1, 0.2, 0.3, 5.0]))
    renewal = pp.RenewalPath(np.array([1.0, 2.0, 3.0, 6.0]), 6.0)
    seq = pp.build_limit_sequences(yule, renewal, 0, 3)
    assert seq.G == [0, 0, 0]


def test_limit_sequences_consistent(rng):
    for _ in range(50):
        seq = pp.limit_sequences(GEM1, rng, 4, 6)
        assert np.all(np.diff(seq.Q) >= 0)
        assert np.cumsum(seq.N).tolist() == seq.Q
        d = seq.to_dict()
        assert d["N_censored"] and d["trace"][0] == "Y"


def test_yule_at_renewal_matches_chain(rng):
    from ramgaps.limitchain import LimitLaw

    law = LimitLaw(GEM1)
    q = pp.yule_at_renewal(GEM1, 2, rng, 20000)
    chain = law.simulate_chain(2, rng, 20000)
    for k in range(3):
        a = np.minimum(q[:, k], 50)
        b = np.minimum(chain[:, k], 50)
        assert ks_two_sample(a, b).p_value > 1e-4
