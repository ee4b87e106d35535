import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ramgaps import ram
from ramgaps.hazard import HazardModel, mu_log
from ramgaps.limitchain import LimitLaw

GEM1 = HazardModel.gem(1.0)
BETA23 = HazardModel.beta(2, 3)
ATOMS = HazardModel.discrete([0.3, 0.7], [0.5, 0.5])
MODELS = [GEM1, HazardModel.gem(2.5), BETA23, ATOMS]

count_vectors = st.lists(st.integers(0, 4), min_size=1, max_size=8).filter(lambda c: c[-1] > 0)


def test_worked_configurations():
    assert ram.gaps_from_counts([2, 0, 1, 2, 0, 3]) == [0, 0, 2, 0, 1, 2, 0, 0]
    assert ram.gaps_from_counts([0, 0, 0, 2, 0, 3, 0, 2, 1]) == [1, 0, 2, 0, 0, 2, 0, 3]
    assert ram.gaps_from_counts([5]) == [0] * 5
    assert ram.counts_from_gaps([0, 0, 2, 0, 1, 2, 0, 0]) == [2, 0, 1, 2, 0, 3]


@given(count_vectors)
def test_counts_gaps_round_trip(counts):
    gaps = ram.gaps_from_counts(counts)
    assert len(gaps) == sum(counts)
    assert ram.counts_from_gaps(gaps) == counts
    conf = ram.Configuration.from_counts(counts)
    assert ram.Configuration.from_dict(conf.to_dict()) == conf
    assert ram.Configuration.from_gaps(conf.gaps) == conf
    # the stars-and-bars string has n stars and M - 1 bars
    sb = ram.stars_and_bars(counts)
    assert sb.count("*") == sum(counts) and sb.count("|") == len(counts) - 1


@given(count_vectors)
def test_order_statistics_agree(counts):
    conf = ram.Configuration.from_counts(counts)
    boxes = np.array(conf.order_statistics)
    assert ram.Configuration.from_boxes(boxes[::-1]) == conf
    assert ram.gaps_from_boxes(boxes[None, :])[0].tolist() == list(conf.gaps)


@given(count_vectors)
def test_tie_count_two_readings(counts):
    # L_n = N_{M:n} = 1 + number of leading zero gaps
    conf = ram.Configuration.from_counts(counts)
    st_ = ram.sample_statistics(conf)
    assert st_["L"] == counts[-1]
    gaps = conf.gaps
    lead = next((i for i, g in enumerate(gaps) if g > 0), len(gaps))
    assert st_["L"] == min(lead + 1, sum(counts))
    assert st_["K0"] == sum(1 for c in counts if c == 0)
    # the gap reading misses an empty first box
    assert st_["K0"] == sum(max(g - 1, 0) for g in gaps) + (counts[0] == 0)


def test_sample_statistics_examples():
    st_ = ram.sample_statistics(ram.Configuration.from_counts([2, 0, 1, 2, 0, 3]))
    assert (st_["L"], st_["K0"], st_["K1"]) == (3, 2, 1)
    st_ = ram.sample_statistics(ram.Configuration.from_counts([6]))
    assert (st_["L"], st_["K0"]) == (6, 0)


def test_invalid_counts():
    with pytest.raises(ValueError):
        ram.Configuration.from_counts([1, 0])
    with pytest.raises(ValueError):
        ram.gaps_from_counts([-1, 2])


def test_exact_config_examples():
    assert ram.exact_config_probability(GEM1, [0, 0, 1]) == pytest.approx(0.125)
    for n in (1, 3, 7):
        assert ram.exact_config_probability(BETA23, [n]) == pytest.approx(BETA23.mu(n, 0))
    # brute force over which atom each of the two boxes draws
    h = [0.3, 0.7]
    brute = sum(0.25 * 2 * h1 * (1 - h1) * h2 for h1 in h for h2 in h)
    assert ram.exact_config_probability(ATOMS, [1, 1]) == pytest.approx(brute)
    assert brute == pytest.approx(2 * ATOMS.mu(1, 1) * ATOMS.mu(1, 0))


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.label)
def test_exact_law_sums_to_one(model):
    total = math.fsum(ram.exact_config_probability(model, c) for c in ram.enumerate_configurations(3, 40))
    # missing mass is P(M_3 > 40) <= 3 P(X > 40)
    assert 0 <= 1.0 - total <= 3 * model.mu(0, 1) ** 40 + 1e-12


def test_single_ball_is_geometric(rng):
    model = HazardModel.discrete([0.5], [1.0])
    boxes = ram.sample_boxes(model, 1, 10**5, rng)[:, 0]
    freq = Counter(boxes.tolist())
    for k in range(1, 6):
        p = ram.geometric_box_pmf(model, k)
        assert p == pytest.approx(2.0**-k)
        assert abs(freq[k] / 1e5 - p) < 3 * math.sqrt(p * (1 - p) / 1e5)


@given(st.integers(1, 30), st.sampled_from(MODELS))
def test_sampled_counts_conserve_mass(n, model):
    boxes = ram.sample_boxes(model, n, 3, np.random.default_rng(n))
    for row in boxes:
        conf = ram.Configuration.from_boxes(row)
        assert sum(conf.counts) == n and conf.counts[-1] > 0


def test_qstar_examples():
    assert ram.qstar_transition(GEM1, 2, 1) == pytest.approx(1 / 3)
    for ell in range(0, 6):
        assert ram.qstar_transition(BETA23, ell, ell) == pytest.approx(BETA23.mu(0, ell))
    with pytest.raises(ValueError):
        ram.qstar_transition(GEM1, 2, 3)
    with pytest.raises(ValueError):
        ram.decrement_transition(GEM1, 2, 2)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.label)
def test_qstar_rows(model):
    for ell in range(1, 21):
        row = [ram.qstar_transition(model, ell, m) for m in range(ell + 1)]
        assert math.fsum(row) == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(row, ram.binomial_mixture_pmf(model, ell), atol=1e-9)
        dec = [ram.decrement_transition(model, ell, m) for m in range(ell)]
        assert math.fsum(dec) == pytest.approx(1.0, abs=1e-12)


def test_potential_examples():
    assert ram.finite_potential(GEM1, 1, 1) == pytest.approx(2.0)
    for model in MODELS:
        for n in (1, 4, 9):
            assert ram.finite_potential(model, n, n) == pytest.approx(1 / (1 - model.mu(0, n)))
    assert abs(ram.finite_potential(GEM1, 10**4, 1) - 1.0) < 0.05


@given(st.floats(0.5, 5), st.floats(0.5, 5), st.integers(1, 60))
def test_potential_fast_path_matches_generic(a, b, n):
    m = HazardModel.beta(a, b)
    fast = ram.potential_vector(m, n, "beta")
    slow = ram.potential_vector(m, n, "generic")
    assert np.allclose(fast[1:], slow[1:], rtol=1e-9)


def test_potential_recursion_definition():
    n = 12
    g = ram.potential_vector(BETA23, n)
    for m in range(1, n):
        inflow = sum(g[l] * ram.qstar_transition(BETA23, l, m) for l in range(m + 1, n + 1))
        assert g[m] == pytest.approx(inflow / (1 - ram.qstar_transition(BETA23, m, m)))


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.label)
def test_reversed_rows_stochastic(model):
    n = 15
    g = ram.potential_vector(model, n)
    for ell in range(1, n + 1):
        row = math.fsum(ram.reversed_transition(model, n, ell, m, g) for m in range(1, n + 1))
        row += ram.reversed_absorption(model, n, ell, g)
        assert row == pytest.approx(1.0, abs=1e-10)
    entrance = math.fsum(ram.reversed_entrance(model, n, m, g) for m in range(1, n + 1))
    assert entrance == pytest.approx(1.0, abs=1e-10)


def test_reversed_transition_limit():
    n = 10**4
    g = ram.potential_vector(GEM1, n)
    law = LimitLaw(GEM1)
    for ell in range(1, 4):
        for m in range(ell, ell + 4):
            q = ram.reversed_transition(GEM1, n, ell, m, g)
            assert q == pytest.approx(law.transition_pmf(ell, m), rel=0.01)


def test_reversed_tail_counts_match_brute_force(rng):
    n, k, size = 5, 3, 40000
    fast = ram.sample_reversed_tail_counts(GEM1, n, k, size, rng)
    boxes = ram.sample_boxes(GEM1, n, size, rng)
    brute = np.array([ram.Configuration.from_boxes(b).reversed_tail_counts[: k + 1]
                      + (ram.ABSORBED,) * max(0, k + 1 - ram.Configuration.from_boxes(b).m_max)
                      for b in boxes])
    # first reversed step against the exact reversed chain, within 4 SE
    g = ram.potential_vector(GEM1, n)
    for m in range(1, n + 1):
        p = ram.reversed_entrance(GEM1, n, m, g)
        for sample in (fast, brute):
            hat = np.mean(sample[:, 0] == m)
            assert abs(hat - p) < 4 * math.sqrt(p * (1 - p) / size) + 1e-12


@pytest.mark.slow
def test_reversed_chain_step_frequencies(rng):
    n, size = 5, 10**6
    q = ram.sample_reversed_tail_counts(GEM1, n, 2, size, rng)
    g = ram.potential_vector(GEM1, n)
    start = q[:, 0] == 1
    for m in range(1, n + 1):
        p = ram.reversed_transition(GEM1, n, 1, m, g)
        hat = np.mean(q[start, 1] == m)
        assert abs(hat - p) < 3 * math.sqrt(p * (1 - p) / start.sum()) + 1e-12


def test_tail_count_chain_matches_boxes(rng):
    n, steps, size = 6, 3, 40000
    chain = ram.sample_tail_count_chain(BETA23, n, steps, size, rng)
    boxes = ram.tail_counts_from_boxes(ram.sample_boxes(BETA23, n, size, rng), steps)
    for k in range(1, steps + 1):
        a, b = chain[:, k].mean(), boxes[:, k].mean()
        se = math.sqrt(chain[:, k].var() / size + boxes[:, k].var() / size)
        assert abs(a - b) < 4 * se


@pytest.mark.slow
def test_tail_count_chain_two_sample():
    from ramgaps.stats import EmpiricalDist, chi_square_two_sample

    n, steps, size = 100, 3, 10**5
    rng = np.random.default_rng(99)
    chain = ram.sample_tail_count_chain(BETA23, n, steps, size, rng)[:, 1:]
    boxes = ram.tail_counts_from_boxes(ram.sample_boxes(BETA23, n, size, rng), steps)[:, 1:]
    rep = chi_square_two_sample(EmpiricalDist.from_samples(chain), EmpiricalDist.from_samples(boxes))
    assert rep.p_value > 1e-3, rep.line()


def test_mu_log_of_limit_is_consistent():
    g = ram.potential_vector(BETA23, 10**3)
    for m in range(1, 4):
        assert g[m] == pytest.approx(1 / (m * mu_log(BETA23)), rel=0.05)
