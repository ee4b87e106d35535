import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ramgaps import limitchain
from ramgaps.hazard import HazardModel
from ramgaps.limitchain import LimitLaw
from ramgaps.stats import EmpiricalDist, chi_square_gof

GEM1 = LimitLaw(HazardModel.gem(1.0))
GEM2 = LimitLaw(HazardModel.gem(2.0))
BETA = LimitLaw(HazardModel.beta(2, 3))
ATOMS = LimitLaw(HazardModel.discrete([0.3, 0.7], [0.5, 0.5]))
LAWS = [GEM1, GEM2, BETA, ATOMS]


def test_entrance_examples():
    assert GEM1.entrance_pmf(2) == pytest.approx(1 / 6)
    for m in range(1, 10):
        assert GEM1.entrance_pmf(m) == pytest.approx(1 / (m * (m + 1)))
    h = 0.4
    single = LimitLaw(HazardModel.discrete([h], [1.0]))
    for m in range(1, 6):
        assert single.entrance_pmf(m) == pytest.approx(h**m / (-m * math.log(1 - h)))
    with pytest.raises(ValueError):
        GEM1.entrance_pmf(0)


@pytest.mark.parametrize("law", LAWS, ids=lambda l: l.model.label)
def test_entrance_mass_and_tail(law):
    m = np.arange(1, 4001)
    pmf = law.entrance_pmf(m)
    assert 1.0 - pmf.sum() == pytest.approx(law.n0_tail(4000), abs=1e-9)
    for k in (1, 3, 7):
        assert law.n0_tail(k) == pytest.approx(1.0 - pmf[:k].sum(), abs=1e-12)


def test_transition_examples():
    assert GEM1.transition_pmf(1, 2) == pytest.approx(1 / 6)
    for law in LAWS:
        for m in range(1, 6):
            assert law.transition_pmf(m, m) == pytest.approx(law.mu(0, m))
        assert law.transition_pmf(3, 2) == 0.0


@pytest.mark.parametrize("law", LAWS, ids=lambda l: l.model.label)
def test_transition_rows_sum_to_one(law):
    for m in range(1, 21):
        # sum up to a cutoff plus the exact upper tail
        cut = 400
        row = law.transition_row(m, cut)
        assert row.sum() + law.transition_tail(m, cut) == pytest.approx(1.0, abs=1e-9)
        assert law.transition_pgf(m, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_fdd_examples():
    for m in range(1, 6):
        assert BETA.fdd_counts_pmf([m]) == pytest.approx(BETA.entrance_pmf(m), rel=1e-12)
    assert BETA.fdd_counts_pmf([0, 2]) == 0.0



@pytest.mark.parametrize("law", [GEM1, GEM2, BETA], ids=lambda l: l.model.label)
def test_fdd_marginalises(law):
    # partial sum over N_1 < cut plus the exact remainder P(N_0 = n0, Q_1 > n0 + cut - 1)
    cut = 300
    for n0 in range(1, 6):
        head = math.fsum(law.fdd_counts_pmf([n0, n1]) for n1 in range(cut))
        rest = law.entrance_pmf(n0) * law.transition_tail(n0, n0 + cut - 1)
        assert head + rest == pytest.approx(law.fdd_counts_pmf([n0]), rel=1e-9)


def test_fdd_markov_factorisation():
    for q in itertools.product(range(1, 7), range(0, 6), range(0, 6)):
        if sum(q) > 6:
            continue
        n0, n1, n2 = q
        tails = (n0, n0 + n1, n0 + n1 + n2)
        a = GEM2.fdd_counts_pmf(q)
        b = GEM2.fdd_markov(tails)
        assert abs(a - b) < 1e-12


def test_gap_law_examples():
    assert GEM2.mean_gap(3) == pytest.approx(2 / 3)
    for law in LAWS:
        for j in range(1, 6):
            h = law.hitting(j)
            pmf = [law.gap_pmf(j, k) for k in range(0, 400)]
            assert math.fsum(pmf) == pytest.approx(1.0, abs=1e-12)
            mean = math.fsum(k * p for k, p in enumerate(pmf))
            assert mean == pytest.approx(law.mean_gap(j), rel=1e-9)
            assert law.gap_tail(j, 1) == pytest.approx(h)


def test_gem_hitting_closed_form():
    for theta in (0.5, 1.0, 3.0):
        law = LimitLaw(HazardModel.gem(theta))
        for j in range(1, 10):
            assert law.hitting(j) == pytest.approx(theta / (j + theta))


def test_mean_q_examples():
    assert math.isinf(GEM1.mean_Q(0))
    assert math.isinf(LimitLaw(HazardModel.gem(0.7)).mean_Q(2))
    assert GEM2.mean_Q(0) == pytest.approx(2.0)
    assert GEM2.mean_Q(0) == pytest.approx(math.fsum(m * GEM2.entrance_pmf(m) for m in range(1, 10**6)), rel=1e-5)
    assert LimitLaw(HazardModel.gem(3.0)).mean_Q(2) == pytest.approx(3.375)


def test_n0_tail_examples():
    assert GEM1.n0_tail(1) == pytest.approx(0.5)
    assert GEM1.n0_tail(0) == 1.0
    for k in range(1, 11):
        for law in (GEM1, GEM2, LimitLaw(HazardModel.gem(0.5))):
            assert abs(law.n0_tail_integral(k) - law.n0_tail(k)) < 1e-8
        assert ATOMS.n0_tail_integral(k) == pytest.approx(ATOMS.n0_tail(k), abs=1e-10)


def test_small_count_means():
    for theta in (0.5, 2.0, 4.0):
        law = LimitLaw(HazardModel.gem(theta))
        for j in range(1, 5):
            assert law.mean_small_counts(j) == pytest.approx(theta / j)
    assert GEM1.mean_small_counts(0) == pytest.approx(1.0)


@given(st.floats(0.2, 10.0))
def test_theta_sum_identity(theta):
    assert np.abs(limitchain.theta_msum_residuals(theta, 50)).max() < 1e-10


@given(st.sampled_from([0.5, 1, 2, 5, 1.5, 0.25]))
def test_recursion_holds_for_gem(theta):
    assert limitchain.gem_recursion_check(theta, 30) < 1e-10


def test_recursion_fails_off_gem():
    assert np.abs(limitchain.recursion_residuals(HazardModel.beta(2, 3), 10)).max() > 1e-3


@pytest.mark.parametrize("model", [HazardModel.gem(1.0), HazardModel.beta(2, 3)], ids=str)
def test_hitting_self_consistency(model):
    assert limitchain.hitting_self_consistency(model, 30).max() < 1e-10


def test_entrance_sampler_gof(rng):
    for law in (GEM1, BETA):
        q0 = law.sample_entrance(rng, 50000).astype(np.int64)
        emp = EmpiricalDist.from_samples(q0)
        rep = chi_square_gof(emp, lambda k: law.entrance_pmf(k[0]), [(m,) for m in range(1, 200)])
        assert rep.p_value > 1e-3, rep.line()


def test_first_increment_given_one_is_mixed_geometric(rng):
    # N_1 | N_0 = 1 has P(N_1 >= k) = mu(k, 0)
    law = GEM1
    q = np.ones(10**5)
    n1 = law.step(q, rng) - q
    for k in range(1, 6):
        p = law.mu(k, 0)
        hat = np.mean(n1 >= k)
        assert abs(hat - p) < 3.5 * math.sqrt(p * (1 - p) / q.size)


def test_two_step_fdd_gof(rng):
    path = GEM2.simulate_chain(1, rng, 10**5).astype(np.int64)
    n = limitchain.counts_from_paths(path).astype(np.int64)
    emp = EmpiricalDist.from_samples(n)
    cells = [(a, b) for a in range(1, 60) for b in range(0, 60)]
    rep = chi_square_gof(emp, lambda k: GEM2.fdd_counts_pmf(k), cells)
    assert rep.p_value > 1e-3, rep.line()


def test_chain_is_nondecreasing_and_grows(rng):
    path = GEM1.simulate_chain(50, rng, 200)
    assert np.all(np.diff(path, axis=1) >= 0)
    log_q = GEM1.simulate_log_growth(200, rng, 500)
    assert abs(np.exp(np.median(log_q) / 200) / math.e - 1) < 0.1


def test_occupation_means(rng):
    stats = BETA.run_statistics(rng, 20000, j_max=4, stop_level=1e6)
    g = stats["G"]
    for j in range(1, 5):
        mean, se = g[:, j - 1].mean(), g[:, j - 1].std() / math.sqrt(g.shape[0])
        assert abs(mean - BETA.mean_gap(j)) < 4 * se
