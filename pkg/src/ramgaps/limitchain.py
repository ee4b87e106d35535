"""Limit laws of the tail counts, counts and gaps read from the top of the sample.

As n grows, the reversed tail counts Q_hat_{k:n} converge to a Markov chain
Q_0 <= Q_1 <= ... with entrance law mu(m, 0)/(m mu_log) and transition

    p(m, n) = C(n-1, m-1) mu(n-m, m),

which is a branching step in a random environment: given H, each of the Q_k
individuals has a geometric number of offspring on {1, 2, ...} with success
probability 1 - H.  N_k = Q_k - Q_{k-1} are the limiting counts (N_0 = Q_0)
and G_j = #{k : Q_k = j} the limiting gaps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import integrate, special

from .hazard import (
    HazardModel,
    _length_biased_spacing,
    mean_neg_log_h,
    mu_log,
    mu_moment,
    sample_hazard_and_survivor,
    spacing_survival,
)

OVERFLOW = np.iinfo(np.int64).max
EXACT_LIMIT = 2.0**53  # floats hold every integer below this


def _log_binom(n, k):
    return special.gammaln(n + 1.0) - special.gammaln(k + 1.0) - special.gammaln(n - k + 1.0)


@dataclass(frozen=True)
class LimitLaw:
    """Exact evaluators of the limiting Q, N and G laws for one hazard model."""

    model: HazardModel
    moment_bound: int = 64
    mu_log: float = field(init=False)
    moments: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "mu_log", mu_log(self.model))
        k = np.arange(self.moment_bound + 1)
        table = self.model.mu(k[:, None], k[None, :])
        table.setflags(write=False)
        object.__setattr__(self, "moments", table)

    def _require_finite_mean(self):
        if not math.isfinite(self.mu_log):
            raise ValueError("mu_log is infinite: the limit laws degenerate")

    def mu(self, i: int, j: int) -> float:
        if 0 <= i <= self.moment_bound and 0 <= j <= self.moment_bound:
            return float(self.moments[i, j])
        return mu_moment(self.model, i, j)

    # -- Q_0 = N_0 ------------------------------------------------------------

    def entrance_pmf(self, m) -> float | np.ndarray:
        """P(Q_0 = m) = mu(m, 0)/(m mu_log)."""
        self._require_finite_mean()
        m_arr = np.asarray(m)
        if np.any(m_arr < 1):
            raise ValueError("entrance law lives on m >= 1")
        out = self.model.mu(m_arr, 0) / (m_arr * self.mu_log)
        return float(out) if out.ndim == 0 else out

    def entrance_tail(self, m: int) -> float:
        """P(Q_0 > m), also P(N_0 > m)."""
        return self.n0_tail(m)

    def n0_tail(self, k: int) -> float:
        """P(N_0 > k): closed form for GEM and atoms, quadrature otherwise."""
        if k < 0:
            raise ValueError("k must be >= 0")
        if k == 0:
            return 1.0
        if self.model.kind == "gem":
            return n0_tail_gem(self.model.theta, k)
        if self.model.kind == "atoms":
            self._require_finite_mean()
            h, w = self.model._atom_arrays
            m = np.arange(1, k + 1)
            partial = np.sum(h[:, None] ** m[None, :] / m[None, :], axis=1)
            return float(np.sum(w * (-np.log1p(-h) - partial)) / self.mu_log)
        return self.n0_tail_integral(k)

    def n0_tail_integral(self, k: int) -> float:
        """(1/mu_log) * integral of P(-log(1-H) > s) (1 - e^{-s})^k ds over s > 0."""
        self._require_finite_mean()
        if k == 0:
            return 1.0
        f = lambda s: float(spacing_survival(self.model, s)) * math.exp(k * math.log(-math.expm1(-s)))
        knee = math.log(k + 1.0)
        opts = dict(epsabs=1e-15, epsrel=1e-12, limit=400)
        if self.model.kind == "atoms":
            x = np.sort(-np.log1p(-np.asarray(self.model.atoms)))
            pts = np.concatenate([[0.0], x])
            total = sum(integrate.quad(f, lo, hi, **opts)[0] for lo, hi in zip(pts[:-1], pts[1:]))
            return total / self.mu_log
        head = integrate.quad(f, 0.0, knee, **opts)[0]
        mid = integrate.quad(f, knee, knee + 40.0, **opts)[0]
        tail = integrate.quad(f, knee + 40.0, np.inf, **opts)[0]
        return (head + mid + tail) / self.mu_log

    def sample_entrance(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draws of Q_0 as floats (exact integers below 2**53).

        Q_0 is a mixture: take -log(1-H) length-biased, then Q_0 | H has the
        logarithmic law P(m) = H^m / (m * -log(1-H)).  The logarithmic draw
        uses Kemp's algorithm written in terms of -log(1-H), which stays
        exact when H rounds to 1.
        """
        self._require_finite_mean()
        x = _length_biased_spacing(self.model, rng, size)
        v = rng.random(size)
        u = rng.random(size)
        p = -np.expm1(-x)
        q = -np.expm1(-x * u)
        with np.errstate(divide="ignore", invalid="ignore"):
            big = np.floor(1.0 + np.log(v) / np.log1p(-np.exp(-x * u)))
        out = np.where(v >= p, 1.0, np.where(v <= q * q, np.maximum(big, 1.0), np.where(v >= q, 1.0, 2.0)))
        return out

    # -- transitions -------------------------------------------------------

    def transition_pmf(self, m: int, n: int) -> float:
        """p(m, n) = C(n-1, m-1) mu(n-m, m)."""
        if m < 1:
            raise ValueError("states are m >= 1")
        if n < m:
            return 0.0
        return float(np.exp(_log_binom(n - 1, m - 1) + self.model.log_mu(n - m, m)))

    def transition_row(self, m: int, n_max: int) -> np.ndarray:
        """p(m, n) for n = m..n_max."""
        n = np.arange(m, n_max + 1)
        return np.exp(_log_binom(n - 1, m - 1) + self.model.log_mu(n - m, m))

    def transition_tail(self, m: int, n: int) -> float:
        """P(Q_{k+1} > n | Q_k = m) = E[I_H(n - m + 1, m)]."""
        if n < m:
            return 1.0
        c = n - m + 1
        ab = self.model.beta_params
        if ab is None:
            h, w = self.model._atom_arrays
            return float(np.sum(w * special.betainc(c, m, h)))
        a, b = ab
        f = lambda u: special.betainc(c, m, u) * math.exp(
            (a - 1) * math.log(u) + (b - 1) * math.log1p(-u) - special.betaln(a, b)
        )
        val, _ = integrate.quad(f, 0.0, 1.0, epsabs=1e-15, epsrel=1e-12, limit=400)
        return val

    def transition_pgf(self, m: int, z: float) -> float:
        """E[z^{Q_1} | Q_0 = m] = E[(z(1-H)/(1-zH))^m] for |z| <= 1."""
        ab = self.model.beta_params
        if ab is None:
            h, w = self.model._atom_arrays
            return float(np.sum(w * (z * (1 - h) / (1 - z * h)) ** m))
        a, b = ab
        f = lambda u: (z * (1 - u) / (1 - z * u)) ** m * math.exp(
            (a - 1) * math.log(u) + (b - 1) * math.log1p(-u) - special.betaln(a, b)
        )
        return integrate.quad(f, 0.0, 1.0, epsabs=1e-15, epsrel=1e-12, limit=400)[0]

    # -- finite-dimensional laws ------------------------------------------

    def fdd_counts_pmf(self, counts) -> float:
        """P(N_0 = n_0, ..., N_k = n_k)."""
        self._require_finite_mean()
        c = np.asarray([int(v) for v in counts], dtype=float)
        if c.size == 0 or np.any(c < 0):
            raise ValueError("counts must be non-negative")
        if c[0] == 0:
            return 0.0
        before = np.concatenate([[0.0], np.cumsum(c)[:-1]])
        log_p = (
            special.gammaln(c.sum())
            - special.gammaln(c + 1).sum()
            + self.model.log_mu(c, before).sum()
            - math.log(self.mu_log)
        )
        return float(np.exp(log_p))

    def fdd_tail_counts_pmf(self, q) -> float:
        """P(Q_0 = q_0, ..., Q_k = q_k)."""
        q = [int(v) for v in q]
        if q[0] < 1 or any(b < a for a, b in zip(q, q[1:])):
            return 0.0
        return self.fdd_counts_pmf([q[0]] + [b - a for a, b in zip(q, q[1:])])

    def fdd_markov(self, q) -> float:
        """Same as :meth:`fdd_tail_counts_pmf`, via entrance law times transitions."""
        q = [int(v) for v in q]
        if q[0] < 1:
            return 0.0
        p = self.entrance_pmf(q[0])
        for a, b in zip(q, q[1:]):
            p *= self.transition_pmf(a, b)
        return float(p)

    # -- gaps ---------------------------------------------------------------

    def hitting(self, j: int) -> float:
        """h_j = P(G_j >= 1) = P(the chain ever visits j)."""
        self._require_finite_mean()
        return (1.0 - self.mu(0, j)) / (j * self.mu_log)

    def potential(self, j: int) -> float:
        """g_j = E G_j."""
        return self.mean_gap(j)

    def gap_tail(self, j: int, k: int) -> float:
        """P(G_j >= k) = h_j mu(0, j)^(k-1) for k >= 1."""
        if j < 1 or k < 0:
            raise ValueError("need j >= 1 and k >= 0")
        if k == 0:
            return 1.0
        return self.hitting(j) * self.mu(0, j) ** (k - 1)

    def gap_pmf(self, j: int, k: int) -> float:
        return self.gap_tail(j, k) - self.gap_tail(j, k + 1)

    def mean_gap(self, j: int) -> float:
        self._require_finite_mean()
        if j < 1:
            raise ValueError("need j >= 1")
        return 1.0 / (j * self.mu_log)

    # -- means --------------------------------------------------------------

    def mean_Q(self, j: int) -> float:
        """E Q_j = (mu(0,-1) - 1) mu(0,-1)^j / mu_log, infinite when mu(0,-1) is."""
        self._require_finite_mean()
        inv = mu_moment(self.model, 0, -1)
        if not math.isfinite(inv):
            return math.inf
        return (inv - 1.0) * inv**j / self.mu_log

    def mean_N(self, j: int) -> float:
        if j == 0:
            return self.mean_Q(0)
        return self.mean_Q(j) - self.mean_Q(j - 1)

    def mean_small_counts(self, j: int) -> float:
        """lim E K_{j:n}: 1/(j mu_log) for j >= 1 and E(-log H)/mu_log for j = 0."""
        self._require_finite_mean()
        if j < 0:
            raise ValueError("need j >= 0")
        if j == 0:
            return mean_neg_log_h(self.model) / self.mu_log
        return 1.0 / (j * self.mu_log)

    # -- simulation -------------------------------------------------------

    def step(self, q: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """One transition for a batch of float states.

        Exact negative binomial (gamma-Poisson) increments while the mean stays
        below 1e15; above that the Poisson layer is replaced by its mean, a
        relative error below 1e-7.
        """
        h, w = sample_hazard_and_survivor(self.model, rng, q.shape)
        shape = np.where(np.isfinite(q), q, 1.0)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            lam = np.where(q < EXACT_LIMIT, rng.standard_gamma(np.minimum(shape, EXACT_LIMIT)), q) * h / w
        lam = np.where(np.isnan(lam), np.inf, lam)
        small = lam < 1e15
        inc = np.where(small, rng.poisson(np.where(small, lam, 0.0)), lam)
        return q + inc

    def simulate_chain(self, steps: int, rng: np.random.Generator, size: int = 1) -> np.ndarray:
        """Q paths of shape ``(size, steps + 1)`` as floats (exact below 2**53)."""
        if steps < 0:
            raise ValueError("steps must be >= 0")
        q = np.empty((size, steps + 1))
        q[:, 0] = self.sample_entrance(rng, size)
        for k in range(steps):
            q[:, k + 1] = self.step(q[:, k], rng)
        return q

    def simulate_log_growth(self, steps: int, rng: np.random.Generator, size: int) -> np.ndarray:
        """log Q_steps for each path.

        Exact integer increments until Q passes 2**53; after that
        log Q_{k+1} = log Q_k - log(1 - H_k), whose error is of order Q^{-1/2}.
        """
        q = self.sample_entrance(rng, size)
        log_q = np.log(q)
        exact = q < EXACT_LIMIT
        for _ in range(steps):
            idx = np.flatnonzero(exact)
            rest = np.flatnonzero(~exact)
            if idx.size:
                nxt = self.step(q[idx], rng)
                q[idx] = nxt
                log_q[idx] = np.log(nxt)
                exact[idx] = nxt < EXACT_LIMIT
            if rest.size:
                _, w = sample_hazard_and_survivor(self.model, rng, rest.size)
                log_q[rest] -= np.log(w)
        return log_q

    def run_statistics(
        self,
        rng: np.random.Generator,
        size: int,
        j_max: int = 5,
        stop_level: float = 1e12,
        max_steps: int = 100_000,
    ) -> dict:
        """Run paths until Q exceeds ``stop_level`` and tally G_j and K_j.

        G[:, j-1] = #{k : Q_k = j}, K[:, j] = #{k >= 1 : N_k = j} for j >= 1 and
        K[:, 0] = #{k >= 1 : N_k = 0}; N_0 = Q_0 is counted in K_{Q_0} too.
        """
        g = np.zeros((size, j_max), dtype=np.int64)
        kk = np.zeros((size, j_max + 1), dtype=np.int64)
        q = self.sample_entrance(rng, size)
        q0 = q.copy()

        def tally(rows, states, jumps):
            for j in range(1, j_max + 1):
                g[rows, j - 1] += states == j
            for j in range(0, j_max + 1):
                kk[rows, j] += jumps == j

        tally(np.arange(size), q, q)
        live = np.flatnonzero(q <= stop_level)
        steps = 0
        while live.size:
            nxt = self.step(q[live], rng)
            tally(live, nxt, nxt - q[live])
            q[live] = nxt
            live = live[nxt <= stop_level]
            steps += 1
            if steps > max_steps:
                raise RuntimeError("chain failed to reach the stop level")
        return {"G": g, "K": kk, "Q0": q0}


# -- module-level conveniences ---------------------------------------------


def entrance_pmf(model: HazardModel, m: int) -> float:
    return LimitLaw(model, moment_bound=4).entrance_pmf(m)


def transition_pmf(model: HazardModel, m: int, n: int) -> float:
    return LimitLaw(model, moment_bound=4).transition_pmf(m, n)


def fdd_counts_pmf(model: HazardModel, counts) -> float:
    return LimitLaw(model, moment_bound=4).fdd_counts_pmf(counts)


def n0_tail_gem(theta: float, k: int) -> float:
    """P(N_0 > k) = (1)_k/(1+theta)_k under GEM(theta)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return float(np.exp(special.gammaln(k + 1.0) + special.gammaln(1.0 + theta) - special.gammaln(1.0 + theta + k)))


def theta_msum_residuals(theta: float, m_max: int) -> np.ndarray:
    """sum_{i<=m} (1)_{i-1} theta/(1+theta)_i - (1 - (1)_m/(1+theta)_m), m = 1..m_max."""
    i = np.arange(1, m_max + 1, dtype=float)
    lp1 = special.gammaln(1.0 + theta)
    terms = theta * np.exp(special.gammaln(i) + lp1 - special.gammaln(1.0 + theta + i))
    closed = 1.0 - np.exp(special.gammaln(i + 1.0) + lp1 - special.gammaln(1.0 + theta + i))
    partial = np.array([math.fsum(terms[:m]) for m in range(1, m_max + 1)])
    return partial - closed


def _exact_stay_moments(model: HazardModel, n_max: int):
    """mu(0, j) for j = 0..n_max as Fractions when the model has rational parameters."""
    ab = model.beta_params
    if ab is not None:
        a, b = (Fraction(v) for v in ab)
        out = [Fraction(1)]
        for j in range(n_max):
            out.append(out[-1] * (b + j) / (a + b + j))
        return out
    h, w = model._atom_arrays
    hs = [Fraction(float(v)) for v in h]
    ws = [Fraction(float(v)) for v in w]
    return [sum(wi * (1 - hi) ** j for hi, wi in zip(hs, ws)) for j in range(n_max + 1)]


def recursion_residuals(model: HazardModel, n_max: int) -> np.ndarray:
    """Residuals of the GEM-characterising recursion on mu(0, .), n = 2..n_max.

    (n+1)/(1 - mu(0,n+1)) = sum_{k<n} C(n,k) (-1)^(n-k-1) (k+1)/(1 - mu(0,k+1)).
    The alternating sum cancels badly, so it is evaluated in exact rationals.
    """
    mu0 = _exact_stay_moments(model, n_max + 1)
    res = []
    for n in range(2, n_max + 1):
        lhs = Fraction(n + 1) / (1 - mu0[n + 1])
        rhs = sum(
            math.comb(n, k) * (-1) ** (n - k - 1) * Fraction(k + 1) / (1 - mu0[k + 1]) for k in range(n)
        )
        res.append(float(lhs - rhs))
    return np.array(res)


def gem_recursion_check(theta: float, n_max: int) -> float:
    """Largest absolute residual over the recursion and the theta summation identity."""
    rec = np.abs(recursion_residuals(HazardModel.gem(theta), n_max)).max(initial=0.0)
    msum = np.abs(theta_msum_residuals(theta, n_max)).max(initial=0.0)
    return float(max(rec, msum))


def hitting_self_consistency(model: HazardModel, j_max: int) -> np.ndarray:
    """|h_j from the last-exit equations - (1 - mu(0,j))/(j mu_log)| for j = 1..j_max."""
    law = LimitLaw(model, moment_bound=4)
    h = np.zeros(j_max + 1)
    for j in range(1, j_max + 1):
        acc = [law.entrance_pmf(j)]
        for i in range(1, j):
            acc.append(h[i] * law.transition_pmf(i, j) / (1.0 - law.transition_pmf(i, i)))
        h[j] = math.fsum(acc)
    closed = np.array([law.hitting(j) for j in range(1, j_max + 1)])
    return np.abs(h[1:] - closed)


def occupation_from_paths(q: np.ndarray, j_max: int) -> tuple[np.ndarray, np.ndarray]:
    """G_j = #{k : Q_k = j} per path and a flag telling whether it is final (Q passed j)."""
    j = np.arange(1, j_max + 1)
    g = (q[:, :, None] == j[None, None, :]).sum(axis=1)
    final = q[:, -1][:, None] > j[None, :]
    return g, final


def counts_from_paths(q: np.ndarray) -> np.ndarray:
    """N_0 = Q_0 and N_k = Q_k - Q_{k-1}."""
    return np.diff(q, axis=1, prepend=0.0)
