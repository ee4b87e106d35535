"""Finite samples from a residual allocation model.

Balls are thrown into boxes 1, 2, ... with P(box b) = H_b * prod_{i<b}(1 - H_i).
A sample of size ``n`` is generated through the renewal representation

    X_i = 1 + #{j >= 1 : S_j <= eps_i},     S_j = sum_{i<=j} -log(1 - H_i),

with ``eps_i`` i.i.d. standard exponentials, so the stick never has to be
truncated.  This module also holds the exact finite-n laws: configuration
probabilities, the tail-count chain ``q*``, its decrement matrix ``q``, the
potential ``g_{m:n}`` and the reversed transition ``q_hat_n``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats as sps

from .hazard import HazardModel, sample_hazard_and_survivor, sample_spacing

MAX_BOXES = 10**6
ABSORBED = np.iinfo(np.int64).max  # reversed tail count after absorption (the "infinite" state)


# -- stars and bars -----------------------------------------------------------


def _check_counts(counts) -> list[int]:
    counts = [int(c) for c in counts]
    if not counts or any(c < 0 for c in counts) or counts[-1] <= 0:
        raise ValueError(f"invalid count vector {counts}: need non-negative entries, last > 0")
    return counts


def gaps_from_counts(counts, n: int | None = None) -> list[int]:
    """Reversed gaps G_hat_{1:n}, ..., G_hat_{n:n} of the configuration.

    ``G_hat_{i:n} = X_{n+1-i:n} - X_{n-i:n}`` with the convention X_{0:n} = 1.
    """
    counts = _check_counts(counts)
    total = sum(counts)
    if n is not None and n != total:
        raise ValueError(f"counts sum to {total}, expected n={n}")
    x = np.repeat(np.arange(1, len(counts) + 1), counts)
    d = np.diff(np.concatenate([[1], x]))
    return [int(v) for v in d[::-1]]


def counts_from_gaps(gaps, n: int | None = None) -> list[int]:
    """Inverse of :func:`gaps_from_counts`."""
    gaps = [int(g) for g in gaps]
    if n is not None and len(gaps) != n:
        raise ValueError(f"gap vector must have length n={n}")
    if not gaps or any(g < 0 for g in gaps):
        raise ValueError("gaps must be a non-empty vector of non-negative integers")
    x = 1 + np.cumsum(gaps[::-1])
    return [int(c) for c in np.bincount(x)[1:]]


def reversed_tail_counts(counts) -> list[int]:
    """Q_hat_{k:n}: balls in the last k+1 boxes, for k = 0..M_n - 1."""
    counts = _check_counts(counts)
    return [int(v) for v in np.cumsum(counts[::-1])]


def stars_and_bars(counts) -> str:
    """Left-to-right encoding: ``*`` per ball, ``|`` between boxes, ended at box M_n."""
    counts = _check_counts(counts)
    return "|".join("*" * c for c in counts)


@dataclass(frozen=True)
class Configuration:
    """Outcome of throwing n balls: counts N_{1:n}..N_{M_n:n} and derived views."""

    n: int
    counts: tuple[int, ...]

    def __post_init__(self):
        c = _check_counts(self.counts)
        if sum(c) != self.n:
            raise ValueError(f"counts sum to {sum(c)}, expected n={self.n}")
        object.__setattr__(self, "counts", tuple(c))

    @classmethod
    def from_counts(cls, counts) -> "Configuration":
        counts = tuple(int(c) for c in counts)
        return cls(sum(counts), counts)

    @classmethod
    def from_gaps(cls, gaps) -> "Configuration":
        return cls.from_counts(counts_from_gaps(gaps))

    @classmethod
    def from_boxes(cls, boxes) -> "Configuration":
        boxes = np.asarray(boxes, dtype=np.int64)
        return cls.from_counts(np.bincount(boxes)[1:])

    @property
    def m_max(self) -> int:
        return len(self.counts)

    @property
    def gaps(self) -> tuple[int, ...]:
        return tuple(gaps_from_counts(self.counts))

    @property
    def reversed_tail_counts(self) -> tuple[int, ...]:
        return tuple(reversed_tail_counts(self.counts))

    @property
    def order_statistics(self) -> tuple[int, ...]:
        return tuple(int(v) for v in np.repeat(np.arange(1, self.m_max + 1), self.counts))

    def to_dict(self) -> dict:
        return {"n": self.n, "counts": list(self.counts), "gaps": list(self.gaps)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Configuration":
        conf = cls(int(d["n"]), tuple(d["counts"]))
        if "gaps" in d and list(d["gaps"]) != list(conf.gaps):
            raise ValueError("gaps do not match counts")
        return conf


def sample_statistics(config: Configuration, max_j: int = 5) -> dict:
    """L_n (ties with the maximum), K_{0:n} (empty boxes below M_n) and K_{j:n}.

    K_{0:n} counts every empty box, box 1 included.  The gap reading
    sum (G_i - 1)_+ with X_0 = 1 misses an empty box 1, so it can be one short.
    """
    counts = np.asarray(config.counts)
    gaps = np.asarray(config.gaps)
    positive = np.flatnonzero(gaps > 0)
    ties = int(positive[0]) + 1 if positive.size else config.n
    out = {
        "L": ties,
        "K0": int(np.count_nonzero(counts == 0)),
    }
    for j in range(1, max_j + 1):
        out[f"K{j}"] = int(np.count_nonzero(counts == j))
    return out


# -- simulation ------------------------------------------------------------


def sample_boxes(
    model: HazardModel,
    n: int,
    size: int,
    rng: np.random.Generator,
    max_boxes: int = MAX_BOXES,
) -> np.ndarray:
    """Box labels X (shape ``(size, n)``) for ``size`` independent samples of size n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    eps = rng.standard_exponential((size, n))
    top = eps.max(axis=1)
    boxes = np.ones((size, n), dtype=np.int64)
    s = np.zeros(size)
    live = np.arange(size)
    depth = 0
    while live.size:
        s[live] += sample_spacing(model, rng, live.size)
        boxes[live] += eps[live] >= s[live, None]
        live = live[s[live] <= top[live]]
        depth += 1
        if depth > max_boxes:
            raise RuntimeError(f"more than {max_boxes} boxes needed; hazard model is degenerate")
    return boxes


def sample_configuration(model: HazardModel, n: int, rng: np.random.Generator) -> Configuration:
    return Configuration.from_boxes(sample_boxes(model, n, 1, rng)[0])


def gaps_from_boxes(boxes: np.ndarray) -> np.ndarray:
    """Row-wise reversed gaps for an array of box labels (shape ``(size, n)``)."""
    x = np.sort(boxes, axis=1)
    d = np.diff(x, axis=1, prepend=1)
    return d[:, ::-1]


def sample_tail_count_chain(
    model: HazardModel, n: int, steps: int, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Q*_{k:n} for k = 0..steps by the mixed binomial transition q*."""
    q = np.empty((size, steps + 1), dtype=np.int64)
    q[:, 0] = n
    for k in range(steps):
        _, w = sample_hazard_and_survivor(model, rng, size)
        q[:, k + 1] = rng.binomial(q[:, k], w)
    return q


def tail_counts_from_boxes(boxes: np.ndarray, steps: int) -> np.ndarray:
    """Q*_{k:n} = #{i : X_i > k} read off sampled box labels."""
    k = np.arange(steps + 1)
    return (boxes[:, :, None] > k[None, None, :]).sum(axis=1)


def sample_reversed_tail_counts(
    model: HazardModel,
    n: int,
    k: int,
    size: int,
    rng: np.random.Generator,
    block: int = 64,
) -> np.ndarray:
    """Q_hat_{0:n}..Q_hat_{k:n} for ``size`` samples of size n.

    Only the top of the sample is generated: uniforms' order statistics come
    down from the maximum via -log U_{(j)} = sum_{i>=j} E_i / i, and a
    renewal point is generated only until it passes the sample maximum.
    States after absorption are reported as :data:`ABSORBED`.
    """
    # running -log U_(j), walking j = n, n-1, ...
    neg_log_u = rng.standard_exponential(size) / n
    top = -np.log(-np.expm1(-neg_log_u))

    # the last k+1 renewal points at or below the top; -1 marks "before S_0"
    ring = np.full((size, k + 1), -1.0)
    ring[:, 0] = 0.0
    s = np.zeros(size)
    live = np.arange(size)
    depth = 0
    while live.size:
        s[live] += sample_spacing(model, rng, live.size)
        below = live[s[live] <= top[live]]
        ring[below, 1:] = ring[below, :-1]
        ring[below, 0] = s[below]
        live = below
        depth += 1
        if depth > MAX_BOXES:
            raise RuntimeError("renewal process failed to pass the sample maximum")

    counts = np.zeros((size, k + 1), dtype=np.int64)
    counts += (ring < top[:, None]) & (ring > 0)  # the maximum itself
    taken = np.ones(size, dtype=np.int64)
    deepest = np.where(ring > 0, ring, np.inf).min(axis=1)
    live = np.flatnonzero(np.isfinite(deepest) & (top > deepest))
    cur = neg_log_u
    while live.size:
        j = n - taken[live][:, None] - np.arange(block)[None, :]
        valid = j >= 1
        incr = rng.standard_exponential((live.size, block)) / np.maximum(j, 1)
        path = cur[live][:, None] + np.cumsum(np.where(valid, incr, 0.0), axis=1)
        eps = np.where(valid, -np.log(-np.expm1(-path)), -np.inf)
        thr = ring[live]
        counts[live] += ((eps[:, :, None] > thr[:, None, :]) & (thr[:, None, :] > 0)).sum(axis=1)
        cur[live] = path[:, -1]
        taken[live] += valid.sum(axis=1)
        go_on = (eps[:, -1] > deepest[live]) & (taken[live] < n)
        live = live[go_on]
    counts = np.where(ring == 0.0, n, counts)
    counts = np.where(ring < 0.0, ABSORBED, counts)
    return counts


# -- exact finite-n laws ---------------------------------------------------------


def log_config_probability(model: HazardModel, counts) -> float:
    counts = _check_counts(counts)
    c = np.asarray(counts, dtype=float)
    n = c.sum()
    later = np.concatenate([np.cumsum(c[::-1])[::-1][1:], [0.0]])
    log_mult = special.gammaln(n + 1) - special.gammaln(c + 1).sum()
    return math.fsum([float(log_mult), *model.log_mu(c, later).tolist()])


def exact_config_probability(model: HazardModel, counts) -> float:
    """P(N_{.:n} = counts) = multinomial * prod_i mu(n_i, n_{i+1} + ... + n_k)."""
    return math.exp(log_config_probability(model, counts))


def enumerate_configurations(n: int, max_boxes: int):
    """All count vectors of n balls with last occupied box <= max_boxes."""

    def rec(remaining, slots):
        if slots == 1:
            yield (remaining,)
            return
        for first in range(remaining + 1):
            for rest in rec(remaining - first, slots - 1):
                yield (first, *rest)

    for m in range(1, max_boxes + 1):
        for head in rec(n - 1, m):
            # last box holds at least one ball
            yield head[:-1] + (head[-1] + 1,)


def qstar_transition(model: HazardModel, ell: int, m: int) -> float:
    """q*(l, m) = C(l, m) mu(l - m, m): m of l balls pass the next break point."""
    if not (0 <= m <= ell):
        raise ValueError(f"need 0 <= m <= l, got l={ell}, m={m}")
    log_c = special.gammaln(ell + 1) - special.gammaln(m + 1) - special.gammaln(ell - m + 1)
    return float(np.exp(log_c + model.log_mu(ell - m, m)))


def decrement_transition(model: HazardModel, ell: int, m: int) -> float:
    """q(l, m): the tail-count chain watched only when it moves."""
    if not (0 <= m < ell):
        raise ValueError(f"need 0 <= m < l, got l={ell}, m={m}")
    return qstar_transition(model, ell, m) / (1.0 - float(model.mu(0, ell)))


@dataclass(frozen=True)
class TailCountChain:
    """Exact q* / q evaluators for n balls."""

    model: HazardModel
    n: int

    def qstar(self, ell: int, m: int) -> float:
        return qstar_transition(self.model, ell, m)

    def decrement(self, ell: int, m: int) -> float:
        return decrement_transition(self.model, ell, m)

    def qstar_row(self, ell: int) -> np.ndarray:
        m = np.arange(ell + 1)
        log_c = special.gammaln(ell + 1) - special.gammaln(m + 1) - special.gammaln(ell - m + 1)
        return np.exp(log_c + self.model.log_mu(ell - m, m))


def _potential_beta(a: float, b: float, n: int) -> np.ndarray | None:
    """Backward recursion for g_{m:n} when H ~ Beta(a, b).

    With H Beta, q*(l, m) g_l splits as u_l * v_{l-m} * w_m so each step is a
    single dot product.  Returns None if the split factors leave float range.
    """
    ell = np.arange(n + 1, dtype=float)
    log_u = special.gammaln(ell + 1) - special.gammaln(a + b + ell)
    log_v = special.gammaln(a + ell) - special.gammaln(ell + 1)
    log_w = special.gammaln(b + ell) - special.gammaln(ell + 1) - special.betaln(a, b)
    if max(np.abs(log_u).max(), np.abs(log_v).max()) > 600:
        return None
    u = np.exp(log_u)
    v = np.exp(log_v)
    stay = np.exp(special.betaln(a, b + ell) - special.betaln(a, b))  # mu(0, l)
    g = np.zeros(n + 1)
    ug = np.zeros(n + 1)
    g[n] = 1.0 / (1.0 - stay[n])
    ug[n] = u[n] * g[n]
    for m in range(n - 1, 0, -1):
        acc = np.dot(ug[m + 1 : n + 1], v[1 : n - m + 1])
        g[m] = math.exp(log_w[m]) * acc / (1.0 - stay[m])
        ug[m] = u[m] * g[m]
    return g


def _potential_generic(model: HazardModel, n: int) -> np.ndarray:
    g = np.zeros(n + 1)
    stay = model.mu(0, np.arange(n + 1))
    g[n] = 1.0 / (1.0 - stay[n])
    log_fact = special.gammaln(np.arange(n + 1) + 1.0)
    for m in range(n - 1, 0, -1):
        ell = np.arange(m + 1, n + 1)
        log_q = log_fact[ell] - log_fact[m] - log_fact[ell - m] + model.log_mu(ell - m, m)
        g[m] = np.dot(np.exp(log_q), g[m + 1 : n + 1]) / (1.0 - stay[m])
    return g


def potential_vector(model: HazardModel, n: int, method: str = "auto") -> np.ndarray:
    """g_{m:n} for m = 0..n (entry 0 unused): expected visits of Q*_{.:n} to m."""
    if n < 1:
        raise ValueError("n must be >= 1")
    ab = model.beta_params
    if method in ("auto", "beta") and ab is not None:
        g = _potential_beta(*ab, n)
        if g is not None:
            return g
        if method == "beta":
            raise ValueError("Beta split recursion out of float range")
    return _potential_generic(model, n)


def finite_potential(model: HazardModel, n: int, m: int) -> float:
    if not (1 <= m <= n):
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    return float(potential_vector(model, n)[m])


def reversed_transition(model: HazardModel, n: int, ell: int, m: int, g=None) -> float:
    """q_hat_n(l, m) = g_{m:n} q*(m, l) / g_{l:n}, the reversed tail-count chain."""
    if not (1 <= ell <= n and 1 <= m <= n):
        raise ValueError("need 1 <= l, m <= n")
    if m < ell:
        return 0.0
    g = potential_vector(model, n) if g is None else g
    return float(g[m] * qstar_transition(model, m, ell) / g[ell])


def reversed_absorption(model: HazardModel, n: int, ell: int, g=None) -> float:
    """Probability that the reversed chain leaves state l for the absorbing state.

    Only the last state n (= Q*_{0:n}) has positive absorption, 1/g_{n:n}.
    """
    g = potential_vector(model, n) if g is None else g
    return float(1.0 / g[n]) if ell == n else 0.0


def reversed_entrance(model: HazardModel, n: int, m: int, g=None) -> float:
    """P(Q_hat_{0:n} = m) = g_{m:n} q*(m, 0)."""
    g = potential_vector(model, n) if g is None else g
    return float(g[m] * qstar_transition(model, m, 0))


def geometric_box_pmf(model: HazardModel, k: int) -> float:
    """P(X_1 = k) for a single draw: mu(1, 0) mu(0, 1)^(k-1)."""
    return float(model.mu(1, 0) * model.mu(0, 1) ** (k - 1))


def binomial_mixture_pmf(model: HazardModel, ell: int) -> np.ndarray:
    """Row q*(l, .) computed by integrating the binomial pmf against H (oracle)."""
    from scipy import integrate

    ab = model.beta_params
    m = np.arange(ell + 1)
    if ab is None:
        h, w = model._atom_arrays
        return np.sum(w[:, None] * sps.binom.pmf(m[None, :], ell, 1.0 - h[:, None]), axis=0)
    a, b = ab
    out = np.empty(ell + 1)
    for mm in m:
        f = lambda u, mm=mm: sps.binom.pmf(mm, ell, 1.0 - u)
        out[mm], _ = integrate.quad(
            lambda u, mm=mm: f(u) / math.exp(special.betaln(a, b)),
            0.0,
            1.0,
            weight="alg",
            wvar=(a - 1.0, b - 1.0),
            epsabs=1e-14,
            epsrel=1e-12,
        )
    return out
