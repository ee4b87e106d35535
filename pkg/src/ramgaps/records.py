"""Weakly increasing Markov chains on {1, 2, ...}: occupation laws and record chains.

For a chain that never decreases, the number of visits G_j to state j is
zero-modified geometric: P(G_j >= k) = h_j p_jj^(k-1), with h_j the chance of
ever hitting j.  The h_j solve a triangular system, so they are computed
exactly in increasing order.  Conversely, the sequence h together with any
holding probabilities p_jj determines the whole transition matrix.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np


# -- initial laws -------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteLaw:
    """A law on {1, 2, ...} given by its pmf and its upper tail P(X > j)."""

    pmf: Callable[[int], float]
    tail: Callable[[int], float]
    name: str = "custom"

    @classmethod
    def geometric(cls, p: float) -> "DiscreteLaw":
        """P(X = j) = p (1-p)^(j-1)."""
        if not 0.0 < p <= 1.0:
            raise ValueError("need 0 < p <= 1")
        return cls(lambda j: p * (1.0 - p) ** (j - 1), lambda j: (1.0 - p) ** j, f"geometric({p:g})")

    @classmethod
    def from_probs(cls, probs, name: str = "finite") -> "DiscreteLaw":
        """Finite support {1..len(probs)}."""
        probs = np.asarray(probs, dtype=float)
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be a probability vector")
        tails = 1.0 - np.cumsum(probs)
        tails = np.maximum(tails, 0.0)

        def pmf(j):
            return float(probs[j - 1]) if 1 <= j <= probs.size else 0.0

        def tail(j):
            if j < 1:
                return 1.0
            return float(tails[j - 1]) if j <= probs.size else 0.0

        return cls(pmf, tail, name)

    def sample(self, rng: np.random.Generator, size: int, tol: float = 1e-12) -> np.ndarray:
        """Inverse CDF on the support truncated where the tail drops below ``tol``.

        The remaining tail (at most ``tol``) is lumped on the next state.
        """
        probs = []
        j = 1
        while self.tail(j - 1) > tol and j < 10**7:
            probs.append(self.pmf(j))
            j += 1
        cdf = np.cumsum(probs)
        idx = np.searchsorted(cdf, rng.random(size), side="right")
        return idx + 1


# -- chains -------------------------------------------------------------------


@dataclass(frozen=True)
class IncreasingChainSpec:
    """Initial law p_0 and transition p(i, j), with p(i, j) = 0 for j < i and p(j, j) < 1."""

    initial: DiscreteLaw
    transition: Callable[[int, int], float]
    transition_tail: Callable[[int, int], float] | None = None
    name: str = "custom"

    def p(self, i: int, j: int) -> float:
        if j < i:
            return 0.0
        return self.transition(i, j)

    def row_sum_error(self, i: int, support: int) -> float:
        """|sum_{i<=j<=support} p(i, j) + P(next > support) - 1|."""
        if self.transition_tail is None:
            raise ValueError("row check needs a transition tail")
        s = math.fsum(self.p(i, j) for j in range(i, support + 1))
        return abs(s + self.transition_tail(i, support) - 1.0)

    def validate(self, i_max: int, support: int, tol: float = 1e-10):
        for i in range(1, i_max + 1):
            if self.p(i, i) >= 1.0:
                raise ValueError(f"state {i} is absorbing")
            if self.transition_tail is not None and self.row_sum_error(i, support) > tol:
                raise ValueError(f"row {i} does not sum to 1")
        return self

    def matrix(self, j_max: int) -> np.ndarray:
        """p(i, j) for 1 <= i, j <= j_max in a (j_max+1)^2 array (row/col 0 unused)."""
        out = np.zeros((j_max + 1, j_max + 1))
        for i in range(1, j_max + 1):
            for j in range(i, j_max + 1):
                out[i, j] = self.p(i, j)
        return out


def weak_record_transition(p0: DiscreteLaw, i: int, j: int) -> float:
    """p(i, j) = p0(j) 1(i <= j) / P(X >= i) for weak upper records."""
    denom = p0.tail(i - 1)
    if denom <= 0.0:
        raise ValueError(f"P(X >= {i}) = 0: the weak record chain cannot be in state {i}")
    return p0.pmf(j) / denom if j >= i else 0.0


def strict_record_transition(p0: DiscreteLaw, i: int, j: int) -> float:
    """p(i, j) = p0(j) 1(i < j) / P(X > i) for strict upper records."""
    denom = p0.tail(i)
    if denom <= 0.0:
        raise ValueError(f"P(X > {i}) = 0: the strict record chain stops at {i}")
    return p0.pmf(j) / denom if j > i else 0.0


def record_chain_spec(p0: DiscreteLaw, flavor: str = "weak") -> IncreasingChainSpec:
    if flavor == "weak":
        return IncreasingChainSpec(
            p0,
            lambda i, j: weak_record_transition(p0, i, j),
            lambda i, n: p0.tail(max(n, i - 1)) / p0.tail(i - 1),
            f"weak-records[{p0.name}]",
        )
    if flavor == "strict":
        return IncreasingChainSpec(
            p0,
            lambda i, j: strict_record_transition(p0, i, j),
            lambda i, n: p0.tail(max(n, i)) / p0.tail(i),
            f"strict-records[{p0.name}]",
        )
    raise ValueError(f"flavor must be 'weak' or 'strict', got {flavor!r}")


def limit_chain_spec(law) -> IncreasingChainSpec:
    """The limiting tail-count chain of a :class:`~ramgaps.limitchain.LimitLaw`."""
    p0 = DiscreteLaw(law.entrance_pmf, law.n0_tail, f"entrance[{law.model.label()}]")
    return IncreasingChainSpec(p0, law.transition_pmf, law.transition_tail, f"limit[{law.model.label()}]")


# -- occupation laws -----------------------------------------------------------


def hitting_probabilities(spec: IncreasingChainSpec, j_max: int) -> np.ndarray:
    """h_j = p0(j) + sum_{i<j} h_i p(i, j)/(1 - p(i, i)) for j = 1..j_max (index 0 unused).

    The chain enters j either at the start or on leaving some i < j.
    """
    h = np.zeros(j_max + 1)
    stay = np.array([0.0] + [spec.p(i, i) for i in range(1, j_max + 1)])
    for j in range(1, j_max + 1):
        terms = [spec.initial.pmf(j)]
        terms += [h[i] * spec.p(i, j) / (1.0 - stay[i]) for i in range(1, j)]
        h[j] = math.fsum(terms)
    return h


def occupation_law(spec: IncreasingChainSpec, j: int, h: np.ndarray | None = None) -> tuple[float, float]:
    """(h_j, p_jj): P(G_j >= k) = h_j p_jj^(k-1) for k >= 1."""
    h = hitting_probabilities(spec, j) if h is None else h
    return float(h[j]), float(spec.p(j, j))


def occupation_tail(spec: IncreasingChainSpec, j: int, k: int) -> float:
    if k == 0:
        return 1.0
    hj, stay = occupation_law(spec, j)
    return hj * stay ** (k - 1)


def solve_potential(spec: IncreasingChainSpec, j_max: int, check: bool = True) -> np.ndarray:
    """g_j = E G_j from g_j = p0(j) + sum_{i<=j} g_i p(i, j), by forward substitution."""
    g = np.zeros(j_max + 1)
    for j in range(1, j_max + 1):
        terms = [spec.initial.pmf(j)] + [g[i] * spec.p(i, j) for i in range(1, j)]
        g[j] = math.fsum(terms) / (1.0 - spec.p(j, j))
    if check:
        h = hitting_probabilities(spec, j_max)
        stay = np.array([spec.p(j, j) for j in range(1, j_max + 1)])
        expected = h[1:] / (1.0 - stay)
        if not np.allclose(g[1:], expected, rtol=1e-9, atol=1e-12):
            raise ArithmeticError("potential and hitting probabilities disagree")
    return g


def potential_residuals(spec: IncreasingChainSpec, g: np.ndarray, j_max: int) -> np.ndarray:
    """|g_j - p0(j) - sum_{i<=j} g_i p(i, j)| for j = 1..j_max."""
    res = np.zeros(j_max)
    for j in range(1, j_max + 1):
        rhs = math.fsum([spec.initial.pmf(j)] + [g[i] * spec.p(i, j) for i in range(1, j + 1)])
        res[j - 1] = abs(g[j] - rhs)
    return res


def reconstruct_transition(h, diag, window_tol: float = 1e-2) -> Callable[[int, int], float]:
    """Transition matrix with hitting probabilities h_j and holding probabilities p_jj.

    p(i, j) = 1(j = i) p_ii + 1(j > i) (1 - p_ii) h_j prod_{i<k<j} (1 - h_k).
    ``h`` and ``diag`` are indexed from state 1 (entry 0 is state 1).  The
    requirement prod (1 - h_j) = 0 is asymptotic; a warning is issued when the
    product over the supplied window is still above ``window_tol``.
    """
    h = np.asarray(h, dtype=float)
    diag = np.asarray(diag, dtype=float)
    if h.shape != diag.shape:
        raise ValueError("h and diag must have the same length")
    if np.any((h <= 0) | (h > 1)):
        raise ValueError("hitting probabilities must lie in (0, 1]")
    if np.any((diag < 0) | (diag >= 1)):
        raise ValueError("holding probabilities must lie in [0, 1)")
    miss = np.concatenate([[0.0], np.cumsum(np.log1p(-np.minimum(h, 1.0 - 1e-300)))])
    if math.exp(miss[-1]) > window_tol:
        warnings.warn(
            f"prod(1 - h_j) over the window is {math.exp(miss[-1]):.3g}; the chain may stop",
            RuntimeWarning,
            stacklevel=2,
        )
    size = h.size

    def p(i: int, j: int) -> float:
        if not (1 <= i <= size and 1 <= j <= size):
            raise IndexError(f"states must lie in 1..{size}")
        if j < i:
            return 0.0
        if j == i:
            return float(diag[i - 1])
        # prod over k = i+1..j-1 of (1 - h_k), states are 1-based
        log_skip = miss[j - 1] - miss[i]
        return float((1.0 - diag[i - 1]) * h[j - 1] * math.exp(log_skip))

    return p


def initial_from_hitting(h) -> DiscreteLaw:
    """p0(j) = h_j prod_{k<j} (1 - h_k): the law whose weak record chain hits j w.p. h_j."""
    h = np.asarray(h, dtype=float)
    surv = np.concatenate([[1.0], np.cumprod(1.0 - h)])
    probs = h * surv[:-1]

    def pmf(j):
        return float(probs[j - 1]) if 1 <= j <= h.size else 0.0

    def tail(j):
        return float(surv[min(max(j, 0), h.size)])

    return DiscreteLaw(pmf, tail, "from-hitting")


# -- simulation --------------------------------------------------------------


def simulate_record_chain(
    p0: DiscreteLaw,
    flavor: str,
    rng: np.random.Generator,
    size: int,
    j_max: int,
    steps: int = 0,
    chunk: int = 64,
) -> dict:
    """Filter i.i.d. streams from p0 down to their weak or strict upper records.

    Returns ``G`` (visits to 1..j_max, shape ``(size, j_max)``) and, if
    ``steps`` > 0, the first ``steps`` record values per stream in ``path``.
    A stream stops once its record exceeds j_max and ``steps`` values are in.
    """
    if flavor not in ("weak", "strict"):
        raise ValueError("flavor must be 'weak' or 'strict'")
    g = np.zeros((size, j_max), dtype=np.int64)
    path = np.zeros((size, steps), dtype=np.int64)
    filled = np.zeros(size, dtype=np.int64)
    best = np.zeros(size, dtype=np.int64)
    live = np.arange(size)
    while live.size:
        x = p0.sample(rng, (live.size, chunk)).reshape(live.size, chunk)
        prev = np.maximum.accumulate(np.concatenate([best[live, None], x[:, :-1]], axis=1), axis=1)
        rec = x >= prev if flavor == "weak" else x > prev
        rec &= x > 0
        for j in range(1, j_max + 1):
            g[live, j - 1] += (rec & (x == j)).sum(axis=1)
        if steps:
            for r_pos, r in enumerate(live):
                vals = x[r_pos][rec[r_pos]]
                take = min(vals.size, steps - filled[r])
                path[r, filled[r] : filled[r] + take] = vals[:take]
                filled[r] += take
        best[live] = np.maximum(best[live], x.max(axis=1))
        done = best[live] > j_max
        if steps:
            done &= filled[live] >= steps
        live = live[~done]
    out = {"G": g}
    if steps:
        out["path"] = path
    return out


def simulate_increasing_chain(
    spec: IncreasingChainSpec, rng: np.random.Generator, size: int, steps: int, support: int
) -> np.ndarray:
    """Paths X_0..X_steps of a weakly increasing chain truncated to 1..support.

    Mass beyond ``support`` (initial or transition) sends the path to
    ``support + 1``, which is absorbing.
    """
    top = support + 1
    p0 = np.array([spec.initial.pmf(j) for j in range(1, support + 1)])
    mat = spec.matrix(support)[1:, 1:]
    cdf0 = np.cumsum(p0)
    cdfs = np.cumsum(mat, axis=1)
    x = np.empty((size, steps + 1), dtype=np.int64)
    x[:, 0] = np.searchsorted(cdf0, rng.random(size), side="right") + 1
    for k in range(steps):
        cur = x[:, k]
        nxt = np.full(size, top, dtype=np.int64)
        inside = cur <= support
        u = rng.random(size)
        rows = cdfs[np.minimum(cur, support) - 1]
        nxt[inside] = (rows[inside] <= u[inside, None]).sum(axis=1) + 1
        x[:, k + 1] = np.minimum(nxt, top)
    return x


def jump_kernel(paths: np.ndarray, support: int) -> np.ndarray:
    """Empirical kernel of the chain watched only when it changes state."""
    frm = paths[:, :-1].ravel()
    to = paths[:, 1:].ravel()
    moved = (to != frm) & (frm <= support) & (to <= support)
    counts = np.zeros((support + 1, support + 1))
    np.add.at(counts, (frm[moved], to[moved]), 1.0)
    return counts
