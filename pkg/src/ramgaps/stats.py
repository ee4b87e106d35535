"""Empirical distributions and the goodness-of-fit tests used by the checks.

p-values come from scipy's special functions: the chi-square survival
function is the regularised upper incomplete gamma Q(dof/2, x/2), and KS
p-values use the asymptotic Kolmogorov distribution.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy import special, stats as sps

DEFAULT_ALPHA = 1e-3
MIN_EXPECTED = 5.0


def chi2_sf(x: float, dof: int) -> float:
    return float(special.gammaincc(0.5 * dof, 0.5 * x)) if x > 0 else 1.0


# -- empirical distributions --------------------------------------------------


@dataclass
class EmpiricalDist:
    """Counts per outcome; outcomes are tuples of ints."""

    counts: Counter = field(default_factory=Counter)
    seeds: tuple = ()

    @classmethod
    def from_samples(cls, samples, seeds=()) -> "EmpiricalDist":
        arr = np.asarray(samples)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.shape[0] == 0:
            return cls(Counter(), tuple(seeds))
        keys, freq = np.unique(arr, axis=0, return_counts=True)
        c = Counter({tuple(int(v) for v in k): int(f) for k, f in zip(keys, freq)})
        return cls(c, tuple(seeds))

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def merge(self, other: "EmpiricalDist") -> "EmpiricalDist":
        return EmpiricalDist(self.counts + other.counts, tuple(self.seeds) + tuple(other.seeds))

    def __add__(self, other):
        return self.merge(other)

    def pmf(self) -> dict:
        n = self.total
        return {k: v / n for k, v in self.counts.items()}

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "seeds": list(self.seeds),
            "counts": [[list(k), v] for k, v in sorted(self.counts.items())],
        }


# -- reports -----------------------------------------------------------------


@dataclass
class GofReport:
    """One check: a p-value test (pass iff p >= threshold), an exact check
    (pass iff error <= tolerance) or a detection test (pass iff p < threshold)."""

    name: str
    statistic: float
    dof: int | None = None
    p_value: float | None = None
    abs_error: float | None = None
    threshold: float = DEFAULT_ALPHA
    mode: str = "accept"
    passed: bool = False
    sizes: tuple = ()
    seed: int | None = None
    note: str = ""

    def __post_init__(self):
        self.passed = bool(self.evaluate())

    def evaluate(self) -> bool:
        if self.mode == "exact":
            return self.abs_error is not None and math.isfinite(self.abs_error) and self.abs_error <= self.threshold
        if self.p_value is None or not math.isfinite(self.p_value):
            return False
        if self.mode == "reject":
            return self.p_value < self.threshold
        return self.p_value >= self.threshold

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sizes"] = list(self.sizes)
        for key in ("statistic", "p_value", "abs_error"):
            v = d[key]
            if isinstance(v, float) and not math.isfinite(v):
                d[key] = str(v)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        if self.mode == "exact":
            return f"[{tag}] {self.name}: error={self.abs_error:.3g} (tol {self.threshold:g})"
        op = "<" if self.mode == "reject" else ">="
        return f"[{tag}] {self.name}: p={self.p_value:.4g} (need {op} {self.threshold:g})"


def exact_check(name: str, error: float, tolerance: float, note: str = "") -> GofReport:
    return GofReport(name, float(error), abs_error=float(error), threshold=tolerance, mode="exact", note=note)


# -- chi-square ---------------------------------------------------------------


def merge_buckets(observed, expected, min_expected: float = MIN_EXPECTED):
    """Greedily merge adjacent cells until each expected count reaches ``min_expected``.

    A short final run is folded into the previous bucket.
    """
    obs_out, exp_out = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(observed, expected):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            obs_out.append(o_acc)
            exp_out.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        if exp_out:
            obs_out[-1] += o_acc
            exp_out[-1] += e_acc
        else:
            obs_out.append(o_acc)
            exp_out.append(e_acc)
    return np.asarray(obs_out), np.asarray(exp_out)


def chi_square_gof(
    emp: EmpiricalDist,
    pmf: Callable[[tuple], float] | dict,
    outcomes: Iterable[tuple] | None = None,
    name: str = "chi-square gof",
    threshold: float = DEFAULT_ALPHA,
    min_expected: float = MIN_EXPECTED,
    seed: int | None = None,
) -> GofReport:
    """Pearson test of ``emp`` against an exact pmf.

    Outcomes are taken from ``outcomes`` (or the pmf's keys, or the observed
    support), sorted, and merged greedily to expected >= ``min_expected``; all
    probability mass outside them becomes one remainder cell.
    """
    if isinstance(pmf, dict):
        table = {tuple(np.atleast_1d(k).tolist()): v for k, v in pmf.items()}
        prob = lambda k: table.get(k, 0.0)
        keys = sorted(table) if outcomes is None else sorted(tuple(o) for o in outcomes)
    else:
        prob = pmf
        keys = sorted(emp.counts) if outcomes is None else sorted(tuple(o) for o in outcomes)
    total = emp.total
    if total == 0:
        raise ValueError("empty sample")
    probs = np.array([prob(k) for k in keys], dtype=float)
    observed = np.array([emp.counts.get(k, 0) for k in keys], dtype=float)
    rest_p = max(0.0, 1.0 - math.fsum(probs))
    rest_o = total - observed.sum()
    obs, exp = merge_buckets(observed, probs * total, min_expected)
    if rest_p * total >= min_expected:
        obs = np.append(obs, rest_o)
        exp = np.append(exp, rest_p * total)
    else:
        # too little remainder mass for a cell of its own
        obs[-1] += rest_o
        exp[-1] += rest_p * total
    if obs.size < 2:
        raise ValueError("chi-square test needs at least two buckets")
    stat = float(np.sum((obs - exp) ** 2 / np.where(exp > 0, exp, 1.0)))
    dof = obs.size - 1
    return GofReport(name, stat, dof, chi2_sf(stat, dof), threshold=threshold, sizes=(total,), seed=seed)


def chi_square_two_sample(
    a: EmpiricalDist,
    b: EmpiricalDist,
    name: str = "chi-square two-sample",
    threshold: float = DEFAULT_ALPHA,
    min_expected: float = MIN_EXPECTED,
    seed: int | None = None,
) -> GofReport:
    """Homogeneity test on a 2 x K table; sparse outcomes are pooled in sorted order."""
    keys = sorted(set(a.counts) | set(b.counts))
    ca = np.array([a.counts.get(k, 0) for k in keys], dtype=float)
    cb = np.array([b.counts.get(k, 0) for k in keys], dtype=float)
    na, nb = ca.sum(), cb.sum()
    if na == 0 or nb == 0:
        raise ValueError("empty sample")
    # pool cells until the smaller expected count in each column is large enough
    frac = min(na, nb) / (na + nb)
    merged_a, merged_b = [], []
    acc_a = acc_b = 0.0
    for x, y in zip(ca, cb):
        acc_a += x
        acc_b += y
        if (acc_a + acc_b) * frac >= min_expected:
            merged_a.append(acc_a)
            merged_b.append(acc_b)
            acc_a = acc_b = 0.0
    if acc_a + acc_b > 0:
        if merged_a:
            merged_a[-1] += acc_a
            merged_b[-1] += acc_b
        else:
            merged_a.append(acc_a)
            merged_b.append(acc_b)
    table = np.array([merged_a, merged_b])
    if table.shape[1] < 2:
        raise ValueError("chi-square test needs at least two buckets")
    stat, dof = _contingency_stat(table)
    return GofReport(name, stat, dof, chi2_sf(stat, dof), threshold=threshold, sizes=(int(na), int(nb)), seed=seed)


def _contingency_stat(table: np.ndarray) -> tuple[float, int]:
    n = table.sum()
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / n
    stat = float(np.sum((table - expected) ** 2 / expected))
    dof = (table.shape[0] - 1) * (table.shape[1] - 1)
    return stat, dof


def _merge_axis(table: np.ndarray, axis: int, min_expected: float) -> np.ndarray:
    """Merge trailing rows (axis 0) or columns (axis 1) until every expected count is large enough."""
    t = table if axis == 0 else table.T
    while t.shape[0] > 2:
        n = t.sum()
        expected = np.outer(t.sum(axis=1), t.sum(axis=0)) / n
        if expected.min(axis=1)[-1] >= min_expected:
            break
        t = np.vstack([t[:-2], t[-2:].sum(axis=0, keepdims=True)])
    return t if axis == 0 else t.T


def chi_square_independence(
    x,
    y,
    name: str = "chi-square independence",
    threshold: float = DEFAULT_ALPHA,
    min_expected: float = MIN_EXPECTED,
    mode: str = "accept",
    seed: int | None = None,
) -> GofReport:
    """Independence of two integer samples via their contingency table.

    Values are treated as ordered; the largest values are lumped on each axis
    until all expected counts reach ``min_expected``.
    """
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if x.size == 0 or x.size != y.size:
        raise ValueError("need two non-empty samples of equal length")
    xs, xi = np.unique(x, return_inverse=True)
    ys, yi = np.unique(y, return_inverse=True)
    table = np.zeros((xs.size, ys.size))
    np.add.at(table, (xi, yi), 1.0)
    for _ in range(table.shape[0] + table.shape[1]):
        table = _merge_axis(table, 0, min_expected)
        table = _merge_axis(table, 1, min_expected)
        n = table.sum()
        expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / n
        if expected.min() >= min_expected or min(table.shape) < 2:
            break
    if min(table.shape) < 2:
        raise ValueError("independence test needs at least two values on each axis")
    stat, dof = _contingency_stat(table)
    return GofReport(name, stat, dof, chi2_sf(stat, dof), threshold=threshold, mode=mode, sizes=(int(x.size),), seed=seed)


# -- Kolmogorov-Smirnov --------------------------------------------------------


def _kolmogorov_sf(d: float, en: float) -> float:
    return float(sps.kstwobign.sf(math.sqrt(en) * d))


def ks_two_sample(a, b, name: str = "KS two-sample", threshold: float = DEFAULT_ALPHA, seed: int | None = None) -> GofReport:
    """Two-sample KS with the asymptotic p-value at effective size n m/(n+m)."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.abs(cdf_a - cdf_b).max())
    en = a.size * b.size / (a.size + b.size)
    return GofReport(name, d, None, _kolmogorov_sf(d, en), threshold=threshold, sizes=(a.size, b.size), seed=seed)


def ks_one_sample(x, cdf: Callable, name: str = "KS one-sample", threshold: float = DEFAULT_ALPHA, seed: int | None = None) -> GofReport:
    """One-sample KS against a continuous CDF, asymptotic p-value."""
    x = np.sort(np.asarray(x, dtype=float))
    if x.size == 0:
        raise ValueError("empty sample")
    f = np.asarray(cdf(x), dtype=float)
    n = x.size
    i = np.arange(1, n + 1)
    d = float(max((i / n - f).max(), (f - (i - 1) / n).max()))
    return GofReport(name, d, None, _kolmogorov_sf(d, n), threshold=threshold, sizes=(n,), seed=seed)


# -- misc ---------------------------------------------------------------------


def tv_distance(emp: EmpiricalDist, pmf: dict) -> float:
    """Total variation between the empirical law and a pmf given as a dict."""
    n = emp.total
    if n == 0:
        raise ValueError("empty sample")
    table = {tuple(np.atleast_1d(k).tolist()): v for k, v in pmf.items()}
    keys = set(emp.counts) | set(table)
    return 0.5 * math.fsum(abs(emp.counts.get(k, 0) / n - table.get(k, 0.0)) for k in keys)


def mean_ci(samples, level: float = 0.99) -> tuple[float, float]:
    """(mean, half-width) of a normal-approximation confidence interval."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two samples")
    z = sps.norm.ppf(0.5 + 0.5 * level)
    return float(x.mean()), float(z * x.std(ddof=1) / math.sqrt(x.size))


def mean_check(name: str, samples, target: float, level: float = 0.99, seed: int | None = None) -> GofReport:
    """Two-sided z-test of E X = target; passes when target lies inside the CI at ``level``."""
    m, _ = mean_ci(samples, level)
    x = np.asarray(samples, dtype=float)
    se = x.std(ddof=1) / math.sqrt(x.size)
    z = (m - target) / se if se > 0 else (0.0 if m == target else math.inf)
    p = float(2 * sps.norm.sf(abs(z)))
    return GofReport(name, float(z), None, p, threshold=1.0 - level, sizes=(x.size,), seed=seed,
                     note=f"mean={m:.6g} target={target:.6g} se={se:.3g}")


def proportion_check(name: str, hits: int, total: int, prob: float, n_se: float = 4.0) -> GofReport:
    """|p_hat - p| <= n_se standard errors, reported as a p-value at the matching level."""
    p_hat = hits / total
    se = math.sqrt(prob * (1 - prob) / total)
    z = (p_hat - prob) / se if se > 0 else (0.0 if p_hat == prob else math.inf)
    return GofReport(name, z, None, float(2 * sps.norm.sf(abs(z))), threshold=float(2 * sps.norm.sf(n_se)),
                     sizes=(total,), note=f"p_hat={p_hat:.6g} p={prob:.6g}")
