"""Hazard (factor) distributions H on (0, 1) and their mixed moments.

A residual allocation model breaks a unit stick with i.i.d. factors ``H``.
Everything downstream is driven by the mixed moments

    mu(i, j) = E[H**i * (1 - H)**j]

and by ``mu_log = E[-log(1 - H)]``, the mean spacing of the renewal process
``S_j = sum(-log(1 - H_i))``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

__all__ = [
    "HazardModel",
    "mu_moment",
    "mu_log",
    "mu_log_quadrature",
    "mu_log_series",
    "mean_neg_log_h",
    "sample_hazard",
    "sample_spacing",
    "sample_stationary_delay",
    "spacing_survival",
]


@dataclass(frozen=True)
class HazardModel:
    """Distribution of the factor H.

    ``kind`` is one of ``"gem"`` (Beta(1, theta)), ``"beta"`` or ``"atoms"``.
    Build instances with :meth:`gem`, :meth:`beta` or :meth:`discrete`.
    """

    kind: str
    theta: float | None = None
    a: float | None = None
    b: float | None = None
    atoms: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()
    nonlattice: bool = True

    def __post_init__(self):
        if self.kind == "gem":
            if not (self.theta is not None and self.theta > 0 and math.isfinite(self.theta)):
                raise ValueError(f"GEM theta must be positive, got {self.theta}")
        elif self.kind == "beta":
            if not (self.a and self.b and self.a > 0 and self.b > 0):
                raise ValueError(f"Beta parameters must be positive, got a={self.a}, b={self.b}")
        elif self.kind == "atoms":
            if len(self.atoms) == 0 or len(self.atoms) != len(self.weights):
                raise ValueError("atoms and weights must be non-empty and of equal length")
            if any(not (0.0 < h < 1.0) for h in self.atoms):
                raise ValueError("atoms must lie strictly inside (0, 1)")
            if any(w < 0 for w in self.weights) or abs(math.fsum(self.weights) - 1.0) > 1e-12:
                raise ValueError("weights must be a probability vector")
            if len(self.atoms) == 1 and self.nonlattice:
                # a single atom gives a deterministic spacing: always lattice
                object.__setattr__(self, "nonlattice", False)
        else:
            raise ValueError(f"unknown hazard kind {self.kind!r}")

    # -- constructors -----------------------------------------------------

    @classmethod
    def gem(cls, theta: float) -> "HazardModel":
        return cls("gem", theta=float(theta))

    @classmethod
    def beta(cls, a: float, b: float) -> "HazardModel":
        return cls("beta", a=float(a), b=float(b))

    @classmethod
    def discrete(cls, atoms, weights, nonlattice: bool = False) -> "HazardModel":
        return cls(
            "atoms",
            atoms=tuple(float(h) for h in atoms),
            weights=tuple(float(w) for w in weights),
            nonlattice=nonlattice,
        )

    # -- parameter access -------------------------------------------------

    @property
    def beta_params(self) -> tuple[float, float] | None:
        """(a, b) when H has a Beta law, else None."""
        if self.kind == "gem":
            return 1.0, self.theta
        if self.kind == "beta":
            return self.a, self.b
        return None

    @property
    def _atom_arrays(self):
        return np.asarray(self.atoms), np.asarray(self.weights)

    def label(self) -> str:
        if self.kind == "gem":
            return f"gem:{self.theta:g}"
        if self.kind == "beta":
            return f"beta:{self.a:g},{self.b:g}"
        return "atoms:" + ",".join(f"{h:g}" for h in self.atoms) + "/" + ",".join(
            f"{w:g}" for w in self.weights
        )

    # -- moments ----------------------------------------------------------

    def log_mu(self, i, j):
        """Vectorised ``log E[H^i (1-H)^j]`` for integer arrays i >= 0, j >= 0."""
        i = np.asarray(i, dtype=float)
        j = np.asarray(j, dtype=float)
        ab = self.beta_params
        if ab is not None:
            a, b = ab
            return special.betaln(a + i, b + j) - special.betaln(a, b)
        i, j = np.broadcast_arrays(i, j)
        h, w = self._atom_arrays
        terms = (
            np.log(w)[:, None]
            + np.multiply.outer(np.log(h), i.ravel())
            + np.multiply.outer(np.log1p(-h), j.ravel())
        )
        return special.logsumexp(terms, axis=0).reshape(i.shape)

    def mu(self, i, j):
        """Vectorised mixed moment for i, j >= 0."""
        return np.exp(self.log_mu(i, j))

    # -- serialisation ----------------------------------------------------

    def to_dict(self) -> dict:
        if self.kind == "gem":
            d = {"kind": "gem", "theta": self.theta}
        elif self.kind == "beta":
            d = {"kind": "beta", "a": self.a, "b": self.b}
        else:
            d = {"kind": "atoms", "atoms": list(self.atoms), "weights": list(self.weights)}
        d["nonlattice"] = self.nonlattice
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "HazardModel":
        kind = d["kind"]
        if kind == "gem":
            return cls("gem", theta=float(d["theta"]), nonlattice=bool(d.get("nonlattice", True)))
        if kind == "beta":
            return cls(
                "beta", a=float(d["a"]), b=float(d["b"]), nonlattice=bool(d.get("nonlattice", True))
            )
        if kind == "atoms":
            return cls.discrete(d["atoms"], d["weights"], nonlattice=bool(d.get("nonlattice", False)))
        raise ValueError(f"unknown hazard kind {kind!r}")

    @classmethod
    def from_json(cls, text: str) -> "HazardModel":
        return cls.from_dict(json.loads(text))

    @classmethod
    def parse(cls, text: str) -> "HazardModel":
        """Parse either a JSON object or a short form.

        Short forms: ``gem:1``, ``beta:2,3``, ``atoms:0.3,0.7/0.5,0.5``
        (append ``!`` to declare an atoms model non-lattice).
        """
        text = text.strip()
        if text.startswith("{"):
            return cls.from_json(text)
        kind, _, rest = text.partition(":")
        kind = kind.lower()
        if kind == "gem":
            return cls.gem(float(rest))
        if kind == "beta":
            a, b = (float(x) for x in rest.split(","))
            return cls.beta(a, b)
        if kind == "atoms":
            nonlattice = rest.endswith("!")
            rest = rest.rstrip("!")
            hs, _, ws = rest.partition("/")
            atoms = [float(x) for x in hs.split(",")]
            weights = [float(x) for x in ws.split(",")] if ws else [1.0 / len(atoms)] * len(atoms)
            return cls.discrete(atoms, weights, nonlattice=nonlattice)
        raise ValueError(f"cannot parse hazard model {text!r}")


def mu_moment(model: HazardModel, i: int, j: int) -> float:
    """E[H^i (1-H)^j] for i >= 0, j >= -1; ``math.inf`` when it diverges."""
    if i < 0 or j < -1 or int(i) != i or int(j) != j:
        raise ValueError(f"need integers i >= 0 and j >= -1, got ({i}, {j})")
    if i == 0 and j == 0:
        return 1.0
    if j >= 0:
        return float(model.mu(i, j))
    ab = model.beta_params
    if ab is not None:
        a, b = ab
        if b <= 1.0:
            return math.inf
        return math.exp(special.betaln(a + i, b - 1.0) - special.betaln(a, b))
    h, w = model._atom_arrays
    return float(np.sum(w * h**i / (1.0 - h)))


def mu_log(model: HazardModel) -> float:
    """E[-log(1 - H)], the mean renewal spacing."""
    if model.kind == "gem":
        return 1.0 / model.theta
    if model.kind == "beta":
        return float(special.digamma(model.a + model.b) - special.digamma(model.b))
    h, w = model._atom_arrays
    return float(np.sum(w * -np.log1p(-h)))


def mean_neg_log_h(model: HazardModel) -> float:
    """E[-log H]."""
    ab = model.beta_params
    if ab is not None:
        a, b = ab
        return float(special.digamma(a + b) - special.digamma(a))
    h, w = model._atom_arrays
    return float(np.sum(w * -np.log(h)))


def spacing_survival(model: HazardModel, s):
    """P(-log(1-H) > s) = P(H > 1 - e^{-s})."""
    s = np.asarray(s, dtype=float)
    ab = model.beta_params
    if ab is not None:
        a, b = ab
        # P(1 - H < e^{-s}) with 1 - H ~ Beta(b, a)
        return special.betainc(b, a, np.exp(-np.maximum(s, 0.0)))
    h, w = model._atom_arrays
    x = -np.log1p(-h)
    return np.sum(w[:, None] * (x[:, None] > s.ravel()[None, :]), axis=0).reshape(s.shape)


def mu_log_quadrature(model: HazardModel) -> float:
    """mu_log as the integral of P(H > u)/(1 - u) over (0, 1).

    Integrated in the variable s = -log(1 - u), which removes the endpoint
    singularity at u = 1.
    """
    if model.kind == "atoms":
        h, w = model._atom_arrays
        x = -np.log1p(-h)
        # survival is a step function; integrate piecewise between the jumps
        pts = np.concatenate([[0.0], np.sort(x)])
        total = 0.0
        for lo, hi in zip(pts[:-1], pts[1:]):
            total += float(spacing_survival(model, 0.5 * (lo + hi))) * (hi - lo)
        return total
    f = lambda s: float(spacing_survival(model, s))
    head, _ = integrate.quad(f, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    tail, _ = integrate.quad(f, 1.0, np.inf, epsabs=1e-14, epsrel=1e-13, limit=200)
    return head + tail


def mu_log_series(model: HazardModel, tol: float = 1e-12, max_terms: int = 1 << 24):
    """mu_log as sum_{m>=1} mu(m, 0)/m.

    Returns ``(value, bound)`` where ``bound`` is a rigorous bound on the
    truncated tail, ``sum_{m>M} H^m/m <= H^{M+1}/((M+1)(1-H))``.
    """
    m_cap = 64
    while True:
        m = np.arange(1, m_cap + 1)
        terms = model.mu(m, 0) / m
        bound = mu_moment(model, m_cap + 1, -1) / (m_cap + 1)
        if bound < tol and terms[-1] < 1e-14:
            return math.fsum(terms), bound
        if m_cap >= max_terms or not math.isfinite(bound):
            raise ValueError("series for mu_log does not reach the requested tolerance")
        m_cap *= 2


# -- sampling ---------------------------------------------------------------


def _beta_pair(rng: np.random.Generator, a: float, b: float, size):
    """(H, 1-H, -log(1-H)) from one gamma-ratio draw, computed without cancellation."""
    ga = rng.standard_gamma(a, size)
    gb = rng.standard_gamma(b, size)
    tot = ga + gb
    gb = np.maximum(gb, np.finfo(float).tiny)
    return ga / tot, gb / tot, np.log(tot) - np.log(gb)


def sample_hazard(model: HazardModel, rng: np.random.Generator, size=None):
    """Draw H. Beta laws use the gamma-ratio method, atoms use inverse CDF."""
    ab = model.beta_params
    if ab is not None:
        return _beta_pair(rng, *ab, size)[0]
    h, w = model._atom_arrays
    idx = np.searchsorted(np.cumsum(w), rng.random(size), side="right")
    return h[np.minimum(idx, len(h) - 1)]


def sample_spacing(model: HazardModel, rng: np.random.Generator, size=None):
    """Draw a renewal spacing -log(1 - H)."""
    ab = model.beta_params
    if ab is not None:
        return _beta_pair(rng, *ab, size)[2]
    return -np.log1p(-sample_hazard(model, rng, size))


def sample_hazard_and_survivor(model: HazardModel, rng: np.random.Generator, size=None):
    """Draw (H, 1 - H) with 1 - H accurate even when H is close to 1."""
    ab = model.beta_params
    if ab is not None:
        hh, ww, _ = _beta_pair(rng, *ab, size)
        return hh, ww
    hh = sample_hazard(model, rng, size)
    return hh, 1.0 - hh


def _length_biased_spacing(model: HazardModel, rng: np.random.Generator, n: int) -> np.ndarray:
    ab = model.beta_params
    if ab is None:
        h, w = model._atom_arrays
        x = -np.log1p(-h)
        bw = w * x
        idx = np.searchsorted(np.cumsum(bw / bw.sum()), rng.random(n), side="right")
        return x[np.minimum(idx, len(x) - 1)]
    a, b = ab
    # Target density of H is proportional to h^(a-1) (1-h)^(b-1) * (-log(1-h)).
    # Propose from Beta(a, b - d); the ratio (1-h)^d * (-log(1-h)) <= 1/(e d).
    d = 0.5 * b
    out = np.empty(n)
    filled = 0
    while filled < n:
        want = max(2 * (n - filled), 16)
        x = _beta_pair(rng, a, b - d, want)[2]
        accept = rng.random(want) < math.e * d * x * np.exp(-d * x)
        got = x[accept][: n - filled]
        out[filled : filled + got.size] = got
        filled += got.size
    return out


def sample_stationary_delay(model: HazardModel, rng: np.random.Generator, size=None):
    """Draw from the stationary delay density P(-log(1-H) > s)/mu_log.

    Uses U * L with L a length-biased spacing and U uniform.
    """
    if not math.isfinite(mu_log(model)):
        raise ValueError("stationary delay needs a finite mu_log")
    n = 1 if size is None else int(np.prod(size))
    draws = _length_biased_spacing(model, rng, n) * rng.random(n)
    if size is None:
        return float(draws[0])
    return draws.reshape(size)
