"""The limiting picture as two independent point processes on [0, inf).

Stars ("Y") are the birth times 0 = Y_0 < Y_1 < ... of a standard Yule
process; bars ("S") are the points S*_0 < S*_1 < ... of a stationary renewal
process with spacings -log(1-H).  Reading the merged sequence:

* Q_k = N_Y(S*_k), the number of stars before the k-th bar;
* N_k = stars between bars k-1 and k (N_0 = stars before the first bar);
* G_j = bars between stars j-1 and j.

The last count read off a finite trace is censored: more stars may follow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hazard import HazardModel, mu_log, sample_spacing, sample_stationary_delay

YULE_CONSTRUCTIONS = ("exponential", "order-statistics", "log-gamma", "kendall")
MAX_BIRTHS = 10**9


class InsufficientHorizon(RuntimeError):
    """A path does not extend far enough to resolve the requested indices."""


# -- Yule process ------------------------------------------------------------


@dataclass(frozen=True)
class YulePath:
    birth_times: np.ndarray
    construction: str = "exponential"

    def __post_init__(self):
        t = np.asarray(self.birth_times, dtype=float)
        if t.size == 0 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("birth times must start at 0 and increase strictly")
        object.__setattr__(self, "birth_times", t)

    @property
    def k(self) -> int:
        return self.birth_times.size - 1


def sample_yule_times(
    k: int,
    rng: np.random.Generator,
    size: int,
    construction: str = "exponential",
    n: int | None = None,
) -> np.ndarray:
    """Birth times Y_0..Y_k for ``size`` independent Yule processes, shape ``(size, k+1)``.

    * ``exponential``: Y_k = sum_{i<=k} eps_i / i.
    * ``order-statistics``: Y_j = eps_{n:n} - eps_{n-j:n} for a sample of n >= k
      exponentials (default n = k + 1), with eps_{0:n} = 0.
    * ``log-gamma``: Y_k = log(gamma_{k+1} / gamma_1), gamma partial sums of exponentials.
    * ``kendall``: Y_k = log(1 + gamma_k / eps), gamma arrival times of an
      independent unit Poisson process, i.e. the process 1 + N_gamma((e^t - 1) eps).
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if construction == "exponential":
        steps = rng.standard_exponential((size, k)) / np.arange(1, k + 1)
        return np.concatenate([np.zeros((size, 1)), np.cumsum(steps, axis=1)], axis=1)
    if construction == "order-statistics":
        n = k + 1 if n is None else int(n)
        if n < k:
            raise ValueError(f"order-statistics construction needs n >= k, got n={n}, k={k}")
        eps = np.sort(rng.standard_exponential((size, n)), axis=1)
        eps = np.concatenate([np.zeros((size, 1)), eps], axis=1)  # eps_{0:n} = 0
        top = eps[:, n][:, None]
        return top - eps[:, n - np.arange(k + 1)]
    if construction == "log-gamma":
        gam = np.cumsum(rng.standard_exponential((size, k + 1)), axis=1)
        return np.log(gam / gam[:, :1])
    if construction == "kendall":
        scale = rng.standard_exponential((size, 1))
        gam = np.cumsum(rng.standard_exponential((size, k)), axis=1)
        return np.concatenate([np.zeros((size, 1)), np.log1p(gam / scale)], axis=1)
    raise ValueError(f"unknown Yule construction {construction!r}; use one of {YULE_CONSTRUCTIONS}")


def sample_yule(k: int, rng: np.random.Generator, construction: str = "exponential", n: int | None = None) -> YulePath:
    return YulePath(sample_yule_times(k, rng, 1, construction, n)[0], construction)


def yule_count(t: float, rng: np.random.Generator, size: int | None = None, max_births: int = MAX_BIRTHS):
    """N_Y(t) = 1 + #{k >= 1 : Y_k <= t}, generating births lazily past t."""
    if t < 0:
        raise ValueError("t must be >= 0")
    m = 1 if size is None else size
    y = np.zeros(m)
    count = np.ones(m, dtype=np.int64)
    live = np.arange(m)
    i = 0
    while live.size:
        i += 1
        if i > max_births:
            raise RuntimeError(f"more than {max_births} births before t={t}")
        y[live] += rng.standard_exponential(live.size) / i
        inside = y[live] <= t
        count[live[inside]] += 1
        live = live[inside]
    return int(count[0]) if size is None else count


def yule_increments(
    m: int, t: float, rng: np.random.Generator, size: int, max_births: int = MAX_BIRTHS
) -> np.ndarray:
    """N_Y(s + t) - N_Y(s) given N_Y(s) = m, by running the birth chain for time t."""
    clock = np.zeros(size)
    state = np.full(size, m, dtype=np.int64)
    live = np.arange(size)
    births = 0
    while live.size:
        clock[live] += rng.standard_exponential(live.size) / state[live]
        inside = clock[live] <= t
        state[live[inside]] += 1
        live = live[inside]
        births += 1
        if births > max_births:
            raise RuntimeError("birth cap exceeded")
    return state - m


class YuleBuilder:
    """A single Yule path that grows on demand."""

    def __init__(self, rng: np.random.Generator, chunk: int = 64):
        self._rng = rng
        self._chunk = chunk
        self.times = np.zeros(1)

    def _grow(self):
        k = self.times.size
        steps = self._rng.standard_exponential(self._chunk) / np.arange(k, k + self._chunk)
        self.times = np.concatenate([self.times, self.times[-1] + np.cumsum(steps)])
        if self.times.size > MAX_BIRTHS:
            raise RuntimeError("birth cap exceeded")

    def extend_to_index(self, k: int):
        while self.times.size <= k:
            self._grow()

    def extend_past(self, t: float):
        while self.times[-1] <= t:
            self._grow()

    def path(self) -> YulePath:
        return YulePath(self.times.copy())


# -- renewal process ---------------------------------------------------------


@dataclass(frozen=True)
class RenewalPath:
    points: np.ndarray
    horizon: float
    delay_mode: str = "stationary"

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.size and (p[0] <= 0 or np.any(np.diff(p) <= 0)):
            raise ValueError("renewal points must be positive and strictly increasing")
        if self.delay_mode not in ("stationary", "zero-delay"):
            raise ValueError(f"unknown delay mode {self.delay_mode!r}")
        object.__setattr__(self, "points", p)

    def count(self, t: float) -> int:
        """N*_S(t) = #{i : S*_i <= t}; needs t <= horizon."""
        if t > self.horizon:
            raise InsufficientHorizon(f"renewal path known up to {self.horizon}, asked for {t}")
        return int(np.searchsorted(self.points, t, side="right"))


class RenewalBuilder:
    """A single renewal path that grows on demand.

    In stationary mode the first point has the stationary delay law; in
    zero-delay mode the points are S_1, S_2, ... with S_0 = 0 left out.
    """

    def __init__(self, model: HazardModel, rng: np.random.Generator, delay_mode: str = "stationary", chunk: int = 32):
        self.model = model
        self._rng = rng
        self._chunk = chunk
        self.delay_mode = delay_mode
        if delay_mode == "stationary":
            first = sample_stationary_delay(model, rng)
        elif delay_mode == "zero-delay":
            first = float(sample_spacing(model, rng))
        else:
            raise ValueError(f"unknown delay mode {delay_mode!r}")
        self.points = np.array([first])

    def _grow(self):
        steps = sample_spacing(self.model, self._rng, self._chunk)
        self.points = np.concatenate([self.points, self.points[-1] + np.cumsum(steps)])

    def extend_to_index(self, k: int):
        while self.points.size <= k:
            self._grow()

    def extend_past(self, t: float):
        while self.points[-1] <= t:
            self._grow()

    def path(self) -> RenewalPath:
        # the horizon is the last point: the count is known exactly up to there
        return RenewalPath(self.points.copy(), float(self.points[-1]), self.delay_mode)


def sample_renewal(model: HazardModel, horizon: float, delay_mode: str, rng: np.random.Generator) -> RenewalPath:
    """Renewal points covering [0, horizon]."""
    b = RenewalBuilder(model, rng, delay_mode)
    b.extend_past(horizon)
    pts = b.points
    keep = np.searchsorted(pts, horizon, side="right")
    return RenewalPath(pts[:keep], horizon, delay_mode)


def sample_renewal_points(
    model: HazardModel, k: int, rng: np.random.Generator, size: int, delay_mode: str = "stationary"
) -> np.ndarray:
    """First k+1 renewal points for ``size`` independent paths, shape ``(size, k+1)``."""
    if delay_mode == "stationary":
        first = sample_stationary_delay(model, rng, size)
    else:
        first = sample_spacing(model, rng, size)
    steps = sample_spacing(model, rng, (size, k)) if k else np.zeros((size, 0))
    return first[:, None] + np.concatenate([np.zeros((size, 1)), np.cumsum(steps, axis=1)], axis=1)


# -- interleaving --------------------------------------------------------------


@dataclass(frozen=True)
class InterleavingTrace:
    """Merged symbols, 'Y' for a star (Yule birth) and 'S' for a bar (renewal point)."""

    symbols: str
    censored_last_count: bool = True

    def __post_init__(self):
        if not self.symbols or self.symbols[0] != "Y" or set(self.symbols) - {"Y", "S"}:
            raise ValueError("a trace is a string over {Y, S} starting with Y")

    def counts(self) -> tuple[list[int], int]:
        """(N_0, ..., N_{s-1}) for the s bars in the trace, and the trailing star count.

        The trailing count is a lower bound for N_s ("3+").
        """
        runs = self.symbols.split("S")
        return [len(r) for r in runs[:-1]], len(runs[-1])

    def gaps(self) -> tuple[list[int], int]:
        """(G_1, ..., G_{y-1}) for the y stars in the trace, and trailing bars after the last star."""
        runs = self.symbols.split("Y")[1:]
        return [len(r) for r in runs[:-1]], len(runs[-1])

    def tail_counts(self) -> list[int]:
        """Q_k = stars before the k-th bar."""
        return [int(v) for v in np.cumsum(self.counts()[0])]

    @classmethod
    def from_counts(cls, counts, trailing: int) -> "InterleavingTrace":
        return cls("S".join("Y" * int(c) for c in counts) + "S" + "Y" * int(trailing))

    @classmethod
    def from_gaps(cls, gaps, trailing: int) -> "InterleavingTrace":
        return cls("Y" + "".join("S" * int(g) + "Y" for g in gaps) + "S" * int(trailing))

    def format_counts(self) -> list[str]:
        exact, last = self.counts()
        return [str(c) for c in exact] + [f"{last}+"]


def merge_trace(yule_times, renewal_points, until: float) -> InterleavingTrace:
    """Symbols of all events at times <= until; exact ties are rejected."""
    y = np.asarray(yule_times, dtype=float)
    s = np.asarray(renewal_points, dtype=float)
    y = y[y <= until]
    s = s[s <= until]
    if np.intersect1d(y, s).size:
        raise ValueError("a Yule birth and a renewal point coincide")
    times = np.concatenate([y, s])
    kinds = np.concatenate([np.zeros(y.size, dtype=np.int8), np.ones(s.size, dtype=np.int8)])
    order = np.argsort(times, kind="stable")
    return InterleavingTrace("".join("YS"[v] for v in kinds[order]))


@dataclass(frozen=True)
class LimitSequences:
    Q: list[int]
    N: list[int]
    N_censored_tail: int
    G: list[int]
    trace: InterleavingTrace

    def to_dict(self) -> dict:
        return {
            "Q": self.Q,
            "N": self.N,
            "N_last_lower_bound": self.N_censored_tail,
            "N_censored": True,
            "G": self.G,
            "trace": self.trace.symbols,
        }


def build_limit_sequences(yule: YulePath, renewal: RenewalPath, k_bars: int, j_stars: int) -> LimitSequences:
    """Q_0..Q_k, N_0..N_k (plus censored tail), G_1..G_j from fixed paths.

    Raises :class:`InsufficientHorizon` if the paths stop too early; the
    caller extends them and retries (see :func:`limit_sequences`).
    """
    y, s = yule.birth_times, renewal.points
    if s.size <= k_bars or yule.k < j_stars:
        raise InsufficientHorizon("not enough points for the requested indices")
    s_k = s[k_bars]
    if y[-1] <= s_k:
        raise InsufficientHorizon("Yule path ends before the last requested renewal point")
    if renewal.horizon <= y[j_stars] or s[-1] <= y[j_stars]:
        raise InsufficientHorizon("renewal path ends before the last requested birth")
    if np.intersect1d(y, s).size:
        raise ValueError("a Yule birth and a renewal point coincide")
    q = np.searchsorted(y, s[: k_bars + 1], side="right")
    cum_g = np.searchsorted(s, y[1 : j_stars + 1], side="right")
    g = np.diff(cum_g, prepend=0)
    until = max(s_k, y[j_stars])
    trace = merge_trace(y, s, until)
    n = np.diff(q, prepend=0)
    # stars seen after the last requested bar: a lower bound for N_{k+1}
    stop = min(until, s[k_bars + 1]) if s.size > k_bars + 1 else until
    seen_after = int(np.count_nonzero((y > s_k) & (y <= stop)))
    return LimitSequences(
        Q=[int(v) for v in q],
        N=[int(v) for v in n],
        N_censored_tail=seen_after,
        G=[int(v) for v in g],
        trace=trace,
    )


def limit_sequences(
    model: HazardModel, rng: np.random.Generator, k_bars: int, j_stars: int
) -> LimitSequences:
    """Sample both processes and extend them until all requested indices are resolved."""
    yb = YuleBuilder(rng)
    rb = RenewalBuilder(model, rng, "stationary")
    while True:
        yb.extend_to_index(j_stars + 1)
        rb.extend_to_index(k_bars + 1)
        try:
            return build_limit_sequences(yb.path(), rb.path(), k_bars, j_stars)
        except InsufficientHorizon:
            yb.extend_past(rb.points[min(k_bars, rb.points.size - 1)])
            rb.extend_past(yb.times[min(j_stars, yb.times.size - 1)])


def yule_at_renewal(
    model: HazardModel,
    k: int,
    rng: np.random.Generator,
    size: int,
    births: int = 256,
    chunk: int = 20_000,
) -> np.ndarray:
    """Q_0..Q_k = N_Y(S*_0..S*_k) for ``size`` independent pairs of processes.

    The first ``births`` Yule birth times are generated explicitly and
    counted against the renewal points; past the last explicit birth the
    Yule process is continued through its Markov property, N_Y(t + u) =
    N_Y(t) + NB(N_Y(t), e^{-u}).  Output is float (exact below 2**53).
    """
    if not math.isfinite(mu_log(model)):
        raise ValueError("stationary renewal process needs a finite mu_log")
    out = np.empty((size, k + 1))
    for lo in range(0, size, chunk):
        m = min(chunk, size - lo)
        y = sample_yule_times(births, rng, m)
        s = sample_renewal_points(model, k, rng, m)
        q = np.empty((m, k + 1))
        for c in range(k + 1):
            q[:, c] = (y <= s[:, c : c + 1]).sum(axis=1)
        beyond = s > y[:, -1:]
        rows = np.flatnonzero(beyond.any(axis=1))
        for r in rows:
            t_prev, state = y[r, -1], float(births + 1)
            for c in np.flatnonzero(beyond[r]):
                dt = s[r, c] - t_prev
                state = state + _nb_continue(state, dt, rng)
                q[r, c] = state
                t_prev = s[r, c]
        out[lo : lo + m] = q
    return out


def _nb_continue(state: float, dt: float, rng: np.random.Generator) -> float:
    """NB(state, e^{-dt}) births over time dt, with a float fallback for huge means."""
    scale = math.expm1(dt)
    lam = rng.standard_gamma(state) * scale if state < 2.0**53 else state * scale
    if lam < 1e15:
        return float(rng.poisson(lam))
    return lam
