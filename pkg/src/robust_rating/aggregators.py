"""Rating aggregators: simple average, spectral, BEA (known n) and PAA (unknown n).

The ``*_batch`` kernels take a stack of histograms (shape ``(K, m)``) and return
``K`` scores; the regret engine evaluates every multinomial outcome at once
through them.  The scalar functions wrap the kernels for single histograms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import expit, xlogy

from .model import EmpiricalDistribution, ObservedHistogram

AGGREGATOR_NAMES = ("avg", "spe", "bea", "paa")
# a k1/k2 condition within this of zero counts as satisfied
THRESHOLD_TOL = 1e-12
A_GRID_STEP = 1e-3
GOLDEN_ITERATIONS = 60
INV_PHI = (math.sqrt(5) - 1) / 2


class InconsistentCounts(ValueError):
    """Histogram total does not match the sample size BEA was built for."""


# -- simple average and spectral ----------------------------------------------


def _ratings(m: int) -> np.ndarray:
    return np.arange(1, m + 1, dtype=float)


def simple_average_batch(counts: np.ndarray) -> np.ndarray:
    counts = np.atleast_2d(counts)
    m = counts.shape[-1]
    total = counts.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = counts @ _ratings(m) / total
    return np.where(total > 0, mean, (m + 1) / 2)


def spectral_batch(counts: np.ndarray) -> np.ndarray:
    counts = np.atleast_2d(counts)
    m = counts.shape[-1]
    total = counts.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        rss = np.sqrt(counts @ _ratings(m) ** 2 / total)
    return np.where(total > 0, rss, (m + 1) / 2)


def _counts_of(h) -> np.ndarray:
    return h.counts if isinstance(h, ObservedHistogram) else np.asarray(h)


def simple_average(h, m: int | None = None) -> float:
    counts = _counts_of(h)
    _check_m(counts, m)
    return float(simple_average_batch(counts)[0])


def spectral(h, m: int | None = None) -> float:
    """Root mean square of the observed ratings (single-item spectral method)."""
    counts = _counts_of(h)
    _check_m(counts, m)
    return float(spectral_batch(counts)[0])


def _check_m(counts: np.ndarray, m: int | None) -> None:
    if m is not None and counts.shape[-1] != m:
        raise ValueError(f"histogram has {counts.shape[-1]} ratings, scale has {m}")


# -- BEA -----------------------------------------------------------------------


def bea_alpha_batch(d, a_star: float, q: float) -> np.ndarray:
    """Posterior weight on rating 1 for unobserved raters, given d = n_1 - n_m.

    alpha = (a q)^d / ((a q)^d + (1 - a)^d), written as a logistic in d so that
    large |d| neither overflows nor underflows, and so that a in {0, 1} gives
    the limiting values 0 or 1 instead of 0/0.
    """
    d = np.asarray(d, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_odds = np.log(1 - a_star) - np.log(a_star * q)
        alpha = expit(-d * log_odds)
    return np.where(d == 0, 0.5, alpha)


def bea_alpha(n1: int, nm: int, a_star: float, q: float) -> float:
    return float(bea_alpha_batch(n1 - nm, a_star, q))


@lru_cache(maxsize=None)
def _triangle(n: int):
    s, t = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    keep = s + t <= n
    s, t = s[keep], t[keep]
    log_fact = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, n + 1)))))
    log_coef = log_fact[n] - log_fact[s] - log_fact[t] - log_fact[n - s - t]
    return s, t, n - s - t, log_coef


def bea_objective_batch(a, n: int, m: int, q: float) -> np.ndarray:
    """Lower-bound objective J(a) for an array of mixing weights a.

    J(a) sums, over (s, t) = (observed ones, observed m's) with s + t <= n, the
    probability of (s, t) under the two-point structure theta_1(a) times the
    squared posterior error ((n - s - t)(m - 1)(1 - alpha)/n)^2.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))[:, None]
    s, t, u, log_coef = _triangle(n)
    with np.errstate(divide="ignore"):
        # (t, s, u) is multinomial with cell probabilities (1-a, a q, a (1-q))
        log_w = log_coef + xlogy(t, 1 - a) + xlogy(s, a * q) + xlogy(u, a * (1 - q))
    one_minus_alpha = 1 - _alpha_grid(s - t, a, q)
    err = u * (m - 1) * one_minus_alpha / n
    return (np.exp(log_w) * err**2).sum(axis=1)


def _alpha_grid(d: np.ndarray, a: np.ndarray, q: float) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        log_odds = np.log(1 - a) - np.log(a * q)
        alpha = expit(-d * log_odds)
    return np.where(d == 0, 0.5, alpha)


def bea_objective(a: float, n: int, m: int, q: float) -> float:
    if not 0 <= a <= 1:
        raise ValueError(f"a must lie in [0, 1], got {a}")
    return float(bea_objective_batch(a, n, m, q)[0])


def golden_section_max(f, lo: float, hi: float, iterations: int = GOLDEN_ITERATIONS):
    """Maximise a scalar function on [lo, hi]; returns (x, f(x))."""
    x1 = hi - INV_PHI * (hi - lo)
    x2 = lo + INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(iterations):
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + INV_PHI * (hi - lo)
            f2 = f(x2)
    return (x1, f1) if f1 >= f2 else (x2, f2)


@lru_cache(maxsize=None)
def solve_a_star(n: int, m: int, q: float, step: float = A_GRID_STEP) -> tuple[float, float]:
    """Maximiser a* of the lower-bound objective and its value J(a*).

    A uniform grid locates the best cell (J is not known to be concave), then a
    golden-section search refines inside the two neighbouring cells.  Exact
    ties go to the largest a, so a flat objective (q = 1) yields a* = 1.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < q <= 1:
        raise ValueError(f"q must lie in (0, 1], got {q}")
    k = int(round(1 / step))
    grid = np.linspace(0.0, 1.0, k + 1)
    values = bea_objective_batch(grid, n, m, q)
    i = k - int(np.argmax(values[::-1]))
    best_a, best_v = grid[i], values[i]
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, k)]
    a, v = golden_section_max(lambda x: bea_objective_batch(x, n, m, q)[0], lo, hi)
    if v > best_v:
        best_a, best_v = a, v
    return float(best_a), float(best_v)


@dataclass(frozen=True)
class BeaParams:
    n: int
    q: float
    a_star: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("BEA needs n >= 1")
        if not 0 < self.q <= 1:
            raise ValueError(f"q must lie in (0, 1], got {self.q}")
        if not 0 <= self.a_star <= 1:
            raise ValueError(f"a* must lie in [0, 1], got {self.a_star}")

    @classmethod
    def solve(cls, n: int, m: int, q: float) -> "BeaParams":
        a_star, _ = solve_a_star(n, m, q)
        return cls(n=n, q=q, a_star=a_star)


def bea_batch(counts: np.ndarray, n_u: np.ndarray, params: BeaParams) -> np.ndarray:
    counts = np.atleast_2d(counts)
    n_u = np.atleast_1d(n_u)
    m = counts.shape[-1]
    if np.any(counts.sum(axis=-1) + n_u != params.n):
        raise InconsistentCounts(f"observed + unobserved counts must total n={params.n}")
    alpha = bea_alpha_batch(counts[:, 0] - counts[:, -1], params.a_star, params.q)
    mu_unobserved = alpha + (1 - alpha) * m
    return (counts @ _ratings(m) + n_u * mu_unobserved) / params.n


def bea(h: ObservedHistogram, params: BeaParams, m: int | None = None) -> float:
    _check_m(h.counts, m)
    return float(bea_batch(h.counts, h.n_u, params)[0])


# -- PAA -----------------------------------------------------------------------


@dataclass(frozen=True)
class PaaBounds:
    k1: int
    k2: int
    l: float
    u: float


def _threshold_weights(m: int, q: float, divide_below: bool) -> np.ndarray:
    # W[i, k] = (i - k), divided by q on one side of k
    idx = np.arange(1, m + 1)
    diff = (idx[:, None] - idx[None, :]).astype(float)
    below = idx[:, None] < idx[None, :]
    scaled = below if divide_below else ~below
    return np.where(scaled, diff / q, diff)


def _max_satisfied(cond: np.ndarray) -> np.ndarray:
    """1-based largest k whose condition holds (k = 1 always holds)."""
    ok = cond >= -THRESHOLD_TOL
    m = cond.shape[-1]
    return m - np.argmax(ok[:, ::-1], axis=1)


def paa_thresholds_batch(phat: np.ndarray, q: float) -> tuple[np.ndarray, np.ndarray]:
    phat = np.atleast_2d(phat)
    m = phat.shape[-1]
    k1 = _max_satisfied(phat @ _threshold_weights(m, q, divide_below=True))
    k2 = _max_satisfied(phat @ _threshold_weights(m, q, divide_below=False))
    return k1, k2


def paa_bounds_batch(phat: np.ndarray, q: float):
    """Thresholds and the feasible range [l, u] of true means for each row of phat.

    Rows may be unnormalised counts: l and u are ratios, so they come out the
    same, and at q = 1 they then match the simple average bit for bit.
    """
    phat = np.atleast_2d(np.asarray(phat, dtype=float))
    m = phat.shape[-1]
    r = _ratings(m)
    k1, k2 = paa_thresholds_batch(phat / phat.sum(axis=1, keepdims=True), q)
    low_w = np.where(r[None, :] <= k1[:, None], 1.0, q) * phat
    up_w = np.where(r[None, :] <= k2[:, None], q, 1.0) * phat
    lower = low_w @ r / low_w.sum(axis=1)
    upper = up_w @ r / up_w.sum(axis=1)
    return k1, k2, lower, upper


def paa_batch(phat: np.ndarray, q: float) -> np.ndarray:
    _, _, lower, upper = paa_bounds_batch(phat, q)
    return (lower + upper) / 2


def paa_counts_batch(counts: np.ndarray, q: float) -> np.ndarray:
    """PAA on raw observed counts; empty histograms get the scale midpoint."""
    counts = np.atleast_2d(counts).astype(float)
    m = counts.shape[-1]
    total = counts.sum(axis=1)
    out = np.full(counts.shape[0], (m + 1) / 2)
    seen = total > 0
    if seen.any():
        out[seen] = paa_batch(counts[seen], q)
    return out


def _phat(p) -> np.ndarray:
    return p.probs if isinstance(p, EmpiricalDistribution) else np.asarray(p, dtype=float)


def paa_k1(phat, q: float) -> int:
    return int(paa_thresholds_batch(_phat(phat), q)[0][0])


def paa_k2(phat, q: float) -> int:
    return int(paa_thresholds_batch(_phat(phat), q)[1][0])


def paa_bounds(phat, q: float, m: int | None = None) -> PaaBounds:
    probs = _phat(phat)
    _check_m(probs, m)
    k1, k2, lower, upper = paa_bounds_batch(probs, q)
    return PaaBounds(int(k1[0]), int(k2[0]), float(lower[0]), float(upper[0]))


def paa(phat, q: float, m: int | None = None) -> float:
    b = paa_bounds(phat, q, m)
    return (b.l + b.u) / 2


# -- aggregator handle ----------------------------------------------------------


@dataclass(frozen=True)
class AggregatorSpec:
    """One of avg/spe/bea/paa together with the parameters it needs."""

    name: str
    q: float = 1.0
    bea: BeaParams | None = None

    def __post_init__(self):
        if self.name not in AGGREGATOR_NAMES:
            raise ValueError(f"unknown aggregator {self.name!r}; pick from {AGGREGATOR_NAMES}")
        if self.name == "bea" and self.bea is None:
            raise ValueError("BEA needs BeaParams (it requires a known sample size)")

    @classmethod
    def make(cls, name: str, q: float, n: int | None = None, m: int | None = None,
             a_star: float | None = None) -> "AggregatorSpec":
        if name != "bea":
            return cls(name, q)
        if n is None:
            raise ValueError("BEA requires a finite, known sample size n")
        if a_star is None:
            if m is None:
                raise ValueError("solving a* needs the scale size m")
            return cls(name, q, BeaParams.solve(n, m, q))
        return cls(name, q, BeaParams(n, q, a_star))

    @property
    def needs_n(self) -> bool:
        return self.name == "bea"

    def evaluate(self, counts: np.ndarray, n_u: np.ndarray | None = None) -> np.ndarray:
        """Scores for a stack of observed histograms."""
        counts = np.atleast_2d(counts)
        if self.name == "avg":
            return simple_average_batch(counts)
        if self.name == "spe":
            return spectral_batch(counts)
        if self.name == "paa":
            return paa_counts_batch(counts, self.q)
        if n_u is None:
            n_u = self.bea.n - counts.sum(axis=1)
        return bea_batch(counts, n_u, self.bea)

    def evaluate_empirical(self, phat: np.ndarray) -> np.ndarray:
        """Scores as functions of the normalised histogram (n unknown)."""
        phat = np.atleast_2d(phat)
        r = _ratings(phat.shape[-1])
        if self.name == "avg":
            return phat @ r
        if self.name == "spe":
            return np.sqrt(phat @ r**2)
        if self.name == "paa":
            return paa_batch(phat, self.q)
        raise ValueError("BEA is only defined for a known, finite sample size")

    def __call__(self, h: ObservedHistogram) -> float:
        return float(self.evaluate(h.counts, np.array([h.n_u]))[0])

    def to_dict(self) -> dict:
        out = {"name": self.name, "q": self.q}
        if self.bea is not None:
            out.update(n=self.bea.n, a_star=self.bea.a_star)
        return out
