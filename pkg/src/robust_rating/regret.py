"""Regret evaluation: exact enumeration, Monte Carlo, lower bounds and adversary search.

Two regret forms are supported.

``gap`` (default)
    E[(f - xbar)^2]: squared distance to the ideal aggregator that sees all n
    ratings and reports their mean xbar.  The lower bound J(a*) and the BEA
    best-response identity hold exactly for this form.
``excess``
    E[(f - mu)^2] - E[(xbar - mu)^2] = loss - Var(p)/n: excess squared error
    over the ideal aggregator.

Both coincide in the asymptotic limit, where the regret is (f(phat) - mu)^2.
Exact evaluation enumerates every observed histogram (n_1..n_m, n_u) of the
(m + 1)-bucket multinomial; buckets with zero probability are skipped, so
two-point structures cost O(n^2) outcomes regardless of m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from itertools import product

import numpy as np

from .aggregators import AggregatorSpec, solve_a_star
from .model import (
    CategoricalDistribution,
    InformationStructure,
    ParticipationProfile,
    dist_variance,
)
from .sampling import RngSpec, simulate_batch

ASYMPTOTIC = "asymptotic"
GAP = "gap"
EXCESS = "excess"
REGRET_KINDS = (GAP, EXCESS)
DEFAULT_CAP = 10**7
A_STEP = 1e-3
GENERAL_STEP = 0.1
MC_SHARD = 4096
# keeps (outcomes x structures) work arrays around 64 MB
_CHUNK_CELLS = 8_000_000


class EnumerationTooLarge(RuntimeError):
    """Exact enumeration would exceed the configured outcome cap."""


class NoReports(ValueError):
    """Structure in which no rating is ever reported."""


class Family(str, Enum):
    TWO_POINT = "two-point"
    UNIFORM_G = "uniform-g"
    GENERAL = "general"


DEFAULT_FAMILIES = (Family.TWO_POINT, Family.UNIFORM_G)


def is_asymptotic(n) -> bool:
    return isinstance(n, str) and n == ASYMPTOTIC


@dataclass(frozen=True)
class RegretQuery:
    aggregator: AggregatorSpec
    theta: InformationStructure
    n: int | str

    def __post_init__(self):
        if is_asymptotic(self.n):
            if self.aggregator.needs_n:
                raise ValueError("BEA cannot be evaluated with unknown (asymptotic) n")
        elif int(self.n) < 1:
            raise ValueError("n must be >= 1 or ASYMPTOTIC")


# -- exact enumeration ------------------------------------------------------------


def outcome_count(n: int, buckets: int) -> int:
    return math.comb(n + buckets - 1, buckets - 1)


@lru_cache(maxsize=64)
def compositions(n: int, k: int) -> np.ndarray:
    """All k-tuples of nonnegative integers summing to n, in lexicographic order."""
    if k == 1:
        return np.array([[n]], dtype=np.int64)
    blocks = []
    for first in range(n + 1):
        rest = compositions(n - first, k - 1)
        blocks.append(np.column_stack([np.full(len(rest), first, dtype=np.int64), rest]))
    out = np.concatenate(blocks)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=16)
def _log_factorials(n: int) -> np.ndarray:
    return np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, n + 1)))))


def _support_outcomes(n: int, m: int, support: tuple[bool, ...], cap: int):
    """Outcomes over the supported buckets, scattered back to m + 1 columns."""
    idx = np.flatnonzero(support)
    size = outcome_count(n, idx.size)
    if size > cap:
        raise EnumerationTooLarge(
            f"{size} outcomes for n={n} over {idx.size} buckets exceeds cap {cap}; "
            "use Monte Carlo (trials) instead")
    comp = compositions(n, idx.size)
    full = np.zeros((comp.shape[0], m + 1), dtype=np.int64)
    full[:, idx] = comp
    log_fact = _log_factorials(n)
    log_coef = log_fact[n] - log_fact[comp].sum(axis=1)
    return full, comp, log_coef, idx


def _bucket_matrix(P: np.ndarray, G: np.ndarray) -> np.ndarray:
    return np.column_stack([P * G, (P * (1 - G)).sum(axis=1)])


def _regret_many(agg: AggregatorSpec, P: np.ndarray, G: np.ndarray, n: int,
                 kind: str = GAP, cap: int = DEFAULT_CAP, want_loss: bool = False):
    """Exact regret (or loss) for each structure (P[i], G[i]) at sample size n."""
    if kind not in REGRET_KINDS:
        raise ValueError(f"regret kind must be one of {REGRET_KINDS}")
    P = np.atleast_2d(np.asarray(P, dtype=float))
    G = np.atleast_2d(np.asarray(G, dtype=float))
    m = P.shape[1]
    r = np.arange(1, m + 1, dtype=float)
    B = _bucket_matrix(P, G)
    mu = P @ r
    out = np.empty(P.shape[0])

    masks = B > 0
    patterns, inverse = np.unique(masks, axis=0, return_inverse=True)
    for pat_id, pattern in enumerate(patterns):
        rows = np.flatnonzero(inverse.ravel() == pat_id)
        full, comp, log_coef, idx = _support_outcomes(n, m, tuple(pattern), cap)
        counts, n_u = full[:, :m], full[:, m]
        f = agg.evaluate(counts, n_u)
        observed_sum = counts @ r
        chunk = max(1, _CHUNK_CELLS // len(comp))
        for start in range(0, rows.size, chunk):
            sel = rows[start:start + chunk]
            with np.errstate(divide="ignore"):
                log_b = np.log(B[np.ix_(sel, idx)])
            w = np.exp(log_coef[:, None] + comp @ log_b.T)
            if want_loss or kind == EXCESS:
                value = ((f[:, None] - mu[None, sel]) ** 2 * w).sum(axis=0)
                if not want_loss:
                    value -= _variances(P[sel], r) / n
            else:
                value = _gap(f, observed_sum, n_u, w, P[sel], G[sel], r, n)
            out[sel] = value
    return out


def _variances(P: np.ndarray, r: np.ndarray) -> np.ndarray:
    mu = P @ r
    return ((r[None, :] - mu[:, None]) ** 2 * P).sum(axis=1)


def _gap(f, observed_sum, n_u, w, P, G, r, n):
    # given the observed histogram, the n_u hidden ratings are iid draws from
    # p_r (1 - g_r) / P(unobserved), so E[(f - xbar)^2 | obs] splits into the
    # squared bias against E[xbar | obs] plus n_u Var(hidden) / n^2.
    hidden = P * (1 - G)
    p_hidden = hidden.sum(axis=1)
    safe = np.where(p_hidden > 0, p_hidden, 1.0)
    mu_h = hidden @ r / safe
    var_h = np.where(p_hidden > 0, hidden @ r**2 / safe - mu_h**2, 0.0)
    var_h = np.maximum(var_h, 0.0)
    centre = (observed_sum[:, None] + n_u[:, None] * mu_h[None, :]) / n
    bias = ((f[:, None] - centre) ** 2 * w).sum(axis=0)
    return bias + n * p_hidden * var_h / n**2


def _arrays(theta: InformationStructure):
    return theta.p.probs[None, :], theta.g.g[None, :]


def ideal_term(p, n: int) -> float:
    """Expected squared error Var(p)/n of the full-information sample mean."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return dist_variance(p) / n


def exact_loss(agg: AggregatorSpec, theta: InformationStructure, n: int,
               cap: int = DEFAULT_CAP) -> float:
    """E[(f(observed) - mu)^2] by full enumeration of observed histograms."""
    RegretQuery(agg, theta, n)
    return float(_regret_many(agg, *_arrays(theta), n, cap=cap, want_loss=True)[0])


def exact_regret(agg: AggregatorSpec, theta: InformationStructure, n: int,
                 kind: str = GAP, cap: int = DEFAULT_CAP) -> float:
    RegretQuery(agg, theta, n)
    return float(_regret_many(agg, *_arrays(theta), n, kind=kind, cap=cap)[0])


def mc_regret(agg: AggregatorSpec, theta: InformationStructure, n: int, trials: int,
              seed: int, kind: str = GAP, shard: int = MC_SHARD) -> tuple[float, float]:
    """Monte Carlo regret estimate and its standard error.

    Trials are drawn in shards of ``shard`` samples; shard i uses stream i of
    ``seed``, so results depend only on (seed, trials, shard).
    """
    RegretQuery(agg, theta, n)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if kind not in REGRET_KINDS:
        raise ValueError(f"regret kind must be one of {REGRET_KINDS}")
    r = np.arange(1, theta.m + 1, dtype=float)
    mu = theta.p.probs @ r
    values = []
    for stream, start in enumerate(range(0, trials, shard)):
        size = min(shard, trials - start)
        full, observed, n_u = simulate_batch(theta, n, size, RngSpec(seed, stream))
        f = agg.evaluate(observed, n_u)
        xbar = full @ r / n
        if kind == GAP:
            values.append((f - xbar) ** 2)
        else:
            values.append((f - mu) ** 2 - (xbar - mu) ** 2)
    values = np.concatenate(values)
    se = values.std(ddof=1) / math.sqrt(trials) if trials > 1 else float("inf")
    return float(values.mean()), float(se)


# -- closed forms ---------------------------------------------------------------------


def lower_bound(n: int, m: int, q: float) -> tuple[float, float]:
    """Worst-case regret lower bound max_a J(a); returns (value, a*)."""
    a_star, value = solve_a_star(n, m, q)
    return value, a_star


def asymptotic_paa_regret(m: int, q: float) -> float:
    if not 0 < q <= 1:
        raise ValueError(f"q must lie in (0, 1], got {q}")
    return ((m - 1) * (1 - q) / (2 * (1 + q))) ** 2


def two_point_pair(m: int, q: float, a: float):
    """Mirror-image structures supported on ratings {1, m}.

    The first puts mass a on rating 1 and lets it be hidden (g_1 = q); the
    second puts mass a on rating m and lets that be hidden.
    """
    p1 = np.zeros(m)
    p1[0], p1[-1] = a, 1 - a
    g1 = np.ones(m)
    g1[0] = q
    theta1 = InformationStructure(CategoricalDistribution(p1), ParticipationProfile(g1, q))
    theta2 = InformationStructure(CategoricalDistribution(p1[::-1]), ParticipationProfile(g1[::-1], q))
    return theta1, theta2


def prop_worst_structures(m: int, q: float):
    """Worst pair for PAA as n grows: the two-point pair at a = 1/(1 + q)."""
    if not 0 < q <= 1:
        raise ValueError(f"q must lie in (0, 1], got {q}")
    return two_point_pair(m, q, 1 / (1 + q))


def _asymptotic_many(agg: AggregatorSpec, P: np.ndarray, G: np.ndarray) -> np.ndarray:
    P = np.atleast_2d(P)
    G = np.atleast_2d(G)
    seen = P * G
    total = seen.sum(axis=1)
    if np.any(total <= 0):
        raise NoReports("a structure reports no ratings at all")
    phat = seen / total[:, None]
    mu = P @ np.arange(1, P.shape[1] + 1)
    return (agg.evaluate_empirical(phat) - mu) ** 2


def asymptotic_loss(agg: AggregatorSpec, theta: InformationStructure) -> float:
    """Limit regret (f(phat) - mu)^2 where phat is proportional to p * g."""
    return float(_asymptotic_many(agg, *_arrays(theta))[0])


# -- adversary search ---------------------------------------------------------------


@dataclass
class WorstCaseRecord:
    aggregator: AggregatorSpec
    q: float
    n: int | str
    family: str
    p: np.ndarray
    g: np.ndarray
    regret: float
    grid: dict = field(default_factory=dict)

    @property
    def worst_structure(self) -> InformationStructure:
        return InformationStructure(CategoricalDistribution(self.p), ParticipationProfile(self.g, self.q))

    def to_dict(self) -> dict:
        return {
            "aggregator": self.aggregator.to_dict(),
            "q": self.q,
            "n": self.n,
            "family": self.family,
            "p": [float(x) for x in self.p],
            "g": [float(x) for x in self.g],
            "regret": self.regret,
            "grid": self.grid,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WorstCaseRecord":
        a = d["aggregator"]
        agg = AggregatorSpec.make(a["name"], a["q"], n=a.get("n"), a_star=a.get("a_star"))
        return cls(agg, d["q"], d["n"], d["family"], np.asarray(d["p"], dtype=float),
                   np.asarray(d["g"], dtype=float), d["regret"], d.get("grid", {}))


def _grid(step: float, extra=()) -> np.ndarray:
    k = int(round(1 / step))
    return np.union1d(np.linspace(0.0, 1.0, k + 1), np.asarray(extra, dtype=float))


def family_structures(family: Family, m: int, q: float, step: float = A_STEP,
                      general_step: float = GENERAL_STEP, extra_a=()):
    """(P, G) arrays enumerating one adversary family at the given resolution.

    ``extra_a`` adds off-grid mixing weights to the two-point family.
    """
    family = Family(family)
    if family == Family.TWO_POINT:
        a = _grid(step, extra_a)
        P1 = np.zeros((a.size, m))
        P1[:, 0], P1[:, -1] = a, 1 - a
        G1 = np.ones((a.size, m))
        G1[:, 0] = q
        return np.concatenate([P1, P1[:, ::-1]]), np.concatenate([G1, G1[:, ::-1]])
    if family == Family.UNIFORM_G:
        b = _grid(step)
        P = np.zeros((b.size, m))
        P[:, 0], P[:, -1] = b, 1 - b
        return P, np.full((b.size, m), q)
    if m > 3:
        raise ValueError("the general grid family supports m <= 3 only")
    k = int(round(1 / general_step))
    P = compositions(k, m) / k
    levels = np.arange(q, 1.0, general_step)
    levels = np.unique(np.append(levels[levels < 1 - 1e-12], 1.0))
    G = np.array(list(product(levels, repeat=m)))
    PP = np.repeat(P, len(G), axis=0)
    GG = np.tile(G, (len(P), 1))
    return PP, GG


def _mc_many(agg, P, G, n, q, trials, seed, kind):
    out = np.empty(P.shape[0])
    for i in range(P.shape[0]):
        theta = InformationStructure(CategoricalDistribution(P[i]), ParticipationProfile(G[i], q))
        out[i] = mc_regret(agg, theta, n, trials, seed, kind)[0]
    return out


def adversary_search(agg: AggregatorSpec, n, m: int, q: float, families=DEFAULT_FAMILIES,
                     step: float = A_STEP, general_step: float = GENERAL_STEP,
                     kind: str = GAP, cap: int = DEFAULT_CAP, trials: int | None = None,
                     seed: int = 0) -> WorstCaseRecord:
    """Grid search for the structure maximising the regret of ``agg``.

    ``families`` is one family or a sequence of them; the record keeps the
    overall argmax (first in grid order on ties).  With ``trials`` the regret
    of every grid point is estimated by Monte Carlo instead of enumeration.
    """
    if isinstance(families, (str, Family)):
        families = (families,)
    families = [Family(f) for f in families]
    asymptotic = is_asymptotic(n)
    if asymptotic and agg.needs_n:
        raise ValueError("BEA cannot be evaluated with unknown (asymptotic) n")

    # the PAA worst case a = 1/(1+q) and BEA's own a* sit in the two-point family
    extra_a = [1 / (1 + q)]
    if agg.bea is not None:
        extra_a.append(agg.bea.a_star)

    best = None
    for fam in families:
        P, G = family_structures(fam, m, q, step, general_step, extra_a)
        if asymptotic:
            values = _asymptotic_many(agg, P, G)
        elif trials:
            values = _mc_many(agg, P, G, n, q, trials, seed, kind)
        else:
            values = _regret_many(agg, P, G, n, kind=kind, cap=cap)
        i = int(np.argmax(values))
        if best is None or values[i] > best[0]:
            best = (float(values[i]), fam, P[i], G[i])

    regret, fam, p, g = best
    grid = {"step": step, "families": [f.value for f in families], "kind": kind}
    if Family.GENERAL in families:
        grid["general_step"] = general_step
    if trials:
        grid.update(trials=trials, seed=seed)
    return WorstCaseRecord(agg, q, n, fam.value, p, g, regret, grid)
