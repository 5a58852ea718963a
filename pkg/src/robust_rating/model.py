"""Value types for rating distributions, participation profiles and histograms.

Every type is a frozen dataclass holding read-only numpy arrays, so instances
can be shared freely between threads and processes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROB_TOL = 1e-12


class AllUnobserved(ValueError):
    """Raised when an empirical distribution is requested from zero observations."""


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RatingScale:
    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"rating scale needs m >= 2, got {self.m}")

    @property
    def ratings(self) -> np.ndarray:
        return np.arange(1, self.m + 1, dtype=float)

    @property
    def midpoint(self) -> float:
        return (self.m + 1) / 2


@dataclass(frozen=True)
class CategoricalDistribution:
    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 1 or probs.size < 2:
            raise ValueError("distribution needs a 1-d vector with at least 2 entries")
        if np.any(probs < 0) or np.any(probs > 1):
            raise ValueError(f"probabilities outside [0, 1]: {probs}")
        if abs(probs.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
        object.__setattr__(self, "probs", probs)

    @property
    def m(self) -> int:
        return self.probs.size


@dataclass(frozen=True)
class ParticipationProfile:
    g: np.ndarray
    q: float

    def __post_init__(self):
        g = _frozen(self.g)
        if not 0 < self.q <= 1:
            raise ValueError(f"q must lie in (0, 1], got {self.q}")
        if g.ndim != 1 or g.size < 2:
            raise ValueError("participation profile needs a 1-d vector with at least 2 entries")
        # a tiny slack lets profiles built as q * ones(m) or 1 - eps through
        if np.any(g < self.q - PROB_TOL) or np.any(g > 1 + PROB_TOL):
            raise ValueError(f"participation probabilities must lie in [{self.q}, 1]: {g}")
        object.__setattr__(self, "g", g)

    @property
    def m(self) -> int:
        return self.g.size


@dataclass(frozen=True)
class InformationStructure:
    """Nature's choice: true rating distribution p and participation profile g."""

    p: CategoricalDistribution
    g: ParticipationProfile

    def __post_init__(self):
        if self.p.m != self.g.m:
            raise ValueError(f"p has {self.p.m} ratings but g has {self.g.m}")

    @classmethod
    def from_arrays(cls, p, g, q: float | None = None) -> "InformationStructure":
        g = np.asarray(g, dtype=float)
        if q is None:
            q = float(g.min())
        return cls(CategoricalDistribution(p), ParticipationProfile(g, q))

    @property
    def m(self) -> int:
        return self.p.m

    @property
    def q(self) -> float:
        return self.g.q


@dataclass(frozen=True)
class FullHistogram:
    counts: np.ndarray

    def __post_init__(self):
        counts = _frozen(self.counts, dtype=np.int64)
        if np.any(counts < 0):
            raise ValueError("histogram counts must be nonnegative")
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def m(self) -> int:
        return self.counts.size


@dataclass(frozen=True)
class ObservedHistogram:
    """Counts n_1..n_m of observed ratings plus the unobserved count n_u."""

    counts: np.ndarray
    n_u: int = 0

    def __post_init__(self):
        counts = _frozen(self.counts, dtype=np.int64)
        if np.any(counts < 0) or self.n_u < 0:
            raise ValueError("histogram counts must be nonnegative")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "n_u", int(self.n_u))

    @property
    def m(self) -> int:
        return self.counts.size

    @property
    def n_observed(self) -> int:
        return int(self.counts.sum())

    @property
    def n(self) -> int:
        return self.n_observed + self.n_u

    def reversed(self) -> "ObservedHistogram":
        """Histogram under the relabelling r -> m + 1 - r."""
        return ObservedHistogram(self.counts[::-1], self.n_u)


@dataclass(frozen=True)
class EmpiricalDistribution:
    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs)
        if np.any(probs < 0) or np.any(probs > 1) or abs(probs.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"not a probability vector: {probs}")
        object.__setattr__(self, "probs", probs)

    @property
    def m(self) -> int:
        return self.probs.size


def _probs(p) -> np.ndarray:
    if isinstance(p, (CategoricalDistribution, EmpiricalDistribution)):
        return p.probs
    return np.asarray(p, dtype=float)


def dist_mean(p) -> float:
    probs = _probs(p)
    return float(np.arange(1, probs.size + 1) @ probs)


def dist_variance(p) -> float:
    probs = _probs(p)
    r = np.arange(1, probs.size + 1)
    mu = r @ probs
    # centred form avoids cancellation in E[x^2] - mu^2
    return float(((r - mu) ** 2) @ probs)


def observed_marginal(theta: InformationStructure) -> np.ndarray:
    """Per-rater bucket probabilities: observed-as-r for r = 1..m, then unobserved."""
    p, g = theta.p.probs, theta.g.g
    seen = p * g
    return np.append(seen, p @ (1 - g))


def empirical_from_observed(h: ObservedHistogram) -> EmpiricalDistribution:
    total = h.counts.sum()
    if total == 0:
        raise AllUnobserved("no observed ratings to normalise")
    return EmpiricalDistribution(h.counts / total)
