"""Seeded simulation of full and partially observed rating histograms.

Raters are exchangeable, so a sample is drawn as a multinomial histogram and
then thinned category by category with binomial draws (O(m) work per sample
instead of O(n)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import FullHistogram, InformationStructure, ObservedHistogram, ParticipationProfile

_FULL, _THIN = 0, 1


@dataclass(frozen=True)
class RngSpec:
    """A (seed, stream) pair; equal pairs always reproduce the same draws."""

    seed: int
    stream: int = 0

    def __post_init__(self):
        if self.stream < 0:
            raise ValueError("stream index must be nonnegative")

    def generator(self, substream: int = 0) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.seed & (2**64 - 1),
                                     spawn_key=(self.stream, substream))
        return np.random.default_rng(seq)


def _rng(rng) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RngSpec) else rng


def sample_full(p, n: int, rng) -> FullHistogram:
    if n < 0:
        raise ValueError("n must be >= 0")
    probs = getattr(p, "probs", p)
    return FullHistogram(_rng(rng).multinomial(n, probs))


def thin(full: FullHistogram, g, rng) -> ObservedHistogram:
    """Keep each rating r independently with probability g_r."""
    g = g.g if isinstance(g, ParticipationProfile) else np.asarray(g, dtype=float)
    if g.size != full.m:
        raise ValueError(f"profile has {g.size} ratings, histogram has {full.m}")
    observed = _rng(rng).binomial(full.counts, g)
    return ObservedHistogram(observed, full.n - int(observed.sum()))


def simulate(theta: InformationStructure, n: int, rng: RngSpec):
    """Draw the full histogram and its observed thinning from independent sub-streams."""
    full = sample_full(theta.p, n, rng.generator(_FULL))
    observed = thin(full, theta.g, rng.generator(_THIN))
    return full, observed


def simulate_batch(theta: InformationStructure, n: int, size: int, rng: RngSpec):
    """Vectorised ``simulate``: returns (full, observed, n_u) arrays of ``size`` rows."""
    full = rng.generator(_FULL).multinomial(n, theta.p.probs, size=size)
    observed = rng.generator(_THIN).binomial(full, theta.g.g)
    n_u = n - observed.sum(axis=1)
    return full, observed, n_u
