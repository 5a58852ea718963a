"""Fast end-to-end checks used by ``robust-rating selftest``."""

from __future__ import annotations

import numpy as np

from .aggregators import AggregatorSpec, paa, simple_average
from .dataio import remap_rating
from .model import InformationStructure, ObservedHistogram
from .regret import (
    ASYMPTOTIC,
    Family,
    adversary_search,
    asymptotic_loss,
    asymptotic_paa_regret,
    exact_regret,
    lower_bound,
    prop_worst_structures,
    two_point_pair,
)
from .sampling import RngSpec, simulate


def _closed_form():
    worst = 0.0
    for m in (2, 3, 5):
        for q in (0.1, 0.3, 0.5, 0.7, 0.9):
            agg = AggregatorSpec.make("paa", q)
            expected = asymptotic_paa_regret(m, q)
            for theta in prop_worst_structures(m, q):
                worst = max(worst, abs(asymptotic_loss(agg, theta) - expected))
    return worst <= 1e-9, f"max deviation {worst:.2e}"


def _asymptotic_search():
    q = 0.5
    rec = adversary_search(AggregatorSpec.make("paa", q), ASYMPTOTIC, 3, q, families=Family.TWO_POINT)
    a = max(rec.p[0], rec.p[-1])
    ok = abs(rec.regret - 1 / 9) <= 1e-6 and abs(a - 2 / 3) <= 1e-3
    return ok, f"regret {rec.regret:.9f} at a {a:.4f}"


def _best_response():
    worst = 0.0
    for q in (0.5, 0.3):
        value, a_star = lower_bound(10, 3, q)
        agg = AggregatorSpec.make("bea", q, n=10, m=3)
        for theta in two_point_pair(3, q, a_star):
            worst = max(worst, abs(exact_regret(agg, theta, 10) - value))
    return worst <= 1e-6, f"max deviation {worst:.2e}"


def _sampling():
    theta = InformationStructure.from_arrays([0.5, 0.5], [1.0, 0.5])
    _, observed = simulate(theta, 100_000, RngSpec(2024))
    avg = simple_average(observed)
    return abs(avg - 4 / 3) <= 0.01, f"observed average {avg:.4f}"


def _symmetry_and_degeneration():
    rng = np.random.default_rng(11)
    worst_sym, worst_deg = 0.0, 0.0
    for _ in range(100):
        m = int(rng.integers(2, 7))
        n = int(rng.integers(1, 30))
        q = float(rng.uniform(0.05, 1.0))
        counts = rng.multinomial(n, rng.dirichlet(np.ones(m + 1)))
        h = ObservedHistogram(counts[:m], counts[m])
        for name in ("avg", "paa", "bea"):
            agg = AggregatorSpec.make(name, q, n=n, m=m, a_star=float(rng.uniform()))
            worst_sym = max(worst_sym, abs(agg(h) + agg(h.reversed()) - (m + 1)))
        if h.n_observed:
            phat = h.counts / h.n_observed
            worst_deg = max(worst_deg, abs(paa(phat, 1.0) - simple_average(h)))
    ok = worst_sym <= 1e-9 and worst_deg <= 1e-12
    return ok, f"reversal {worst_sym:.1e}, q=1 gap {worst_deg:.1e}"


def _remap():
    got = [remap_rating(s) for s in range(1, 11)]
    return got == [1, 1, 1, 1, 2, 3, 4, 5, 6, 7], f"{got}"


CHECKS = (
    ("paa-closed-form", _closed_form),
    ("paa-asymptotic-worst-case", _asymptotic_search),
    ("bea-best-response", _best_response),
    ("sampling-bias", _sampling),
    ("symmetry-and-q1", _symmetry_and_degeneration),
    ("remap", _remap),
)


def run_selftest():
    """List of (name, passed, detail) for every check."""
    results = []
    for name, check in CHECKS:
        try:
            ok, detail = check()
        except Exception as exc:  # report, never crash the harness
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results
