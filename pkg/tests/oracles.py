"""Slow, independent reference implementations used as test oracles.

Nothing here reuses the batched kernels of the package: each oracle follows
the definitions directly with Python loops, exact fractions or brute force.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import product
from math import comb, prod

import numpy as np


def feasible_mean(phat, g):
    """True mean implied by an empirical distribution and a participation profile."""
    w = [p / gi for p, gi in zip(phat, g)]
    return sum((i + 1) * wi for i, wi in enumerate(w)) / sum(w)


def vertex_bounds(phat, q):
    """(l, u) by brute force over every vertex g of the box [q, 1]^m."""
    vals = [feasible_mean(phat, g) for g in product((q, 1), repeat=len(phat))]
    return min(vals), max(vals)


def monotone_candidates(m, q):
    """Extreme monotone profiles: q on a prefix then 1, and 1 on a prefix then q."""
    up = [tuple([q] * k + [1] * (m - k)) for k in range(m + 1)]
    down = [tuple([1] * k + [q] * (m - k)) for k in range(m + 1)]
    return up, down


def monotone_bounds(phat, q):
    up, down = monotone_candidates(len(phat), q)
    return (min(feasible_mean(phat, g) for g in up),
            max(feasible_mean(phat, g) for g in down))


def simple_average(counts):
    total = sum(counts)
    if total == 0:
        return (len(counts) + 1) / 2
    return sum((i + 1) * c for i, c in enumerate(counts)) / total


def bea_alpha(d, a, q):
    if d == 0:
        return 0.5
    x, y = (a * q) ** abs(d), (1 - a) ** abs(d)
    return x / (x + y) if d > 0 else y / (x + y)


def bea(counts, n_u, a, q):
    m = len(counts)
    alpha = bea_alpha(counts[0] - counts[-1], a, q)
    n = sum(counts) + n_u
    observed = sum((i + 1) * c for i, c in enumerate(counts))
    return (observed + n_u * (alpha + (1 - alpha) * m)) / n


def lower_bound_objective(a, n, m, q):
    """J(a) summed term by term over (observed ones, observed m's)."""
    total = 0.0
    for s in range(n + 1):
        for t in range(n + 1 - s):
            u = n - s - t
            w = comb(n, s) * comb(n - s, t) * (a * q) ** s * (1 - a) ** t * (a * (1 - q)) ** u
            if w == 0:
                continue
            alpha = bea_alpha(s - t, a, q)
            total += w * (u * (m - 1) * (1 - alpha) / n) ** 2
    return total


def grid_argmax(n, m, q, points=10_001):
    grid = np.linspace(0.0, 1.0, points)
    values = [lower_bound_objective(a, n, m, q) for a in grid]
    i = int(np.argmax(values))
    return float(grid[i]), float(values[i])


def brute_regret(f, p, g, n, kind="gap"):
    """Regret by enumerating every ordered sequence of n raters.

    Each rater lands in one of 2m joint cells (rating r, reported or hidden).
    ``f(counts, n_u)`` scores an observed histogram.
    """
    m = len(p)
    cells = [(r, seen) for r in range(m) for seen in (True, False)]
    probs = [p[r] * (g[r] if seen else 1 - g[r]) for r, seen in cells]
    mu = sum((r + 1) * pr for r, pr in enumerate(p))
    total = 0.0
    for seq in product(range(len(cells)), repeat=n):
        w = prod(probs[c] for c in seq)
        if w == 0:
            continue
        counts = [0] * m
        xsum = 0
        for c in seq:
            r, seen = cells[c]
            xsum += r + 1
            if seen:
                counts[r] += 1
        n_u = n - sum(counts)
        xbar = xsum / n
        est = f(counts, n_u)
        if kind == "gap":
            total += w * (est - xbar) ** 2
        elif kind == "excess":
            total += w * ((est - mu) ** 2 - (xbar - mu) ** 2)
        else:
            total += w * (est - mu) ** 2
    return total


def fraction_paa(counts, q):
    q = Fraction(q)
    phat = [Fraction(c) for c in counts]
    lo, hi = vertex_bounds(phat, q)
    return (lo + hi) / 2
