import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

import oracles
from robust_rating.aggregators import (
    AggregatorSpec,
    BeaParams,
    InconsistentCounts,
    bea,
    bea_alpha,
    bea_objective,
    golden_section_max,
    paa,
    paa_bounds,
    paa_k1,
    paa_k2,
    simple_average,
    solve_a_star,
    spectral,
)
from robust_rating.model import ObservedHistogram

# -- strategies -------------------------------------------------------------------

qs = st.floats(min_value=0.01, max_value=1.0)


@st.composite
def histograms(draw, min_m=2, max_m=7, max_count=30):
    m = draw(st.integers(min_m, max_m))
    counts = draw(st.lists(st.integers(0, max_count), min_size=m, max_size=m))
    n_u = draw(st.integers(0, max_count))
    return ObservedHistogram(counts, n_u)


@st.composite
def empirical(draw, min_m=2, max_m=7):
    h = draw(histograms(min_m, max_m))
    assume(h.n_observed > 0)
    return h.counts / h.n_observed


# -- simple average and spectral ----------------------------------------------------


@pytest.mark.parametrize("counts, expected", [((5, 5), 1.5), ((0, 0), 1.5), ((2, 1, 0), 4 / 3)])
def test_simple_average(counts, expected):
    assert simple_average(ObservedHistogram(counts), 2 if len(counts) == 2 else 3) == pytest.approx(expected)


@pytest.mark.parametrize("counts, expected", [((1, 0), 1.0), ((1, 1), math.sqrt(2.5)), ((0, 0), 1.5)])
def test_spectral(counts, expected):
    assert spectral(ObservedHistogram(counts), 2) == pytest.approx(expected, abs=1e-12)


def test_scale_mismatch_rejected():
    with pytest.raises(ValueError):
        simple_average(ObservedHistogram((1, 2)), 3)


# -- BEA ------------------------------------------------------------------------------


@pytest.mark.parametrize("n1, nm, expected", [(3, 3, 0.5), (0, 0, 0.5), (2, 0, 0.36), (1, 0, 3 / 7)])
def test_bea_alpha(n1, nm, expected):
    assert bea_alpha(n1, nm, 0.6, 0.5) == pytest.approx(expected, abs=1e-12)


def test_bea_alpha_extreme_differences_are_finite():
    assert bea_alpha(5000, 0, 0.6, 0.5) == pytest.approx(0.0, abs=1e-300)
    assert bea_alpha(0, 5000, 0.6, 0.5) == pytest.approx(1.0)
    assert bea_alpha(3, 0, 1.0, 0.5) == 1.0
    assert bea_alpha(3, 0, 0.0, 0.5) == 0.0


@pytest.mark.parametrize("counts, n_u, expected", [
    ((1, 1), 0, 1.5),
    ((0, 0), 2, 1.5),
    ((2, 1), 2, 10 / 7),
])
def test_bea_examples(counts, n_u, expected):
    params = BeaParams(n=sum(counts) + n_u, q=0.5, a_star=0.6)
    assert bea(ObservedHistogram(counts, n_u), params) == pytest.approx(expected, abs=1e-12)


def test_bea_inconsistent_total():
    with pytest.raises(InconsistentCounts):
        bea(ObservedHistogram((1, 1), 1), BeaParams(n=5, q=0.5, a_star=0.6))


@given(histograms(), qs, st.floats(0, 1))
def test_bea_matches_reference(h, q, a):
    assume(h.n > 0)
    params = BeaParams(h.n, q, a)
    expected = oracles.bea(h.counts.tolist(), h.n_u, a, q)
    assert bea(h, params) == pytest.approx(expected, rel=1e-12, abs=1e-12)


@given(histograms(), qs, st.floats(0, 1))
def test_bea_stays_on_scale(h, q, a):
    assume(h.n > 0)
    value = bea(h, BeaParams(h.n, q, a))
    assert 1 - 1e-12 <= value <= h.m + 1e-12


@pytest.mark.parametrize("a, expected", [(1.0, 0.125), (0.0, 0.0), (0.4, 0.05)])
def test_bea_objective_single_rater(a, expected):
    assert bea_objective(a, 1, 2, 0.5) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("n, m", [(1, 2), (7, 3), (12, 5)])
def test_bea_objective_vanishes_without_bias(n, m):
    for a in np.linspace(0, 1, 11):
        assert bea_objective(a, n, m, 1.0) == pytest.approx(0.0, abs=1e-15)


@given(st.integers(1, 8), st.integers(2, 5), qs, st.floats(0, 1))
def test_bea_objective_matches_reference(n, m, q, a):
    expected = oracles.lower_bound_objective(a, n, m, q)
    assert bea_objective(a, n, m, q) == pytest.approx(expected, rel=1e-10, abs=1e-15)


def test_solve_a_star_small_cases():
    assert solve_a_star(1, 2, 0.5) == pytest.approx((1.0, 0.125))
    a_star, value = solve_a_star(1, 2, 1.0)
    assert (a_star, value) == (1.0, 0.0)


def test_solve_a_star_matches_dense_grid_oracle():
    oracle_a, oracle_value = oracles.grid_argmax(10, 3, 0.5)
    a_star, value = solve_a_star(10, 3, 0.5)
    assert abs(value - oracle_value) <= 1e-9
    assert abs(a_star - oracle_a) <= 1e-3


@pytest.mark.parametrize("n, m, q", [(10, 3, 0.3), (20, 3, 0.1), (5, 5, 0.7)])
def test_solve_a_star_never_below_dense_grid(n, m, q):
    # the 1e4 grid can only undershoot the true maximum; the gap is bounded
    # by the curvature of J over half a grid cell
    _, oracle_value = oracles.grid_argmax(n, m, q)
    a_star, value = solve_a_star(n, m, q)
    assert -1e-12 <= value - oracle_value <= 1e-7
    assert value == pytest.approx(oracles.lower_bound_objective(a_star, n, m, q), abs=1e-12)


def test_golden_section_on_known_maximum():
    x, fx = golden_section_max(lambda x: -(x - 0.3) ** 2 + 2, 0.0, 1.0)
    # near a flat maximum values tie in floating point below sqrt(eps)
    assert x == pytest.approx(0.3, abs=1e-7)
    assert fx == pytest.approx(2.0, abs=1e-15)


# -- PAA ------------------------------------------------------------------------------


@pytest.mark.parametrize("phat, k1, k2", [
    ((0.5, 0.5), 1, 1),
    ((0.2, 0.3, 0.5), 2, 2),
    ((1, 0, 0, 0), 1, 1),
    ((0, 0, 0, 1), 4, 4),
])
def test_paa_thresholds(phat, k1, k2):
    assert paa_k1(np.array(phat), 0.5) == k1
    assert paa_k2(np.array(phat), 0.5) == k2


@pytest.mark.parametrize("phat, l, u", [((0.5, 0.5), 4 / 3, 5 / 3), ((0.2, 0.3, 0.5), 31 / 15, 38 / 15)])
def test_paa_bounds_examples(phat, l, u):
    b = paa_bounds(np.array(phat), 0.5)
    assert b.l == pytest.approx(l, abs=1e-12)
    assert b.u == pytest.approx(u, abs=1e-12)


@pytest.mark.parametrize("phat, expected", [((0.5, 0.5), 1.5), ((0.2, 0.3, 0.5), 2.3)])
def test_paa_examples(phat, expected):
    assert paa(np.array(phat), 0.5) == pytest.approx(expected, abs=1e-12)


@given(empirical(max_m=5), st.floats(0.05, 1.0))
def test_paa_bounds_match_vertex_oracle(phat, q):
    b = paa_bounds(phat, q)
    lo, hi = oracles.vertex_bounds(phat.tolist(), q)
    assert b.l == pytest.approx(lo, abs=1e-12)
    assert b.u == pytest.approx(hi, abs=1e-12)


@given(empirical())
def test_paa_degenerates_to_average_at_q1(phat):
    b = paa_bounds(phat, 1.0)
    mean = float(np.arange(1, phat.size + 1) @ phat)
    assert b.l == pytest.approx(mean, abs=1e-12)
    assert b.u == pytest.approx(mean, abs=1e-12)
    assert paa(phat, 1.0) == pytest.approx(mean, abs=1e-12)


@given(histograms())
def test_paa_counts_at_q1_equal_simple_average_exactly(h):
    spec = AggregatorSpec.make("paa", 1.0)
    assert spec(h) == simple_average(h)


@given(empirical(), qs)
def test_paa_thresholds_ordered(phat, q):
    b = paa_bounds(phat, q)
    assert 1 <= b.k1 <= b.k2 <= phat.size
    mean = float(np.arange(1, phat.size + 1) @ phat)
    assert b.l <= mean + 1e-12 and mean <= b.u + 1e-12


@given(empirical(), qs)
def test_paa_threshold_conditions_cross_once(phat, q):
    # the k1/k2 conditions decrease in k, so the satisfied k form a prefix
    m = phat.size
    i = np.arange(1, m + 1)
    for divide_below in (True, False):
        cond = []
        for k in range(1, m + 1):
            scale = np.where(i < k, 1 / q, 1.0) if divide_below else np.where(i > k, 1 / q, 1.0)
            cond.append(float(((i - k) * scale * phat).sum()))
        assert all(a >= b - 1e-12 for a, b in zip(cond, cond[1:]))


@given(empirical(), qs, qs)
def test_paa_interval_widens_as_q_falls(phat, q1, q2):
    lo_q, hi_q = sorted((q1, q2))
    wide, narrow = paa_bounds(phat, lo_q), paa_bounds(phat, hi_q)
    assert wide.l <= narrow.l + 1e-12
    assert wide.u >= narrow.u - 1e-12


# -- symmetry and the aggregator handle -----------------------------------------------


@given(histograms(), qs, st.floats(0, 1), st.sampled_from(["avg", "paa", "bea"]))
def test_reversal_symmetry(h, q, a, name):
    assume(h.n > 0)
    spec = AggregatorSpec.make(name, q, n=h.n, a_star=a)
    assert spec(h) + spec(h.reversed()) == pytest.approx(h.m + 1, abs=1e-9)


def test_spec_requires_n_for_bea():
    with pytest.raises(ValueError):
        AggregatorSpec.make("bea", 0.5)
    with pytest.raises(ValueError):
        AggregatorSpec("bea", 0.5)
    with pytest.raises(ValueError):
        AggregatorSpec.make("median", 0.5)


def test_spec_solves_a_star_when_not_given():
    spec = AggregatorSpec.make("bea", 0.5, n=10, m=3)
    assert spec.bea.a_star == pytest.approx(solve_a_star(10, 3, 0.5)[0])
    assert spec.needs_n
    assert spec.to_dict() == {"name": "bea", "q": 0.5, "n": 10, "a_star": spec.bea.a_star}


def test_bea_has_no_empirical_form():
    spec = AggregatorSpec.make("bea", 0.5, n=4, a_star=0.5)
    with pytest.raises(ValueError):
        spec.evaluate_empirical(np.array([[0.5, 0.5]]))


def test_batch_matches_scalar():
    rng = np.random.default_rng(3)
    counts = rng.integers(0, 6, size=(50, 4))
    for name in ("avg", "spe", "paa"):
        spec = AggregatorSpec.make(name, 0.4)
        batch = spec.evaluate(counts)
        scalar = [spec(ObservedHistogram(c)) for c in counts]
        np.testing.assert_allclose(batch, scalar, rtol=0, atol=1e-14)
