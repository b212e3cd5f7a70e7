import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import finite_pmfs
from insurelab.dist import (
    DomainError,
    Pmf,
    ValidationError,
    build_cdf,
    cdf_inverse,
    empirical,
    empirical_cdf_at,
    geometric_entropy,
    jdist,
    kl_div,
    l1_dist,
    tail_head,
)

LN2 = math.log(2.0)


# ---- construction -------------------------------------------------------

def test_finite_rejects_bad_tables():
    with pytest.raises(ValidationError):
        Pmf.finite([0, 1], [0.5, 0.6])
    with pytest.raises(ValidationError):
        Pmf.finite([1, 0], [0.5, 0.5])
    with pytest.raises(ValidationError):
        Pmf.finite([0, 1], [1.0, 0.0])
    with pytest.raises(ValidationError):
        Pmf.finite([-1], [1.0])


def test_two_point_drops_zero_mass_side():
    p = Pmf.two_point(0, 17, 1.0)
    assert p.support == (0,)
    assert Pmf.two_point(0, 17, 0.9).mass(17) == pytest.approx(0.1)


def test_serialization_round_trip():
    for p in (Pmf.uniform(2, 5), Pmf.geometric(0.3), Pmf.two_point(0, 17, 0.9)):
        assert Pmf.from_dict(p.to_dict()) == p
    with pytest.raises(ValidationError):
        Pmf.from_dict({"kind": "poisson", "lam": 1})


# ---- cdf ------------------------------------------------------------------

def test_uniform_knots():
    F = build_cdf(Pmf.uniform(0, 3))
    assert F.knots == [(0, 0.25), (1, 0.5), (2, 0.75), (3, 1.0)]


def test_point_mass_single_knot():
    assert build_cdf(Pmf.point(0)).knots == [(0, 1.0)]


def test_geometric_cdf_values():
    F = build_cdf(Pmf.geometric(0.5))
    assert F(0.0) == pytest.approx(0.5)
    assert F(1.0) == pytest.approx(0.75)
    assert F(math.inf) == 1.0
    ys = np.linspace(0, 40, 400)
    assert np.all(np.diff(F(ys)) >= 0)


@pytest.mark.parametrize("x, want", [(0.1, 0.0), (0.875, 2.5), (1.0, 3.0), (0.5, 1.0)])
def test_uniform_inverse(x, want):
    assert cdf_inverse(build_cdf(Pmf.uniform(0, 3)), x) == pytest.approx(want)


def test_geometric_inverse_at_one_is_infinite():
    F = build_cdf(Pmf.geometric(0.5))
    assert math.isinf(F.inverse(1.0))
    assert F.inverse(0.75) == pytest.approx(1.0)
    assert F.inverse(0.4) == 0.0


def test_inverse_domain():
    F = build_cdf(Pmf.uniform(0, 3))
    with pytest.raises(DomainError):
        F.inverse(1.5)
    with pytest.raises(DomainError):
        F.inverse(-0.1)


def test_finite_inverse_at_one_is_largest_support_point():
    assert build_cdf(Pmf.point(5)).inverse(1.0) == 5.0
    assert build_cdf(Pmf.finite([2, 9], [0.5, 0.5])).inverse(1.0) == 9.0


def test_ramp_below_smallest_support_point():
    # F rises linearly from (0, 0) to the first knot when 0 is not a support point
    F = build_cdf(Pmf.finite([4, 8], [0.5, 0.5]))
    assert F(2.0) == pytest.approx(0.25)
    assert F.inverse(0.25) == pytest.approx(2.0)


@settings(max_examples=200)
@given(finite_pmfs(), st.floats(0.0, 1.0))
def test_round_trip_on_valid_range(p, u):
    F = build_cdf(p)
    lo = float(F(float(p.support[0])))
    x = lo + u * (1.0 - lo)
    assert abs(float(F(F.inverse(x))) - x) <= 1e-9


@settings(max_examples=200)
@given(finite_pmfs(), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_inverse_nondecreasing(p, a, b):
    F = build_cdf(p)
    lo, hi = min(a, b), max(a, b)
    assert F.inverse(lo) <= F.inverse(hi) + 1e-12


@settings(max_examples=200)
@given(finite_pmfs(), st.floats(1e-6, 1 - 1e-6))
def test_tail_and_head_inequalities(p, delta):
    rep = tail_head(p, delta)
    assert rep.tail_mass > delta - 1e-12
    assert rep.head_mass > 1 - delta - 1e-12


# ---- tail / head ------------------------------------------------------------

def test_tail_head_uniform():
    rep = tail_head(Pmf.uniform(0, 3), 0.5)
    assert rep.tail_threshold == pytest.approx(1.0)
    assert rep.tail_mass == pytest.approx(0.75)
    assert rep.head_threshold == pytest.approx(4.0)
    assert rep.head_mass == pytest.approx(1.0)


def test_tail_head_point_mass():
    assert tail_head(Pmf.point(0), 0.5).tail_mass == 1.0


def test_tail_head_geometric_holds():
    for delta in (0.01, 0.1, 0.5, 0.9):
        assert tail_head(Pmf.geometric(0.7), delta).holds()


def test_tail_head_delta_range():
    with pytest.raises(DomainError):
        tail_head(Pmf.point(0), 1.0)


# ---- divergences ----------------------------------------------------------------

def _jdist_by_hand(a, b):
    m = [(x + y) / 2 for x, y in zip(a, b)]
    return (sum(x * math.log2(x / z) for x, z in zip(a, m) if x > 0)
            + sum(y * math.log2(y / z) for y, z in zip(b, m) if y > 0))


def test_jdist_examples():
    half = Pmf.finite([0, 1], [0.5, 0.5])
    assert jdist(half, half) == 0.0
    assert jdist(Pmf.point(0), Pmf.point(1)) == pytest.approx(2.0)
    assert jdist(half, Pmf.point(0)) == pytest.approx(_jdist_by_hand([0.5, 0.5], [1.0, 0.0]))
    assert jdist(half, Pmf.point(0)) == pytest.approx(0.6226, abs=1e-4)


def test_l1_and_kl_examples():
    half = Pmf.finite([0, 1], [0.5, 0.5])
    assert l1_dist(half, Pmf.point(0)) == pytest.approx(1.0)
    assert l1_dist(Pmf.point(0), Pmf.point(1)) == pytest.approx(2.0)
    assert kl_div(Pmf.point(0), half) == pytest.approx(1.0)
    assert math.isinf(kl_div(Pmf.point(1), Pmf.point(0)))


def test_jdist_geometric_tail_is_summed():
    a, b = Pmf.geometric(0.5), Pmf.geometric(0.6)
    ys = np.arange(200)
    pa = 0.5 * 0.5 ** ys
    pb = 0.4 * 0.6 ** ys
    assert jdist(a, b) == pytest.approx(_jdist_by_hand(pa, pb), abs=1e-10)


@settings(max_examples=200)
@given(finite_pmfs(), finite_pmfs())
def test_jdist_symmetric_bounded_and_zero_iff_equal(p, q):
    d = jdist(p, q)
    assert d == pytest.approx(jdist(q, p), abs=1e-12)
    assert -1e-12 <= d <= 2.0 + 1e-12
    assert (d <= 1e-15) == (l1_dist(p, q) <= 1e-15)


@settings(max_examples=200)
@given(finite_pmfs(), finite_pmfs())
def test_sandwich(p, q):
    d, l1 = jdist(p, q), l1_dist(p, q)
    assert l1 ** 2 / (4 * LN2) <= d + 1e-9
    assert d <= l1 / LN2 + 1e-9


def test_geometric_entropy_closed_form():
    ys = np.arange(2000)
    ps = 0.5 * 0.5 ** ys
    ps = ps[ps > 0]
    assert geometric_entropy(0.5) == pytest.approx(-np.sum(ps * np.log2(ps)))
    assert geometric_entropy(0.5) == pytest.approx(2.0)


# ---- empirical types ----------------------------------------------------------

def test_empirical_examples():
    assert empirical([0, 0, 0, 0]) == Pmf.point(0)
    e = empirical([1, 2, 3, 1, 1, 1])
    assert e.support == (1, 2, 3) and e.counts == (4, 1, 1)
    assert e.probs == pytest.approx((4 / 6, 1 / 6, 1 / 6))
    assert empirical([2, 4, 2, 2, 4, 4, 4, 2]).probs == (0.5, 0.5)
    with pytest.raises(DomainError):
        empirical([])


@given(st.lists(st.integers(0, 20), min_size=1, max_size=60))
def test_empirical_counts_are_exact(x):
    e = empirical(x)
    assert sum(e.counts) == len(x)


@settings(max_examples=100)
@given(st.lists(st.lists(st.integers(0, 9), min_size=1, max_size=25), min_size=1, max_size=5),
       st.floats(0.0, 12.0))
def test_rowwise_type_cdf_matches_scalar_cdf(paths, t):
    support = np.arange(10)
    counts = np.array([np.bincount(x, minlength=10) for x in paths])
    got = empirical_cdf_at(support, counts, t)
    want = [float(build_cdf(empirical(x))(t)) for x in paths]
    assert np.allclose(got, want, atol=1e-12)
