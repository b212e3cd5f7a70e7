import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from insurelab.classes import (
    ConstructionError,
    DeceptionWitness,
    Quantization,
    check_witness,
    class_from_dict,
    entropy_class,
    in_entropy_class,
    is_uniform_contiguous,
    max_geometric_ratio,
    monotone_bad_q,
    quantize_finite_class,
    sample_entropy_bounded_monotone,
    sample_uniform_class,
    uniform_class,
)
from insurelab.dist import DomainError, Pmf, ValidationError, build_cdf, jdist

LN2 = math.log(2.0)


def test_uniform_sampler_max_zero_is_point_mass():
    assert sample_uniform_class(3, 0) == Pmf.point(0)


def test_uniform_2_to_5():
    assert Pmf.uniform(2, 5).probs == (0.25,) * 4


@given(st.integers(0, 2 ** 32), st.integers(0, 60))
def test_uniform_sampler_stays_in_class(seed, max_M):
    p = sample_uniform_class(seed, max_M)
    assert is_uniform_contiguous(p, max_M)


def test_uniform_sampler_covers_pairs_evenly():
    # 3 * 4 / 2 = 6 pairs for max_M = 2
    seen = {}
    for s in range(6000):
        p = sample_uniform_class(s, 2)
        key = (p.support[0], p.support[-1])
        seen[key] = seen.get(key, 0) + 1
    assert len(seen) == 6
    assert max(seen.values()) - min(seen.values()) < 200


def test_entropy_geometric_half_is_rejected_for_h_one():
    assert Pmf.geometric(0.5).entropy() == pytest.approx(2.0)
    assert not in_entropy_class(Pmf.geometric(0.5), 1.0)
    rho = max_geometric_ratio(1.0)
    assert Pmf.geometric(rho).entropy() == pytest.approx(1.0, abs=1e-9)


def test_point_mass_is_in_every_entropy_class():
    assert in_entropy_class(Pmf.point(0), 1e-3)


def test_entropy_sampler_domain():
    with pytest.raises(DomainError):
        sample_entropy_bounded_monotone(0, 0.0)


@settings(max_examples=150)
@given(st.integers(0, 2 ** 32), st.floats(0.05, 4.0))
def test_entropy_sampler_stays_in_class(seed, h):
    p = sample_entropy_bounded_monotone(seed, h)
    assert p.is_monotone()
    assert p.entropy() <= h + 1e-9


def test_class_from_dict_forms():
    assert class_from_dict({"class": "uniform_contiguous", "max_M": 50}).params == {"max_M": 50}
    assert class_from_dict({"class": "monotone_entropy", "h": 1.0}).contains(Pmf.point(0))
    fc = class_from_dict({"class": "finite", "members": [Pmf.point(0).to_dict()]})
    assert fc.contains(Pmf.point(0)) and not fc.contains(Pmf.point(1))
    with pytest.raises(ValidationError):
        class_from_dict({"class": "uniform"})
    with pytest.raises(ValidationError):
        class_from_dict({"class": "nope"})


def test_class_samplers_respect_predicates():
    for mc in (uniform_class(50), entropy_class(1.5)):
        for s in range(50):
            assert mc.contains(mc.sample(s))


# ---- deception witnesses --------------------------------------------------

def test_bad_q_point_mass_example():
    p = Pmf.point(0)
    w = monotone_bad_q(p, 0.4, 100.0)
    assert w.witness_q.max_support == 202
    assert jdist(p, w.witness_q) < 0.4
    assert build_cdf(w.witness_q).inverse(1 - w.delta) > 100
    assert check_witness(p, w)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.0, 5000.0), st.integers(0, 2 ** 31))
def test_bad_q_is_valid_and_monotone(eps, f, seed):
    p = sample_entropy_bounded_monotone(seed, 1.0)
    w = monotone_bad_q(p, eps, f)
    assert w.dist_achieved < eps
    assert w.quantile_achieved > f
    assert w.witness_q.is_monotone()
    assert check_witness(p, w)


def test_bad_q_needs_monotone_input():
    with pytest.raises(DomainError):
        monotone_bad_q(Pmf.point(3), 0.1, 1.0)


def test_bad_q_refuses_unbuildable_support():
    with pytest.raises(ConstructionError):
        monotone_bad_q(Pmf.point(0), 0.1, 1e9)


def test_check_witness_negative_cases():
    p = Pmf.uniform(0, 3)
    f = build_cdf(p).inverse(0.9)
    assert not check_witness(p, DeceptionWitness(0.5, 0.1, f, p, 0.0, f))
    w = monotone_bad_q(p, 0.3, 10.0)
    zero = DeceptionWitness(0.0, w.delta, w.f_value, w.witness_q, w.dist_achieved,
                            w.quantile_achieved)
    assert not check_witness(p, zero)


# ---- quantization -------------------------------------------------------------

def test_single_member_quantization():
    p = Pmf.uniform(0, 3)
    (c,) = quantize_finite_class([p]).centroids
    assert c.index == 1 and c.reach == 1.0
    for d in (0.01, 0.2, 0.7):
        assert c.quantile_bound(np.asarray(d)) == pytest.approx(build_cdf(p).inverse(1 - d))


def test_two_point_masses():
    q = quantize_finite_class([Pmf.point(0), Pmf.point(1)])
    assert [c.reach for c in q.centroids] == [1.0, 1.0]
    assert [len(c.ball) for c in q.centroids] == [1, 1]


def test_duplicate_members_rejected():
    with pytest.raises(DomainError):
        quantize_finite_class([Pmf.point(0), Pmf.point(0)])


def _random_class(seed, k=5):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < k:
        sup = np.sort(rng.choice(12, size=rng.integers(1, 6), replace=False))
        p = Pmf.finite(sup, rng.dirichlet(np.ones(len(sup))))
        if all(jdist(p, r) > 0 for r in out):
            out.append(p)
    return out


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_quantization_invariants(seed):
    members = _random_class(seed)
    q = quantize_finite_class(members)
    assert [c.index for c in q.centroids] == [1, 2, 3, 4, 5]
    deltas = np.linspace(0.001, 0.999, 100)
    for c, p in zip(q.centroids, members):
        assert c.zone_radius == c.reach ** 2 * LN2 ** 2 / 16
        assert c.separation > 0 and math.isfinite(c.log2_capacity)
        assert jdist(p, c.center) == 0.0 < c.zone_radius
        g = c.quantile_bound(deltas)
        assert np.all(np.diff(g) <= 1e-12)
        assert np.all(g >= build_cdf(c.center).inverse(1 - deltas) - 1e-12)


def test_index_weight_of_consecutive_indices():
    # sum of 1/i^2 over 1..k is below pi^2/6, not below 1
    q = quantize_finite_class(_random_class(0))
    assert q.index_weight() == pytest.approx(sum(1 / i ** 2 for i in range(1, 6)))
    assert q.index_weight() < math.pi ** 2 / 6


def test_quantization_dict_round_trip():
    members = _random_class(1, 3)
    q = quantize_finite_class(members)
    back = Quantization.from_dict(q.to_dict())
    assert [c.reach for c in back.centroids] == [c.reach for c in q.centroids]
    again = Quantization.from_dict({"members": [m.to_dict() for m in members]})
    assert [c.index for c in again.centroids] == [1, 2, 3]
