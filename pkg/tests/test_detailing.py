import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import bit_distributions, random_bit_distribution
from huge_object.core_dist import Distribution, point_mass, product_bernoulli, two_point, uniform_bits
from huge_object.detailing import (
    Detailing,
    find_weakly_robust_exact,
    flat_refinement_by_weights,
    implementation,
    independent_tuple_fraction,
    index,
    is_eps_independent,
    is_good,
    is_weakly_robust,
    refine_by_variables,
    refined_index,
    robustness_gains,
    type_distribution,
    variable_detailing,
    variable_type,
    variable_types,
    weight_distribution,
)
from huge_object.errors import IndexOutOfRange, MarginalMismatch, PreconditionError, TooManySubsets
from oracles import all_subsets, brute_index


def test_index_uniform_trivial():
    assert index(Detailing.trivial(uniform_bits(4))) == F(1, 4)


def test_index_point_mass_ones():
    assert index(Detailing.trivial(point_mass("1111"))) == 1
    assert index(Detailing.trivial(point_mass("0000"))) == 0


def test_index_full_conditioning_is_mean_weight():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 11))
        mu = random_bit_distribution(rng, n, int(rng.integers(1, 8)), 30)
        want = sum(w * F(x.count("1"), n) for x, w in mu.items())
        assert index(variable_detailing(mu, range(n))) == want


def test_two_point_refinement():
    det = Detailing.trivial(two_point(8))
    assert index(det) == F(1, 4)
    assert refined_index(det, [1]) == F(1, 2)
    assert index(variable_detailing(two_point(8), [1])) == F(1, 2)


@given(bit_distributions(n_max=4), st.sets(st.integers(0, 3), max_size=3))
def test_index_matches_defining_sum(mu, u):
    n = len(next(iter(mu)))
    u = sorted(i for i in u if i < n)
    assert refined_index(Detailing.trivial(mu), u) == brute_index(mu, u)


@given(bit_distributions(n_max=4), st.sets(st.integers(0, 3), max_size=2), st.sets(st.integers(0, 3), max_size=2))
def test_refinement_never_lowers_index(mu, u, v):
    n = len(next(iter(mu)))
    u = [i for i in u if i < n]
    v = [i for i in v if i < n]
    det = Detailing.trivial(mu)
    lo = refined_index(det, u)
    hi = refined_index(det, sorted(set(u) | set(v)))
    assert 0 <= lo <= hi <= 1


def test_float_index_agrees():
    mu = product_bernoulli([F(1, 3), F(1, 5), F(2, 7)])
    exact = refined_index(Detailing.trivial(mu), [0])
    fl = refined_index(Detailing.trivial(product_bernoulli([1 / 3, 1 / 5, 2 / 7])), [0])
    assert abs(float(exact) - fl) < 1e-12


def test_refine_builds_labels():
    det = refine_by_variables(Detailing.trivial(two_point(3)), [2, 0])
    assert set(det.labels) == {("00",), ("11",)}
    assert weight_distribution(det) == Distribution({("00",): F(1, 2), ("11",): F(1, 2)})
    with pytest.raises(IndexOutOfRange):
        refine_by_variables(det, [3])


def test_types_and_implementation():
    det = variable_detailing(two_point(3), [0])
    t = variable_type(det, 1)
    assert t == {("0",): 0, ("1",): 1}
    assert variable_types(det) == [(F(0), F(1))] * 3
    assert implementation(det).type_distribution().dist == type_distribution(det).dist
    assert type_distribution(det).dist == Distribution({(F(0), F(1)): 1})


def test_labels_must_be_tuples():
    with pytest.raises(PreconditionError):
        Detailing(Distribution({("0", "a"): 1}))


def test_json_round_trip():
    det = variable_detailing(product_bernoulli([F(1, 4), F(3, 4)]), [1])
    assert Detailing.from_json(det.to_json()) == det


def test_flat_refinement():
    det = variable_detailing(two_point(2), [0])
    eta = Distribution({(("0",), 0): F(1, 4), (("0",), 1): F(1, 4), (("1",), 0): F(1, 2)})
    ref = flat_refinement_by_weights(det, eta)
    assert weight_distribution(ref) == Distribution({("0", 0): F(1, 4), ("0", 1): F(1, 4), ("1", 0): F(1, 2)})
    assert ref.mu == det.mu
    bad = Distribution({(("0",), 0): F(1, 3), (("1",), 0): F(2, 3)})
    with pytest.raises(MarginalMismatch):
        flat_refinement_by_weights(det, bad)


# weak robustness

def test_weak_robustness_examples():
    assert is_weakly_robust(Detailing.trivial(point_mass("1010")), F(1, 5), 1)
    two = Detailing.trivial(two_point(8))
    assert not is_weakly_robust(two, F(1, 5), 1)
    assert is_weakly_robust(variable_detailing(two_point(8), [1]), F(1, 5), 1)


def test_subset_guard():
    with pytest.raises(TooManySubsets):
        is_weakly_robust(Detailing.trivial(uniform_bits(10)), F(1, 5), 3, guard=50)


@given(bit_distributions(n_max=4), st.sampled_from([F(1, 10), F(1, 5), F(1, 3)]), st.integers(1, 2))
def test_greedy_result_is_weakly_robust(mu, delta, k):
    det = Detailing.trivial(mu)
    u = find_weakly_robust_exact(det, delta, k)
    ref = refine_by_variables(det, u)
    assert is_weakly_robust(ref, delta, k)
    # no small set gains delta at the fixed point
    assert all(g < delta for g in robustness_gains(ref, k).values())


def test_gains_cover_all_small_sets():
    gains = robustness_gains(Detailing.trivial(two_point(3)), 2)
    assert set(gains) == {frozenset(s) for s in all_subsets(range(3), 2)}
    assert gains[frozenset()] == 0 and gains[frozenset({0})] == F(1, 4)


# independence and goodness

def test_independence_examples():
    two = two_point(3)
    assert not is_eps_independent(two, (0, 1), F(1, 10))
    assert is_eps_independent(two, (1, 1), 0)
    assert is_eps_independent(product_bernoulli([F(1, 4)] * 3), (0, 1, 2), 0)
    with pytest.raises(IndexOutOfRange):
        is_eps_independent(two, (0, 5), 0)


def test_tuple_fraction_counts_repeats():
    # with n = 3, k = 2 only the 3 diagonal tuples collapse to one variable
    assert independent_tuple_fraction(two_point(3), 2, F(1, 10)) == F(3, 9)


def test_goodness_product_and_refined_two_point():
    assert is_good(Detailing.trivial(product_bernoulli([F(1, 4), F(3, 4), F(1, 2)])), 0, 3)
    assert not is_good(Detailing.trivial(two_point(3)), F(1, 10), 2)
    assert is_good(variable_detailing(two_point(3), [0]), 0, 2)


def test_goodness_sampled_mode(rng):
    det = variable_detailing(two_point(6), [0])
    assert is_good(det, F(1, 10), 2, mode="sampled", trials=100, rng=rng)
    with pytest.raises(PreconditionError):
        is_good(det, F(1, 10), 2, mode="sampled")


def test_weakly_robust_refinements_are_good_sampled():
    # refining until no variable gains much leaves components close to product
    rng = np.random.default_rng(21)
    hits = 0
    for _ in range(20):
        mu = random_bit_distribution(rng, 5, 3, 12)
        det = Detailing.trivial(mu)
        u = find_weakly_robust_exact(det, F(1, 50), 1)
        hits += is_good(refine_by_variables(det, u), F(1, 4), 2, mode="sampled", trials=100, rng=rng)
    assert hits >= 18


def test_component_examples():
    det = variable_detailing(point_mass("111"), [0])
    assert det.labels == (("1",),) and det.component(("1",)) == point_mass("111")
    det = variable_detailing(Distribution({"00": F(1, 2), "11": F(1, 2)}), [0])
    assert det.components() == {("0",): point_mass("00"), ("1",): point_mass("11")}
    assert weight_distribution(Detailing.trivial(uniform_bits(2))) == point_mass(())


def test_product_types():
    det = Detailing.trivial(product_bernoulli([F(1, 4), F(3, 4)]))
    assert type_distribution(det).dist == Distribution({(F(1, 4),): F(1, 2), (F(3, 4),): F(1, 2)})
    assert type_distribution(Detailing.trivial(uniform_bits(3))).dist == Distribution({(F(1, 2),): 1})


@given(bit_distributions(n_min=3, n_max=4), st.sets(st.integers(0, 3), max_size=2), st.sets(st.integers(0, 3), max_size=2))
def test_refinements_compose(mu, u, v):
    n = len(next(iter(mu)))
    u, v = sorted(i for i in u if i < n), sorted(i for i in v if i < n and i not in u)
    det = Detailing.trivial(mu)
    twice = refine_by_variables(refine_by_variables(det, u), v)
    once = refine_by_variables(det, sorted(set(u) | set(v)))
    # both label each x by x restricted to U and V; compare the induced partitions of the support
    def blocks(d):
        return sorted(sorted(c) for c in d.components().values())
    assert blocks(twice) == blocks(once)
    assert index(twice) == index(once)


@given(bit_distributions(n_max=4), st.integers(0, 3), st.data())
def test_flat_refinement_keeps_index_and_types(mu, c, data):
    from huge_object.detailing import flat_extension

    n = len(next(iter(mu)))
    det = variable_detailing(mu, [min(c, n - 1)])
    items = {}
    for a, w in weight_distribution(det).items():
        k = data.draw(st.integers(0, 2))
        items[(a, 0)] = w * F(k, 2)
        items[(a, 1)] = w * F(2 - k, 2)
    ref = flat_refinement_by_weights(det, Distribution(items))
    assert index(ref) == index(det)
    live = [a for a in ref.labels]
    ext = flat_extension(type_distribution(det), [0, 1]).restrict_labels(live)
    assert type_distribution(ref).restrict_labels(live).dist == ext.dist


def test_weak_robustness_n4_example():
    det = Detailing.trivial(two_point(4))
    assert all(g == F(1, 4) for u, g in robustness_gains(det, 1).items() if u)
    assert not is_weakly_robust(det, F(1, 10), 1)


def test_greedy_two_point_picks_first_index():
    assert find_weakly_robust_exact(Detailing.trivial(two_point(5)), F(1, 10), 1) == frozenset({0})
    assert find_weakly_robust_exact(Detailing.trivial(point_mass("0110")), F(1, 10), 1) == frozenset()


def test_greedy_size_bound():
    rng = np.random.default_rng(31)
    for _ in range(20):
        mu = random_bit_distribution(rng, 6, 5, 12)
        for delta, k in ((F(1, 10), 1), (F(1, 5), 2)):
            u = find_weakly_robust_exact(Detailing.trivial(mu), delta, k)
            assert len(u) <= k * math.ceil(1 / delta)


def test_two_point_pair_dependent():
    d = Distribution({"00": F(1, 2), "11": F(1, 2)})
    assert not is_eps_independent(d, (0, 1), F(2, 5))
    assert is_eps_independent(d, (0, 1), F(1, 2))
