import itertools
from fractions import Fraction

import numpy as np
import pytest

from sawpivot.errors import PartitionMismatchError, StabilityError
from sawpivot.gmethod import (
    Partition,
    alpha_bar,
    all_partitions,
    check_contraction,
    check_representatives,
    check_stable_product,
    fixture_suite,
    gamma_bar,
    is_finer,
    is_stable_on,
    is_stochastic,
    least_fine_stable_partition,
    minimal_support_representative,
    product,
    random_chain,
    random_partition,
    random_property_suite,
    random_similar,
    random_stable_matrix,
    reduce,
    similar,
    support_bounds,
    theorem_property_suite,
)
from sawpivot.utils import as_fraction_array

HALVES = Partition([(0, 1), (2, 3)])
IMPROPER = Partition.improper(4)
SINGLETONS = Partition.singletons(4)


def test_partition_validation():
    with pytest.raises(PartitionMismatchError):
        Partition([(0, 1), (1, 2)])
    with pytest.raises(PartitionMismatchError):
        Partition([(0, 1)], m=3)
    with pytest.raises(PartitionMismatchError):
        Partition([(0, 1), ()])
    with pytest.raises(PartitionMismatchError):
        Partition([(0, 5)], m=2)


def test_partition_equality_ignores_order():
    assert Partition([(2, 3), (1, 0)]) == HALVES
    assert hash(Partition([(3, 2), (0, 1)])) == hash(HALVES)
    assert Partition.from_labels([7, 7, 1, 1]) == HALVES
    assert Partition([(0, 2), (1, 3)]) != HALVES
    assert IMPROPER.is_improper and SINGLETONS.is_singletons


@pytest.mark.parametrize('delta1, delta2, expected, comment', [
    (SINGLETONS, HALVES, True, 'singletons are finer than anything'),
    (HALVES, IMPROPER, True, 'anything is finer than the improper partition'),
    (HALVES, HALVES, True, 'reflexive'),
    (IMPROPER, HALVES, False, 'the improper partition is the coarsest'),
    (HALVES, Partition([(0, 2), (1, 3)]), False, 'incomparable partitions'),
    (Partition([(0, 2), (1, 3)]), HALVES, False, 'incomparable the other way'),
])
def test_is_finer(delta1, delta2, expected, comment):
    assert is_finer(delta1, delta2) == expected, comment


def test_is_finer_ground_set_mismatch():
    with pytest.raises(PartitionMismatchError):
        is_finer(Partition.singletons(3), IMPROPER)


@pytest.mark.parametrize('m, count', [(1, 1), (2, 2), (3, 5), (4, 15), (5, 52)])
def test_all_partitions(m, count):
    parts = list(all_partitions(m))
    assert len(parts) == count
    assert len(set(parts)) == count


@pytest.mark.parametrize('m', [3, 4, pytest.param(5, marks=pytest.mark.slow)])
def test_is_finer_is_partial_order(m):
    parts = list(all_partitions(m))
    finer = {(a, b): is_finer(a, b) for a, b in itertools.product(parts, repeat=2)}
    for a in parts:
        assert finer[a, a]
    for a, b in itertools.product(parts, repeat=2):
        if finer[a, b] and finer[b, a]:
            assert a == b
    for a, b, c in itertools.product(parts, repeat=3):
        if finer[a, b] and finer[b, c]:
            assert finer[a, c]


def test_shipped_matrices_are_stable(rational_fixtures):
    for name in ("uniform", "sparse", "mixed"):
        P = rational_fixtures[name]
        assert is_stochastic(P)
        assert is_stable_on(P, IMPROPER, HALVES), name
    assert is_stable_on(rational_fixtures["two_block"], HALVES, SINGLETONS)
    assert not is_stable_on(rational_fixtures["mixed"], IMPROPER, SINGLETONS)


@pytest.mark.parametrize('P, delta, sigma, expected, comment', [
    (np.array([[1.0, 0.0], [0.0, 0.0]]), Partition.improper(2), Partition.improper(2), False,
     'unequal row sums'),
    (np.array([[0.3, 0.7], [0.9, 0.1]]), Partition.singletons(2), Partition.improper(2), True,
     'single-row blocks are always stable'),
    (np.array([[0.3, 0.7], [0.9, 0.1]]), Partition.singletons(2), Partition.singletons(2), True,
     'whatever the column partition'),
    (np.array([[-0.5, 1.5], [-0.5, 1.5]]), Partition.improper(2), Partition.singletons(2), False,
     'negative entries'),
    (np.full((3, 3), 1.0 / 3) + 1e-15, Partition.improper(3), Partition.singletons(3), True,
     'float noise below the tolerance'),
])
def test_is_stable_on(P, delta, sigma, expected, comment):
    assert is_stable_on(P, delta, sigma) == expected, comment


def test_is_stable_on_shape_mismatch():
    with pytest.raises(PartitionMismatchError):
        is_stable_on(np.eye(3), IMPROPER, HALVES)


def test_least_fine_stable_partition(rational_fixtures):
    assert least_fine_stable_partition(rational_fixtures["uniform"], SINGLETONS) == IMPROPER
    assert least_fine_stable_partition(np.eye(4), SINGLETONS) == SINGLETONS
    assert least_fine_stable_partition(rational_fixtures["mixed"], HALVES) == IMPROPER
    assert least_fine_stable_partition(rational_fixtures["two_block"], SINGLETONS) == HALVES


def test_least_fine_partition_is_coarsest():
    rng = np.random.default_rng(3)
    for _ in range(20):
        delta = random_partition(6, rng)
        sigma = random_partition(5, rng)
        P = random_stable_matrix(delta, sigma, rng)
        best = least_fine_stable_partition(P, sigma)
        assert is_stable_on(P, best, sigma)
        assert is_finer(delta, best)
        for a, b in itertools.combinations(best.blocks, 2):
            merged = [blk for blk in best.blocks if blk not in (a, b)] + [a + b]
            assert not is_stable_on(P, Partition(merged, m=6), sigma)


def test_reductions_of_shipped_matrices(rational_fixtures):
    half = Fraction(1, 2)
    for name in ("uniform", "sparse", "mixed"):
        B = reduce(rational_fixtures[name], IMPROPER, HALVES)
        assert B.exact
        assert B.values.tolist() == [[half, half]], name
    B = reduce(rational_fixtures["two_block"], HALVES, SINGLETONS)
    F = Fraction
    assert B.values.tolist() == [[F(1, 3), F(2, 3), 0, 0], [0, 0, F(2, 5), F(3, 5)]]


def test_reduce_identity():
    B = reduce(np.eye(4), HALVES, HALVES)
    np.testing.assert_allclose(B.values, np.eye(2))


def test_reduce_names_the_unstable_block(rational_fixtures):
    with pytest.raises(StabilityError) as info:
        reduce(rational_fixtures["mixed"], IMPROPER, SINGLETONS)
    assert (info.value.row_block, info.value.col_block) == (0, 0)


def test_similarity(rational_fixtures):
    uniform, sparse, mixed = (rational_fixtures[k] for k in ("uniform", "sparse", "mixed"))
    assert similar(uniform, sparse, IMPROPER, HALVES)
    assert similar(sparse, mixed, IMPROPER, HALVES)
    assert similar(mixed, uniform, IMPROPER, HALVES)
    assert not similar(uniform, rational_fixtures["two_block"], HALVES, HALVES)
    with pytest.raises(StabilityError):
        similar(uniform, mixed, IMPROPER, SINGLETONS)


def test_random_similar_is_similar():
    rng = np.random.default_rng(8)
    for _ in range(20):
        delta, sigma = random_partition(5, rng), random_partition(6, rng)
        P = random_stable_matrix(delta, sigma, rng)
        assert similar(P, P, delta, sigma)
        assert similar(P, random_similar(P, delta, sigma, rng), delta, sigma)


def test_support_bounds(rational_fixtures):
    B = reduce(rational_fixtures["uniform"], IMPROPER, HALVES)
    assert support_bounds(B) == (8, 16)
    assert int((rational_fixtures["sparse"] > 0).sum()) == 8


def test_minimal_support_representative(rational_fixtures):
    B = reduce(rational_fixtures["uniform"], IMPROPER, HALVES)
    Q = minimal_support_representative(B)
    assert (Q == rational_fixtures["sparse"]).all()
    assert similar(Q, rational_fixtures["uniform"], IMPROPER, HALVES)


def test_alpha_gamma_bar(rational_fixtures):
    assert alpha_bar(rational_fixtures["uniform"]) == 0
    assert alpha_bar(np.eye(2)) == 1.0
    assert alpha_bar(rational_fixtures["mixed"]) == 1
    assert gamma_bar(rational_fixtures["two_block"], HALVES) == 0
    assert gamma_bar(rational_fixtures["mixed"], IMPROPER) == alpha_bar(rational_fixtures["mixed"])
    pi = np.array([0.1, 0.2, 0.7])
    assert alpha_bar(np.tile(pi, (4, 1))) == 0.0


def test_two_matrix_product_is_stable(rational_fixtures):
    sparse, mixed, two_block = (rational_fixtures[k] for k in ("sparse", "mixed", "two_block"))
    tau = as_fraction_array([Fraction(2, 12), Fraction(4, 12), Fraction(4, 20), Fraction(6, 20)])
    for first in (sparse, mixed):
        prod = np.dot(first, two_block)
        assert all((row == tau).all() for row in prod)
    report = theorem_property_suite(
        [sparse, two_block], [IMPROPER, HALVES, SINGLETONS], alternates=[mixed, two_block]
    )
    assert [c.status for c in report.checks] == ["pass", "pass", "pass"]
    assert report.verdict == "exact"


@pytest.mark.parametrize('P, status, comment', [
    (np.tile([0.2, 0.3, 0.5], (3, 1)), "pass", 'identical rows give a stable product'),
    (np.array([[0.2, 0.8], [0.8, 0.2]]), "inapplicable", 'rows differ: not stable over the singletons'),
])
def test_single_matrix_stable_product(P, status, comment):
    m, n = P.shape
    result = check_stable_product([P], [Partition.improper(m), Partition.singletons(n)])
    assert result.status == status, comment


def test_hypothesis_violation_is_inapplicable():
    # rows sum to 1 and 1.5
    P = np.array([[0.5, 0.5], [1.0, 0.5]])
    report = theorem_property_suite([P, P], [Partition.singletons(2), Partition.improper(2), Partition.singletons(2)])
    assert report.status("contraction") == "inapplicable"
    assert report.status("stable_product") == "inapplicable"
    assert report.passed
    report = theorem_property_suite([P], [Partition.improper(2)])
    assert all(c.status == "inapplicable" for c in report.checks)


def test_random_chains_satisfy_the_checks():
    rng = np.random.default_rng(0)
    for _ in range(100):
        chain, partitions = random_chain(rng, 3, max_size=5)
        report = theorem_property_suite(chain, partitions, rng=rng)
        assert [c.status for c in report.checks] == ["pass", "pass", "pass"], report.as_dict()


def test_random_non_stochastic_chains():
    rng = np.random.default_rng(1)
    for _ in range(30):
        chain, partitions = random_chain(rng, 3, max_size=5, stochastic=False)
        report = theorem_property_suite(chain, partitions, rng=rng)
        assert report.status("stable_product") == "pass"
        assert report.status("representatives") == "pass"


def test_random_property_suite():
    tally = random_property_suite(n_chains=100, seed=0)
    assert tally["fail"] == 0
    assert tally["pass"] + tally["inapplicable"] == 300
    assert tally["pass"] >= 250
    compliant = random_property_suite(n_chains=100, seed=0, mixed_ends=False)
    assert compliant == {"pass": 300, "fail": 0, "inapplicable": 0}


def test_contraction_on_chains_with_random_ends():
    rng = np.random.default_rng(5)
    lhs = []
    for _ in range(100):
        chain, partitions = random_chain(rng, 3, max_size=6, first_improper=False, last_singletons=False)
        lhs.append(gamma_bar(product(chain), partitions[0]))
        assert check_contraction(chain, partitions).status == "pass", partitions
        assert check_representatives(chain, partitions, rng=rng).status == "pass", partitions
    assert max(lhs) > 1e-3


def test_fixture_suite():
    report = fixture_suite()
    assert report["verdict"] == "exact"
    assert report["support_bounds"] == [8, 16]
    assert report["reductions_equal_half"] and report["all_similar"]
    assert report["product_equals_stable_tau"]
    assert report["minimal_support_is_sparse_fixture"]
