import json
import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp

from sawpivot.enumeration import enumerate_walks
from sawpivot.errors import (
    CapacityError,
    DimensionMismatchError,
    InvalidConfigurationError,
    InvalidLengthError,
)
from sawpivot.exact_markov import (
    audit_chains,
    build_pivot_matrix,
    build_pivot_plus_matrices,
    component_periods,
    conjecture_scan,
    evolve,
    expected_end_to_end,
    is_aperiodic,
    is_irreducible,
    is_stationary,
    jump_limit_structure,
    l1_distance,
    limit_audit,
    minimal_irreducible_prefix,
    point_mass,
    q_block,
    q_blocks,
    read_matrix_dump,
    uniform,
    write_matrix_dump,
)
from sawpivot.lattice_walk import Walk, directions, straight_walks
from sawpivot.utils import golden_path


def test_pivot_matrix_small(space_d2_n2):
    s = space_d2_n2
    P = build_pivot_matrix(s, progress=False)
    ee, en = s.index[(1, 1)], s.index[(1, 2)]
    assert P.denominator == 16
    assert P.counts[ee, en] == 2
    assert P.entry(ee, en) == Fraction(2, 16)
    assert (P.counts.diagonal() >= s.N).all()


@pytest.mark.parametrize('d, N', [(2, 2), (2, 3), (2, 4), (2, 5), (3, 2), (3, 3)])
def test_pivot_matrix_properties(d, N):
    s = enumerate_walks(d, N)
    P = build_pivot_matrix(s, progress=False)
    assert P.denominator == N * 2 ** d * math.factorial(d)
    assert (np.asarray(P.counts.sum(axis=1)).ravel() == P.denominator).all()
    assert P.is_count_symmetric()
    assert is_irreducible(P)
    assert is_aperiodic(P)
    assert is_stationary(P, uniform(len(s), exact=True))


@pytest.mark.parametrize('d, N', [(2, 2), (2, 3), (2, 4), (2, 5), (3, 2), (3, 3)])
def test_pivot_plus_matrices(d, N):
    s = enumerate_walks(d, N)
    P1, P2 = build_pivot_plus_matrices(s, progress=False)
    assert P1.denominator == 2 * d
    dense = P1.counts.toarray()
    assert (dense == dense[0]).all()
    assert sorted(np.flatnonzero(dense[0]).tolist()) == sorted(s.straight_indices())
    labels = s.class_labels()
    coo = P2.counts.tocoo()
    assert (labels[coo.row] == labels[coo.col]).all()
    for code, Q in q_blocks(s, P2).items():
        assert Q.size == len(s) // (2 * d)
        assert Q.is_count_symmetric()
        assert is_irreducible(Q) and is_aperiodic(Q)
        assert is_stationary(Q, uniform(Q.size, exact=True))


def test_q_block_row_of_straight_walk(space_d2_n2):
    s = space_d2_n2
    _, P2 = build_pivot_plus_matrices(s, progress=False)
    Q = q_block(s, P2, 1)
    assert Q.denominator == 8
    assert Q.size == 3
    # block order: (+1,+1), (+1,+2), (+1,-2)
    assert Q.row(0) == {0: 4, 1: 2, 2: 2}


def test_pivot_plus_needs_two_steps():
    with pytest.raises(InvalidConfigurationError):
        build_pivot_plus_matrices(enumerate_walks(2, 1))


@pytest.mark.slow
@pytest.mark.parametrize('N', [5, 6])
def test_blocks_irreducible_aperiodic(N):
    s = enumerate_walks(2, N)
    _, P2 = build_pivot_plus_matrices(s, progress=False)
    for Q in q_blocks(s, P2).values():
        assert is_irreducible(Q) and is_aperiodic(Q)


@pytest.mark.parametrize('matrix, irreducible, aperiodic, comment', [
    (sp.identity(3), False, True, 'identity: three absorbing states'),
    (np.array([[0, 1], [1, 0]]), True, False, 'two-cycle has period 2'),
    (np.array([[1, 1], [1, 0]]), True, True, 'a self-loop breaks the period'),
    (np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]]), True, False, 'three-cycle'),
    (np.array([[0, 1, 0, 0], [0, 0, 1, 1], [1, 0, 0, 0], [1, 0, 0, 0]]), True, False,
     'cycles of length 3 and 3'),
    (np.array([[0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1], [1, 1, 0, 0]]), True, True,
     'cycles of length 4 and 3'),
])
def test_graph_structure(matrix, irreducible, aperiodic, comment):
    assert is_irreducible(matrix) == irreducible, comment
    assert is_aperiodic(matrix) == aperiodic, comment


def test_component_periods():
    assert component_periods(np.array([[0, 1], [1, 0]])) == [2]
    assert component_periods(np.array([[0, 1], [0, 0]])) == []
    with pytest.raises(DimensionMismatchError):
        is_irreducible(np.ones((2, 3)))


def test_evolve(space_d2_n3):
    s = space_d2_n3
    P = build_pivot_matrix(s, progress=False)
    q0 = point_mass(len(s), 0)
    assert len(evolve(q0, [P], 0)) == 1
    steps = evolve(q0, [P], 5)
    assert len(steps) == 6
    for q in steps:
        assert q.min() >= 0
        assert q.sum() == pytest.approx(1.0, abs=1e-12)
    exact = evolve(point_mass(len(s), 0, exact=True), [P], 3, exact=True)
    np.testing.assert_allclose(exact[3].astype(float), steps[3], atol=1e-12)
    assert sum(exact[3]) == 1
    with pytest.raises(DimensionMismatchError):
        evolve(np.ones(5) / 5, [P], 1)
    with pytest.raises(CapacityError):
        evolve(q0, [P], 1, exact=True, exact_cap=10)


def test_pivot_plus_evolution_after_one_step(space_d2_n3):
    s = space_d2_n3
    P1, P2 = build_pivot_plus_matrices(s, progress=False)
    p1 = evolve(point_mass(len(s), 5), [P1, P2], 1)[1]
    expected = np.zeros(len(s))
    expected[s.straight_indices()] = 0.25
    np.testing.assert_allclose(p1, expected)


@pytest.mark.parametrize('p, q, distance, comment', [
    (uniform(4), uniform(4), 0.0, 'a law against itself'),
    (point_mass(4, 0), point_mass(4, 3), 2.0, 'disjoint point masses'),
    (point_mass(4, 1), uniform(4), 1.5, '2 (n - 1) / n'),
    (point_mass(5, 1, exact=True), uniform(5, exact=True), 1.6, 'exact mode'),
])
def test_l1_distance(p, q, distance, comment):
    assert l1_distance(p, q) == pytest.approx(distance), comment


def test_l1_distance_mismatch():
    with pytest.raises(DimensionMismatchError):
        l1_distance(uniform(3), uniform(4))


def test_expected_end_to_end(space_d2_n2):
    # 4 straight walks with |w|^2 = 4 and 8 bent ones with |w|^2 = 2
    assert expected_end_to_end(space_d2_n2, uniform(12, exact=True)) == Fraction(8, 3)
    assert expected_end_to_end(space_d2_n2, uniform(12)) == pytest.approx(8 / 3)


def test_matrix_dump(tmp_path, space_d2_n2):
    P = build_pivot_matrix(space_d2_n2, progress=False)
    path = str(tmp_path / "pivot.txt")
    write_matrix_dump(path, P)
    lines = open(path).read().splitlines()
    assert lines[0] == "12 16"
    triples = [tuple(int(x) for x in ln.split()) for ln in lines[1:]]
    assert triples == sorted(triples)
    assert len(triples) == P.nnz
    again = read_matrix_dump(path)
    assert (again.counts != P.counts).nnz == 0
    assert P.summary() == {"size": 12, "denominator": 16, "nnz": P.nnz,
                           "symmetric": True, "irreducible": True, "aperiodic": True}


def test_minimal_irreducible_prefix_bounds(space_d2_n4):
    s = space_d2_n4
    P = build_pivot_matrix(s, progress=False)
    tau = straight_walks(2, 4)[0]
    assert minimal_irreducible_prefix(s, tau, 1, pivot=P) == 1
    assert minimal_irreducible_prefix(s, tau, 4, pivot=P) == 4
    bent = Walk(2, (1, 2, 2, -1))
    assert minimal_irreducible_prefix(s, bent, 4, pivot=P) == 4
    with pytest.raises(InvalidLengthError):
        minimal_irreducible_prefix(s, tau, 0, pivot=P)
    with pytest.raises(InvalidLengthError):
        minimal_irreducible_prefix(s, tau, 5, pivot=P)
    with pytest.raises(InvalidConfigurationError):
        minimal_irreducible_prefix(s, Walk(2, (1, 2, -1, -2)), 2, pivot=P)


def test_minimal_irreducible_prefix_golden(space_d2_n4):
    golden = json.load(open(golden_path("minimal_prefix.json")))
    s = space_d2_n4
    tau = Walk(golden["d"], tuple(int(x) for x in golden["tau"].split(",")))
    assert minimal_irreducible_prefix(s, tau, golden["M0"]) == golden["M"]


def test_limit_audit_d2_n4(space_d2_n4):
    audit = limit_audit(space_d2_n4, horizon=10_000, tol=1e-6, progress=False)
    assert audit.passed
    assert audit.closed_form_ok
    names = [t.name for t in audit.traces]
    assert names == ["pivot", "pivot_plus"] + [f"block:{c:+d}" for c in directions(2)]
    for trace in audit.traces:
        assert trace.monotone
        assert trace.first_below is not None and trace.first_below <= 10_000


def test_limit_audit_one_dimension():
    audit = limit_audit(enumerate_walks(1, 3), horizon=1000, progress=False)
    assert audit.passed
    block_traces = [t for t in audit.traces if t.name.startswith("block")]
    assert all(t.first_below == 0 for t in block_traces)


def test_conjecture_scan_d2_n3(space_d2_n3):
    s = space_d2_n3
    scan = conjecture_scan(s, horizon=200)
    assert len(scan.rows) == 201
    n, l1_pivot, l1_plus, leads = scan.rows[0]
    assert n == 0
    assert l1_pivot == pytest.approx(2 * (len(s) - 1) / len(s))
    assert l1_plus == pytest.approx(l1_pivot)
    assert scan.rows[-1][1] < 1e-4 and scan.rows[-1][2] < 1e-4
    assert scan.n0 is None or 1 <= scan.n0 <= 200
    assert scan.summary()["matched_start"] is True
    assert scan.start == "+1,+1,+1"


@pytest.mark.slow
@pytest.mark.parametrize('N', [4, 5, 6])
def test_conjecture_scan_converges(N):
    scan = conjecture_scan(enumerate_walks(2, N), horizon=200)
    assert scan.rows[-1][1] < 1e-4
    assert scan.rows[-1][2] < 1e-4


def test_conjecture_scan_start_must_be_in_space(space_d2_n3):
    with pytest.raises(InvalidConfigurationError):
        conjecture_scan(space_d2_n3, horizon=5, start=Walk(2, (1, -1, 1)))


def test_jump_limit_structure(space_d2_n3):
    P1, _ = build_pivot_plus_matrices(space_d2_n3, progress=False)
    assert jump_limit_structure(space_d2_n3, P1) == {
        "jump_in_G": True,
        "jump_similar_to_stationary": True,
        "jump_has_minimal_support": True,
        "limit_in_G": True,
        "limit_similar_to_stationary": False,
        "jump_times_limit_is_stationary": True,
    }


@pytest.mark.parametrize('d, N', [(1, 3), (2, 2), (2, 3)])
def test_audit_chains(d, N):
    report = audit_chains(enumerate_walks(d, N), horizon=10_000, progress=False)
    assert report["passed"]
    assert report["pivot"]["stationary"] is True


@pytest.mark.slow
@pytest.mark.parametrize('d, N', [(2, 4), (2, 5), (3, 2), (3, 3)])
def test_audit_chains_acceptance(d, N):
    assert audit_chains(enumerate_walks(d, N), horizon=10_000, progress=False)["passed"]
