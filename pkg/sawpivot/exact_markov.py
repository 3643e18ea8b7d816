"""
Exact transition matrices of the pivot and pivot-plus chains on a small
state space, distribution evolution and the convergence audits built on them.

Matrices hold integer counts over a common row denominator D, so that the
transition probability alpha -> beta is counts[alpha, beta] / D exactly:

    pivot           D = N |O_d|
    pivot+ jump P1  D = 2d
    pivot+ P2       D = (N - 1) |O_d|   (block diagonal over first-step classes)
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from joblib import Parallel, delayed
from scipy.sparse.csgraph import breadth_first_order, connected_components
from tqdm import tqdm

from . import gmethod
from .enumeration import DEFAULT_WALK_CAP, StateSpace, counts, prefix_class
from .errors import (
    CapacityError,
    DimensionMismatchError,
    InvalidConfigurationError,
    InvalidLengthError,
)
from .lattice_walk import Walk, codes_self_avoiding, directions, format_walk, straight_walks
from .pivot_chains import PivotKernel
from .utils import as_fraction_array, is_exact, progress_enabled

logger = logging.getLogger(__name__)

EXACT_STATE_CAP = 5_000
DENSE_STATE_CAP = 5_000
NORMALIZATION_TOL = 1e-12
CONVERGENCE_TOL = 1e-6
MONOTONE_SLACK = 1e-12


@dataclass
class TransitionMatrix:
    counts: sp.csr_matrix
    denominator: int

    def __post_init__(self):
        self.counts = sp.csr_matrix(self.counts, dtype=np.int64)
        self.counts.sum_duplicates()
        self.counts.sort_indices()
        n, m = self.counts.shape
        if n != m:
            raise DimensionMismatchError(f"transition matrix must be square, got {n}x{m}")
        assert (self.counts.data >= 0).all(), "negative transition count"
        sums = np.asarray(self.counts.sum(axis=1)).ravel()
        assert (sums == self.denominator).all(), (
            f"row sums {sorted(set(sums.tolist()))} differ from the denominator {self.denominator}"
        )

    @property
    def size(self) -> int:
        return self.counts.shape[0]

    @property
    def nnz(self) -> int:
        return int(self.counts.count_nonzero())

    @cached_property
    def probabilities(self) -> sp.csr_matrix:
        return (self.counts.astype(np.float64) / self.denominator).tocsr()

    @cached_property
    def _transposed(self) -> sp.csr_matrix:
        return self.probabilities.T.tocsr()

    def entry(self, i: int, j: int) -> Fraction:
        return Fraction(int(self.counts[i, j]), self.denominator)

    def row(self, i: int) -> Dict[int, int]:
        lo, hi = self.counts.indptr[i], self.counts.indptr[i + 1]
        return dict(zip(self.counts.indices[lo:hi].tolist(), self.counts.data[lo:hi].tolist()))

    def block(self, indices: Sequence[int]) -> "TransitionMatrix":
        """Principal submatrix on `indices`; must keep every row's mass."""
        idx = np.asarray(list(indices))
        return TransitionMatrix(self.counts[idx][:, idx], self.denominator)

    def restrict(self, indices: Sequence[int]) -> sp.csr_matrix:
        idx = np.asarray(list(indices))
        return self.counts[idx][:, idx].tocsr()

    def is_count_symmetric(self) -> bool:
        return (self.counts != self.counts.T).nnz == 0

    def to_dense(self, exact: bool = False) -> np.ndarray:
        dense = self.counts.toarray()
        if not exact:
            return dense / self.denominator
        return as_fraction_array(dense) / self.denominator

    def apply(self, q: np.ndarray) -> np.ndarray:
        """q P for a row vector, or for every row of a 2-d array."""
        if q.ndim == 1:
            return self._transposed.dot(q)
        return self._transposed.dot(q.T).T

    def apply_exact(self, q: np.ndarray) -> np.ndarray:
        if q.ndim == 2:
            out = np.empty(q.shape, dtype=object)
            for r in range(q.shape[0]):
                out[r] = self.apply_exact(q[r])
            return out
        indptr, indices, data = self.counts.indptr, self.counts.indices, self.counts.data
        acc = [0] * self.size
        for i in range(self.size):
            qi = q[i]
            if qi == 0:
                continue
            for p in range(indptr[i], indptr[i + 1]):
                acc[indices[p]] += qi * int(data[p])
        out = np.empty(self.size, dtype=object)
        out[:] = [Fraction(a) / self.denominator for a in acc]
        return out

    def summary(self) -> Dict[str, object]:
        return {
            "size": self.size,
            "denominator": self.denominator,
            "nnz": self.nnz,
            "symmetric": self.is_count_symmetric(),
            "irreducible": is_irreducible(self),
            "aperiodic": is_aperiodic(self),
        }


def write_matrix_dump(path: str, m: TransitionMatrix):
    """Header "n D", then sorted "row col count" triples."""
    coo = m.counts.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as f:
        f.write(f"{m.size} {m.denominator}\n")
        for p in order:
            f.write(f"{coo.row[p]} {coo.col[p]} {coo.data[p]}\n")
    logger.info(f"wrote {m.nnz} entries to {path}")


def read_matrix_dump(path: str) -> TransitionMatrix:
    with open(path) as f:
        n, D = (int(x) for x in f.readline().split())
        triples = np.loadtxt(f, dtype=np.int64, ndmin=2)
    if triples.size == 0:
        triples = np.zeros((0, 3), dtype=np.int64)
    return TransitionMatrix(
        sp.csr_matrix((triples[:, 2], (triples[:, 0], triples[:, 1])), shape=(n, n)), D
    )


# * -------------------- construction -------------------- *


def _count_rows(d, N, min_pivot, codes, index, rows):
    kernel = PivotKernel(d, N, min_pivot)
    r, c, v = [], [], []
    for i in rows:
        w = codes[i]
        tally: Counter = Counter()
        for k in range(min_pivot, N):
            for t in range(len(kernel.group)):
                cand = kernel.propose(w, k, t)
                tally[index[cand] if codes_self_avoiding(cand, d) else i] += 1
        for j in sorted(tally):
            r.append(i)
            c.append(j)
            v.append(tally[j])
    return r, c, v


def _build(s: StateSpace, min_pivot: int, n_jobs: int, progress: Optional[bool],
           cap: int, chunk_size: int = 2048) -> TransitionMatrix:
    if len(s) > cap:
        raise CapacityError("exact transition matrix", len(s), cap)
    chunks = [range(lo, min(lo + chunk_size, len(s))) for lo in range(0, len(s), chunk_size)]
    bar = tqdm(chunks, disable=not progress_enabled(progress), desc="matrix rows")
    if n_jobs == 1:
        parts = [_count_rows(s.d, s.N, min_pivot, s.codes, s.index, rows) for rows in bar]
    else:
        parts = Parallel(n_jobs=n_jobs)(
            delayed(_count_rows)(s.d, s.N, min_pivot, s.codes, s.index, rows) for rows in bar
        )
    r = np.concatenate([np.asarray(p[0], dtype=np.int64) for p in parts])
    c = np.concatenate([np.asarray(p[1], dtype=np.int64) for p in parts])
    v = np.concatenate([np.asarray(p[2], dtype=np.int64) for p in parts])
    D = (s.N - min_pivot) * len(PivotKernel(s.d, s.N, min_pivot).group)
    return TransitionMatrix(sp.csr_matrix((v, (r, c)), shape=(len(s), len(s))), D)


def build_pivot_matrix(s: StateSpace, n_jobs: int = 1, progress: Optional[bool] = None,
                       cap: int = DEFAULT_WALK_CAP) -> TransitionMatrix:
    P = _build(s, 0, n_jobs, progress, cap)
    logger.info(f"pivot matrix: {P.size} states, {P.nnz} nonzeros, D = {P.denominator}")
    return P


def build_pivot_plus_matrices(s: StateSpace, n_jobs: int = 1, progress: Optional[bool] = None,
                              cap: int = DEFAULT_WALK_CAP) -> Tuple[TransitionMatrix, TransitionMatrix]:
    """(P1, P2): the jump to a uniform straight walk and the class-confined
    pivot kernel with k in {1..N-1}."""
    if s.N < 2:
        raise InvalidConfigurationError(f"pivot+ needs N >= 2, got N={s.N}")
    n = len(s)
    straight = s.straight_indices()
    rows = np.repeat(np.arange(n), len(straight))
    cols = np.tile(np.asarray(straight), n)
    P1 = TransitionMatrix(sp.csr_matrix((np.ones(rows.size, dtype=np.int64), (rows, cols)), shape=(n, n)),
                          2 * s.d)
    P2 = _build(s, 1, n_jobs, progress, cap)
    labels = s.class_labels()
    coo = P2.counts.tocoo()
    assert (labels[coo.row] == labels[coo.col]).all(), "pivot+ kernel leaves a first-step class"
    logger.info(f"pivot+ matrices: P2 has {P2.nnz} nonzeros, D = {P2.denominator}")
    return P1, P2


def q_block(s: StateSpace, P2: TransitionMatrix, code: int) -> TransitionMatrix:
    """The diagonal block of P2 on the class of walks starting with `code`."""
    return P2.block(s.class_block(code))


def q_blocks(s: StateSpace, P2: TransitionMatrix) -> Dict[int, TransitionMatrix]:
    return {code: q_block(s, P2, code) for code in directions(s.d)}


# * -------------------- distributions -------------------- *


def uniform(n: int, exact: bool = False) -> np.ndarray:
    if exact:
        out = np.empty(n, dtype=object)
        out.fill(Fraction(1, n))
        return out
    return np.full(n, 1.0 / n)


def point_mass(n: int, i: int, exact: bool = False) -> np.ndarray:
    if exact:
        out = np.empty(n, dtype=object)
        out.fill(Fraction(0))
        out[i] = Fraction(1)
        return out
    out = np.zeros(n)
    out[i] = 1.0
    return out


def iterate_distributions(q0: np.ndarray, chain: Sequence[TransitionMatrix], horizon: int,
                          exact: bool = False, exact_cap: int = EXACT_STATE_CAP):
    """Yield q_0, q_1, ..., q_horizon; step t applies chain[min(t-1, len-1)],
    so [P] is a homogeneous chain and [P1, P2] the pivot+ chain."""
    if not chain:
        raise InvalidConfigurationError("evolution needs at least one matrix")
    if horizon < 0:
        raise InvalidLengthError(f"horizon must be >= 0, got {horizon}")
    n = chain[0].size
    if any(m.size != n for m in chain):
        raise DimensionMismatchError(f"chain mixes sizes {sorted({m.size for m in chain})}")
    q = np.asarray(q0)
    if q.shape[-1] != n:
        raise DimensionMismatchError(f"distribution of length {q.shape[-1]} for {n} states")
    if exact:
        if n > exact_cap:
            raise CapacityError("exact-rational evolution", n, exact_cap)
        q = as_fraction_array(q)
    else:
        q = q.astype(np.float64)
    yield q
    for t in range(1, horizon + 1):
        m = chain[min(t - 1, len(chain) - 1)]
        q = m.apply_exact(q) if exact else m.apply(q)
        yield q


def evolve(q0: np.ndarray, chain: Sequence[TransitionMatrix], horizon: int,
           exact: bool = False, exact_cap: int = EXACT_STATE_CAP) -> List[np.ndarray]:
    return list(iterate_distributions(q0, chain, horizon, exact, exact_cap))


def l1_distance(p: np.ndarray, q: np.ndarray):
    p, q = np.asarray(p), np.asarray(q)
    if p.shape != q.shape:
        raise DimensionMismatchError(f"l1 distance between shapes {p.shape} and {q.shape}")
    dist = np.abs(p - q).sum()
    return dist if is_exact(p) and is_exact(q) else float(dist)


def is_stationary(m: TransitionMatrix, dist: np.ndarray) -> bool:
    """dist P == dist in rational arithmetic."""
    one_step = evolve(dist, [m], 1, exact=True)
    return bool((one_step[1] == one_step[0]).all())


def end_to_end_squared(s: StateSpace) -> np.ndarray:
    arr = np.asarray(s.codes, dtype=np.int64).reshape(len(s), s.N)
    r2 = np.zeros(len(s), dtype=np.int64)
    for j in range(1, s.d + 1):
        disp = (arr == j).sum(axis=1) - (arr == -j).sum(axis=1)
        r2 += disp * disp
    return r2


def expected_end_to_end(s: StateSpace, q: np.ndarray):
    """E|omega_N|^2 under the distribution q over s."""
    q = np.asarray(q)
    if q.shape != (len(s),):
        raise DimensionMismatchError(f"distribution of length {q.shape} for {len(s)} states")
    r2 = end_to_end_squared(s)
    if is_exact(q):
        return sum((qi * int(x) for qi, x in zip(q, r2)), Fraction(0))
    return float(np.dot(q, r2))


# * -------------------- graph structure -------------------- *


def _support(m: Union[TransitionMatrix, sp.spmatrix, np.ndarray]) -> sp.csr_matrix:
    A = m.counts if isinstance(m, TransitionMatrix) else sp.csr_matrix(m)
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(f"square matrix expected, got {A.shape}")
    A = sp.csr_matrix(A != 0, dtype=np.int8)
    A.eliminate_zeros()
    return A


def is_irreducible(m) -> bool:
    A = _support(m)
    if A.shape[0] == 0:
        return False
    n_comp, _ = connected_components(A, directed=True, connection="strong")
    return n_comp == 1


def component_periods(m) -> List[int]:
    """Period of every strongly connected component that contains a cycle.

    Breadth-first levels inside a component; the period is the gcd of
    level(u) + 1 - level(v) over the component's edges u -> v.
    """
    A = _support(m)
    n = A.shape[0]
    _, labels = connected_components(A, directed=True, connection="strong")
    coo = A.tocoo()
    inside = labels[coo.row] == labels[coo.col]
    rows, cols = coo.row[inside], coo.col[inside]
    if rows.size == 0:
        return []
    inner = sp.csr_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(n, n))
    level = np.full(n, -1, dtype=np.int64)
    comps = np.unique(labels[rows])
    for comp in comps:
        root = int(np.flatnonzero(labels == comp)[0])
        order, pred = breadth_first_order(inner, root, directed=True, return_predecessors=True)
        level[root] = 0
        for v in order[1:]:
            level[v] = level[pred[v]] + 1
    diffs = np.abs(level[rows] + 1 - level[cols])
    edge_comp = labels[rows]
    return [int(np.gcd.reduce(diffs[edge_comp == comp])) for comp in comps]


def is_aperiodic(m) -> bool:
    """Every cyclic strongly connected component has period 1."""
    A = _support(m)
    if A.shape[0] > 0 and A.diagonal().all() and is_irreducible(A):
        return True
    periods = component_periods(A)
    return bool(periods) and all(p == 1 for p in periods)


def minimal_irreducible_prefix(s: StateSpace, tau: Walk, M0: int,
                               pivot: Optional[TransitionMatrix] = None) -> int:
    """Smallest M >= M0 for which the pivot matrix restricted to the walks
    sharing tau's first M steps is irreducible."""
    if tau.length != s.N:
        raise InvalidLengthError(f"tau has {tau.length} steps, walks have N = {s.N}")
    if tau not in s:
        raise InvalidConfigurationError(f"{format_walk(tau)} is not a self-avoiding walk of the state space")
    if not 1 <= M0 <= s.N:
        raise InvalidLengthError(f"M0 = {M0} outside 1..{s.N}")
    P = pivot if pivot is not None else build_pivot_matrix(s)
    for M in range(M0, s.N + 1):
        members = prefix_class(s, tau.prefix(M))
        if is_irreducible(P.restrict(members)):
            logger.info(f"prefix length {M}: {len(members)} walks, restriction irreducible")
            return M
        logger.info(f"prefix length {M}: {len(members)} walks, restriction reducible")
    raise AssertionError("a single walk always gives an irreducible 1x1 restriction")


# * -------------------- convergence audits -------------------- *


@dataclass
class ConvergenceTrace:
    name: str
    distances: List[float] = field(repr=False)
    first_below: Optional[int]
    monotone: bool

    @property
    def converged(self) -> bool:
        return self.first_below is not None

    def as_dict(self):
        return {
            "first_below": self.first_below,
            "monotone": self.monotone,
            "steps": len(self.distances) - 1,
            "final_distance": self.distances[-1],
        }


def _trace(name, X0, chain, target, horizon, tol, slack, progress=None):
    """Max over the rows of X0 of the l1 distance to `target`, until every row
    is below tol or the horizon is reached."""
    distances: List[float] = []
    prev = None
    monotone = True
    first_below = None
    X = None
    steps = iterate_distributions(X0, chain, horizon)
    for n, X in enumerate(tqdm(steps, total=horizon + 1, disable=not progress_enabled(progress), desc=name)):
        dist = np.abs(X - target).sum(axis=1)
        if prev is not None and (dist > prev + slack).any():
            monotone = False
        prev = dist
        distances.append(float(dist.max()))
        if distances[-1] < tol:
            first_below = n
            break
    if first_below is None:
        logger.warning(f"{name}: l1 distance {distances[-1]:.3g} still above {tol} at n = {horizon}")
    if not monotone:
        logger.warning(f"{name}: l1 distance increased at some n")
    return ConvergenceTrace(name, distances, first_below, monotone), X


@dataclass
class LimitAudit:
    tol: float
    horizon: int
    traces: List[ConvergenceTrace]
    closed_form_ok: Optional[bool] = None

    @property
    def passed(self) -> bool:
        return all(t.converged and t.monotone for t in self.traces) and self.closed_form_ok is not False

    def as_dict(self):
        return {
            "tol": self.tol,
            "horizon": self.horizon,
            "traces": {t.name: t.as_dict() for t in self.traces},
            "closed_form_ok": self.closed_form_ok,
            "passed": self.passed,
        }


def limit_audit(s: StateSpace, horizon: int = 10_000, tol: float = CONVERGENCE_TOL,
                slack: float = MONOTONE_SLACK, pivot: Optional[TransitionMatrix] = None,
                plus: Optional[Tuple[TransitionMatrix, TransitionMatrix]] = None,
                progress: Optional[bool] = None) -> LimitAudit:
    """Convergence of P^n, P1 P2^n and of every block Q^n to their uniform
    stationary laws, started from the straight walk of every class."""
    P = pivot if pivot is not None else build_pivot_matrix(s)
    c_n, a_n, _ = counts(s)
    straight = s.straight_indices()
    X0 = np.zeros((len(straight), c_n))
    X0[np.arange(len(straight)), straight] = 1.0
    pi = uniform(c_n)
    traces = []
    trace, _ = _trace("pivot", X0, [P], pi, horizon, tol, slack, progress)
    traces.append(trace)
    if s.N < 2:
        return LimitAudit(tol, horizon, traces)
    P1, P2 = plus if plus is not None else build_pivot_plus_matrices(s)
    trace, X = _trace("pivot_plus", X0, [P1, P2], pi, horizon, tol, slack, progress)
    traces.append(trace)
    closed_form_ok = None
    if trace.converged:
        # every row of P1 P2^n close to 1 / (2d a_N) = 1 / c_N
        closed_form_ok = bool(np.abs(X - 1.0 / (2 * s.d * a_n)).max() <= tol) and c_n == 2 * s.d * a_n
    for code in directions(s.d):
        Q = q_block(s, P2, code)
        start = s.index[(code,) * s.N] - s.class_block(code).start
        trace, _ = _trace(f"block:{code:+d}", point_mass(Q.size, start)[None, :], [Q],
                          uniform(Q.size), horizon, tol, slack, progress)
        traces.append(trace)
    audit = LimitAudit(tol, horizon, traces, closed_form_ok)
    logger.info(f"limit audit over {len(traces)} chains: {'passed' if audit.passed else 'failed'}")
    return audit


@dataclass
class ConjectureScan:
    start: str
    horizon: int
    rows: List[Tuple[int, float, float, bool]]
    n0: Optional[int]
    matched_start: bool = True

    header = ("n", "l1_pivot", "l1_pivot_plus", "p_leads")

    def summary(self):
        return {
            "n0_empirical": self.n0,
            "horizon": self.horizon,
            "matched_start": self.matched_start,
            "start": self.start,
            "final_l1_pivot": self.rows[-1][1],
            "final_l1_pivot_plus": self.rows[-1][2],
        }


def conjecture_scan(s: StateSpace, horizon: int = 200, start: Optional[Walk] = None,
                    pivot: Optional[TransitionMatrix] = None,
                    plus: Optional[Tuple[TransitionMatrix, TransitionMatrix]] = None) -> ConjectureScan:
    """Compare ||q_n - pi||_1 (pivot) with ||p_n - pi||_1 (pivot+) when both
    chains start from a point mass at the same walk."""
    if s.N < 2:
        raise InvalidConfigurationError(f"pivot+ needs N >= 2, got N={s.N}")
    start = start if start is not None else straight_walks(s.d, s.N)[0]
    if start not in s:
        raise InvalidConfigurationError(f"start walk {format_walk(start)} is not in the state space")
    P = pivot if pivot is not None else build_pivot_matrix(s)
    P1, P2 = plus if plus is not None else build_pivot_plus_matrices(s)
    q0 = point_mass(len(s), s.index_of(start))
    pi = uniform(len(s))
    rows = []
    for n, (q, p) in enumerate(zip(iterate_distributions(q0, [P], horizon),
                                   iterate_distributions(q0, [P1, P2], horizon))):
        lq, lp = l1_distance(q, pi), l1_distance(p, pi)
        rows.append((n, lq, lp, lp <= lq))
    n0 = None
    for n, _, _, leads in reversed(rows[1:]):
        if not leads:
            break
        n0 = n
    behind = sum(1 for r in rows[1:] if not r[3])
    if n0 is None:
        logger.warning(f"pivot+ is not ahead of pivot at n = {horizon}")
    else:
        logger.info(f"pivot+ ahead of pivot for every n in [{n0}, {horizon}] ({behind} steps behind before)")
    return ConjectureScan(format_walk(start), horizon, rows, n0)


# * -------------------- structural audits -------------------- *


def jump_limit_structure(s: StateSpace, P1: TransitionMatrix,
                         tol: float = NORMALIZATION_TOL) -> Dict[str, bool]:
    """Block structure of the pivot+ limit: P1 ~ e'pi over (improper, classes),
    lim P2^n = diag(e'rho) in G over (classes, singletons) and not similar to
    e'pi there, P1 lim P2^n = e'pi."""
    c_n, a_n, _ = counts(s)
    if c_n >= DENSE_STATE_CAP:
        raise CapacityError("dense block-structure audit", c_n, DENSE_STATE_CAP)
    labels = s.class_labels()
    improper = gmethod.Partition.improper(c_n)
    classes = gmethod.Partition.from_labels(labels)
    singletons = gmethod.Partition.singletons(c_n)
    same_class = (labels[:, None] == labels[None, :])
    jump = P1.to_dense()
    stationary = np.full((c_n, c_n), 1.0 / c_n)
    limit = same_class / a_n
    # P1 lim P2^n in integer counts: row sums of P1 counts over each class block
    product_counts = P1.counts @ sp.csr_matrix(same_class.astype(np.int64))
    lo, _ = gmethod.support_bounds(gmethod.reduce(stationary, improper, classes, tol))
    return {
        "jump_in_G": gmethod.in_G(jump, improper, classes, tol),
        "jump_similar_to_stationary": gmethod.similar(jump, stationary, improper, classes, tol),
        "jump_has_minimal_support": P1.nnz == lo,
        "limit_in_G": gmethod.in_G(limit, classes, singletons, tol),
        "limit_similar_to_stationary": gmethod.similar(limit, stationary, classes, singletons, tol),
        "jump_times_limit_is_stationary": bool((product_counts.toarray() == 1).all())
        and P1.denominator * a_n == c_n,
    }


def audit_chains(s: StateSpace, horizon: int = 10_000, tol: float = CONVERGENCE_TOL,
                 slack: float = MONOTONE_SLACK, n_jobs: int = 1,
                 progress: Optional[bool] = None,
                 norm_tol: float = NORMALIZATION_TOL,
                 pivot: Optional[TransitionMatrix] = None) -> Dict[str, object]:
    """Every exact property of P, P1, P2 and the Q blocks, plus the limit audit.

    `pivot` is a prebuilt pivot matrix of `s`, built here when not given.
    """
    P = pivot if pivot is not None else build_pivot_matrix(s, n_jobs=n_jobs, progress=progress)
    exact = len(s) <= EXACT_STATE_CAP
    report: Dict[str, object] = {
        "pivot": {
            **P.summary(),
            "stationary": is_stationary(P, uniform(len(s), exact=True)) if exact else None,
        }
    }
    checks = [report["pivot"]["symmetric"], report["pivot"]["irreducible"], report["pivot"]["aperiodic"],
              report["pivot"]["stationary"] is not False]
    plus = None
    if s.N >= 2:
        plus = P1, P2 = build_pivot_plus_matrices(s, n_jobs=n_jobs, progress=progress)
        labels = s.class_labels()
        coo2 = P2.counts.tocoo()
        dense1 = P1.counts.toarray()
        straight = np.zeros(len(s), dtype=bool)
        straight[s.straight_indices()] = True
        blocks = {}
        for code, Q in q_blocks(s, P2).items():
            blocks[f"{code:+d}"] = {
                **Q.summary(),
                "stationary": is_stationary(Q, uniform(Q.size, exact=True)) if exact else None,
            }
            checks += [blocks[f"{code:+d}"][k] is not False
                       for k in ("symmetric", "irreducible", "aperiodic", "stationary")]
        report["pivot_plus"] = {
            "p2_block_diagonal": bool((labels[coo2.row] == labels[coo2.col]).all()),
            "p1_rows_identical": bool((dense1 == dense1[0]).all()),
            "p1_straight_columns_only": bool((dense1[:, straight] == 1).all() and (dense1[:, ~straight] == 0).all()),
            "p1_denominator": P1.denominator,
            "blocks": blocks,
        }
        checks += [report["pivot_plus"][k] for k in
                   ("p2_block_diagonal", "p1_rows_identical", "p1_straight_columns_only")]
        if len(s) < DENSE_STATE_CAP:
            structure = jump_limit_structure(s, P1, norm_tol)
            report["jump_limit_structure"] = structure
            # the limit is not similar to e'pi over (classes, singletons)
            checks += [not v if k == "limit_similar_to_stationary" else v for k, v in structure.items()]
    limits = limit_audit(s, horizon, tol, slack, pivot=P, plus=plus, progress=progress)
    report["limit_audit"] = limits.as_dict()
    checks.append(limits.passed)
    report["passed"] = all(bool(c) for c in checks)
    return report
