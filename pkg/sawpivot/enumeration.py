"""
Exact enumeration of the N-step self-avoiding walks on Z^d.

The state space lists every walk once, grouped by first step in the order
e_1, ..., e_d, -e_1, ..., -e_d and, inside a group, in lexicographic step
order (+1 < +2 < ... < -1 < -2 < ...). Depth-first search in that step order
produces exactly this order.
"""

import bisect
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from .errors import CapacityError, DimensionMismatchError, InvalidLengthError
from .lattice_walk import (
    Walk,
    codes_self_avoiding,
    directions,
    step_rank,
    write_walks,
)
from .utils import write_json

logger = logging.getLogger(__name__)

DEFAULT_WALK_CAP = 1_000_000


@dataclass
class StateSpace:
    d: int
    N: int
    codes: List[Tuple[int, ...]]
    class_offsets: List[Tuple[int, int]]
    index: Dict[Tuple[int, ...], int] = field(init=False, repr=False)
    _rank_keys: List[Tuple[int, ...]] = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {c: i for i, c in enumerate(self.codes)}
        assert len(self.index) == len(self.codes), "duplicate walks in state space"
        self._rank_keys = [tuple(step_rank(c, self.d) for c in w) for w in self.codes]

    def __len__(self):
        return len(self.codes)

    def __contains__(self, w: Walk) -> bool:
        return w.dimension == self.d and w.codes in self.index

    @property
    def walks(self) -> List[Walk]:
        return [Walk(self.d, c) for c in self.codes]

    def walk(self, i: int) -> Walk:
        return Walk(self.d, self.codes[i])

    def index_of(self, w: Walk) -> int:
        if w.dimension != self.d:
            raise DimensionMismatchError(f"walk on Z^{w.dimension} looked up in Z^{self.d}")
        return self.index[w.codes]

    def class_block(self, code: int) -> range:
        """Index range of the first-step class of step code `code`."""
        start, length = self.class_offsets[step_rank(code, self.d)]
        return range(start, start + length)

    def class_labels(self) -> np.ndarray:
        labels = np.empty(len(self), dtype=np.int64)
        for b, (start, length) in enumerate(self.class_offsets):
            labels[start:start + length] = b
        return labels

    def straight_indices(self) -> List[int]:
        return [self.index[(c,) * self.N] for c in directions(self.d)]


def _enumerate_subtree(d: int, N: int, first: int, cap: int) -> List[Tuple[int, ...]]:
    """Depth-first extension of the walks starting with `first`.

    An explicit stack of next-direction cursors, one per depth, keeps the
    lexicographic order without recursing once per step.
    """
    dirs = directions(d)
    moves = [(abs(c) - 1, 1 if c > 0 else -1) for c in dirs]
    out = []
    prefix = [first]
    start = [0] * d
    start[abs(first) - 1] += 1 if first > 0 else -1
    trail = [(0,) * d, tuple(start)]
    occupied = set(trail)
    cursors = [0]

    def retreat():
        cursors.pop()
        if cursors:
            occupied.discard(trail.pop())
            prefix.pop()

    while cursors:
        if len(prefix) == N:
            out.append(tuple(prefix))
            if len(out) > cap:
                raise CapacityError("walk enumeration", len(out), cap)
            retreat()
            continue
        i = cursors[-1]
        if i == len(dirs):
            retreat()
            continue
        cursors[-1] = i + 1
        axis, delta = moves[i]
        p = list(trail[-1])
        p[axis] += delta
        p = tuple(p)
        if p not in occupied:
            occupied.add(p)
            trail.append(p)
            prefix.append(dirs[i])
            cursors.append(0)
    return out


def enumerate_walks(d: int, N: int, cap: int = DEFAULT_WALK_CAP, n_jobs: int = 1) -> StateSpace:
    """Build the canonical state space Omega_N on Z^d.

    Args:
        cap: refuse to hold more than `cap` walks.
        n_jobs: first-step subtrees are enumerated in parallel with joblib;
            the result order does not depend on it.
    """
    if d < 1:
        raise DimensionMismatchError(f"dimension must be >= 1, got {d}")
    if N < 1:
        raise InvalidLengthError(f"walk length must be >= 1, got {N}")
    dirs = directions(d)
    if n_jobs == 1:
        blocks = [_enumerate_subtree(d, N, c, cap) for c in dirs]
    else:
        blocks = Parallel(n_jobs=n_jobs)(
            delayed(_enumerate_subtree)(d, N, c, cap) for c in dirs
        )
    total = sum(len(b) for b in blocks)
    if total > cap:
        raise CapacityError("walk enumeration", total, cap)
    codes, offsets = [], []
    for b in blocks:
        offsets.append((len(codes), len(b)))
        codes.extend(b)
    logger.info(f"enumerated c_{N} = {total} self-avoiding walks on Z^{d}")
    return StateSpace(d=d, N=N, codes=codes, class_offsets=offsets)


def counts(s: StateSpace) -> Tuple[int, int, List[int]]:
    """(c_N, a_N, class sizes in E_d order)."""
    sizes = [length for _, length in s.class_offsets]
    return len(s), sizes[0], sizes


def verify_partition_identity(s: StateSpace) -> bool:
    c_n, a_n, sizes = counts(s)
    return all(x == a_n for x in sizes) and sum(sizes) == c_n == 2 * s.d * a_n


def prefix_class(s: StateSpace, gamma: Walk) -> List[int]:
    """Indices of the walks extending the prefix `gamma` (contiguous in the
    canonical order). A prefix without extensions gives an empty list."""
    if gamma.dimension != s.d:
        raise DimensionMismatchError(f"prefix on Z^{gamma.dimension} for walks on Z^{s.d}")
    if gamma.length > s.N:
        raise InvalidLengthError(f"prefix length {gamma.length} > N = {s.N}")
    if not codes_self_avoiding(gamma.codes, s.d):
        return []
    key = tuple(step_rank(c, s.d) for c in gamma.codes)
    lo = bisect.bisect_left(s._rank_keys, key)
    hi = bisect.bisect_left(s._rank_keys, key + (2 * s.d,))
    return list(range(lo, hi))


def prefix_partition(s: StateSpace, M: int) -> List[List[int]]:
    """The classes K_gamma, gamma in Omega_M, that are nonempty, in canonical order."""
    if M < 1 or M > s.N:
        raise InvalidLengthError(f"prefix length {M} outside 1..{s.N}")
    blocks: List[List[int]] = []
    last = None
    for i, c in enumerate(s.codes):
        head = c[:M]
        if head != last:
            blocks.append([])
            last = head
        blocks[-1].append(i)
    return blocks


def reference_sample_index(s: StateSpace, rng: np.random.Generator) -> int:
    """Uniform first-step class (1/2d), then a uniform member (1/a_N)."""
    start, length = s.class_offsets[int(rng.integers(2 * s.d))]
    return start + int(rng.integers(length))


def reference_sample(s: StateSpace, rng: np.random.Generator) -> Walk:
    return s.walk(reference_sample_index(s, rng))


def dump_state_space(s: StateSpace, walks_path: str, sidecar_path: Optional[str] = None, meta=None):
    c_n, a_n, sizes = counts(s)
    write_walks(walks_path, s.walks, comments=[f"d={s.d} N={s.N} c_N={c_n}"])
    if sidecar_path is not None:
        write_json(sidecar_path, {"d": s.d, "N": s.N, "c_N": c_n, "a_N": a_n,
                                  "class_sizes": sizes}, meta=meta)
