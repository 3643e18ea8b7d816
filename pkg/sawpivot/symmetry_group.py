"""
O_d realized as signed permutations of the axes.

T = (perm, signs) acts by T(x)_i = signs_i * x_{perm(i)}, axes 1-based.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Tuple

from .errors import CapacityError, DimensionMismatchError
from .lattice_walk import LatticePoint, directions

logger = logging.getLogger(__name__)

MAX_GROUP_DIMENSION = 6


@dataclass(frozen=True)
class LatticeSymmetry:
    perm: Tuple[int, ...]
    signs: Tuple[int, ...]

    def __post_init__(self):
        d = len(self.perm)
        if len(self.signs) != d:
            raise DimensionMismatchError(
                f"perm has {d} entries but signs has {len(self.signs)}"
            )
        if sorted(self.perm) != list(range(1, d + 1)):
            raise ValueError(f"{self.perm} is not a permutation of 1..{d}")
        if any(s not in (1, -1) for s in self.signs):
            raise ValueError(f"signs must be +-1, got {self.signs}")

    @property
    def dimension(self) -> int:
        return len(self.perm)

    @classmethod
    def identity(cls, d: int) -> "LatticeSymmetry":
        return cls(tuple(range(1, d + 1)), (1,) * d)

    @property
    def is_identity(self) -> bool:
        return self == LatticeSymmetry.identity(self.dimension)

    def map_code(self, code: int) -> int:
        """Image of the unit step with signed axis code `code`."""
        return _step_table(self)[code]

    def step_table(self) -> Dict[int, int]:
        return _step_table(self)

    def __str__(self):
        return "T(" + ",".join(
            f"{'+' if s > 0 else '-'}x{p}" for p, s in zip(self.perm, self.signs)
        ) + ")"


@lru_cache(maxsize=None)
def _step_table(T: LatticeSymmetry) -> Dict[int, int]:
    # T(e_a) is nonzero only in coordinate i with perm(i) = a
    d = T.dimension
    inv = {a: i for i, a in enumerate(T.perm, start=1)}
    table = {}
    for code in directions(d):
        a, s = abs(code), (1 if code > 0 else -1)
        i = inv[a]
        table[code] = s * T.signs[i - 1] * i
    return table


@lru_cache(maxsize=None)
def enumerate_group(d: int) -> Tuple[LatticeSymmetry, ...]:
    """All 2^d * d! signed permutations, identity first.

    Ordered lexicographically by perm, then by signs with +1 before -1.
    """
    if d < 1:
        raise DimensionMismatchError(f"dimension must be >= 1, got {d}")
    if d > MAX_GROUP_DIMENSION:
        raise CapacityError("lattice symmetry group", 2 ** d * math.factorial(d),
                            2 ** MAX_GROUP_DIMENSION * math.factorial(MAX_GROUP_DIMENSION))
    group = tuple(
        LatticeSymmetry(perm, signs)
        for perm in itertools.permutations(range(1, d + 1))
        for signs in itertools.product((1, -1), repeat=d)
    )
    assert len(group) == 2 ** d * math.factorial(d)
    logger.debug(f"enumerated |O_{d}| = {len(group)}")
    return group


def apply(T: LatticeSymmetry, x: LatticePoint) -> LatticePoint:
    if len(x) != T.dimension:
        raise DimensionMismatchError(
            f"point of dimension {len(x)} given to a symmetry of dimension {T.dimension}"
        )
    return tuple(s * x[p - 1] for p, s in zip(T.perm, T.signs))


def compose(A: LatticeSymmetry, B: LatticeSymmetry) -> LatticeSymmetry:
    """A o B, i.e. apply(compose(A, B), x) == apply(A, apply(B, x))."""
    if A.dimension != B.dimension:
        raise DimensionMismatchError(f"cannot compose O_{A.dimension} with O_{B.dimension}")
    perm = tuple(B.perm[a - 1] for a in A.perm)
    signs = tuple(sa * B.signs[a - 1] for a, sa in zip(A.perm, A.signs))
    return LatticeSymmetry(perm, signs)


def inverse(T: LatticeSymmetry) -> LatticeSymmetry:
    d = T.dimension
    inv = [0] * d
    for i, p in enumerate(T.perm, start=1):
        inv[p - 1] = i
    return LatticeSymmetry(tuple(inv), tuple(T.signs[i - 1] for i in inv))


def group_index(d: int) -> Dict[LatticeSymmetry, int]:
    return {T: i for i, T in enumerate(enumerate_group(d))}


def mapping_to(d: int, source: int, target: int) -> List[LatticeSymmetry]:
    """Symmetries sending unit step `source` to `target` (step codes)."""
    return [T for T in enumerate_group(d) if T.map_code(source) == target]
