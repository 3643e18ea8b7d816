"""
Lattice points, unit steps and walks on Z^d.

A step is stored as a signed axis code: +j is e_j, -j is -e_j (axes are
1-based). A walk keeps its step codes; the lattice points omega_0..omega_N
are derived from them by prefix sums, omega_0 being the origin.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DimensionMismatchError, InvalidLengthError, WalkFormatError

logger = logging.getLogger(__name__)

LatticePoint = Tuple[int, ...]


class Step(NamedTuple):
    axis: int
    sign: int

    @property
    def code(self) -> int:
        return self.sign * self.axis

    @classmethod
    def from_code(cls, code: int) -> "Step":
        if code == 0:
            raise WalkFormatError("step code 0 is not a unit step")
        return cls(abs(code), 1 if code > 0 else -1)

    def displacement(self, d: int) -> LatticePoint:
        check_code(self.code, d)
        vec = [0] * d
        vec[self.axis - 1] = self.sign
        return tuple(vec)

    def __str__(self):
        return f"{'+' if self.sign > 0 else '-'}{self.axis}"


StepLike = Union[Step, int]


def step_code(step: StepLike) -> int:
    return step.code if isinstance(step, Step) else int(step)


def check_code(code: int, d: int):
    if code == 0 or abs(code) > d:
        raise DimensionMismatchError(f"step {code:+d} is not a unit step of Z^{d}")


def directions(d: int) -> List[int]:
    """E_d as step codes, in the order e_1, ..., e_d, -e_1, ..., -e_d."""
    return list(range(1, d + 1)) + [-j for j in range(1, d + 1)]


def step_rank(code: int, d: int) -> int:
    """Position of a step in the canonical order +1 < ... < +d < -1 < ... < -d."""
    return code - 1 if code > 0 else d - code - 1


@dataclass(frozen=True)
class Walk:
    dimension: int
    codes: Tuple[int, ...]

    def __post_init__(self):
        if self.dimension < 1:
            raise DimensionMismatchError(f"dimension must be >= 1, got {self.dimension}")
        object.__setattr__(self, "codes", tuple(int(c) for c in self.codes))
        for c in self.codes:
            check_code(c, self.dimension)

    @classmethod
    def from_steps(cls, steps: Iterable[StepLike], d: int) -> "Walk":
        return cls(d, tuple(step_code(s) for s in steps))

    @property
    def length(self) -> int:
        return len(self.codes)

    @property
    def steps(self) -> Tuple[Step, ...]:
        return tuple(Step.from_code(c) for c in self.codes)

    @cached_property
    def points(self) -> List[LatticePoint]:
        return points_of(self.codes, self.dimension)

    @property
    def end_point(self) -> LatticePoint:
        return self.points[-1]

    def end_to_end_squared(self) -> int:
        return sum(x * x for x in self.end_point)

    def prefix(self, m: int) -> "Walk":
        if m < 0 or m > self.length:
            raise InvalidLengthError(f"prefix length {m} outside 0..{self.length}")
        return Walk(self.dimension, self.codes[:m])

    def __str__(self):
        return format_walk(self)


def points_of(steps: Sequence[StepLike], d: int) -> List[LatticePoint]:
    codes = [step_code(s) for s in steps]
    for c in codes:
        check_code(c, d)
    disp = np.zeros((len(codes) + 1, d), dtype=np.int64)
    if codes:
        codes_arr = np.asarray(codes)
        disp[np.arange(1, len(codes) + 1), np.abs(codes_arr) - 1] = np.sign(codes_arr)
    return [tuple(int(x) for x in row) for row in np.cumsum(disp, axis=0)]


def codes_self_avoiding(codes: Sequence[int], d: int) -> bool:
    """Self-avoidance of a step-code sequence; one pass with a point set."""
    pos = [0] * d
    seen = {tuple(pos)}
    for c in codes:
        if c > 0:
            pos[c - 1] += 1
        else:
            pos[-c - 1] -= 1
        p = tuple(pos)
        if p in seen:
            return False
        seen.add(p)
    return True


def is_self_avoiding(w: Walk) -> bool:
    return codes_self_avoiding(w.codes, w.dimension)


def straight_walks(d: int, N: int) -> List[Walk]:
    """B_N: the 2d walks whose N steps are all equal, in E_d order."""
    if N < 1:
        raise InvalidLengthError(f"straight walks need N >= 1, got {N}")
    if d < 1:
        raise DimensionMismatchError(f"dimension must be >= 1, got {d}")
    return [Walk(d, (c,) * N) for c in directions(d)]


def is_straight(w: Walk) -> bool:
    return w.length >= 1 and all(c == w.codes[0] for c in w.codes)


def class_key(w: Walk) -> Step:
    if w.length < 1:
        raise InvalidLengthError("the empty walk has no first step")
    return Step.from_code(w.codes[0])


# * -------------------- walk text format -------------------- *


def format_walk(w: Walk) -> str:
    return ",".join(f"{c:+d}" for c in w.codes)


def parse_walk(text: str, d: int) -> Walk:
    text = text.strip()
    if not text:
        return Walk(d, ())
    try:
        codes = tuple(int(tok) for tok in text.split(","))
    except ValueError as e:
        raise WalkFormatError(f"bad walk {text!r}") from e
    if any(c == 0 for c in codes):
        raise WalkFormatError(f"bad walk {text!r}: axis 0")
    return Walk(d, codes)


def parse_walks(lines: Iterable[str], d: int) -> List[Walk]:
    walks = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        walks.append(parse_walk(line, d))
    return walks


def read_walks(path: str, d: int) -> List[Walk]:
    with open(path) as f:
        return parse_walks(f, d)


def write_walks(path: str, walks: Iterable[Walk], comments: Optional[Sequence[str]] = None):
    n = 0
    with open(path, "w") as f:
        for c in comments or []:
            f.write(f"# {c}\n")
        for w in walks:
            f.write(format_walk(w) + "\n")
            n += 1
    logger.info(f"wrote {n} walks to {path}")
