"""
Pivot and pivot-plus samplers as streaming Markov chains.

pivot        k uniform on {0..N-1}, T uniform on O_d, accept iff self-avoiding.
pivot_plus   time 1: uniform straight walk; afterwards k uniform on {1..N-1}.
             The first step is never moved again, so the chain stays in the
             first-step class it jumped to.
restricted   pivot_plus without the jump: k on {1..N-1} from the start walk.
             Confined to the start walk's class; suits symmetry-invariant
             observables such as the end-to-end distance.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from omegaconf import MISSING
from tqdm import tqdm

from .errors import DimensionMismatchError, InvalidConfigurationError, InvalidLengthError
from .lattice_walk import (
    Walk,
    codes_self_avoiding,
    parse_walk,
    points_of,
    straight_walks,
)
from .symmetry_group import LatticeSymmetry, enumerate_group
from .utils import progress_enabled, replica_rng

logger = logging.getLogger(__name__)

VARIANTS = ("pivot", "pivot_plus", "restricted")
VARIANT_ALIASES = {"pivot+": "pivot_plus", "pivot-plus": "pivot_plus"}


def normalize_variant(variant: str) -> str:
    variant = VARIANT_ALIASES.get(variant, variant)
    if variant not in VARIANTS:
        raise InvalidConfigurationError(
            f"unknown variant {variant!r}, choose between {{pivot | pivot+ | restricted}}"
        )
    return variant


@dataclass
class ChainConfig:
    d: int = field(default=MISSING, metadata={"help": "lattice dimension"})
    N: int = field(default=MISSING, metadata={"help": "walk length (number of steps)"})
    variant: str = field(
        default="pivot", metadata={"help": "chain, choose between {pivot | pivot+ | restricted}"}
    )
    seed: int = field(default=0, metadata={"help": "64-bit seed of the replica substreams"})
    initial: Optional[str] = field(
        default=None,
        metadata={
            "help": "start walk in walk text format (default: straight walk along e_1); "
            "for pivot+ it is only the throwaway walk of time 0"
        },
    )
    check: bool = field(
        default=False, metadata={"help": "re-verify self-avoidance of every accepted move"}
    )

    def __post_init__(self):
        self.variant = normalize_variant(self.variant)

    def validate(self) -> "ChainConfig":
        if self.d < 1:
            raise InvalidConfigurationError(f"d must be >= 1, got {self.d}")
        if self.variant == "pivot" and self.N < 1:
            raise InvalidConfigurationError(f"pivot needs N >= 1, got N={self.N}")
        if self.variant in ("pivot_plus", "restricted") and self.N < 2:
            raise InvalidConfigurationError(
                f"{self.variant} needs N >= 2 (the pivot is drawn from 1..N-1), got N={self.N}"
            )
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        w = self.initial_walk()
        if w.length != self.N or not codes_self_avoiding(w.codes, self.d):
            raise InvalidConfigurationError(
                f"initial walk {self.initial!r} is not a {self.N}-step self-avoiding walk"
            )
        return self

    def initial_walk(self) -> Walk:
        if self.initial is None:
            return straight_walks(self.d, self.N)[0]
        return parse_walk(self.initial, self.d)


class PivotKernel(object):
    """One pivot move: uniform pivot in [min_pivot, N-1], uniform T in O_d."""

    def __init__(self, d: int, N: int, min_pivot: int = 0, check: bool = False):
        if not 0 <= min_pivot <= N - 1:
            raise InvalidLengthError(f"no admissible pivot in [{min_pivot}, {N - 1}]")
        self.d = d
        self.N = N
        self.min_pivot = min_pivot
        self.check = check
        self.group = enumerate_group(d)
        self.tables = [T.step_table() for T in self.group]

    @property
    def n_pivots(self) -> int:
        return self.N - self.min_pivot

    @property
    def denominator(self) -> int:
        return self.n_pivots * len(self.group)

    def propose(self, codes: Tuple[int, ...], k: int, t: int) -> Tuple[int, ...]:
        table = self.tables[t]
        return codes[:k] + tuple(table[c] for c in codes[k:])

    def step(self, codes: Tuple[int, ...], rng: np.random.Generator) -> Tuple[Tuple[int, ...], bool]:
        k = self.min_pivot + int(rng.integers(self.n_pivots))
        t = int(rng.integers(len(self.group)))
        cand = self.propose(codes, k, t)
        if codes_self_avoiding(cand, self.d):
            if self.check:
                pts = points_of(cand, self.d)
                assert len(set(pts)) == len(pts), f"accepted a non self-avoiding walk {cand}"
            return cand, True
        return codes, False


def pivot_move(w: Walk, k: int, T: LatticeSymmetry, min_pivot: int = 0) -> Walk:
    """Keep omega_0..omega_k, map the tail through T about omega_k.

    Since T is linear, omega'_i = omega_k + T(omega_i - omega_k) amounts to
    applying T to every step after the k-th one.
    """
    if not min_pivot <= k <= w.length - 1:
        raise InvalidLengthError(f"pivot {k} outside {min_pivot}..{w.length - 1}")
    if T.dimension != w.dimension:
        raise DimensionMismatchError(
            f"symmetry of O_{T.dimension} applied to a walk on Z^{w.dimension}"
        )
    table = T.step_table()
    return Walk(w.dimension, w.codes[:k] + tuple(table[c] for c in w.codes[k:]))


def pivot_step(w: Walk, rng: np.random.Generator) -> Walk:
    codes, _ = PivotKernel(w.dimension, w.length, 0).step(w.codes, rng)
    return Walk(w.dimension, codes)


def pivot_plus_init(d: int, N: int, rng: np.random.Generator) -> Walk:
    if N < 2:
        raise InvalidConfigurationError(f"pivot+ needs N >= 2, got N={N}")
    return straight_walks(d, N)[int(rng.integers(2 * d))]


def pivot_plus_step(w: Walk, rng: np.random.Generator) -> Walk:
    if w.length < 2:
        raise InvalidConfigurationError(f"pivot+ needs N >= 2, got N={w.length}")
    codes, _ = PivotKernel(w.dimension, w.length, 1).step(w.codes, rng)
    return Walk(w.dimension, codes)


# * -------------------- observers -------------------- *


class Observer(object):
    """Receives the step codes of the walk visited at each time t = 0..n.

    Observers of independent replicas are combined with `merge`, which is
    associative; merging in replica order gives reproducible results.
    """

    def observe(self, t: int, codes: Tuple[int, ...]):
        raise NotImplementedError

    def merge(self, other: "Observer") -> "Observer":
        raise NotImplementedError

    def summary(self) -> Dict:
        raise NotImplementedError


class HistogramObserver(Observer):
    """State counts, of every visit or only of the visits at time `at_time`."""

    def __init__(self, at_time: Optional[int] = None):
        self.at_time = at_time
        self.counts: Counter = Counter()

    def observe(self, t, codes):
        if self.at_time is None or t == self.at_time:
            self.counts[codes] += 1

    def merge(self, other):
        self.counts.update(other.counts)
        return self

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def frequencies(self, order: Optional[Sequence[Tuple[int, ...]]] = None) -> np.ndarray:
        keys = order if order is not None else sorted(self.counts)
        total = max(self.total, 1)
        return np.array([self.counts.get(k, 0) / total for k in keys])

    def summary(self):
        return {"total": self.total, "distinct": len(self.counts)}


class EndToEndObserver(Observer):
    """Accumulates |omega_N|^2 and |omega_N| over the observed visits."""

    def __init__(self, at_time: Optional[int] = None):
        self.at_time = at_time
        self.n = 0
        self.sum_r2 = 0
        self.sum_r = 0.0

    def observe(self, t, codes):
        if self.at_time is not None and t != self.at_time:
            return
        end = Counter()
        for c in codes:
            end[abs(c)] += 1 if c > 0 else -1
        r2 = sum(v * v for v in end.values())
        self.n += 1
        self.sum_r2 += r2
        self.sum_r += math.sqrt(r2)

    def merge(self, other):
        self.n += other.n
        self.sum_r2 += other.sum_r2
        self.sum_r += other.sum_r
        return self

    def summary(self):
        if self.n == 0:
            return {"n": 0, "mean_r2": None, "mean_r": None}
        return {"n": self.n, "mean_r2": self.sum_r2 / self.n, "mean_r": self.sum_r / self.n}


class TrajectoryRecorder(Observer):
    def __init__(self):
        self.codes: List[Tuple[int, ...]] = []

    def observe(self, t, codes):
        self.codes.append(codes)

    def merge(self, other):
        self.codes.extend(other.codes)
        return self

    def summary(self):
        return {"length": len(self.codes)}


class ClassKeyObserver(Observer):
    """Checks that the first step does not change from time `since` on."""

    def __init__(self, since: int = 1):
        self.since = since
        self.constant = True
        self._key: Optional[int] = None

    def observe(self, t, codes):
        if t < self.since:
            return
        if self._key is None:
            self._key = codes[0]
        elif codes[0] != self._key:
            self.constant = False

    def merge(self, other):
        self.constant = self.constant and other.constant
        self._key = None
        return self

    def summary(self):
        return {"constant": self.constant}


@dataclass
class ChainSummary:
    variant: str
    n_steps: int
    final: Walk
    accepted: int
    proposed: int

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")


def _kernel_for(cfg: ChainConfig) -> PivotKernel:
    return PivotKernel(cfg.d, cfg.N, 0 if cfg.variant == "pivot" else 1, check=cfg.check)


def _run(cfg, kernel, n_steps, observers, rng) -> ChainSummary:
    codes = cfg.initial_walk().codes
    for obs in observers:
        obs.observe(0, codes)
    accepted = proposed = 0
    straight = None
    if cfg.variant == "pivot_plus":
        straight = [w.codes for w in straight_walks(cfg.d, cfg.N)]
    for t in range(1, n_steps + 1):
        if straight is not None and t == 1:
            codes = straight[int(rng.integers(2 * cfg.d))]
        else:
            codes, ok = kernel.step(codes, rng)
            accepted += ok
            proposed += 1
        for obs in observers:
            obs.observe(t, codes)
    return ChainSummary(cfg.variant, n_steps, Walk(cfg.d, codes), accepted, proposed)


def run_chain(
    cfg: ChainConfig,
    n_steps: int,
    observers: Sequence[Observer] = (),
    replica: int = 0,
) -> ChainSummary:
    """Run one chain for `n_steps` transitions from time 0.

    pivot_plus applies the straight-walk jump once, then n_steps - 1 pivot
    moves; the other variants apply n_steps pivot moves. The random stream is
    substream `replica` of `cfg.seed`.
    """
    cfg.validate()
    if n_steps < 0:
        raise InvalidLengthError(f"n_steps must be >= 0, got {n_steps}")
    return _run(cfg, _kernel_for(cfg), n_steps, observers, replica_rng(cfg.seed, replica))


def _run_batch(cfg, n_steps, replicas, make_observers):
    kernel = _kernel_for(cfg)
    merged = make_observers()
    accepted = proposed = 0
    for i in replicas:
        observers = make_observers()
        summary = _run(cfg, kernel, n_steps, observers, replica_rng(cfg.seed, i))
        accepted += summary.accepted
        proposed += summary.proposed
        for m, o in zip(merged, observers):
            m.merge(o)
    return merged, accepted, proposed


def run_replicas(
    cfg: ChainConfig,
    n_replicas: int,
    n_steps: int,
    make_observers: Callable[[], List[Observer]],
    n_jobs: int = 1,
    batch_size: int = 10_000,
    progress: Optional[bool] = None,
) -> Tuple[List[Observer], float]:
    """Independent replicas 0..n_replicas-1, observers merged in replica order.

    Returns the merged observers and the overall acceptance rate.
    """
    cfg.validate()
    if n_replicas < 1:
        raise InvalidConfigurationError(f"need at least one replica, got {n_replicas}")
    batches = [
        range(lo, min(lo + batch_size, n_replicas))
        for lo in range(0, n_replicas, batch_size)
    ]
    logger.info(
        f"running {n_replicas} {cfg.variant} replicas of {n_steps} steps "
        f"(d={cfg.d}, N={cfg.N}, seed={cfg.seed}) in {len(batches)} batches"
    )
    bar = tqdm(batches, disable=not progress_enabled(progress), desc="replicas")
    if n_jobs == 1:
        results = [_run_batch(cfg, n_steps, b, make_observers) for b in bar]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_run_batch)(cfg, n_steps, b, make_observers) for b in bar
        )
    merged = make_observers()
    accepted = proposed = 0
    for observers, acc, prop in results:
        accepted += acc
        proposed += prop
        for m, o in zip(merged, observers):
            m.merge(o)
    rate = accepted / proposed if proposed else float("nan")
    logger.info(f"acceptance rate {rate:.4f}")
    return merged, rate
