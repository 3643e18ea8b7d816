from .errors import *  # noqa
from .lattice_walk import Step, Walk, format_walk, parse_walk, straight_walks  # noqa
from .symmetry_group import LatticeSymmetry, enumerate_group  # noqa
from .enumeration import StateSpace, counts, enumerate_walks, prefix_class  # noqa
from .pivot_chains import ChainConfig, PivotKernel, run_chain, run_replicas  # noqa
from .exact_markov import (  # noqa
    TransitionMatrix,
    build_pivot_matrix,
    build_pivot_plus_matrices,
    conjecture_scan,
    evolve,
    limit_audit,
)
from .gmethod import Partition, reduce, similar  # noqa
from .utils import __version__  # noqa
