"""
Command-line harness.

    python -m sawpivot enumerate --d 2 --walk-length 10
    python -m sawpivot audit --d 2 --walk-length 4
    python -m sawpivot conjecture --d 2 --walk-length 3 --horizon 200
    python -m sawpivot sample --variant pivot+ --replicas 1000000 --n-steps 5 --walk-length 3
    python -m sawpivot gmethod

Defaults come from conf/run.yaml, command-line flags override them. Output
files carry the version, the configuration and the seed; they hold no
timestamps, so a rerun with the same configuration is byte-identical.
"""

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from omegaconf import MISSING, DictConfig, OmegaConf
from omegaconf.errors import OmegaConfBaseException

from . import exact_markov, gmethod
from .enumeration import dump_state_space, counts, enumerate_walks, verify_partition_identity
from .errors import InvalidConfigurationError, SawError
from .lattice_walk import format_walk, parse_walk, step_rank, Walk
from .pivot_chains import (
    ChainConfig,
    ClassKeyObserver,
    EndToEndObserver,
    HistogramObserver,
    TrajectoryRecorder,
    normalize_variant,
    run_replicas,
)
from .symmetry_group import MAX_GROUP_DIMENSION
from .utils import (
    get_commandline_args,
    run_metadata,
    setup_logging,
    write_csv,
    write_json,
)

logger = logging.getLogger(__name__)

config_path = Path(__file__).resolve().parent / "conf"

COMMANDS = ("enumerate", "audit", "conjecture", "sample", "gmethod")
OBSERVABLES = ("histogram", "end_to_end", "trajectory")
OBSERVABLE_ALIASES = {"end2end": "end_to_end", "end-to-end": "end_to_end"}
FORMATS = ("csv", "json")


@dataclass
class RunConfig:
    command: str = field(default=MISSING, metadata={"help": "one of {enumerate | audit | conjecture | sample | gmethod}"})
    d: int = field(default=2, metadata={"help": "lattice dimension"})
    walk_length: int = field(default=4, metadata={"help": "number of steps N of the walks"})
    horizon: int = field(default=200, metadata={"help": "number of evolution steps"})
    seed: int = field(default=0, metadata={"help": "seed of the sampler and of the random chains"})
    replicas: int = field(default=1000, metadata={"help": "number of independent sampler replicas"})
    n_steps: int = field(default=5, metadata={"help": "transitions per replica"})
    variant: str = field(default="pivot", metadata={"help": "chain, choose between {pivot | pivot+ | restricted}"})
    observe: str = field(default="histogram", metadata={"help": "choose between {histogram | end2end | trajectory}"})
    start: Optional[str] = field(default=None, metadata={"help": "start walk, e.g. +1,+2,+2 (default: straight along e_1)"})
    m0: int = field(default=1, metadata={"help": "smallest prefix length tried by the irreducible-prefix search"})
    tol: float = field(default=1e-6, metadata={"help": "convergence tolerance of the limit audit"})
    norm_tol: float = field(default=1e-12, metadata={"help": "stochasticity / normalization tolerance"})
    property_tol: float = field(default=1e-10, metadata={"help": "tolerance of the structured-matrix property checks"})
    monotone_slack: float = field(default=1e-12, metadata={"help": "allowed increase of a distance between two steps"})
    random_chains: int = field(default=100, metadata={"help": "random chains checked by the gmethod command"})
    n_jobs: int = field(default=1, metadata={"help": "joblib workers"})
    out: str = field(default="outputs", metadata={"help": "output directory"})
    format: str = field(default="json", metadata={"help": "table format, choose between {csv | json}"})
    dump: bool = field(default=False, metadata={"help": "also write the walk list / matrix dumps"})


def load_config(overrides: Optional[dict] = None) -> DictConfig:
    cfg = OmegaConf.structured(RunConfig)
    defaults = config_path / "run.yaml"
    if defaults.exists():
        cfg = OmegaConf.merge(cfg, OmegaConf.load(defaults))
    if overrides:
        cfg = OmegaConf.merge(cfg, overrides)
    return cfg


def validate_config(cfg: DictConfig) -> DictConfig:
    if cfg.command not in COMMANDS:
        raise InvalidConfigurationError(f"unknown command {cfg.command!r}, choose between {COMMANDS}")
    if not 1 <= cfg.d <= MAX_GROUP_DIMENSION:
        raise InvalidConfigurationError(f"--d must be in 1..{MAX_GROUP_DIMENSION}, got {cfg.d}")
    if cfg.walk_length < 1:
        raise InvalidConfigurationError(f"--walk-length must be >= 1, got {cfg.walk_length}")
    cfg.variant = normalize_variant(cfg.variant)
    if cfg.command == "conjecture" and cfg.walk_length < 2:
        raise InvalidConfigurationError("conjecture compares with pivot+, which needs --walk-length >= 2")
    if cfg.command == "sample" and cfg.variant != "pivot" and cfg.walk_length < 2:
        raise InvalidConfigurationError(f"{cfg.variant} needs --walk-length >= 2, got {cfg.walk_length}")
    if cfg.horizon < 0 or cfg.n_steps < 0:
        raise InvalidConfigurationError("--horizon and --n-steps must be >= 0")
    if cfg.replicas < 1:
        raise InvalidConfigurationError(f"--replicas must be >= 1, got {cfg.replicas}")
    cfg.observe = OBSERVABLE_ALIASES.get(cfg.observe, cfg.observe)
    if cfg.observe not in OBSERVABLES:
        raise InvalidConfigurationError(f"--observe must be one of {OBSERVABLES}, got {cfg.observe!r}")
    if cfg.format not in FORMATS:
        raise InvalidConfigurationError(f"--format must be one of {FORMATS}, got {cfg.format!r}")
    if min(cfg.tol, cfg.norm_tol, cfg.property_tol) <= 0 or cfg.monotone_slack < 0:
        raise InvalidConfigurationError("tolerances must be positive")
    if not 0 <= cfg.seed < 2 ** 64:
        raise InvalidConfigurationError(f"--seed must be a 64-bit unsigned integer, got {cfg.seed}")
    return cfg


def _meta(cfg):
    return run_metadata(OmegaConf.to_container(cfg, resolve=True), cfg.seed)


def _path(cfg, name):
    return os.path.join(cfg.out, name)


def _start_walk(cfg) -> Optional[Walk]:
    return parse_walk(cfg.start, cfg.d) if cfg.start else None


def cmd_enumerate(cfg) -> int:
    s = enumerate_walks(cfg.d, cfg.walk_length, n_jobs=cfg.n_jobs)
    c_n, a_n, sizes = counts(s)
    holds = verify_partition_identity(s)
    tag = f"d{cfg.d}_N{cfg.walk_length}"
    write_json(_path(cfg, f"enumerate_{tag}.json"), {
        "d": cfg.d, "N": cfg.walk_length, "c_N": c_n, "a_N": a_n,
        "class_sizes": sizes, "identity_holds": holds,
    }, meta=_meta(cfg))
    if cfg.dump:
        dump_state_space(s, _path(cfg, f"walks_{tag}.txt"))
    logger.info(f"c_N = {c_n}, a_N = {a_n}, c_N = 2d a_N: {holds}")
    return 0 if holds else 1


def cmd_audit(cfg) -> int:
    s = enumerate_walks(cfg.d, cfg.walk_length, n_jobs=cfg.n_jobs)
    P = exact_markov.build_pivot_matrix(s, n_jobs=cfg.n_jobs)
    report = exact_markov.audit_chains(
        s, horizon=cfg.horizon, tol=cfg.tol, slack=cfg.monotone_slack, n_jobs=cfg.n_jobs,
        norm_tol=cfg.norm_tol, pivot=P,
    )
    tau = _start_walk(cfg) or Walk(cfg.d, (1,) * cfg.walk_length)
    m0 = min(cfg.m0, cfg.walk_length)
    report["minimal_prefix"] = {
        "tau": format_walk(tau), "M0": m0,
        "M": exact_markov.minimal_irreducible_prefix(s, tau, m0, pivot=P),
    }
    tag = f"d{cfg.d}_N{cfg.walk_length}"
    if cfg.dump:
        exact_markov.write_matrix_dump(_path(cfg, f"pivot_{tag}.txt"), P)
    write_json(_path(cfg, f"audit_{tag}.json"), report, meta=_meta(cfg))
    if not report["passed"]:
        logger.error("audit failed, see the report for the failing checks")
    return 0 if report["passed"] else 1


def cmd_conjecture(cfg) -> int:
    s = enumerate_walks(cfg.d, cfg.walk_length, n_jobs=cfg.n_jobs)
    scan = exact_markov.conjecture_scan(s, cfg.horizon, start=_start_walk(cfg))
    tag = f"d{cfg.d}_N{cfg.walk_length}"
    meta = {**_meta(cfg), "matched_start": scan.matched_start, "start": scan.start}
    if cfg.format == "csv":
        write_csv(_path(cfg, f"conjecture_{tag}.csv"), list(scan.header), scan.rows, meta=meta)
    else:
        write_json(_path(cfg, f"conjecture_{tag}_table.json"),
                   {"header": list(scan.header), "rows": scan.rows}, meta=meta)
    write_json(_path(cfg, f"conjecture_{tag}.json"), scan.summary(), meta=meta)
    return 0


def _observers(cfg):
    def make():
        if cfg.observe == "histogram":
            obs = [HistogramObserver(at_time=cfg.n_steps)]
        elif cfg.observe == "end_to_end":
            obs = [EndToEndObserver(at_time=cfg.n_steps)]
        else:
            obs = [TrajectoryRecorder()]
        return obs + [ClassKeyObserver(since=1)]
    return make


def cmd_sample(cfg) -> int:
    chain = ChainConfig(d=cfg.d, N=cfg.walk_length, variant=cfg.variant, seed=cfg.seed, initial=cfg.start)
    observers, rate = run_replicas(chain, cfg.replicas, cfg.n_steps, _observers(cfg), n_jobs=cfg.n_jobs)
    main_obs, class_obs = observers
    tag = f"{cfg.variant}_d{cfg.d}_N{cfg.walk_length}"
    meta = _meta(cfg)
    summary = {"acceptance_rate": rate, "replicas": cfg.replicas, "n_steps": cfg.n_steps,
               **main_obs.summary()}
    if cfg.variant != "pivot":
        summary["class_key_constant"] = class_obs.constant
    if cfg.observe == "histogram":
        order = sorted(main_obs.counts, key=lambda c: tuple(step_rank(x, cfg.d) for x in c))
        header = ["walk", "count", "frequency"]
        rows = [(format_walk(Walk(cfg.d, c)), main_obs.counts[c], main_obs.counts[c] / main_obs.total)
                for c in order]
    elif cfg.observe == "end_to_end":
        header = ["n", "mean_r2", "mean_r"]
        rows = [(main_obs.n, main_obs.summary()["mean_r2"], main_obs.summary()["mean_r"])]
    else:
        header = ["replica", "t", "walk"]
        period = cfg.n_steps + 1
        rows = [(i // period, i % period, format_walk(Walk(cfg.d, c))) for i, c in enumerate(main_obs.codes)]
    if cfg.format == "csv":
        write_csv(_path(cfg, f"sample_{cfg.observe}_{tag}.csv"), header, rows, meta=meta)
    else:
        write_json(_path(cfg, f"sample_{cfg.observe}_{tag}_table.json"), {"header": header, "rows": rows}, meta=meta)
    write_json(_path(cfg, f"sample_{cfg.observe}_{tag}.json"), summary, meta=meta)
    return 0 if summary.get("class_key_constant", True) else 1


def cmd_gmethod(cfg) -> int:
    fixtures = gmethod.fixture_suite()
    tally = gmethod.random_property_suite(cfg.random_chains, seed=cfg.seed, tol=cfg.property_tol)
    write_json(_path(cfg, "gmethod.json"), {"fixtures": fixtures, "random_chains": tally}, meta=_meta(cfg))
    logger.info(f"fixture verdict: {fixtures['verdict']}")
    return 0 if fixtures["verdict"] != "fail" and tally["fail"] == 0 else 1


DISPATCH = {
    "enumerate": cmd_enumerate,
    "audit": cmd_audit,
    "conjecture": cmd_conjecture,
    "sample": cmd_sample,
    "gmethod": cmd_gmethod,
}


def get_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sawpivot",
        description="Pivot and pivot+ chains for self-avoiding walks: exact audits and sampling",
    )
    parser.add_argument("command", choices=COMMANDS)
    for name, f in RunConfig.__dataclass_fields__.items():
        if name == "command":
            continue
        flag = "--" + name.replace("_", "-")
        if f.type is bool:
            parser.add_argument(flag, action="store_true", default=None, help=f.metadata["help"])
        else:
            kind = {int: int, float: float}.get(f.type, str)
            parser.add_argument(flag, type=kind, default=None, help=f.metadata["help"])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    setup_logging()
    args = get_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if v is not None}
    logger.info(get_commandline_args(["sawpivot"] + list(argv if argv is not None else sys.argv[1:])))
    try:
        cfg = validate_config(load_config(overrides))
        logger.info(f"config: {OmegaConf.to_container(cfg)}")
        os.makedirs(cfg.out, exist_ok=True)
        return DISPATCH[cfg.command](cfg)
    except (SawError, OmegaConfBaseException) as e:
        logger.error(str(e))
        return 2


def cli_main():
    sys.exit(main())


if __name__ == "__main__":
    cli_main()
