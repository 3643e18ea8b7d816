import csv
import json
import logging
import os
import sys
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .errors import WalkFormatError

__version__ = "0.1.0"

LOG_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"
LOG_DATEFMT = "%Y-%m-%d %H:%M:%S"

logger = logging.getLogger(__name__)


def setup_logging(stream=None):
    logging.basicConfig(
        format=LOG_FORMAT,
        datefmt=LOG_DATEFMT,
        level=os.environ.get("LOGLEVEL", "INFO").upper(),
        stream=stream or sys.stdout,
    )


def progress_enabled(progress: Optional[bool] = None) -> bool:
    """tqdm bars are shown only when INFO records would be shown too."""
    if progress is not None:
        return progress
    return logging.getLogger("sawpivot").getEffectiveLevel() <= logging.INFO


def replica_rng(seed: int, replica: int = 0) -> np.random.Generator:
    """Independent generator for one replica of a seeded run.

    Substream `replica` of `seed` is SeedSequence(seed, spawn_key=(replica,)),
    so a replica draws the same numbers whatever the number of workers and
    whatever order the replicas are executed in.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replica,)))


def get_commandline_args(argv: Optional[Sequence[str]] = None) -> str:
    extra_chars = [
        " ", ";", "&", "(", ")", "|", "^", "<", ">", "?", "*",
        "[", "]", "$", "`", '"', "\\", "!", "{", "}",
    ]
    argv = sys.argv if argv is None else argv
    # Escape the extra characters for shell
    argv = [
        arg.replace("'", "'\\''")
        if all(char not in arg for char in extra_chars)
        else "'" + arg.replace("'", "'\\''") + "'"
        for arg in argv
    ]
    return " ".join(argv)


# * -------------------- exact-rational matrices -------------------- *


def as_fraction_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        out[idx] = v if isinstance(v, Fraction) else Fraction(v)
    return out


def is_exact(arr: np.ndarray) -> bool:
    return arr.dtype == object


def parse_rational_matrix(text: str) -> np.ndarray:
    """Parse the "m n" header + rows of "num/den" tokens format.

    Blank lines and lines starting with '#' are ignored.
    """
    lines = [
        ln.strip() for ln in text.splitlines()
        if ln.strip() and not ln.strip().startswith("#")
    ]
    if not lines:
        raise WalkFormatError("empty matrix file")
    try:
        m, n = (int(x) for x in lines[0].split())
    except ValueError as e:
        raise WalkFormatError(f"bad matrix header {lines[0]!r}") from e
    rows = lines[1:]
    if len(rows) != m:
        raise WalkFormatError(f"expected {m} rows, found {len(rows)}")
    out = np.empty((m, n), dtype=object)
    for i, row in enumerate(rows):
        tokens = row.split()
        if len(tokens) != n:
            raise WalkFormatError(f"row {i} has {len(tokens)} entries, expected {n}")
        try:
            out[i] = [Fraction(tok) for tok in tokens]
        except (ValueError, ZeroDivisionError) as e:
            raise WalkFormatError(f"bad rational in row {i}: {row!r}") from e
    return out


def read_rational_matrix(path: str) -> np.ndarray:
    with open(path) as f:
        return parse_rational_matrix(f.read())


def format_rational_matrix(mat: np.ndarray) -> str:
    mat = as_fraction_array(mat)
    m, n = mat.shape
    lines = [f"{m} {n}"]
    for row in mat:
        lines.append(" ".join(f"{x.numerator}/{x.denominator}" for x in row))
    return "\n".join(lines) + "\n"


def write_rational_matrix(path: str, mat: np.ndarray):
    with open(path, "w") as f:
        f.write(format_rational_matrix(mat))


def fixture_path(name: str) -> str:
    return os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures", name)


def golden_path(name: str) -> str:
    return os.path.join(os.path.dirname(os.path.abspath(__file__)), "golden", name)


# * -------------------- run outputs -------------------- *


def run_metadata(config: Dict[str, Any], seed: Optional[int]) -> Dict[str, Any]:
    return {"version": __version__, "config": config, "seed": seed}


def to_jsonable(value):
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    return value


def write_json(path: str, payload: Dict[str, Any], meta: Optional[Dict[str, Any]] = None):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    body = dict(payload)
    if meta is not None:
        body = {"meta": meta, **body}
    with open(path, "w") as f:
        json.dump(to_jsonable(body), f, indent=2, sort_keys=False)
        f.write("\n")
    logger.info(f"wrote {path}")


def write_csv(
    path: str,
    header: List[str],
    rows: Iterable[Sequence[Any]],
    meta: Optional[Dict[str, Any]] = None,
):
    """CSV with the metadata echoed as leading '# key: value' comment lines."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as f:
        if meta is not None:
            for key, value in meta.items():
                f.write(f"# {key}: {json.dumps(to_jsonable(value), sort_keys=True)}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(x) for x in row])
    logger.info(f"wrote {path}")


def _csv_cell(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x
