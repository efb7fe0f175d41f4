"""Shared functions used by the experiment commands"""

import logging
import os
from pathlib import Path

import numpy as np
import pandas as pd
import yaml
from dotenv import load_dotenv
from pythonjsonlogger.json import JsonFormatter


# Default experiment settings of each command.
CONFIG = {
    "decompose": {
        "d": 10,
        "objective": "correlation",
        "sampler": "simple",
        "batch_size": 1,
        "schedule": "constant",
        "eta": 0.01,
        "iterations": 10_000,
        "n_seeds": 10,
    },
    "ica": {
        "d": 10,
        "objective": "correlation",
        "sampler": "ica",
        "batch_size": 100,
        "schedule": "constant",
        "eta": 0.003,
        "iterations": 10_000,
        "n_seeds": 10,
    },
    "verify": {"d": 5, "n_seeds": 1},
    "escape": {
        "d": 10,
        "objective": "maxeig",
        "eta": 0.01,
        "iterations": 10_000,
        "sampler": "exact",
        "n_seeds": 100,
        "support": 2,
    },
    "minima": {
        "d": 2,
        "objective": "correlation",
        "sampler": "exact",
        "eta": 0.01,
        "iterations": 2_000,
        "starts": 200,
    },
}

OUTPUT_ENV_VAR = "STRICT_SADDLE_OUT"

TRACE_COLUMNS = ["iter", "f", "grad_norm", "recon_error", "elapsed_ms"]


def setup_logging(verbose: bool = False, log_json: bool = False) -> None:
    """Configure the root logger once for a CLI invocation."""
    handler = logging.StreamHandler()
    if log_json:
        handler.setFormatter(JsonFormatter("%(asctime)s %(name)s %(levelname)s %(message)s"))
    else:
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger()
    root.handlers = [handler]
    root.setLevel(logging.INFO if verbose else logging.WARNING)


def default_output_dir(command: str) -> Path:
    """Output directory for a command when --out is not given."""
    load_dotenv()
    root = os.getenv(OUTPUT_ENV_VAR)
    return Path(root if root else "./results") / command


def load_config_file(path: str | None) -> dict:
    """Read a YAML experiment config; a missing path gives an empty dict."""
    if path is None:
        return {}
    with open(path) as fh:
        content = yaml.safe_load(fh) or {}
    if not isinstance(content, dict):
        raise ValueError(f"config file {path} must hold a mapping, got {type(content).__name__}")
    return content


def write_yaml(content: dict, path: Path) -> None:
    """Save a mapping as YAML, keeping key order."""
    with open(path, "w") as fh:
        yaml.safe_dump(content, fh, sort_keys=False)


def write_csv(df: pd.DataFrame, path: Path) -> None:
    """Save a table the same way everywhere (no index, fixed float format)."""
    df.to_csv(path, index=False, float_format="%.12g")


def relative_error(actual: np.ndarray, expected: np.ndarray) -> float:
    """Norm-wise relative error with a unit floor on the denominator."""
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    return float(np.linalg.norm(actual - expected) / max(1.0, np.linalg.norm(expected)))
