"""
Run configuration shared by the command scripts.

Values are resolved in three layers: .env / environment defaults, then an
optional JSON config file (--config), then explicit command-line flags.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from moe.ecm import MODEL_KINDS
from moe.errors import FitFailureError, IngestionError, UsageError
from simulation.scenarios import SCENARIOS

# Load environment variables
load_dotenv()

COMMANDS = ("fit", "classify", "simulate", "cv-bandwidth", "contaminate")
LOG_FORMAT = "%(levelname)s:%(name)s:%(message)s"


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name, str(default))
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"environment variable {name} must be an integer, got {raw!r}")


@dataclass
class RunConfig:
    command: str = "fit"
    model: str = "scgmoe"
    k: int = 2
    h: Optional[float] = None
    h_grid: Optional[List[float]] = None
    folds: int = 5
    restarts: int = field(default_factory=lambda: _env_int("MOE_RESTARTS", 10))
    seed: int = field(default_factory=lambda: _env_int("MOE_SEED", 0))
    n_jobs: int = field(default_factory=lambda: _env_int("MOE_N_JOBS", 1))
    data: Optional[str] = None
    y_col: Optional[str] = None
    x_cols: Optional[List[str]] = None
    t_col: Optional[str] = None
    out_dir: str = field(default_factory=lambda: os.getenv("MOE_OUT_DIR", "outputs"))
    max_iter: int = 500
    tol: float = 1e-8
    threshold: float = 0.5
    fraction: float = 0.05
    factor: float = 2.5
    output: Optional[str] = None
    scenarios: List[str] = field(default_factory=lambda: ["a"])
    n_values: List[int] = field(default_factory=lambda: [200])
    models: List[str] = field(default_factory=lambda: ["scgmoe"])
    reps: int = 100
    bandwidth: str = "default"
    log_level: str = field(default_factory=lambda: os.getenv("MOE_LOG_LEVEL", "INFO"))

    def validate(self) -> "RunConfig":
        """Check every option the command will use; raises UsageError."""
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}; valid: {', '.join(COMMANDS)}")
        for name in [self.model] + list(self.models):
            if name not in MODEL_KINDS:
                raise UsageError(f"unknown model {name!r}; valid: {', '.join(MODEL_KINDS)}")
        for name in self.scenarios:
            if name not in SCENARIOS:
                raise UsageError(f"unknown scenario {name!r}; valid: {', '.join(SCENARIOS)}")
        if self.k < 1:
            raise UsageError(f"--k must be >= 1, got {self.k}")
        if self.h is not None and not self.h > 0:
            raise UsageError(f"--h must be > 0, got {self.h}")
        if self.h_grid is not None:
            if not self.h_grid or any(h <= 0 for h in self.h_grid) or any(
                b <= a for a, b in zip(self.h_grid, self.h_grid[1:])
            ):
                raise UsageError("--h-grid must be positive and strictly ascending")
        if self.folds < 2:
            raise UsageError(f"--folds must be >= 2, got {self.folds}")
        if self.restarts < 1 or self.reps < 1 or self.max_iter < 1:
            raise UsageError("--restarts, --reps and --max-iter must be >= 1")
        if self.seed < 0:
            raise UsageError(f"--seed must be non-negative, got {self.seed}")
        if not 0.0 <= self.fraction < 1.0:
            raise UsageError(f"--fraction must lie in [0, 1), got {self.fraction}")
        if not 0.0 < self.threshold < 1.0:
            raise UsageError(f"--threshold must lie in (0, 1), got {self.threshold}")
        if any(n < 50 for n in self.n_values):
            raise UsageError("simulation sample sizes must be >= 50")
        if self.bandwidth not in ("default", "cv"):
            try:
                if float(self.bandwidth) <= 0:
                    raise ValueError
            except ValueError:
                raise UsageError(f"--bandwidth must be 'default', 'cv' or a positive number, got {self.bandwidth!r}")
        if self.command in ("fit", "classify", "cv-bandwidth", "contaminate") and not self.data:
            raise UsageError(f"{self.command} needs --data")
        if self.command in ("fit", "classify", "cv-bandwidth") and not (self.y_col and self.x_cols):
            raise UsageError(f"{self.command} needs --y-col and --x-cols")
        if self.command == "contaminate" and not self.y_col:
            raise UsageError("contaminate needs --y-col")
        return self

    def as_dict(self) -> dict:
        return asdict(self)


def _field_names() -> List[str]:
    return [f.name for f in fields(RunConfig)]


def load_config_file(path: str) -> dict:
    """Read a JSON config object; keys may use dashes or underscores."""
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {path}")
    try:
        with open(p, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise UsageError(f"config file {path} is not valid JSON: {e}")
    if not isinstance(raw, dict):
        raise UsageError(f"config file {path} must contain a JSON object")
    valid = set(_field_names()) - {"command"}
    values = {key.replace("-", "_"): value for key, value in raw.items()}
    unknown = sorted(set(values) - valid)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}; valid: {', '.join(sorted(valid))}")
    return values


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _str_list(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def add_run_arguments(parser: argparse.ArgumentParser, command: str) -> None:
    """Flags for one command. Defaults stay None so unset flags never override the config file."""
    parser.add_argument("--config", help="JSON file with option values")
    parser.add_argument("--seed", type=int, help="Master seed (default: MOE_SEED or 0)")
    parser.add_argument("--out-dir", help="Output directory (default: MOE_OUT_DIR or outputs)")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    if command != "simulate":
        parser.add_argument("--data", help="Input CSV file")
        parser.add_argument("--y-col", help="Response column")
    if command in ("fit", "classify", "cv-bandwidth"):
        parser.add_argument("--x-cols", type=_str_list, help="Comma-separated expert covariate columns")
        parser.add_argument("--t-col", help="Gating covariate column (default: first of --x-cols)")
        parser.add_argument("--k", type=int, help="Number of components (default: 2)")
        parser.add_argument("--restarts", type=int, help="ECM starts (default: MOE_RESTARTS or 10)")
        parser.add_argument("--max-iter", type=int, help="ECM iteration limit (default: 500)")
        parser.add_argument("--n-jobs", type=int, help="Parallel workers (default: MOE_N_JOBS or 1)")
    if command in ("fit", "classify"):
        parser.add_argument("--model", help=f"One of {', '.join(MODEL_KINDS)} (default: scgmoe)")
        parser.add_argument("--h", type=float, help="Kernel bandwidth for semi-parametric models")
        parser.add_argument("--h-grid", type=_float_list, help="Bandwidths to cross-validate before fitting")
        parser.add_argument("--folds", type=int, help="CV folds (default: 5)")
        parser.add_argument("--threshold", type=float, help="Outlier threshold on v (default: 0.5)")
    if command == "cv-bandwidth":
        parser.add_argument("--model", help="Semi-parametric model: sgmoe or scgmoe (default: scgmoe)")
        parser.add_argument("--h-grid", type=_float_list, help="Comma-separated bandwidths")
        parser.add_argument("--folds", type=int, help="CV folds (default: 5)")
    if command == "contaminate":
        parser.add_argument("--fraction", type=float, help="Share of rows to modify (default: 0.05)")
        parser.add_argument("--factor", type=float, help="Multiplier for y (default: 2.5)")
        parser.add_argument("--output", help="Contaminated CSV path")
    if command == "simulate":
        parser.add_argument("--scenarios", type=_str_list, help="Comma-separated scenarios from a,b,c,d")
        parser.add_argument("--n-values", type=_int_list, help="Comma-separated sample sizes")
        parser.add_argument("--models", type=_str_list, help="Comma-separated model names")
        parser.add_argument("--reps", type=int, help="Replications per cell (default: 100)")
        parser.add_argument("--restarts", type=int, help="ECM starts per fit (default: MOE_RESTARTS or 10)")
        parser.add_argument("--bandwidth", help="'default', 'cv' or a number")
        parser.add_argument("--n-jobs", type=int, help="Parallel workers (default: MOE_N_JOBS or 1)")


LIST_FIELDS = {"h_grid": float, "x_cols": str, "scenarios": str, "n_values": int, "models": str}


def _coerce(key: str, value):
    """Normalise config-file values (lists may be comma-separated strings)."""
    try:
        if key in LIST_FIELDS:
            items = value.split(",") if isinstance(value, str) else list(value)
            return [LIST_FIELDS[key](str(v).strip()) for v in items if str(v).strip()]
        if key == "bandwidth":
            return str(value)
    except (TypeError, ValueError):
        raise UsageError(f"invalid value for {key}: {value!r}")
    return value


def build_run_config(command: str, args: argparse.Namespace) -> RunConfig:
    """Resolve env defaults < config file < flags and validate."""
    cfg = RunConfig(command=command)
    overrides = load_config_file(args.config) if getattr(args, "config", None) else {}
    for key, value in vars(args).items():
        if key in ("config", "verbose") or value is None:
            continue
        overrides[key] = value
    if getattr(args, "verbose", False):
        overrides["log_level"] = "DEBUG"
    for key, value in overrides.items():
        setattr(cfg, key, _coerce(key, value))
    return cfg.validate()


def setup_logging(cfg: RunConfig) -> None:
    level = getattr(logging, str(cfg.log_level).upper(), None)
    if not isinstance(level, int):
        raise UsageError(f"unknown log level {cfg.log_level!r}")
    logging.basicConfig(level=level, format=LOG_FORMAT)


def run_with_exit_codes(command_fn, cfg: RunConfig) -> int:
    """Run a command: 0 success, 1 fit failure, 2 usage or I/O error."""
    logger = logging.getLogger(command_fn.__module__)
    try:
        return command_fn(cfg)
    except FitFailureError as e:
        logger.error("%s", e)
        print(f"Error: fit failed: {e}", file=sys.stderr)
        return 1
    except (UsageError, IngestionError, OSError) as e:
        logger.error("%s", e)
        print(f"Error: {e}", file=sys.stderr)
        return 2


def script_main(command: str, command_fn, description: str, argv=None) -> int:
    """Shared argparse entry point for the command scripts."""
    parser = argparse.ArgumentParser(description=description)
    add_run_arguments(parser, command)
    args = parser.parse_args(argv)
    try:
        cfg = build_run_config(command, args)
        setup_logging(cfg)
    except UsageError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 2
    return run_with_exit_codes(command_fn, cfg)
