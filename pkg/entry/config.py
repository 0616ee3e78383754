"""
Configuration settings for the hofer command line
"""
import os
from functools import lru_cache
from typing import Any, Dict

import dotenv
from loguru import logger

from entry.utils.string_utils import build_path, parse_key_value_lines
from hofer.errors import ConfigError

# Load environment variables from .env file if it exists
dotenv.load_dotenv()


def parse_float_env(var_name: str, default: float) -> float:
    raw = os.getenv(var_name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return float(raw)
    except ValueError as e:
        raise ConfigError(f"{var_name} must be a number, got {raw!r}") from e


def parse_int_env(var_name: str, default: int) -> int:
    raw = os.getenv(var_name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigError(f"{var_name} must be an integer, got {raw!r}") from e


def get_env_path(base_path: str, default: str) -> str:
    """Get environment-based path, resolved against the current directory"""
    path = os.getenv(base_path, default)
    if not os.path.isabs(path):
        path = build_path(os.getcwd(), path)
    return path


class Settings:
    """Defaults for every run, read from HOFER_* environment variables"""

    def __init__(self):
        # Reproducibility
        self.seed = parse_int_env("HOFER_SEED", 7)
        self.samples = parse_int_env("HOFER_SAMPLES", 10_000)

        # Numerics
        self.tol = parse_float_env("HOFER_TOL", 1e-9)
        self.epsilon = parse_float_env("HOFER_EPSILON", 0.05)
        self.nu = parse_float_env("HOFER_NU", 0.1)

        # Output
        self.out_dir = get_env_path("HOFER_OUT", "out")
        self.px_per_unit = parse_float_env("HOFER_PX_PER_UNIT", 200.0)
        self.log_level = os.getenv("HOFER_LOG_LEVEL", "INFO").upper()

        # Batching
        self.workers = parse_int_env("HOFER_WORKERS", 4)
        self.chunk_size = parse_int_env("HOFER_CHUNK_SIZE", 2_000)

    def as_defaults(self) -> Dict[str, Any]:
        """Settings under the RunConfig field names"""
        return {
            "seed": self.seed,
            "samples": self.samples,
            "tol": self.tol,
            "epsilon": self.epsilon,
            "nu": self.nu,
            "out": self.out_dir,
            "workers": self.workers,
            "chunk_size": self.chunk_size,
            "px_per_unit": self.px_per_unit,
        }


@lru_cache()
def get_settings():
    """Get cached settings instance"""
    return Settings()


CONFIG_KEYS = {
    "manifold", "lambda", "disk_area", "hamiltonian", "epsilon", "nu", "suite", "seed",
    "samples", "tol", "out", "overlay", "s", "r1_blowup", "workers", "chunk_size", "px_per_unit",
}


def load_config_file(path: str) -> Dict[str, str]:
    """
    Read a key=value run configuration.

    Blank lines and lines starting with # are ignored; dashes in keys are
    read as underscores so flag names can be used.

    Raises:
        ConfigError: unreadable file or unknown key
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from e
    values = {k.replace("-", "_"): v for k, v in parse_key_value_lines(text).items()}
    unknown = sorted(set(values) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"Unknown config keys: {', '.join(unknown)}", {"path": path, "unknown": unknown})
    logger.debug(f"Loaded {len(values)} settings from {path}")
    return values
