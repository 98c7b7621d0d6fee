import os
from typing import Optional

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


def clean_env_value(value, default=None):
    """
    Cleans an environment variable value by removing comments and extra whitespace.

    Args:
        value: The environment variable value to clean
        default: Default value to return if value is None or blank

    Returns:
        Cleaned value with comments removed and whitespace trimmed
    """
    if value is None:
        return default

    if '#' in value:
        value = value.split('#')[0]
    value = value.strip()
    return value if value else default


def _env_float(name: str, default: float) -> float:
    raw = clean_env_value(os.getenv(name))
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"Invalid float in environment variable {name}: {raw!r}")


def _env_int(name: str, default: int) -> int:
    raw = clean_env_value(os.getenv(name))
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"Invalid integer in environment variable {name}: {raw!r}")


# Optional variables with defaults
LOG_LEVEL = clean_env_value(os.getenv("LOG_LEVEL"), "INFO").upper()
DEFAULT_SEED = _env_int("QUADVANE_SEED", 0)
DEFAULT_WORKERS = _env_int("QUADVANE_WORKERS", 1)

# LCR meter assumptions: the instrument is named but its noise floor is not published
LCR_NOISE_SIGMA_OHM = _env_float("QUADVANE_NOISE_SIGMA_OHM", 5e-4)
LCR_QUANT_STEP_OHM = _env_float("QUADVANE_QUANT_STEP_OHM", 1e-4)

if DEFAULT_WORKERS < 1:
    raise ValueError("QUADVANE_WORKERS must be at least 1")
if LCR_NOISE_SIGMA_OHM < 0 or LCR_QUANT_STEP_OHM < 0:
    raise ValueError("QUADVANE_NOISE_SIGMA_OHM and QUADVANE_QUANT_STEP_OHM must be non-negative")


def resolve_seed(explicit: Optional[int] = None) -> int:
    """Returns the explicit seed, else QUADVANE_SEED read at call time, else 0."""
    if explicit is not None:
        return explicit
    return _env_int("QUADVANE_SEED", DEFAULT_SEED)
