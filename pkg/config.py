"""Runtime settings for the curvature toolkit.
Values come from the environment (optionally a .env file).
"""
import os
import logging
from dataclasses import dataclass
from dotenv import load_dotenv

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Settings:
    """Defaults shared by the CLI and the library entry points."""
    seed: int = 0
    log_level: str = "WARNING"
    estimate_max_states: int = 720
    multistart: int = 32
    transport_grid: int = 64
    workers: int = 1


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning("Ignoring non-integer %s=%r, using %s", name, raw, default)
        return default


def load_settings(dotenv_path: str = None) -> Settings:
    """Load settings from the environment.

    Args:
        dotenv_path: Optional explicit .env file; the default search applies otherwise

    Returns:
        Settings instance
    """
    load_dotenv(dotenv_path)
    return Settings(
        seed=_int_env('RICCI_SEED', 0),
        log_level=os.getenv('RICCI_LOG_LEVEL', 'WARNING').upper(),
        estimate_max_states=_int_env('RICCI_ESTIMATE_MAX_STATES', 720),
        multistart=_int_env('RICCI_MULTISTART', 32),
        transport_grid=_int_env('RICCI_TRANSPORT_GRID', 64),
        workers=_int_env('RICCI_WORKERS', 1),
    )
