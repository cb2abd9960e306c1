# config/settings.py
import logging
import os
from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == '':
        return default
    try:
        return int(float(raw))
    except ValueError:
        logger.warning(f"{name}={raw!r} is not a number, using {default}")
        return default


def _float_env(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw.strip() == '':
        return default
    try:
        return float(raw)
    except ValueError:
        logger.warning(f"{name}={raw!r} is not a number, using {default}")
        return default


class Config:
    # Parallelism (0 = one worker per CPU)
    THREADS = _int_env('EXCHPOLY_THREADS', 0)

    # Logging
    LOG_LEVEL = os.getenv('EXCHPOLY_LOG_LEVEL', 'INFO').upper()
    LOG_FORMAT = os.getenv('EXCHPOLY_LOG_FORMAT', 'console').lower()

    # Sampling
    BLOCK_SIZE = _int_env('EXCHPOLY_BLOCK_SIZE', 4096)
    SUM_ONLY_THRESHOLD = _int_env('EXCHPOLY_SUM_ONLY_THRESHOLD', 10_000)

    # Ray enumeration
    INT_TOL = _float_env('EXCHPOLY_INT_TOL', 1e-9)

    # Partial exchangeability candidate-support guard
    PEX_SUPPORT_LIMIT = _int_env('EXCHPOLY_PEX_SUPPORT_LIMIT', 10**7)

    @classmethod
    def threads(cls) -> int:
        """Effective worker count"""
        if cls.THREADS > 0:
            return cls.THREADS
        return os.cpu_count() or 1

    @classmethod
    def validate(cls):
        """Validate configuration, falling back to defaults on bad values"""
        if cls.THREADS < 0:
            logger.warning(f"EXCHPOLY_THREADS={cls.THREADS} is negative, using auto")
            cls.THREADS = 0

        if cls.BLOCK_SIZE < 1:
            logger.warning(f"EXCHPOLY_BLOCK_SIZE={cls.BLOCK_SIZE} must be positive, using 4096")
            cls.BLOCK_SIZE = 4096

        if cls.LOG_FORMAT not in ('console', 'json'):
            logger.warning(f"Unknown EXCHPOLY_LOG_FORMAT {cls.LOG_FORMAT!r}, using console")
            cls.LOG_FORMAT = 'console'

        if not 0 < cls.INT_TOL < 1e-3:
            logger.warning(f"EXCHPOLY_INT_TOL={cls.INT_TOL} out of range, using 1e-9")
            cls.INT_TOL = 1e-9

        if cls.PEX_SUPPORT_LIMIT < 1:
            logger.warning("EXCHPOLY_PEX_SUPPORT_LIMIT must be positive, using 10**7")
            cls.PEX_SUPPORT_LIMIT = 10**7

        return True

# Validate config on import
Config.validate()
