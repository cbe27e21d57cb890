import logging
import os

logger = logging.getLogger(__name__)


def _env_number(name: str, default: str, kind=int):
    raw = os.getenv(name, default)
    try:
        return kind(raw)
    except ValueError:
        logger.warning(f"Ignoring {name}={raw!r}, using {default}")
        return kind(default)


class Settings:
    # API settings
    API_PREFIX: str = "/api"
    DEBUG: bool = os.getenv("DEBUG", "1") == "1"
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")

    # Enumeration settings
    ENUMERATION_CAP: int = _env_number("SMALE_CAP", "1000000")
    PROBE_PERIOD: int = _env_number("PROBE_PERIOD", "8")

    # Perron-Frobenius power iteration
    PERRON_TOLERANCE: float = _env_number("PERRON_TOLERANCE", "1e-14", float)
    PERRON_MAX_ITER: int = _env_number("PERRON_MAX_ITER", "100000")

    # Report settings
    FLOAT_DIGITS: int = 15


settings = Settings()
