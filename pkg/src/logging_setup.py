import logging
import os
from typing import Optional, Union

LOG_ENV_VAR = "FTI_DISTILL_LOG"
LOG_FORMAT = "%(levelname)s: %(name)s: %(message)s"


def resolve_level(level: Optional[Union[str, int]] = None) -> int:
    """
    Resolves a logging level from an explicit value or the FTI_DISTILL_LOG
    environment variable. Unknown names fall back to WARNING.
    """
    if level is None:
        level = os.environ.get(LOG_ENV_VAR, "WARNING")
    if isinstance(level, int):
        return level
    resolved = logging.getLevelName(str(level).strip().upper())
    return resolved if isinstance(resolved, int) else logging.WARNING


def configure_logging(level: Optional[Union[str, int]] = None) -> None:
    """Installs a single stderr handler on the package logger."""
    package_logger = logging.getLogger("src")
    package_logger.setLevel(resolve_level(level))
    if not package_logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        package_logger.addHandler(handler)
