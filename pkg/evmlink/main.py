import logging
from typing import Optional

from evmlink.settings import settings


def configure_logging(level: Optional[str] = None) -> None:
    """Configure root logging once for a command-line run."""
    logging.basicConfig(
        level=(level or settings.LOG_LEVEL).upper(),
        format=settings.LOG_FORMAT,
        force=True,
    )
    logging.getLogger(__name__).debug(f"Logging configured for {settings.PROJECT_NAME}")
