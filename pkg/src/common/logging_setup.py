from __future__ import annotations

import logging

from common.errors import ConfigurationError

_FORMAT = "%(asctime)s level=%(levelname)s logger=%(name)s %(message)s"


def configure_logging(level: str | int = "INFO") -> None:
    if isinstance(level, str):
        numeric = logging.getLevelName(level.upper())
        if not isinstance(numeric, int):
            raise ConfigurationError(f"unknown log level: {level}")
        level = numeric
    logging.basicConfig(level=level, format=_FORMAT, force=True)
