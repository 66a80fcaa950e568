#!/usr/bin/env python3
"""
Logging configuration utilities
"""

import logging
import logging.handlers
from pathlib import Path

from pydantic import ByteSize, TypeAdapter


DEFAULT_LOGGING = {
    'level': 'INFO',
    'file': 'logs/mera-tomography.log',
    'max_size': '10MiB',
    'backup_count': 5,
    'console': True
}

_BYTE_SIZE = TypeAdapter(ByteSize)


def setup_logging(config=None):
    """Setup root logging from the 'logging' section of a run configuration"""

    log_config = dict(DEFAULT_LOGGING)
    log_config.update(config or {})

    log_file = Path(log_config['file'])
    log_file.parent.mkdir(parents=True, exist_ok=True)

    logger = logging.getLogger()
    logger.setLevel(getattr(logging, str(log_config['level']).upper()))

    # Re-running a command in the same process must not duplicate output
    for handler in list(logger.handlers):
        handler.close()
    logger.handlers.clear()

    file_handler = logging.handlers.RotatingFileHandler(
        log_file,
        maxBytes=_parse_size(log_config['max_size']),
        backupCount=int(log_config['backup_count'])
    )
    file_handler.setFormatter(logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    ))
    logger.addHandler(file_handler)

    if log_config.get('console', True):
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(logging.Formatter(
            '%(asctime)s - %(levelname)s - %(message)s',
            datefmt='%H:%M:%S'
        ))
        logger.addHandler(console_handler)

    return logger


def _parse_size(size):
    """Bytes from an int or a size string ('10MB' is 10**7 bytes, '10MiB' is 10 * 2**20)"""
    try:
        return int(_BYTE_SIZE.validate_python(size))
    except ValueError as e:
        raise ValueError(f"Invalid log file size {size!r}: expected bytes or a number with a unit (KB, MiB, GB)") from e
