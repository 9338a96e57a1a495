"""
Logger setup shared by all library modules
"""

import logging

import config

_CONFIGURED = False


def _configure_root() -> None:
    global _CONFIGURED
    if _CONFIGURED:
        return

    root = logging.getLogger('klab')
    root.setLevel(getattr(logging, str(config.LOG_LEVEL).upper(), logging.WARNING))
    formatter = logging.Formatter('%(asctime)s %(levelname)s %(name)s: %(message)s')

    stream = logging.StreamHandler()
    stream.setFormatter(formatter)
    root.addHandler(stream)

    if config.LOG_TO_FILE:
        file_handler = logging.FileHandler(config.LOG_FILE)
        file_handler.setFormatter(formatter)
        root.addHandler(file_handler)

    _CONFIGURED = True


def get_logger(name: str) -> logging.Logger:
    """
    Get a module logger under the shared 'klab' hierarchy

    Args:
        name: Usually __name__ of the calling module

    Returns:
        Configured logger
    """
    _configure_root()
    return logging.getLogger(f'klab.{name}')
