import logging

from logging_config import get_logger


def test_loggers_share_one_hierarchy():
    logger = get_logger('geometry')
    assert logger.name == 'klab.geometry'
    assert logger.parent is logging.getLogger('klab')

    root = logging.getLogger('klab')
    handlers = len(root.handlers)
    get_logger('modes')
    assert len(root.handlers) == handlers
