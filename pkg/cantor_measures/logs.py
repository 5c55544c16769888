import sys

from loguru import logger

from cantor_measures.config import LOG_FORMAT, LOG_LEVEL


def configure_logging(verbose=False):
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if verbose else LOG_LEVEL, format=LOG_FORMAT)
    logger.enable("cantor_measures")
    return logger
