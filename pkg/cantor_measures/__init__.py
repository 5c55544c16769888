"""Exact finite approximations of good measures on the Cantor space."""

from loguru import logger

logger.disable("cantor_measures")

__version__ = "0.1.0"
