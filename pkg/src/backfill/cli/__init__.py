"""Command line pipeline: simulate, filter, backfill, evaluate."""

from .config import METHODS, RunConfig, load_config, parse_config
from .main import main

__all__ = ["METHODS", "RunConfig", "load_config", "parse_config", "main"]
