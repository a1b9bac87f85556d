import logging

from rich.console import Console
from rich.logging import RichHandler

LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)


def resolve_level(verbosity: int, quiet: bool = False) -> int:
    """`-v` count to a logging level; quiet wins over any count."""
    if quiet:
        return logging.ERROR
    return LEVELS[min(max(verbosity, 0), len(LEVELS) - 1)]


def configure_logger(verbosity: int, quiet: bool = False) -> None:
    """
    Route the root logger through rich on stderr, leaving stdout to result
    tables. Python warnings (numpy overflow, scipy integration warnings) are
    captured into the same handler.
    """
    handler = RichHandler(
        console=Console(stderr=True),
        rich_tracebacks=True,
        markup=True,
        show_path=verbosity >= 2,
    )
    logging.basicConfig(
        level=resolve_level(verbosity, quiet),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[handler],
        force=True,
    )
    logging.captureWarnings(True)


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)
