import logging
import sys

from utils.config import settings

_initialized = False

def _resolve(level):
    if isinstance(level, str):
        return getattr(logging, level.upper(), logging.INFO)
    return level

def setup_logger(level=None):
    global _initialized
    if _initialized:
        # later calls only adjust the level
        if level is not None:
            logging.getLogger().setLevel(_resolve(level))
        return

    level = _resolve(level or settings.log_level)

    # stderr keeps stdout free for command output
    logging.basicConfig(
        level=level,
        format="%(asctime)s | %(levelname)s | %(name)s | %(message)s",
        datefmt="%H:%M:%S",
        handlers=[logging.StreamHandler(sys.stderr)]
    )
    for lib in ["matplotlib", "PIL"]:
        logging.getLogger(lib).setLevel(logging.WARNING)

    _initialized = True

def get_logger(name):
    setup_logger()
    return logging.getLogger(name)
