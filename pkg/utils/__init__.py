"""
rsenv - Utility module
Contains configuration, logging, and the portable PRNG.
"""

from utils.config import settings, Settings
from utils.logger import get_logger, setup_logger
from utils.prng import Xoshiro256, derive_seed, PRNG_ALGORITHM

__all__ = [
    "settings",
    "Settings",
    "get_logger",
    "setup_logger",
    "Xoshiro256",
    "derive_seed",
    "PRNG_ALGORITHM",
]
