"""Pinching-antenna placement for integrated sensing and multicast communications."""

from .errors import *  # noqa: F401,F403
from .scenario import SystemConfig, TargetPrior, TransceiverLayout, UserSet, load_config

__all__ = ["SystemConfig", "TargetPrior", "TransceiverLayout", "UserSet", "load_config"]
__version__ = "0.1.0"
