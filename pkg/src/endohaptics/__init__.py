"""Haptic feedback pipeline for a robotic surgical endotrainer."""

from .kinematics import BACKEND

__all__ = ["BACKEND"]
__version__ = "0.1.0"
