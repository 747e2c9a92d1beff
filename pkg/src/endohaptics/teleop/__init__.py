"""Simulated master/slave teleoperation loop, its message protocol and link model."""

from .protocol import MessageKind, TeleopMessage, decode, encode, iter_frames
from .sim import (
    ControlMode,
    InvariantViolation,
    Scenario,
    SummaryStats,
    TeleopSim,
    TickInputs,
    run_scenario,
)
from .transport import Channel, TransportModel

__all__ = [
    "Channel",
    "ControlMode",
    "InvariantViolation",
    "MessageKind",
    "Scenario",
    "SummaryStats",
    "TeleopMessage",
    "TeleopSim",
    "TickInputs",
    "TransportModel",
    "decode",
    "encode",
    "iter_frames",
    "run_scenario",
]
