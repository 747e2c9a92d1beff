"""Kinesthetic and tactile feedback for the master console.

Kinesthetic: the sensed tool wrench is rendered on the master arm through
the Jacobian transpose. The sensor gives no Fx, Fy or Mz, so those
components of the reflected wrench are zero rather than estimated.

Tactile: two vibration motors on the finger clutch. Motor 1 intensity is
linear in grip force up to ``f_max``; motor 2 is an on/off alarm with a
hysteresis band below the surgeon-set threshold. Default operating points
(f_max = 10 N, threshold = 5 N, hysteresis = 0.2 N) are engineering
choices, not measured values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .kinematics import N_JOINTS, ArmModel, JointState7, tool_wrench_torques
from .sensor import Wrench3

DEFAULT_TORQUE_CAP_NMM = 5000.0


@dataclass(frozen=True)
class GripForce:
    f: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.f) or self.f < 0:
            raise ValueError(f"grip force must be finite and >= 0, got {self.f}")


@dataclass(frozen=True)
class TactileConfig:
    f_max: float = 10.0
    f_threshold: float = 5.0
    hysteresis: float = 0.2

    def __post_init__(self) -> None:
        if not (self.f_max > 0 and self.f_threshold > 0 and self.hysteresis >= 0):
            raise ValueError(
                "TactileConfig needs f_max > 0, f_threshold > 0, hysteresis >= 0; "
                f"got {self.f_max}, {self.f_threshold}, {self.hysteresis}"
            )


@dataclass(frozen=True)
class VibrationCommand:
    motor1_intensity: float = 0.0
    motor2_on: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.motor1_intensity <= 1.0:
            raise ValueError(f"motor1_intensity must be in [0, 1], got {self.motor1_intensity}")


@dataclass(frozen=True)
class JointTorques7:
    tau: tuple[float, ...]
    saturated: bool = False

    def as_array(self) -> np.ndarray:
        return np.array(self.tau)


ZERO_TORQUES = JointTorques7((0.0,) * N_JOINTS)


def tool_wrench_in_base(w: Wrench3, rotation: np.ndarray) -> np.ndarray:
    """6-vector (force N, moment N*mm) in the base frame.

    Fz acts along tool z, Mx and My about tool x and y; in-plane force and
    Mz are zero.
    """
    force = rotation[:, 2] * w.fz
    moment = rotation[:, 0] * w.mx + rotation[:, 1] * w.my
    return np.concatenate([force, moment])


def kinesthetic_torques(
    w: Wrench3,
    m: ArmModel,
    q: JointState7 | Sequence[float],
    caps: Sequence[float] | float = DEFAULT_TORQUE_CAP_NMM,
) -> JointTorques7:
    """tau = J(q)^T F, each component clamped to its cap (N*mm)."""
    tau = tool_wrench_torques(m, q, w.fz, w.mx, w.my).tolist()
    caps_seq = (float(caps),) * N_JOINTS if np.isscalar(caps) else tuple(caps)
    clipped = tuple(min(max(t, -c), c) for t, c in zip(tau, caps_seq))
    return JointTorques7(clipped, clipped != tuple(tau))


def tactile_command(
    f: GripForce, cfg: TactileConfig, prev: VibrationCommand = VibrationCommand()
) -> VibrationCommand:
    intensity = min(max(f.f / cfg.f_max, 0.0), 1.0)
    if f.f > cfg.f_threshold:
        on = True
    elif f.f < cfg.f_threshold - cfg.hysteresis:
        on = False
    else:
        on = prev.motor2_on
    return VibrationCommand(intensity, on)
