"""7-DOF serial arm model: forward kinematics, geometric Jacobian, motion scaling.

The chain kernels come from the compiled ``_chain`` extension when it is
built, otherwise from the pure-Python ``_chain_py``. Set
``ENDOHAPTICS_PURE_PYTHON=1`` to force the fallback.

Lengths are in mm, angles in rad. Quaternions are (w, x, y, z).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

if os.environ.get("ENDOHAPTICS_PURE_PYTHON"):
    from . import _chain_py as _chain
else:
    try:
        from . import _chain  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        from . import _chain_py as _chain

BACKEND: str = _chain.BACKEND

N_JOINTS = 7


def rpy_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """R = Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def quat_from_matrix(R: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) with w >= 0."""
    m00, m01, m02 = R[0]
    m10, m11, m12 = R[1]
    m20, m21, m22 = R[2]
    tr = m00 + m11 + m22
    if tr > 0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q = (0.25 * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s)
    elif m00 > m11 and m00 > m22:
        s = 2.0 * math.sqrt(1.0 + m00 - m11 - m22)
        q = ((m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s)
    elif m11 > m22:
        s = 2.0 * math.sqrt(1.0 + m11 - m00 - m22)
        q = ((m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s)
    else:
        s = 2.0 * math.sqrt(1.0 + m22 - m00 - m11)
        q = ((m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s)
    out = np.array(q)
    out /= np.linalg.norm(out)
    return -out if out[0] < 0 else out


def matrix_from_quat(q: Sequence[float]) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_multiply(a: Sequence[float], b: Sequence[float]) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


IDENTITY_QUAT = (1.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class JointSpec:
    axis: tuple[float, float, float]
    origin_xyz: tuple[float, float, float] = (0.0, 0.0, 0.0)
    origin_rpy: tuple[float, float, float] = (0.0, 0.0, 0.0)
    limits: tuple[float, float] = (-math.pi, math.pi)
    label: str = ""


@dataclass(frozen=True)
class ArmModel:
    """Immutable revolute chain of exactly seven joints plus a tool frame.

    Each joint frame is reached from its parent by the fixed ``origin``
    transform, then rotated about ``axis`` by the joint angle.
    """

    joints: tuple[JointSpec, ...]
    tool_xyz: tuple[float, float, float] = (0.0, 0.0, 0.0)
    tool_rpy: tuple[float, float, float] = (0.0, 0.0, 0.0)
    name: str = "custom"
    _arrays: tuple = field(init=False, repr=False, compare=False)
    _limits: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.joints) != N_JOINTS:
            raise ValueError(f"ArmModel needs exactly {N_JOINTS} joints, got {len(self.joints)}")
        axes = np.empty((N_JOINTS, 3))
        origin_R = np.empty((N_JOINTS, 3, 3))
        origin_p = np.empty((N_JOINTS, 3))
        for i, j in enumerate(self.joints):
            lo, hi = j.limits
            if not lo < hi:
                raise ValueError(f"joint {i + 1}: limits must satisfy min < max, got {j.limits}")
            a = np.asarray(j.axis, dtype=float)
            norm = np.linalg.norm(a)
            if a.shape != (3,) or not np.isfinite(norm) or norm == 0:
                raise ValueError(f"joint {i + 1}: axis must be a non-zero 3-vector, got {j.axis}")
            axes[i] = a / norm
            origin_R[i] = rpy_matrix(*j.origin_rpy)
            origin_p[i] = j.origin_xyz
        arrays = tuple(
            np.ascontiguousarray(x)
            for x in (axes, origin_R, origin_p, rpy_matrix(*self.tool_rpy), np.array(self.tool_xyz, float))
        )
        for x in arrays:
            x.setflags(write=False)
        object.__setattr__(self, "_arrays", arrays)
        object.__setattr__(self, "_limits", tuple((float(j.limits[0]), float(j.limits[1])) for j in self.joints))

    @property
    def limits(self) -> tuple[tuple[float, float], ...]:
        return self._limits

    @property
    def lower(self) -> np.ndarray:
        return np.array([j.limits[0] for j in self.joints])

    @property
    def upper(self) -> np.ndarray:
        return np.array([j.limits[1] for j in self.joints])

    @property
    def chain(self) -> tuple:
        """(axes, origin_R, origin_p, tool_R, tool_p) in the kernel layout."""
        return self._arrays


def default_arm() -> ArmModel:
    """Master arm used by every pinned numeric test.

    ====  ======  ==================  ============  ===============  ===========
    j     axis    origin (mm)         limits (rad)  role             label
    ====  ======  ==================  ============  ===============  ===========
    1     z       (0, 0, 300)         +/- pi        positioning      base yaw
    2     y       (0, 0, 0)           +/- 1.6       positioning      shoulder
    3     y       (0, 0, 280)         -2.4 .. 1.2   positioning      elbow
    4     x       (220, 0, 0)         +/- pi        orientation      forearm roll
    5     y       (0, 0, 0)           +/- 1.6       orientation      wrist pitch
    6     z       (0, 0, 0)           +/- 1.6       orientation      wrist yaw
    7     x       (0, 0, 0)           +/- pi        orientation      tool roll
    ====  ======  ==================  ============  ===============  ===========

    Tool frame: 100 mm along joint-7 x, rotated +90 deg about y so the tool z
    axis runs along the shaft. Links total 900 mm. Home pose (q = 0) puts the
    tool tip at (320, 0, 580) with tool z along base +x.

    Singular posture: q = (0, 0, -pi/2, 0, 0, 0, 0) stretches the forearm
    straight up, making joints 1, 4 and 7 collinear along base z while 2, 3
    and 5 stay parallel; the Jacobian drops to rank 4.
    """
    joints = (
        JointSpec((0, 0, 1), (0, 0, 300), limits=(-math.pi, math.pi), label="base yaw"),
        JointSpec((0, 1, 0), (0, 0, 0), limits=(-1.6, 1.6), label="shoulder pitch"),
        JointSpec((0, 1, 0), (0, 0, 280), limits=(-2.4, 1.2), label="elbow pitch"),
        JointSpec((1, 0, 0), (220, 0, 0), limits=(-math.pi, math.pi), label="forearm roll"),
        JointSpec((0, 1, 0), (0, 0, 0), limits=(-1.6, 1.6), label="wrist pitch"),
        JointSpec((0, 0, 1), (0, 0, 0), limits=(-1.6, 1.6), label="wrist yaw"),
        JointSpec((1, 0, 0), (0, 0, 0), limits=(-math.pi, math.pi), label="tool roll"),
    )
    return ArmModel(joints, tool_xyz=(100.0, 0.0, 0.0), tool_rpy=(0.0, math.pi / 2, 0.0), name="default")


SINGULAR_POSTURE = (0.0, 0.0, -math.pi / 2, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class JointState7:
    q: tuple[float, ...]
    clamped: bool = False

    def __post_init__(self) -> None:
        if len(self.q) != N_JOINTS:
            raise ValueError(f"JointState7 needs {N_JOINTS} angles, got {len(self.q)}")

    @classmethod
    def within(cls, model: ArmModel, q: Sequence[float]) -> "JointState7":
        """Clamp raw encoder angles into the model's limits, flagging any clamp."""
        raw = [float(v) for v in q]
        if len(raw) != N_JOINTS or not all(math.isfinite(v) for v in raw):
            raise ValueError(f"expected {N_JOINTS} finite joint angles, got {q!r}")
        clipped = tuple(min(max(v, lo), hi) for v, (lo, hi) in zip(raw, model.limits))
        return cls(clipped, clipped != tuple(raw))

    def as_array(self) -> np.ndarray:
        return np.array(self.q)


@dataclass(frozen=True)
class ToolPose:
    position: np.ndarray
    orientation: np.ndarray
    clamped: bool = False

    @property
    def rotation(self) -> np.ndarray:
        return matrix_from_quat(self.orientation)


@dataclass(frozen=True)
class PoseDelta:
    """Tool displacement: translation (mm) and a rotation quaternion."""

    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rotation: tuple[float, float, float, float] = IDENTITY_QUAT
    clamped: bool = False

    @classmethod
    def between(cls, before: ToolPose, after: ToolPose) -> "PoseDelta":
        dp = np.asarray(after.position) - np.asarray(before.position)
        dq = quat_from_matrix(after.rotation @ before.rotation.T)
        return cls(tuple(float(v) for v in dp), tuple(float(v) for v in dq))


@dataclass(frozen=True)
class ScalingPolicy:
    translation_scale: float = 0.25
    workspace_min: tuple[float, float, float] = (-100.0, -100.0, -100.0)
    workspace_max: tuple[float, float, float] = (100.0, 100.0, 100.0)

    def __post_init__(self) -> None:
        if not (0.0 < self.translation_scale <= 1.0):
            raise ValueError(f"translation_scale must be in (0, 1], got {self.translation_scale}")
        if any(lo > hi for lo, hi in zip(self.workspace_min, self.workspace_max)):
            raise ValueError("workspace_min must be <= workspace_max on every axis")


def _joint_array(m: ArmModel, q) -> tuple[np.ndarray, bool]:
    if isinstance(q, JointState7):
        state = q
        if not all(lo <= v <= hi for v, (lo, hi) in zip(state.q, m.limits)):
            state = JointState7.within(m, state.q)
    else:
        state = JointState7.within(m, q)
    return np.array(state.q), state.clamped


def forward_kinematics(m: ArmModel, q: JointState7 | Sequence[float]) -> ToolPose:
    qa, clamped = _joint_array(m, q)
    R, p = _chain.fk(qa, *m.chain)
    return ToolPose(p, quat_from_matrix(R), clamped)


def fk_matrix(m: ArmModel, q: JointState7 | Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Tool rotation matrix and position, no quaternion conversion."""
    qa, _ = _joint_array(m, q)
    return _chain.fk(qa, *m.chain)


def jacobian(m: ArmModel, q: JointState7 | Sequence[float]) -> np.ndarray:
    """6x7 geometric Jacobian: rows 0-2 tool linear velocity (mm/s), rows
    3-5 angular velocity (rad/s), both in the base frame."""
    qa, _ = _joint_array(m, q)
    return _chain.fk_jacobian(qa, *m.chain)[2]


def jacobian_transpose(m: ArmModel, q: JointState7 | Sequence[float], wrench6) -> np.ndarray:
    """J(q)^T @ wrench6, wrench6 = base-frame (force N, moment N*mm)."""
    qa, _ = _joint_array(m, q)
    return _chain.jt_torques(qa, *m.chain, np.asarray(wrench6, dtype=float))


def tool_wrench_torques(
    m: ArmModel, q: JointState7 | Sequence[float], fz: float, mx: float, my: float
) -> np.ndarray:
    """J(q)^T @ F for a tool-frame wrench with only Fz, Mx, My non-zero."""
    qa, _ = _joint_array(m, q)
    return _chain.tool_wrench_torques(qa, *m.chain, fz, mx, my)


def scale_motion(
    delta: PoseDelta,
    policy: ScalingPolicy,
    position: Sequence[float] = (0.0, 0.0, 0.0),
) -> PoseDelta:
    """Scale the translation and clamp the result into the workspace box.

    The box is applied to ``position + scaled translation``; with the default
    origin it bounds the displacement itself. Rotation passes through.
    """
    t = [float(v) for v in delta.translation]
    if not all(math.isfinite(v) for v in t):
        raise ValueError(f"non-finite displacement {delta.translation}")
    s = policy.translation_scale
    scaled = [s * v for v in t]
    base = [float(v) for v in position]
    target = [b + v for b, v in zip(base, scaled)]
    bounded = [min(max(v, lo), hi) for v, lo, hi in zip(target, policy.workspace_min, policy.workspace_max)]
    clamped = bounded != target
    applied = [v - b for v, b in zip(bounded, base)] if clamped else scaled
    return PoseDelta(tuple(applied), delta.rotation, clamped)
