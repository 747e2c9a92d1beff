"""Independent reference implementations used only by the tests.

Nothing here imports the package's kernels: the chain oracle builds naive
4x4 homogeneous transforms from the joint table, the sensor oracle inverts
the compliance matrix numerically.
"""

from __future__ import annotations

import math

import numpy as np


def _rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=float)


def _rot_y(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=float)


def _rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=float)


def _skew(v):
    return np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]], dtype=float)


def _axis_angle(axis, angle):
    # matrix exponential of the skew generator, by power series
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    K = _skew(a) * angle
    out = np.eye(3)
    term = np.eye(3)
    for n in range(1, 40):
        term = term @ K / n
        out = out + term
    return out


def homogeneous(R, p):
    T = np.eye(4)
    T[:3, :3] = R
    T[:3, 3] = p
    return T


def chain_oracle(model, q) -> np.ndarray:
    """4x4 tool transform for ``model`` at ``q`` by naive matrix products."""
    T = np.eye(4)
    for spec, qi in zip(model.joints, q):
        roll, pitch, yaw = spec.origin_rpy
        fixed = homogeneous(_rot_z(yaw) @ _rot_y(pitch) @ _rot_x(roll), spec.origin_xyz)
        T = T @ fixed @ homogeneous(_axis_angle(spec.axis, qi), np.zeros(3))
    roll, pitch, yaw = model.tool_rpy
    return T @ homogeneous(_rot_z(yaw) @ _rot_y(pitch) @ _rot_x(roll), model.tool_xyz)


def vee(W):
    """Axial vector of the skew-symmetric part of W."""
    A = 0.5 * (W - W.T)
    return np.array([A[2, 1], A[0, 2], A[1, 0]])


def fd_jacobian(fk, q, h=1e-6) -> np.ndarray:
    """Central-difference geometric Jacobian from ``fk(q) -> (R, p)``."""
    q = np.asarray(q, dtype=float)
    R0, _ = fk(q)
    J = np.zeros((6, len(q)))
    for i in range(len(q)):
        dq = np.zeros(len(q))
        dq[i] = h
        Rp, pp = fk(q + dq)
        Rm, pm = fk(q - dq)
        J[:3, i] = (pp - pm) / (2 * h)
        J[3:, i] = vee((Rp - Rm) / (2 * h) @ R0.T)
    return J


def virtual_work_torques(fk, q, wrench6, h=1e-6) -> np.ndarray:
    """Gradient of the virtual work <F, pose displacement> w.r.t. q."""
    return fd_jacobian(fk, q, h).T @ np.asarray(wrench6, dtype=float)


def compliance_oracle(k: float, d: float) -> np.ndarray:
    """Spring deflections per unit (Fz, Mx, My), springs at 90/210/330 deg.

    Each spring at angle phi sits at (d cos phi, d sin phi). A moment Mx is
    shared in proportion to the y lever arm, My to the (negated) x lever arm,
    so each column solves k * sum(r_i * delta_i) = M with delta_i ~ r_i.
    """
    phis = np.radians([90.0, 210.0, 330.0])
    x, y = d * np.cos(phis), d * np.sin(phis)
    fz = np.full(3, 1.0 / (3 * k))
    mx = y / (k * np.sum(y * y))
    my = -x / (k * np.sum(x * x))
    return np.column_stack([fz, mx, my])
