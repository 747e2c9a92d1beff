"""Pure-Python serial-chain kernels; same contract as the compiled ``_chain``.

Plain float arithmetic on row-major 9-lists: for 3x3 work this beats numpy's
per-call overhead by a wide margin.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"


def _matmul3(a, b):
    return [
        a[0] * b[0] + a[1] * b[3] + a[2] * b[6],
        a[0] * b[1] + a[1] * b[4] + a[2] * b[7],
        a[0] * b[2] + a[1] * b[5] + a[2] * b[8],
        a[3] * b[0] + a[4] * b[3] + a[5] * b[6],
        a[3] * b[1] + a[4] * b[4] + a[5] * b[7],
        a[3] * b[2] + a[4] * b[5] + a[5] * b[8],
        a[6] * b[0] + a[7] * b[3] + a[8] * b[6],
        a[6] * b[1] + a[7] * b[4] + a[8] * b[7],
        a[6] * b[2] + a[7] * b[5] + a[8] * b[8],
    ]


def _rodrigues(ax, ay, az, q):
    c, s = math.cos(q), math.sin(q)
    t = 1.0 - c
    return [
        t * ax * ax + c, t * ax * ay - s * az, t * ax * az + s * ay,
        t * ax * ay + s * az, t * ay * ay + c, t * ay * az - s * ax,
        t * ax * az - s * ay, t * ay * az + s * ax, t * az * az + c,
    ]


def _chain(q, axes, origin_R, origin_p, tool_R, tool_p):
    """Tool rotation (9-list), position (3-list), joint axes and origins in base."""
    R = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
    p = [0.0, 0.0, 0.0]
    z = []
    o = []
    for qi, (ax, ay, az), fixed, (px, py, pz) in zip(q, axes, origin_R, origin_p):
        p = [
            p[0] + R[0] * px + R[1] * py + R[2] * pz,
            p[1] + R[3] * px + R[4] * py + R[5] * pz,
            p[2] + R[6] * px + R[7] * py + R[8] * pz,
        ]
        R = _matmul3(R, fixed)
        z.append((
            R[0] * ax + R[1] * ay + R[2] * az,
            R[3] * ax + R[4] * ay + R[5] * az,
            R[6] * ax + R[7] * ay + R[8] * az,
        ))
        o.append(p)
        R = _matmul3(R, _rodrigues(ax, ay, az, qi))
    px, py, pz = tool_p
    p = [
        p[0] + R[0] * px + R[1] * py + R[2] * pz,
        p[1] + R[3] * px + R[4] * py + R[5] * pz,
        p[2] + R[6] * px + R[7] * py + R[8] * pz,
    ]
    R = _matmul3(R, tool_R)
    return R, p, z, o


def _jacobian_rows(p, z, o):
    rows = [[], [], [], [], [], []]
    for (zx, zy, zz), (ox, oy, oz) in zip(z, o):
        dx, dy, dz = p[0] - ox, p[1] - oy, p[2] - oz
        rows[0].append(zy * dz - zz * dy)
        rows[1].append(zz * dx - zx * dz)
        rows[2].append(zx * dy - zy * dx)
        rows[3].append(zx)
        rows[4].append(zy)
        rows[5].append(zz)
    return rows


def _prepare(axes, origin_R, origin_p, tool_R, tool_p):
    return (
        axes.tolist(),
        [r.ravel().tolist() for r in origin_R],
        origin_p.tolist(),
        tool_R.ravel().tolist(),
        tool_p.tolist(),
    )


def fk(q, axes, origin_R, origin_p, tool_R, tool_p):
    R, p, _, _ = _chain([float(v) for v in q], *_prepare(axes, origin_R, origin_p, tool_R, tool_p))
    return np.array(R).reshape(3, 3), np.array(p)


def fk_jacobian(q, axes, origin_R, origin_p, tool_R, tool_p):
    R, p, z, o = _chain([float(v) for v in q], *_prepare(axes, origin_R, origin_p, tool_R, tool_p))
    return np.array(R).reshape(3, 3), np.array(p), np.array(_jacobian_rows(p, z, o))


def _jt(rows, F):
    return np.array([sum(rows[r][i] * F[r] for r in range(6)) for i in range(len(rows[0]))])


def jt_torques(q, axes, origin_R, origin_p, tool_R, tool_p, wrench6):
    R, p, z, o = _chain([float(v) for v in q], *_prepare(axes, origin_R, origin_p, tool_R, tool_p))
    return _jt(_jacobian_rows(p, z, o), [float(v) for v in wrench6])


def tool_wrench_torques(q, axes, origin_R, origin_p, tool_R, tool_p, fz, mx, my):
    R, p, z, o = _chain([float(v) for v in q], *_prepare(axes, origin_R, origin_p, tool_R, tool_p))
    F = [
        R[2] * fz, R[5] * fz, R[8] * fz,
        R[0] * mx + R[1] * my, R[3] * mx + R[4] * my, R[6] * mx + R[7] * my,
    ]
    return _jt(_jacobian_rows(p, z, o), F)
