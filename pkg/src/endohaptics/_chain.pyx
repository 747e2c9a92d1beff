# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled serial-chain kernels: forward kinematics, geometric Jacobian and
Jacobian-transpose torques for a chain of revolute joints.

Chain layout (shared with ``_chain_py``):
    axes      (n, 3)     unit joint axes in each joint frame
    origin_R  (n, 3, 3)  fixed rotation parent -> joint frame
    origin_p  (n, 3)     fixed translation parent -> joint frame
    tool_R    (3, 3), tool_p (3,)  last joint frame -> tool frame
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos

cnp.import_array()

BACKEND = "cython"


cdef inline void _matmul3(double* a, double* b, double* out) noexcept nogil:
    cdef double tmp[9]
    cdef int i, j
    for i in range(3):
        for j in range(3):
            tmp[3 * i + j] = a[3 * i] * b[j] + a[3 * i + 1] * b[3 + j] + a[3 * i + 2] * b[6 + j]
    for i in range(9):
        out[i] = tmp[i]


cdef inline void _rodrigues(double ax, double ay, double az, double q, double* out) noexcept nogil:
    cdef double c = cos(q)
    cdef double s = sin(q)
    cdef double t = 1.0 - c
    out[0] = t * ax * ax + c
    out[1] = t * ax * ay - s * az
    out[2] = t * ax * az + s * ay
    out[3] = t * ax * ay + s * az
    out[4] = t * ay * ay + c
    out[5] = t * ay * az - s * ax
    out[6] = t * ax * az - s * ay
    out[7] = t * ay * az + s * ax
    out[8] = t * az * az + c


cdef void _chain(
    const double[::1] q,
    const double[:, ::1] axes,
    const double[:, :, ::1] origin_R,
    const double[:, ::1] origin_p,
    const double[:, ::1] tool_R,
    const double[::1] tool_p,
    double* R,
    double* p,
    double* z,
    double* o,
) noexcept nogil:
    """Walk the chain; R/p receive the tool pose, z/o (n x 3) joint axes and
    origins in the base frame."""
    cdef int n = q.shape[0]
    cdef int i, r, c
    cdef double rot[9]
    cdef double fixed[9]
    cdef double ax, ay, az, px, py, pz
    for i in range(9):
        R[i] = 0.0
    R[0] = 1.0
    R[4] = 1.0
    R[8] = 1.0
    p[0] = 0.0
    p[1] = 0.0
    p[2] = 0.0
    for i in range(n):
        px = origin_p[i, 0]
        py = origin_p[i, 1]
        pz = origin_p[i, 2]
        for r in range(3):
            p[r] += R[3 * r] * px + R[3 * r + 1] * py + R[3 * r + 2] * pz
        for r in range(3):
            for c in range(3):
                fixed[3 * r + c] = origin_R[i, r, c]
        _matmul3(R, fixed, R)
        ax = axes[i, 0]
        ay = axes[i, 1]
        az = axes[i, 2]
        for r in range(3):
            z[3 * i + r] = R[3 * r] * ax + R[3 * r + 1] * ay + R[3 * r + 2] * az
            o[3 * i + r] = p[r]
        _rodrigues(ax, ay, az, q[i], rot)
        _matmul3(R, rot, R)
    px = tool_p[0]
    py = tool_p[1]
    pz = tool_p[2]
    for r in range(3):
        p[r] += R[3 * r] * px + R[3 * r + 1] * py + R[3 * r + 2] * pz
    for r in range(3):
        for c in range(3):
            fixed[3 * r + c] = tool_R[r, c]
    _matmul3(R, fixed, R)


def fk(q, axes, origin_R, origin_p, tool_R, tool_p):
    """Tool rotation (3, 3) and position (3,)."""
    cdef const double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef int n = qv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] R = np.empty((3, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] p = np.empty(3)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z = np.empty(3 * n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] o = np.empty(3 * n)
    _chain(qv, axes, origin_R, origin_p, tool_R, tool_p,
           <double*> R.data, <double*> p.data, <double*> z.data, <double*> o.data)
    return R, p


cdef void _fill_jacobian(int n, double* p, double* z, double* o, double* J) noexcept nogil:
    cdef int i
    cdef double dx, dy, dz
    for i in range(n):
        dx = p[0] - o[3 * i]
        dy = p[1] - o[3 * i + 1]
        dz = p[2] - o[3 * i + 2]
        J[i] = z[3 * i + 1] * dz - z[3 * i + 2] * dy
        J[n + i] = z[3 * i + 2] * dx - z[3 * i] * dz
        J[2 * n + i] = z[3 * i] * dy - z[3 * i + 1] * dx
        J[3 * n + i] = z[3 * i]
        J[4 * n + i] = z[3 * i + 1]
        J[5 * n + i] = z[3 * i + 2]


def fk_jacobian(q, axes, origin_R, origin_p, tool_R, tool_p):
    """Tool rotation, position and the (6, n) geometric Jacobian
    (rows: linear x, y, z then angular x, y, z; base frame)."""
    cdef const double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef int n = qv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] R = np.empty((3, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] p = np.empty(3)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] J = np.empty((6, n))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z = np.empty(3 * n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] o = np.empty(3 * n)
    _chain(qv, axes, origin_R, origin_p, tool_R, tool_p,
           <double*> R.data, <double*> p.data, <double*> z.data, <double*> o.data)
    _fill_jacobian(n, <double*> p.data, <double*> z.data, <double*> o.data, <double*> J.data)
    return R, p, J


def jt_torques(q, axes, origin_R, origin_p, tool_R, tool_p, wrench6):
    """J(q)^T @ wrench6 for a base-frame wrench (force, moment)."""
    cdef const double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef const double[::1] F = np.ascontiguousarray(wrench6, dtype=np.float64)
    cdef int n = qv.shape[0]
    cdef int i, r
    cdef double acc
    cdef double R[9]
    cdef double p[3]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z = np.empty(3 * n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] o = np.empty(3 * n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] J = np.empty(6 * n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tau = np.empty(n)
    _chain(qv, axes, origin_R, origin_p, tool_R, tool_p,
           R, p, <double*> z.data, <double*> o.data)
    _fill_jacobian(n, p, <double*> z.data, <double*> o.data, <double*> J.data)
    for i in range(n):
        acc = 0.0
        for r in range(6):
            acc += J[r * n + i] * F[r]
        tau[i] = acc
    return tau


def tool_wrench_torques(q, axes, origin_R, origin_p, tool_R, tool_p, double fz, double mx, double my):
    """J(q)^T @ F where F embeds a tool-frame (Fz, Mx, My) wrench in the base
    frame: force along tool z, moments about tool x and y."""
    cdef const double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef int n = qv.shape[0]
    cdef int i, r
    cdef double acc
    cdef double R[9]
    cdef double p[3]
    cdef double F[6]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z = np.empty(3 * n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] o = np.empty(3 * n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] J = np.empty(6 * n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tau = np.empty(n)
    _chain(qv, axes, origin_R, origin_p, tool_R, tool_p,
           R, p, <double*> z.data, <double*> o.data)
    _fill_jacobian(n, p, <double*> z.data, <double*> o.data, <double*> J.data)
    for r in range(3):
        F[r] = R[3 * r + 2] * fz
        F[3 + r] = R[3 * r] * mx + R[3 * r + 1] * my
    for i in range(n):
        acc = 0.0
        for r in range(6):
            acc += J[r * n + i] * F[r]
        tau[i] = acc
    return tau
