"""Rigid-transform and quaternion helpers shared by the kinematics and dynamics code.

Quaternions are stored as (w, x, y, z) with unit norm. Rotation matrices map
local coordinates to the frame they are expressed in, so chaining is plain
matrix multiplication.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"expected 3-vector, got shape {a.shape}")
    return a


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n < 1e-12:
        raise ValueError("cannot normalize zero quaternion")
    return q / n


def quat_to_mat(q) -> np.ndarray:
    """Rotation matrix for a unit quaternion (w, x, y, z)."""
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_mul(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_exp(rotvec) -> np.ndarray:
    """Unit quaternion for a rotation vector (axis * angle)."""
    v = _as_vec3(rotvec)
    angle = np.linalg.norm(v)
    if angle < 1e-12:
        # second-order series keeps the map smooth through zero
        half = 0.5 * v
        return quat_normalize(np.concatenate(([1.0 - angle * angle / 8.0], half)))
    axis = v / angle
    h = 0.5 * angle
    return np.concatenate(([np.cos(h)], np.sin(h) * axis))


def quat_log(q) -> np.ndarray:
    """Rotation vector of a unit quaternion; inverse of quat_exp."""
    q = np.asarray(q, dtype=float)
    if q[0] < 0:
        q = -q
    vn = np.linalg.norm(q[1:])
    if vn < 1e-12:
        return 2.0 * q[1:]
    angle = 2.0 * np.arctan2(vn, q[0])
    return (angle / vn) * q[1:]


def quat_slerp(a, b, u: float) -> np.ndarray:
    """Geodesic interpolation between unit quaternions, shortest arc."""
    a = quat_normalize(a)
    b = quat_normalize(b)
    if float(a @ b) < 0.0:
        b = -b
    rel = quat_log(quat_mul(quat_conj(a), b))
    return quat_mul(a, quat_exp(u * rel))


def mat_to_quat(R) -> np.ndarray:
    """Unit quaternion (w, x, y, z) for a rotation matrix."""
    R = np.asarray(R, dtype=float)
    t = np.trace(R)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (R[2, 1] - R[1, 2]) / s,
                      (R[0, 2] - R[2, 0]) / s,
                      (R[1, 0] - R[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(R[i, i] - R[j, j] - R[k, k] + 1.0, 0.0)) * 2.0
        q = np.empty(4)
        q[0] = (R[k, j] - R[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (R[j, i] + R[i, j]) / s
        q[1 + k] = (R[k, i] + R[i, k]) / s
    return quat_normalize(q)


def skew(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


@dataclass
class Transform:
    """World-or-parent frame pose: rotation matrix R and origin p."""

    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @staticmethod
    def identity() -> "Transform":
        return Transform(np.eye(3), np.zeros(3))

    @staticmethod
    def from_quat_pos(quat, pos) -> "Transform":
        return Transform(quat_to_mat(quat_normalize(quat)), _as_vec3(pos))

    def compose(self, other: "Transform") -> "Transform":
        return Transform(self.R @ other.R, self.R @ other.p + self.p)

    def apply(self, point) -> np.ndarray:
        return self.R @ _as_vec3(point) + self.p

    def inverse(self) -> "Transform":
        Rt = self.R.T
        return Transform(Rt, -Rt @ self.p)


def plane_basis(normal) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal tangent pair (t1, t2) for a plane normal.

    Picks the world axis least aligned with the normal so that a z-up plane
    gets t1 ~ x, t2 ~ y.
    """
    n = _as_vec3(normal)
    n = n / np.linalg.norm(n)
    trial = np.eye(3)[int(np.argmin(np.abs(n)))]
    t1 = trial - np.dot(trial, n) * n
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    return t1, t2
