"""Rigid-body pose math: unit quaternions and SE(3) composition.

Quaternions are stored as (w, x, y, z) float64 arrays. Poses map points
from their own frame into the parent frame: p_parent = R * p + t.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

QUAT_NORM_TOL = 1e-9


def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(q)
    if n == 0.0:
        raise ValueError("zero quaternion")
    return np.asarray(q, dtype=float) / n


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        if angle != 0.0:
            raise ValueError("zero axis with nonzero angle")
        return quat_identity()
    half = 0.5 * angle
    return np.concatenate(([np.cos(half)], np.sin(half) * axis / n))


def quat_from_rotvec(rotvec: np.ndarray) -> np.ndarray:
    rotvec = np.asarray(rotvec, dtype=float)
    angle = np.linalg.norm(rotvec)
    if angle < 1e-12:
        # first-order expansion keeps the map smooth near identity
        q = np.concatenate(([1.0], 0.5 * rotvec))
        return quat_normalize(q)
    return quat_from_axis_angle(rotvec, angle)


def quat_to_rotvec(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q[0] < 0.0:
        q = -q
    w = min(1.0, max(-1.0, q[0]))
    angle = 2.0 * np.arccos(w)
    s = np.linalg.norm(q[1:])
    if s < 1e-12:
        return 2.0 * q[1:]
    return q[1:] * (angle / s)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_from_matrix(m: np.ndarray) -> np.ndarray:
    # Shepperd's method: pick the largest diagonal combination for stability.
    m = np.asarray(m, dtype=float)
    t = np.trace(m)
    if t > 0.0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s,
                      (m[1, 0] - m[0, 1]) / s])
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array([(m[2, 1] - m[1, 2]) / s,
                      0.25 * s,
                      (m[0, 1] + m[1, 0]) / s,
                      (m[0, 2] + m[2, 0]) / s])
    elif m[1, 1] > m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array([(m[0, 2] - m[2, 0]) / s,
                      (m[0, 1] + m[1, 0]) / s,
                      0.25 * s,
                      (m[1, 2] + m[2, 1]) / s])
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array([(m[1, 0] - m[0, 1]) / s,
                      (m[0, 2] + m[2, 0]) / s,
                      (m[1, 2] + m[2, 1]) / s,
                      0.25 * s])
    return quat_normalize(q)


def quat_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Geodesic angle (rad) between two unit quaternions. The atan2 form
    stays accurate for very small angles where arccos degrades."""
    b = np.asarray(b, dtype=float)
    if float(np.dot(a, b)) < 0.0:
        b = -b
    return 2.0 * float(np.arctan2(np.linalg.norm(a - b), np.linalg.norm(a + b)))


def rotate_vector(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    return quat_to_matrix(q) @ np.asarray(v, dtype=float)


@dataclass(frozen=True)
class Pose:
    """Rigid transform: child frame expressed in a parent frame."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    quat: np.ndarray = field(default_factory=quat_identity)

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        q = np.asarray(self.quat, dtype=float).reshape(4)
        if not np.all(np.isfinite(pos)) or not np.all(np.isfinite(q)):
            raise ValueError("non-finite pose components")
        n = np.linalg.norm(q)
        if abs(n - 1.0) > 1e-6:
            raise ValueError(f"quaternion norm {n} too far from 1")
        if abs(n - 1.0) > QUAT_NORM_TOL:
            q = q / n
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "quat", q)

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    @staticmethod
    def from_xyz_rotvec(xyz, rotvec) -> "Pose":
        return Pose(np.asarray(xyz, dtype=float), quat_from_rotvec(np.asarray(rotvec, dtype=float)))

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Pose":
        m = np.asarray(m, dtype=float)
        return Pose(m[:3, 3].copy(), quat_from_matrix(m[:3, :3]))

    def to_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.quat)
        m[:3, 3] = self.position
        return m

    def compose(self, other: "Pose") -> "Pose":
        """self ∘ other: apply other first, then self."""
        return Pose(self.position + rotate_vector(self.quat, other.position),
                    quat_normalize(quat_multiply(self.quat, other.quat)))

    def __matmul__(self, other: "Pose") -> "Pose":
        return self.compose(other)

    def inverse(self) -> "Pose":
        qinv = quat_conjugate(self.quat)
        return Pose(-rotate_vector(qinv, self.position), qinv)

    def transform_point(self, p: np.ndarray) -> np.ndarray:
        return self.position + rotate_vector(self.quat, p)

    def transform_points(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(pts, dtype=float) @ quat_to_matrix(self.quat).T + self.position

    def rotate(self, v: np.ndarray) -> np.ndarray:
        return rotate_vector(self.quat, v)

    def rotate_many(self, vs: np.ndarray) -> np.ndarray:
        return np.asarray(vs, dtype=float) @ quat_to_matrix(self.quat).T

    def to_dict(self) -> dict:
        return {"position": [float(x) for x in self.position],
                "quat": [float(x) for x in self.quat]}

    @staticmethod
    def from_dict(d: dict) -> "Pose":
        return Pose(np.array(d["position"], dtype=float), np.array(d["quat"], dtype=float))


def position_error(a: Pose, b: Pose) -> float:
    return float(np.linalg.norm(a.position - b.position))


def orientation_error(a: Pose, b: Pose) -> float:
    return quat_angle(a.quat, b.quat)
