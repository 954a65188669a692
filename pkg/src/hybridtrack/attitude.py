"""Rotation matrices, unit quaternions and modified Rodrigues parameters.

Quaternions are length-4 arrays ``(q0, q1, q2, q3)`` with the scalar part
first. Rotation matrices map body-frame vectors to the inertial frame.
MRPs are 3-vectors, or the singleton :data:`MRP_INF` for the point at
infinity reached by the quaternion ``(-1, 0, 0, 0)``.
"""

from __future__ import annotations

import math
from typing import Tuple, Union

import numpy as np

# q0 at or below this maps to the MRP point at infinity
INF_THRESHOLD = -1.0 + 1e-12
ORTHONORMAL_TOL = 1e-6


class _PointAtInfinity:
    """The point at infinity of the compactified MRP space."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "MRP_INF"

    def __reduce__(self):
        return (_PointAtInfinity, ())


MRP_INF = _PointAtInfinity()

Mrp = Union[np.ndarray, _PointAtInfinity]


def is_inf(theta: Mrp) -> bool:
    return theta is MRP_INF


def mrp_norm(theta: Mrp) -> float:
    """Euclidean norm of an MRP, ``inf`` for the point at infinity."""
    if is_inf(theta):
        return math.inf
    return float(np.linalg.norm(theta))


def skew(v) -> np.ndarray:
    """Cross-product matrix: ``skew(v) @ s == np.cross(v, s)``."""
    x, y, z = v
    return np.array([[0.0, -z, y],
                     [z, 0.0, -x],
                     [-y, x, 0.0]])


def cross3(a, b) -> np.ndarray:
    """Cross product of two 3-vectors without numpy's axis handling."""
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


def normalize_quat(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q)


def quat_multiply(p, q) -> np.ndarray:
    """Hamilton product ``p * q`` with scalar-first storage."""
    p0, pv = p[0], np.asarray(p[1:])
    q0, qv = q[0], np.asarray(q[1:])
    out = np.empty(4)
    out[0] = p0 * q0 - pv @ qv
    out[1:] = p0 * qv + q0 * pv + cross3(pv, qv)
    return out


def rot_from_quat(q) -> np.ndarray:
    """R(q) = I + 2 q0 [q1]x + 2 [q1]x^2."""
    q0 = q[0]
    S = skew(q[1:])
    return np.eye(3) + 2.0 * q0 * S + 2.0 * S @ S


def _check_rotation(R: np.ndarray, tol: float = ORTHONORMAL_TOL) -> None:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise ValueError(f"expected a 3x3 rotation matrix, got shape {R.shape}")
    err = np.linalg.norm(R.T @ R - np.eye(3))
    if err > tol or abs(np.linalg.det(R) - 1.0) > tol:
        raise ValueError(
            f"matrix is not a rotation (|R^T R - I|_F = {err:.3e}, det = {np.linalg.det(R):.9f})"
        )


def _canonical_sign(q: np.ndarray) -> np.ndarray:
    # first nonzero component positive
    for c in q:
        if c > 0.0:
            return q
        if c < 0.0:
            return -q
    return q


def quat_pair_from_rot(R) -> Tuple[np.ndarray, np.ndarray]:
    """Both unit quaternions mapping to ``R``.

    Uses the largest-pivot extraction so rotations close to pi keep full
    precision. The first member has its first nonzero component positive.
    """
    R = np.asarray(R, dtype=float)
    _check_rotation(R)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    pivots = (tr, R[0, 0], R[1, 1], R[2, 2])
    k = int(np.argmax(pivots))
    q = np.empty(4)
    if k == 0:
        s = 2.0 * math.sqrt(max(1.0 + tr, 0.0))
        q[0] = 0.25 * s
        q[1] = (R[2, 1] - R[1, 2]) / s
        q[2] = (R[0, 2] - R[2, 0]) / s
        q[3] = (R[1, 0] - R[0, 1]) / s
    elif k == 1:
        s = 2.0 * math.sqrt(max(1.0 + R[0, 0] - R[1, 1] - R[2, 2], 0.0))
        q[0] = (R[2, 1] - R[1, 2]) / s
        q[1] = 0.25 * s
        q[2] = (R[0, 1] + R[1, 0]) / s
        q[3] = (R[0, 2] + R[2, 0]) / s
    elif k == 2:
        s = 2.0 * math.sqrt(max(1.0 - R[0, 0] + R[1, 1] - R[2, 2], 0.0))
        q[0] = (R[0, 2] - R[2, 0]) / s
        q[1] = (R[0, 1] + R[1, 0]) / s
        q[2] = 0.25 * s
        q[3] = (R[1, 2] + R[2, 1]) / s
    else:
        s = 2.0 * math.sqrt(max(1.0 - R[0, 0] - R[1, 1] + R[2, 2], 0.0))
        q[0] = (R[1, 0] - R[0, 1]) / s
        q[1] = (R[0, 2] + R[2, 0]) / s
        q[2] = (R[1, 2] + R[2, 1]) / s
        q[3] = 0.25 * s
    q = _canonical_sign(q / np.linalg.norm(q))
    return q, -q


def mrp_from_quat(q) -> Mrp:
    """Stereographic projection ``q1 / (1 + q0)``."""
    q0 = float(q[0])
    if q0 <= INF_THRESHOLD:
        return MRP_INF
    return np.asarray(q[1:], dtype=float) / (1.0 + q0)


def shadow(theta: Mrp) -> Mrp:
    """Shadow MRP ``-theta / |theta|^2``, swapping 0 and infinity."""
    if is_inf(theta):
        return np.zeros(3)
    n2 = float(theta @ theta)
    if n2 == 0.0:
        return MRP_INF
    return -np.asarray(theta, dtype=float) / n2


def mrp_rate_matrix(theta: Mrp) -> np.ndarray:
    """Kinematic matrix T with ``theta_dot = T(theta) @ omega``."""
    if is_inf(theta):
        raise ValueError("MRP rate matrix is undefined at the point at infinity")
    theta = np.asarray(theta, dtype=float)
    n2 = theta @ theta
    return 0.25 * ((1.0 - n2) * np.eye(3) + 2.0 * skew(theta) + 2.0 * np.outer(theta, theta))


def rot_from_mrp(theta: Mrp) -> np.ndarray:
    """Rotation matrix of an MRP, consistent with ``rot_from_quat``.

    Equals ``rot_from_quat`` of the quaternion ``((1 - n) / (1 + n), 2 theta / (1 + n))``
    with ``n = |theta|^2``, so the linear term enters with a positive sign.
    """
    if is_inf(theta):
        return np.eye(3)
    theta = np.asarray(theta, dtype=float)
    n2 = theta @ theta
    S = skew(theta)
    return np.eye(3) + (8.0 * S @ S + 4.0 * (1.0 - n2) * S) / (1.0 + n2) ** 2


def quat_dist(q_hat, R) -> float:
    """Distance ``1 - max_p q_hat . p`` from the memory quaternion to the lifts of R."""
    q, _ = quat_pair_from_rot(R)
    return 1.0 - abs(float(np.dot(q_hat, q)))


def nearest_lift(q_hat, R) -> np.ndarray:
    """The lift of ``R`` maximising the inner product with ``q_hat``."""
    q, neg = quat_pair_from_rot(R)
    ip = float(np.dot(q_hat, q))
    if ip > 0.0:
        return q
    if ip < 0.0:
        return neg
    # measure-zero tie: q is already the canonical member
    return q


def rot_from_euler_zyx(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """R = Rz(yaw) Ry(pitch) Rx(roll), angles in radians."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    Rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    Ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    Rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    return Rz @ Ry @ Rx


def yaw_from_rot(R) -> float:
    """ZYX yaw angle of a rotation matrix."""
    return math.atan2(R[1, 0], R[0, 0])


def wrap_angle(a):
    return (np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi


def random_unit_quaternions(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed unit quaternions, shape (n, 4)."""
    q = rng.standard_normal((n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)
