"""Quaternion helpers. Quaternions are (w, x, y, z) numpy arrays."""
import math

import numpy as np

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def normalize(q):
    q = np.asarray(q, dtype=float)
    n = math.sqrt(float(q @ q))
    if n == 0.0:
        return IDENTITY.copy()
    return q / n


def multiply(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def conjugate(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    n = math.sqrt(float(axis @ axis))
    if n == 0.0 or angle == 0.0:
        return IDENTITY.copy()
    s = math.sin(0.5 * angle) / n
    return np.array([math.cos(0.5 * angle), axis[0] * s, axis[1] * s, axis[2] * s])


def to_axis_angle(q):
    """Return (unit axis, angle in [0, pi]) of a unit quaternion."""
    q = normalize(q)
    if q[0] < 0.0:
        q = -q
    s = math.sqrt(max(0.0, 1.0 - q[0] * q[0]))
    angle = 2.0 * math.atan2(s, q[0])
    if s < 1e-15:
        return np.array([1.0, 0.0, 0.0]), 0.0
    return q[1:] / s, angle


def angle_between(a, b):
    """Rotation angle of a^-1 * b, in [0, pi]."""
    d = abs(float(np.dot(normalize(a), normalize(b))))
    return 2.0 * math.atan2(math.sqrt(max(0.0, 1.0 - d * d)), d)


def to_matrix(q):
    w, x, y, z = q
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    return np.array([
        [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
        [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
        [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
    ])


def rotate(q, v):
    return to_matrix(q) @ np.asarray(v, dtype=float)


def integrate(q, omega, dt):
    """Advance orientation q by world-frame angular velocity omega over dt, renormalized."""
    wx, wy, wz = omega
    mag = math.sqrt(wx * wx + wy * wy + wz * wz)
    if mag == 0.0:
        return normalize(q)
    return normalize(multiply(from_axis_angle(omega, mag * dt), q))


def align(src, dst):
    """Shortest-arc rotation taking unit vector src onto unit vector dst."""
    src = np.asarray(src, dtype=float) / np.linalg.norm(src)
    dst = np.asarray(dst, dtype=float) / np.linalg.norm(dst)
    c = float(src @ dst)
    if c > 1.0 - 1e-15:
        return IDENTITY.copy()
    if c < -1.0 + 1e-15:
        helper = np.array([1.0, 0.0, 0.0]) if abs(src[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        return from_axis_angle(np.cross(src, helper), math.pi)
    return from_axis_angle(np.cross(src, dst), math.acos(c))
