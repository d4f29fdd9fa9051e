"""Small rotation and 6-D spatial-vector helpers.

Spatial motion/force vectors use the [angular; linear] ordering and are
expressed in world coordinates at the world origin. Quaternions are
stored as (w, x, y, z).
"""

import math

import numpy as np


def cross3(a, b):
    """3-vector cross product (much cheaper than np.cross for single vectors)."""
    return np.array(
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    )


def skew(v):
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rotation_about(axis, angle):
    """Rodrigues rotation for a unit axis."""
    k = skew(axis)
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


def so3_exp(w):
    theta = math.sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2])
    if theta < 1e-12:
        return np.eye(3) + skew(w)
    return rotation_about(np.asarray(w) / theta, theta)


def so3_log(R):
    cos_t = min(1.0, max(-1.0, 0.5 * (np.trace(R) - 1.0)))
    theta = math.acos(cos_t)
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < 1e-9:
        return 0.5 * w
    if math.pi - theta < 1e-6:
        # near pi the antisymmetric part vanishes; use the symmetric part
        B = 0.5 * (R + np.eye(3))
        axis = np.sqrt(np.clip(np.diag(B), 0.0, None))
        i = int(np.argmax(axis))
        axis = B[i] / axis[i]
        return theta * axis / np.linalg.norm(axis)
    return theta / (2.0 * math.sin(theta)) * w


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(R):
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    if tr > 0.0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    if q[0] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def quat_mul(a, b):
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


def quat_exp(w):
    """Unit quaternion of the rotation vector ``w``."""
    theta = math.sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2])
    if theta < 1e-12:
        q = np.array([1.0, 0.5 * w[0], 0.5 * w[1], 0.5 * w[2]])
        return q / np.linalg.norm(q)
    s = math.sin(0.5 * theta) / theta
    return np.array([math.cos(0.5 * theta), s * w[0], s * w[1], s * w[2]])


def integrate_quat(q, omega_world, dt):
    """Advance an orientation by a world-frame angular velocity over ``dt``."""
    q = quat_mul(quat_exp(np.asarray(omega_world) * dt), q)
    q = q / np.linalg.norm(q)
    if q[0] < 0.0:
        q = -q
    return q


def pitch_of(R):
    """Rotation about the world y axis (ZYX convention)."""
    return math.atan2(-R[2, 0], math.hypot(R[2, 1], R[2, 2]))


def crm(v):
    """Motion cross-product operator ``v x``."""
    w = skew(v[:3])
    out = np.zeros((6, 6))
    out[:3, :3] = w
    out[3:, 3:] = w
    out[3:, :3] = skew(v[3:])
    return out


def crf(v):
    """Force cross-product operator ``v x*``."""
    return -crm(v).T


def cross_motion(v, m):
    w, u = v[:3], v[3:]
    return np.concatenate([cross3(w, m[:3]), cross3(w, m[3:]) + cross3(u, m[:3])])


def cross_force(v, f):
    w, u = v[:3], v[3:]
    return np.concatenate([cross3(w, f[:3]) + cross3(u, f[3:]), cross3(w, f[3:])])


def spatial_inertia(mass, com, inertia_com):
    """World-origin spatial inertia of a body with CoM ``com`` (world)."""
    x, y, z = com
    mc = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]]) * mass
    out = np.zeros((6, 6))
    # c c^T = -c c for a skew matrix
    out[:3, :3] = inertia_com - (mc @ mc) / mass
    out[:3, 3:] = mc
    out[3:, :3] = -mc
    out[3, 3] = out[4, 4] = out[5, 5] = mass
    return out
