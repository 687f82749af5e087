"""Small-matrix algebra on SE(3).

Poses are 4x4 homogeneous matrices and screw twists are 6-vectors ordered
``(omega, v)``.  A spatial twist ``t`` acts on a pose as ``exp([t]) @ T``;
``v`` is the velocity of the body point that momentarily coincides with the
origin of the reference frame.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import PureTranslation, RotationNearPi

# Below this rotation rate the screw axis direction is meaningless.
EPS_OMEGA = 1e-8
# Series expansions are used below this rotation angle.
SMALL_ANGLE = 1e-4
# Logarithm refused within this distance of pi.
PI_MARGIN = 1e-6
ORTHO_DRIFT = 1e-9


class ScrewAxis(NamedTuple):
    direction: np.ndarray
    point_on_axis: np.ndarray
    pitch_velocity: float


def skew(w) -> np.ndarray:
    return np.array(
        [[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]]
    )


def vee(W) -> np.ndarray:
    return np.array([W[2, 1], W[0, 2], W[1, 0]])


def make_pose(rotation=None, position=None) -> np.ndarray:
    T = np.eye(4)
    if rotation is not None:
        T[:3, :3] = rotation
    if position is not None:
        T[:3, 3] = position
    return T


def inverse(T) -> np.ndarray:
    R = T[:3, :3]
    out = np.eye(4)
    out[:3, :3] = R.T
    out[:3, 3] = -R.T @ T[:3, 3]
    return out


def orthonormalize(R) -> np.ndarray:
    """Closest rotation matrix in the Frobenius sense."""
    U, _, Vt = np.linalg.svd(R)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def compose(a, b) -> np.ndarray:
    T = a @ b
    T[3] = (0.0, 0.0, 0.0, 1.0)
    R = T[:3, :3]
    if np.max(np.abs(R.T @ R - np.eye(3))) > ORTHO_DRIFT:
        T[:3, :3] = orthonormalize(R)
    return T


def _exp_coefficients(theta):
    # a = sin(t)/t, b = (1-cos(t))/t^2, c = (t-sin(t))/t^3
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
        c = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    else:
        a = math.sin(theta) / theta
        half = math.sin(0.5 * theta)
        b = 2.0 * half * half / (theta * theta)
        c = (theta - math.sin(theta)) / theta**3
    return a, b, c


def se3_exp(t, ds: float = 1.0) -> np.ndarray:
    """Pose ``exp(ds * [t])`` in closed form."""
    t = np.asarray(t, dtype=float) * ds
    phi, rho = t[:3], t[3:]
    theta = math.sqrt(phi @ phi)
    a, b, c = _exp_coefficients(theta)
    W = skew(phi)
    W2 = W @ W
    T = np.eye(4)
    T[:3, :3] = np.eye(3) + a * W + b * W2
    T[:3, 3] = (np.eye(3) + b * W + c * W2) @ rho
    return T


def _log_so3(R):
    """Rotation vector of R, refusing angles near pi."""
    s = 0.5 * vee(R - R.T)
    sin_t = math.sqrt(s @ s)
    cos_t = 0.5 * (np.trace(R) - 1.0)
    theta = math.atan2(sin_t, cos_t)
    if theta > math.pi - PI_MARGIN:
        raise RotationNearPi(f"rotation angle {theta!r} is within {PI_MARGIN} of pi")
    if theta < SMALL_ANGLE:
        # theta/sin(theta) ~ 1 + theta^2/6
        return s * (1.0 + theta * theta / 6.0), theta
    if theta < 2.5:
        return s * (theta / sin_t), theta
    # Near pi the skew part is small; take the axis from the symmetric part.
    B = 0.5 * (R + R.T) - cos_t * np.eye(3)
    i = int(np.argmax(np.diag(B)))
    axis = B[:, i] / math.sqrt(B[i, i] * (1.0 - cos_t))
    if axis @ s < 0.0:
        axis = -axis
    return axis * theta, theta


def log_pose(T) -> np.ndarray:
    """Twist ``t`` with ``exp([t]) = T`` on the principal branch."""
    phi, theta = _log_so3(T[:3, :3])
    W = skew(phi)
    if theta < SMALL_ANGLE:
        c = 1.0 / 12.0 + theta * theta / 720.0
    else:
        half = 0.5 * theta
        c = (1.0 - half * math.cos(half) / math.sin(half)) / (theta * theta)
    V_inv = np.eye(3) - 0.5 * W + c * (W @ W)
    return np.concatenate([phi, V_inv @ T[:3, 3]])


def se3_log(a, b, ds: float = 1.0) -> np.ndarray:
    """Spatial twist carrying pose ``a`` to pose ``b`` over progress ``ds``.

    Returns ``log(b @ inv(a)) / ds`` so that ``se3_exp(t, ds) @ a == b``.
    Raises RotationNearPi when the relative rotation is (almost) a half turn.
    """
    if ds <= 0:
        raise ValueError("ds must be positive")
    return log_pose(b @ inverse(a)) / ds


def adjoint(T) -> np.ndarray:
    """6x6 screw transformation matrix S(T) mapping twists into T's parent frame."""
    R = T[:3, :3]
    S = np.zeros((6, 6))
    S[:3, :3] = R
    S[3:, 3:] = R
    S[3:, :3] = skew(T[:3, 3]) @ R
    return S


def adjoint_inv(T) -> np.ndarray:
    """S(T)^-1 without a general matrix inverse."""
    R = T[:3, :3]
    S = np.zeros((6, 6))
    S[:3, :3] = R.T
    S[3:, 3:] = R.T
    S[3:, :3] = -R.T @ skew(T[:3, 3])
    return S


def twist_cross(t) -> np.ndarray:
    """6x6 matrix of the twist cross product, so that S(T)' = S(T) twist_cross(body twist)."""
    W = skew(t[:3])
    M = np.zeros((6, 6))
    M[:3, :3] = W
    M[3:, 3:] = W
    M[3:, :3] = skew(t[3:])
    return M


def change_twist_frame(t, frame) -> np.ndarray:
    return adjoint(frame) @ np.asarray(t, dtype=float)


def screw_axis(t, eps: float = EPS_OMEGA) -> ScrewAxis:
    """Instantaneous screw axis of twist ``t`` (Chasles decomposition)."""
    w = np.asarray(t[:3], dtype=float)
    v = np.asarray(t[3:], dtype=float)
    n = math.sqrt(w @ w)
    if n <= eps:
        raise PureTranslation(f"|omega| = {n:g} <= {eps:g}; screw axis at infinity")
    return ScrewAxis(w / n, np.cross(w, v) / (n * n), float(w @ v) / n)


def sclerp(a, b, u: float) -> np.ndarray:
    """Screw linear interpolation; u=0 gives a, u=1 gives b."""
    if u == 0.0:
        return np.array(a, dtype=float)
    if u == 1.0:
        return np.array(b, dtype=float)
    return se3_exp(log_pose(b @ inverse(a)), u) @ a


def rotation_angle(R) -> float:
    s = 0.5 * vee(R - R.T)
    return math.atan2(math.sqrt(s @ s), 0.5 * (np.trace(R) - 1.0))


def log_poses(Ts) -> np.ndarray:
    """Vectorised ``log_pose`` over a stack of poses, shape (n, 4, 4) -> (n, 6)."""
    Ts = np.asarray(Ts, dtype=float)
    R = Ts[:, :3, :3]
    s = 0.5 * np.stack([R[:, 2, 1] - R[:, 1, 2], R[:, 0, 2] - R[:, 2, 0], R[:, 1, 0] - R[:, 0, 1]], axis=1)
    sin_t = np.linalg.norm(s, axis=1)
    cos_t = 0.5 * (np.trace(R, axis1=1, axis2=2) - 1.0)
    theta = np.arctan2(sin_t, cos_t)
    if np.any(theta > math.pi - PI_MARGIN):
        k = int(np.argmax(theta))
        raise RotationNearPi(f"rotation angle {theta[k]!r} is within {PI_MARGIN} of pi")
    small = theta < SMALL_ANGLE
    large = theta >= 2.5
    scale = np.where(small, 1.0 + theta * theta / 6.0, theta / np.where(small, 1.0, sin_t))
    phi = s * scale[:, None]
    for i in np.flatnonzero(large):
        phi[i] = _log_so3(R[i])[0]
    half = 0.5 * theta
    safe = np.where(small, 1.0, theta)
    c = np.where(small, 1.0 / 12.0 + theta * theta / 720.0,
                 (1.0 - half * np.cos(half) / np.sin(np.where(small, 1.0, half))) / (safe * safe))
    p = Ts[:, :3, 3]
    wxp = np.cross(phi, p)
    wxwxp = np.cross(phi, wxp)
    rho = p - 0.5 * wxp + c[:, None] * wxwxp
    return np.concatenate([phi, rho], axis=1)


def relative_twists(poses, step: int, ds: float) -> np.ndarray:
    """Spatial twists log(T[k+step] T[k]^-1) / ds for all valid k."""
    poses = np.asarray(poses, dtype=float)
    if ds <= 0:
        raise ValueError("ds must be positive")
    a, b = poses[:-step], poses[step:]
    Rt = np.swapaxes(a[:, :3, :3], 1, 2)
    rel = np.zeros_like(a)
    rel[:, :3, :3] = b[:, :3, :3] @ Rt
    rel[:, :3, 3] = b[:, :3, 3] - np.einsum("nij,nj->ni", rel[:, :3, :3], a[:, :3, 3])
    rel[:, 3, 3] = 1.0
    return log_poses(rel) / ds
