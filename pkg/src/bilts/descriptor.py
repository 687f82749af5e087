"""Bi-invariant trajectory-shape descriptors.

The core is an extended QR decomposition ``X = S(T_wf) R`` of a 6x3 stack of
spatial twists into a screw transformation (the functional frame {f}) and a
twice upper-triangular matrix R.  The discretized descriptor is obtained by
decomposing ``Y_w A`` and undoing ``A`` afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import se3
from .errors import SingularDecomposition, SingularInvariants

# Regularity threshold on r11 and r22, relative to the norm of the input stack.
EPS_QR = 1e-7

# Y_w A = [t_k, t_+ - t_-, t_-]; det(A) = 1.
A_MATRIX = np.array([[0.0, -1.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
A_INV = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 1.0]])

# Entries of R that are zero in the twice upper-triangular form.
TRIANGULAR_ZEROS = ((1, 0), (2, 0), (2, 1), (4, 0), (5, 0), (5, 1))


@dataclass(frozen=True)
class FunctionalFrame:
    pose: np.ndarray
    regularized: bool = False
    distance_clamped: bool = False
    singular: str | None = None  # None, "r11" or "r22"

    @property
    def rotation(self):
        return self.pose[:3, :3]

    @property
    def origin(self):
        return self.pose[:3, 3]


@dataclass(frozen=True)
class ShapeDescriptor:
    y: np.ndarray  # 6x3: twists at s-m*ds, s, s+m*ds expressed in {f}
    m: int
    ds: float
    frame: FunctionalFrame | None = None


def taylor_matrix(delta_s: float) -> np.ndarray:
    """Taylor coefficients C(ds) mapping [t, t', t''] to [t(s-ds), t(s), t(s+ds)]."""
    h2 = 0.5 * delta_s * delta_s
    return np.array([[1.0, 1.0, 1.0], [-delta_s, 0.0, delta_s], [h2, 0.0, h2]])


def taylor_matrix_inv(delta_s: float) -> np.ndarray:
    if delta_s == 0:
        raise ValueError("delta_s must be non-zero")
    a = 0.5 / delta_s
    b = 1.0 / (delta_s * delta_s)
    return np.array([[0.0, -a, b], [1.0, 0.0, -2.0 * b], [0.0, a, b]])


def progress_scale_steps(xi: float, ds: float) -> int:
    """Integer multiple m of the sampling step approximating the scale xi."""
    return max(1, int(math.floor(xi / ds + 0.5)))


def _minimal_rotation(a, b):
    """Rotation of least angle taking unit vector a onto unit vector b."""
    c = float(a @ b)
    axis = np.cross(a, b)
    s = math.sqrt(axis @ axis)
    if s < 1e-12:
        if c > 0:
            return np.eye(3)
        # half turn about any axis perpendicular to a
        helper = np.eye(3)[int(np.argmin(np.abs(a)))]
        n = np.cross(a, helper)
        n /= np.linalg.norm(n)
        return 2.0 * np.outer(n, n) - np.eye(3)
    K = se3.skew(axis / s)
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


def _complete_frame(e1, reference):
    """Right-handed frame with first axis e1, rotated minimally from `reference`."""
    Q = _minimal_rotation(reference[:, 0], e1) @ reference
    e2 = Q[:, 1] - (Q[:, 1] @ e1) * e1
    e2 /= np.linalg.norm(e2)
    return np.column_stack([e1, e2, np.cross(e1, e2)])


def _frame_from_two(e1, u, tol, reference):
    """Gram-Schmidt frame from e1 and u; falls back to `reference` if u is parallel to e1."""
    u = u - (e1 @ u) * e1
    u = u - (e1 @ u) * e1
    n = math.sqrt(u @ u)
    if n <= tol:
        return _complete_frame(e1, reference)
    e2 = u / n
    return np.column_stack([e1, e2, np.cross(e1, e2)])


def eqr_decompose(X, body_origin=None, L: float | None = None, regularize: bool = False,
                  reference_rotation=None):
    """Extended QR decomposition of a 6x3 twist stack.

    Returns ``(frame, R)`` with ``X = S(frame.pose) @ R``.  In the regular case
    R is twice upper-triangular with r11 > 0 and r22 > 0.

    With ``regularize`` the origin of {f} is kept within distance ``L`` of
    ``body_origin``; R2 then loses its triangular form whenever the clamp is
    active.  Singular stacks (r11 or r22 ~ 0) raise SingularDecomposition
    unless ``regularize`` is set, in which case the missing axes are taken
    from ``reference_rotation`` (previous frame or body orientation) by a
    minimal rotation.
    """
    X = np.asarray(X, dtype=float)
    if X.shape != (6, 3):
        raise ValueError(f"expected a 6x3 stack, got {X.shape}")
    if regularize:
        if body_origin is None or L is None:
            raise ValueError("regularize=True requires body_origin and L")
        if L < 0:
            raise ValueError("L must be non-negative")
        body_origin = np.asarray(body_origin, dtype=float)
    reference = np.eye(3) if reference_rotation is None else np.asarray(reference_rotation, dtype=float)

    X1, X2 = X[:3], X[3:]
    tol11 = EPS_QR * np.linalg.norm(X)
    tol22 = EPS_QR * np.linalg.norm(X1)

    singular = None
    x1 = X1[:, 0]
    r11 = math.sqrt(x1 @ x1)
    if r11 <= tol11 or r11 == 0.0:
        singular = "r11"
    else:
        e1 = x1 / r11
        x2 = X1[:, 1]
        r12 = float(e1 @ x2)
        u = x2 - r12 * e1
        u = u - (e1 @ u) * e1
        r22 = math.sqrt(u @ u)
        if r22 <= tol22 or r22 == 0.0:
            singular = "r22"
        else:
            e2 = u / r22
            Q = np.column_stack([e1, e2, np.cross(e1, e2)])

    if singular is not None and not regularize:
        raise SingularDecomposition(f"{singular} is numerically zero")

    if singular == "r11":
        # Near pure translation: orient {f} along the translational velocity
        # and its change, origin at the body.
        t1 = X2[:, 0]
        n1 = math.sqrt(t1 @ t1)
        if n1 <= EPS_QR * np.linalg.norm(X2) or n1 == 0.0:
            Q = reference.copy()
        else:
            Q = _frame_from_two(t1 / n1, X2[:, 1], EPS_QR * np.linalg.norm(X2), reference)
        R1 = Q.T @ X1
        p_star = Q.T @ body_origin
        # the axis lies at infinity, so the origin is always pulled in
        clamped = True
    else:
        if singular == "r22":
            Q = _complete_frame(e1, reference)
        R1 = Q.T @ X1
        R1[1, 0] = R1[2, 0] = 0.0
        R1[0, 0] = r11
        G = Q.T @ X2
        z = G[1, 0] / r11
        y = -G[2, 0] / r11
        if singular == "r22":
            R1[2, 1] = 0.0 if abs(R1[2, 1]) <= tol22 else R1[2, 1]
            # position along the ISA is free: take the foot nearest the body
            x = float(Q[:, 0] @ body_origin)
        else:
            R1[1, 1] = r22
            R1[2, 1] = 0.0
            x = (G[2, 1] + R1[0, 1] * y) / R1[1, 1]
        p_star = np.array([x, y, z])
        clamped = False
        if regularize:
            pb = Q.T @ body_origin
            delta = p_star - pb
            dist = math.sqrt(delta @ delta)
            if dist > L:
                delta = delta * (L / dist) if dist > 0 else delta
                clamped = True
            p_star = pb + delta

    R2 = Q.T @ X2 - se3.skew(p_star) @ R1
    if singular is None and not clamped:
        R2[1, 0] = R2[2, 0] = R2[2, 1] = 0.0
    R = np.vstack([R1, R2])
    frame = FunctionalFrame(se3.make_pose(Q, Q @ p_star), regularized=regularize,
                            distance_clamped=clamped, singular=singular)
    return frame, R


def spatial_twists(poses, ds: float) -> np.ndarray:
    """Central-difference spatial twists at poses 1..N-2: log(T[k+1] T[k-1]^-1) / (2 ds)."""
    return se3.relative_twists(poses, 2, 2.0 * ds)


def build_Y_world(twists, k: int, m: int) -> np.ndarray:
    """Stack twists k-m, k, k+m as columns of a 6x3 matrix."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if k - m < 0 or k + m >= len(twists):
        raise IndexError(f"twist indices {k - m}..{k + m} outside 0..{len(twists) - 1}")
    return np.column_stack([twists[k - m], twists[k], twists[k + m]])


def descriptor_from_stack(Y_world, m: int, ds: float, body_pose=None, L=None,
                          regularize: bool = False, reference_rotation=None) -> ShapeDescriptor:
    """Bi-invariant descriptor from a world-frame stack [t(s-m ds), t(s), t(s+m ds)]."""
    body_origin = None if body_pose is None else body_pose[:3, 3]
    if reference_rotation is None and body_pose is not None:
        reference_rotation = body_pose[:3, :3]
    frame, R = eqr_decompose(np.asarray(Y_world) @ A_MATRIX, body_origin, L, regularize,
                             reference_rotation)
    y = R @ A_INV
    if not frame.distance_clamped and frame.singular is None:
        y[(1, 2, 4, 5), 1] = 0.0
        y[2, 2] = y[2, 0]
        y[5, 2] = y[5, 0]
    return ShapeDescriptor(y, m, ds, frame)


def descriptor_at(traj, k: int, m: int, L: float | None = None, regularize: bool = False,
                  reference_rotation=None, twists=None) -> ShapeDescriptor:
    """Descriptor at pose index k of a geometric trajectory with scale m*ds."""
    n = len(traj.poses)
    if k - m - 1 < 0 or k + m + 1 > n - 1:
        raise IndexError(f"pose index {k} with m={m} needs poses {k - m - 1}..{k + m + 1} of 0..{n - 1}")
    if twists is None:
        lo, hi = k - m - 1, k + m + 1
        twists = spatial_twists(traj.poses[lo:hi + 1], traj.ds)
        idx = m
    else:
        idx = k - 1
    Yw = build_Y_world(twists, idx, m)
    return descriptor_from_stack(Yw, m, traj.ds, traj.poses[k], L, regularize, reference_rotation)


@dataclass(frozen=True)
class DescriptorSequence:
    """Descriptors along a trajectory; ``ys[i]`` belongs to pose ``indices[i]``."""
    ys: np.ndarray  # (K, 6, 3)
    indices: np.ndarray
    frames: tuple
    m: int
    ds: float

    def __len__(self):
        return len(self.ys)

    def __getitem__(self, i) -> ShapeDescriptor:
        return ShapeDescriptor(self.ys[i], self.m, self.ds, self.frames[i])


def descriptor_sequence(traj, m: int, L: float | None = None,
                        regularize: bool = False) -> DescriptorSequence:
    """All usable descriptors of a trajectory, computed in order.

    In singular regularized cases the frame of the previous sample is used to
    complete the functional frame, so the computation is sequential.
    """
    twists = spatial_twists(traj.poses, traj.ds)
    n = len(traj.poses)
    ks = list(range(m + 1, n - m - 1))
    ys, frames = [], []
    reference = None
    for k in ks:
        d = descriptor_at(traj, k, m, L, regularize, reference, twists=twists)
        ys.append(d.y)
        frames.append(d.frame)
        reference = d.frame.rotation
    return DescriptorSequence(np.array(ys).reshape(-1, 6, 3), np.array(ks, dtype=int),
                              tuple(frames), m, traj.ds)


def continuous_Y(twist, dtwist, ddtwist, delta_s: float, L: float | None = None,
                 regularize: bool = False, body_origin=None, reference_rotation=None) -> ShapeDescriptor:
    """Continuous-time descriptor R C(delta_s) from a twist and its derivatives."""
    if delta_s == 0:
        raise ValueError("delta_s must be non-zero")
    X = np.column_stack([twist, dtwist, ddtwist]).astype(float)
    frame, R = eqr_decompose(X, body_origin, L, regularize, reference_rotation)
    return ShapeDescriptor(R @ taylor_matrix(delta_s), 0, delta_s, frame)


def analytic_R_from_isa(isa, d1, d2) -> np.ndarray:
    """Twice upper-triangular R written in ISA invariants and their derivatives.

    isa = (w1, w2, w3, v1, v2, v3); d1 = (w1', w2', v1', v2'); d2 = (w1'', v1'').
    """
    w1, w2, w3, v1, v2, v3 = (float(x) for x in isa)
    dw1, dw2, dv1, dv2 = (float(x) for x in d1)
    ddw1, ddv1 = (float(x) for x in d2)
    R = np.zeros((6, 3))
    R[0] = (w1, dw1, -w1 * w2**2 + ddw1)
    R[1, 1:] = (w1 * w2, w1 * dw2 + 2 * dw1 * w2)
    R[2, 2] = w1 * w2 * w3
    R[3] = (v1, dv1, -2 * w1 * w2 * v2 - v1 * w2**2 + ddv1)
    R[4, 1:] = (w1 * v2 + v1 * w2, w1 * dv2 + v1 * dw2 + 2 * dv1 * w2 + 2 * dw1 * v2)
    R[5, 2] = v1 * w2 * w3 + w1 * v2 * w3 + w1 * w2 * v3
    return R


def isa_from_R(R, eps: float = 1e-12) -> np.ndarray:
    """ISA invariants (w1, w2, w3, v1, v2, v3) from the entries of R."""
    R = np.asarray(R, dtype=float)
    r11, r22 = R[0, 0], R[1, 1]
    if not (r11 > eps and r22 > eps):
        raise SingularInvariants(f"r11={r11:g}, r22={r22:g}: invariants are unbounded")
    r33, r41, r52, r63 = R[2, 2], R[3, 0], R[4, 1], R[5, 2]
    return np.array([
        r11,
        r22 / r11,
        r33 / r22,
        r41,
        r52 / r11 - r22 * r41 / r11**2,
        r63 / r22 - r33 * r52 / r22**2,
    ])
