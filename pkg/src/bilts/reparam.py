"""Temporal -> geometric trajectory conversion.

A temporal trajectory is sampled at a fixed time step.  It is converted into
a geometric trajectory, sampled equidistantly in a progress variable that
depends only on the path geometry (arclength, angle, or screw path), then
optionally smoothed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from . import se3
from .errors import DegenerateProgress

PROGRESS_TYPES = ("arclength", "angle", "screw_path")
_ALIASES = {"screw": "screw_path", "screw-path": "screw_path", "arc": "arclength"}

DEFAULT_N_OUT = 50
DEFAULT_SIGMA = 2.0
MIN_TOTAL_PROGRESS = 1e-9


def canonical_progress(progress_type: str) -> str:
    name = _ALIASES.get(progress_type, progress_type)
    if name not in PROGRESS_TYPES:
        raise ValueError(f"unknown progress type {progress_type!r}; expected one of {PROGRESS_TYPES}")
    return name


@dataclass(frozen=True)
class TemporalTrajectory:
    poses: np.ndarray  # (N, 4, 4)
    dt: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        poses = np.asarray(self.poses, dtype=float)
        if poses.ndim != 3 or poses.shape[1:] != (4, 4):
            raise ValueError(f"poses must have shape (N, 4, 4), got {poses.shape}")
        if len(poses) < 3:
            raise ValueError("a trajectory needs at least 3 samples")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "poses", poses)

    def __len__(self):
        return len(self.poses)


@dataclass(frozen=True)
class GeometricTrajectory:
    poses: np.ndarray  # (N, 4, 4), equidistant in progress
    ds: float
    progress_type: str = "screw_path"
    L_screw: float | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        poses = np.asarray(self.poses, dtype=float)
        if poses.ndim != 3 or poses.shape[1:] != (4, 4):
            raise ValueError(f"poses must have shape (N, 4, 4), got {poses.shape}")
        if len(poses) < 3:
            raise ValueError("a trajectory needs at least 3 samples")
        if not self.ds > 0:
            raise ValueError("ds must be positive")
        object.__setattr__(self, "poses", poses)

    def __len__(self):
        return len(self.poses)

    @property
    def total_progress(self) -> float:
        return self.ds * (len(self.poses) - 1)


def transform_poses(poses, A=None, B=None) -> np.ndarray:
    """Apply a world change A and body change B: T -> A T B."""
    out = np.asarray(poses, dtype=float)
    if A is not None:
        out = np.einsum("ij,njk->nik", A, out)
    if B is not None:
        out = np.einsum("nij,jk->nik", out, B)
    return out


def temporal_twists(traj: TemporalTrajectory) -> np.ndarray:
    """Forward-difference spatial twists, one per interval: shape (N-1, 6)."""
    return se3.relative_twists(traj.poses, 1, traj.dt)


def regulated_isa_velocity(twist, body_position, L: float) -> np.ndarray:
    """Translational velocity along the ISA, regulated to stay near the body.

    The ISA point nearest the body origin is used while it lies within ``L``
    of the body; beyond that the reference point is clamped to distance ``L``
    and its full velocity (ISA component plus lever-arm term) is returned.
    Without rotation the plain translational velocity is returned.
    """
    w = np.asarray(twist[:3], dtype=float)
    v = np.asarray(twist[3:], dtype=float)
    n2 = w @ w
    if math.sqrt(n2) <= se3.EPS_OMEGA:
        return v.copy()
    w_hat = w / math.sqrt(n2)
    foot = np.cross(w, v) / n2
    rel = foot - body_position
    delta = rel - (rel @ w_hat) * w_hat
    dist = math.sqrt(delta @ delta)
    if dist <= L:
        return (w_hat @ v) * w_hat
    q = body_position + delta * (L / dist)
    return v + np.cross(w, q)


def regulated_isa_velocities(twists, body_positions, L: float) -> np.ndarray:
    """Row-wise ``regulated_isa_velocity`` for (n, 6) twists and (n, 3) positions."""
    twists = np.asarray(twists, dtype=float)
    p = np.asarray(body_positions, dtype=float)
    w, v = twists[:, :3], twists[:, 3:]
    n2 = np.sum(w * w, axis=1)
    rot = np.sqrt(n2) > se3.EPS_OMEGA
    out = v.copy()
    if not np.any(rot):
        return out
    w, v, pr = w[rot], v[rot], p[rot]
    n = np.sqrt(n2[rot])[:, None]
    w_hat = w / n
    rel = np.cross(w, v) / (n * n) - pr
    delta = rel - np.sum(rel * w_hat, axis=1, keepdims=True) * w_hat
    dist = np.linalg.norm(delta, axis=1)
    near = dist <= L
    res = np.sum(w_hat * v, axis=1, keepdims=True) * w_hat
    far = ~near
    if np.any(far):
        q = pr[far] + delta[far] * (L / dist[far])[:, None]
        res[far] = v[far] + np.cross(w[far], q)
    out[rot] = res
    return out


def progress_rates(twists, traj: TemporalTrajectory, progress_type: str = "screw_path",
                   L_screw: float | None = None) -> np.ndarray:
    """Progress rate per interval for the chosen progress definition.

    arclength: speed of the body origin; angle: |omega|;
    screw_path: |omega| + |v_isa_regulated| / L_screw.
    """
    kind = canonical_progress(progress_type)
    twists = np.asarray(twists, dtype=float)
    if kind == "arclength":
        p = traj.poses[:, :3, 3]
        return np.linalg.norm(np.diff(p, axis=0), axis=1) / traj.dt
    w_norm = np.linalg.norm(twists[:, :3], axis=1)
    if kind == "angle":
        return w_norm
    if L_screw is None or not L_screw > 0:
        raise ValueError("screw_path progress requires L_screw > 0")
    v_reg = regulated_isa_velocities(twists, traj.poses[:-1, :3, 3], L_screw)
    return w_norm + np.linalg.norm(v_reg, axis=1) / L_screw


def cumulative_progress(rates, dt: float) -> np.ndarray:
    """Traversed progress at every sample, starting at 0 (length len(rates)+1)."""
    rates = np.asarray(rates, dtype=float)
    s = np.concatenate([[0.0], np.cumsum(rates * dt)])
    if s[-1] < MIN_TOTAL_PROGRESS:
        raise DegenerateProgress(f"total progress {s[-1]:g} is below {MIN_TOTAL_PROGRESS:g}")
    return s


def resample_equidistant(traj: TemporalTrajectory, progress, n_out: int = DEFAULT_N_OUT,
                         progress_type: str = "screw_path",
                         L_screw: float | None = None) -> GeometricTrajectory:
    """Resample poses at equidistant progress values with ScLERP."""
    if n_out < 3:
        raise ValueError("n_out must be at least 3")
    s = np.asarray(progress, dtype=float)
    if len(s) != len(traj.poses):
        raise ValueError("progress must have one value per pose")
    # Stalls: keep the first sample of each run of equal progress.
    keep = [0]
    for k in range(1, len(s)):
        if s[k] > s[keep[-1]]:
            keep.append(k)
    keep = np.array(keep)
    s_kept = s[keep]
    poses = traj.poses[keep]
    total = s_kept[-1] - s_kept[0]
    if len(keep) < 2 or total < MIN_TOTAL_PROGRESS:
        raise DegenerateProgress("progress does not increase along the trajectory")
    ds = total / (n_out - 1)
    targets = s_kept[0] + ds * np.arange(n_out)
    idx = np.clip(np.searchsorted(s_kept, targets, side="right") - 1, 0, len(s_kept) - 2)
    out = np.empty((n_out, 4, 4))
    for i, (j, target) in enumerate(zip(idx, targets)):
        u = (target - s_kept[j]) / (s_kept[j + 1] - s_kept[j])
        u = min(max(u, 0.0), 1.0)
        out[i] = se3.sclerp(poses[j], poses[j + 1], u)
    out[0] = poses[0]
    out[-1] = poses[-1]
    kind = canonical_progress(progress_type)
    return GeometricTrajectory(out, ds, kind, L_screw if kind == "screw_path" else None,
                               dict(traj.metadata))


def gaussian_kernel(sigma: float) -> np.ndarray:
    half = int(math.ceil(3.0 * sigma))
    k = np.arange(-half, half + 1, dtype=float)
    w = np.exp(-0.5 * (k / sigma) ** 2)
    return w / w.sum()


def _smooth_columns(x, kernel):
    # Truncated kernel, renormalised where it runs past the ends.
    ones = np.ones(len(x))
    norm = np.convolve(ones, kernel, mode="same")
    return np.stack([np.convolve(x[:, c], kernel, mode="same") / norm
                     for c in range(x.shape[1])], axis=1)


def continuous_quaternions(rotations) -> np.ndarray:
    """Unit quaternions (x, y, z, w) with consecutive dot products >= 0."""
    q = Rotation.from_matrix(rotations).as_quat()
    for k in range(1, len(q)):
        if q[k] @ q[k - 1] < 0.0:
            q[k] = -q[k]
    return q


def extrapolate_ends(poses, n_pad: int) -> np.ndarray:
    """Extend a pose sequence at both ends by repeating its first and last relative motion."""
    P = np.asarray(poses, dtype=float)
    if n_pad <= 0:
        return P
    head_step = P[0] @ se3.inverse(P[1])
    tail_step = P[-1] @ se3.inverse(P[-2])
    head, tail = [P[0]], [P[-1]]
    for _ in range(n_pad):
        head.append(head_step @ head[-1])
        tail.append(tail_step @ tail[-1])
    return np.concatenate([np.array(head[:0:-1]), P, np.array(tail[1:])])


def gaussian_smooth(traj: GeometricTrajectory, sigma: float = DEFAULT_SIGMA) -> GeometricTrajectory:
    """Gaussian smoothing of positions and (sign-continuous) quaternions.

    Both ends are padded by continuing the end motion, so a constant screw
    motion stays a constant screw motion up to its ends.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return traj
    kernel = gaussian_kernel(sigma)
    half = len(kernel) // 2
    P = extrapolate_ends(traj.poses, half)
    n = len(traj.poses)
    pos = _smooth_columns(P[:, :3, 3], kernel)[half:half + n]
    q = _smooth_columns(continuous_quaternions(P[:, :3, :3]), kernel)[half:half + n]
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    out = np.zeros((n, 4, 4))
    out[:, :3, :3] = Rotation.from_quat(q).as_matrix()
    out[:, :3, 3] = pos
    out[:, 3, 3] = 1.0
    return GeometricTrajectory(out, traj.ds, traj.progress_type, traj.L_screw, dict(traj.metadata))


def to_geometric(traj: TemporalTrajectory, progress_type: str = "screw_path",
                 L_screw: float | None = None, n_out: int = DEFAULT_N_OUT,
                 sigma: float = DEFAULT_SIGMA) -> GeometricTrajectory:
    """Full preprocessing: progress, equidistant resampling, smoothing."""
    twists = temporal_twists(traj)
    rates = progress_rates(twists, traj, progress_type, L_screw)
    s = cumulative_progress(rates, traj.dt)
    geo = resample_equidistant(traj, s, n_out, progress_type, L_screw)
    return gaussian_smooth(geo, sigma)
