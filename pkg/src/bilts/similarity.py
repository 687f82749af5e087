"""Distances between shape descriptors and between whole trajectories.

Descriptors are compared with a weighted Frobenius norm, rotational rows
weighted by L and translational rows by 1.  Whole trajectories are aligned by
dynamic time warping on the singular values of the two 3x3 descriptor blocks
(invariant to any residual rotation of {f}) and the descriptor distance is
averaged along the warping path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import descriptor as desc
from .errors import MismatchedScale, TooShort


def weight_diag(L: float) -> np.ndarray:
    if L < 0:
        raise ValueError("L must be non-negative")
    return np.array([L * L] * 3 + [1.0] * 3)


def _as_array(y):
    return np.asarray(y.y if isinstance(y, desc.ShapeDescriptor) else y, dtype=float)


def _check_scale(y1, y2):
    if isinstance(y1, desc.ShapeDescriptor) and isinstance(y2, desc.ShapeDescriptor):
        if y1.m != y2.m or not math.isclose(y1.ds, y2.ds, rel_tol=1e-12, abs_tol=0.0):
            raise MismatchedScale(f"m={y1.m}, ds={y1.ds!r} vs m={y2.m}, ds={y2.ds!r}")


def bilts_distance(y1, y2, L: float, strict: bool = True) -> float:
    """Weighted Frobenius distance between two descriptors."""
    if strict:
        _check_scale(y1, y2)
    d = _as_array(y1) - _as_array(y2)
    w = weight_diag(L)
    return float(math.sqrt(w @ np.sum(d * d, axis=1)))


def _rotation_from_svd(M):
    U, _, Vt = np.linalg.svd(M)
    D = np.ones(M.shape[:-2] + (3,))
    D[..., 2] = np.sign(np.linalg.det(U @ Vt))
    D[D == 0] = 1.0
    return (U * D[..., None, :]) @ Vt


def optimal_rotation(y1, y2, L: float) -> np.ndarray:
    """Rotation R minimising ||blkdiag(R, R) y1 - y2||_W.

    Rank-deficient problems have a family of minimisers; the one closest to
    the identity is returned (identity for a zero cross-covariance, the
    smallest rotation aligning the single shared direction for rank one).
    """
    a, b = _as_array(y1), _as_array(y2)
    M = L * L * b[:3] @ a[:3].T + b[3:] @ a[3:].T
    U, s, Vt = np.linalg.svd(M)
    tol = 1e-12 * max(1.0, s[0])
    rank = int(np.sum(s > tol))
    if rank == 0:
        return np.eye(3)
    if rank == 1:
        return desc._minimal_rotation(Vt[0], U[:, 0])
    return _rotation_from_svd(M)


def _plus_batch(Y1, Y2, L: float) -> np.ndarray:
    """Vectorised aligned distances for stacks of descriptor pairs (K, 6, 3)."""
    L2 = L * L
    M = L2 * Y2[:, :3] @ np.swapaxes(Y1[:, :3], 1, 2) + Y2[:, 3:] @ np.swapaxes(Y1[:, 3:], 1, 2)
    R = _rotation_from_svd(M)
    top = R @ Y1[:, :3] - Y2[:, :3]
    bot = R @ Y1[:, 3:] - Y2[:, 3:]
    aligned = L2 * np.sum(top * top, axis=(1, 2)) + np.sum(bot * bot, axis=(1, 2))
    d = Y1 - Y2
    plain = L2 * np.sum(d[:, :3] ** 2, axis=(1, 2)) + np.sum(d[:, 3:] ** 2, axis=(1, 2))
    # the identity is always feasible
    return np.sqrt(np.minimum(aligned, plain))


def bilts_plus_distance(y1, y2, L: float, strict: bool = True) -> float:
    """Descriptor distance after the optimal common rotation of both blocks."""
    if strict:
        _check_scale(y1, y2)
    a, b = _as_array(y1), _as_array(y2)
    return float(_plus_batch(a[None], b[None], L)[0])


def batch_distances(Y1, Y2, L: float, plus: bool = False) -> np.ndarray:
    Y1 = np.asarray(Y1, dtype=float)
    Y2 = np.asarray(Y2, dtype=float)
    if plus:
        return _plus_batch(Y1, Y2, L)
    d = Y1 - Y2
    return np.sqrt(L * L * np.sum(d[:, :3] ** 2, axis=(1, 2)) + np.sum(d[:, 3:] ** 2, axis=(1, 2)))


def sv_summary(y) -> np.ndarray:
    """Singular values of the rotational and translational blocks (descending each)."""
    a = _as_array(y)
    return np.concatenate([np.linalg.svd(a[:3], compute_uv=False),
                           np.linalg.svd(a[3:], compute_uv=False)])


def sv_summaries(ys) -> np.ndarray:
    ys = np.asarray(ys, dtype=float)
    return np.concatenate([np.linalg.svd(ys[:, :3], compute_uv=False),
                           np.linalg.svd(ys[:, 3:], compute_uv=False)], axis=1)


def _cost_matrix(a, b, L):
    w = np.sqrt(weight_diag(L))
    a = np.asarray(a, dtype=float) * w
    b = np.asarray(b, dtype=float) * w
    d2 = np.sum(a * a, 1)[:, None] + np.sum(b * b, 1)[None, :] - 2.0 * a @ b.T
    return np.sqrt(np.maximum(d2, 0.0))


def _band_limits(n1, n2, band):
    if band is None:
        return np.zeros(n1, dtype=int), np.full(n1, n2, dtype=int)
    centre = np.arange(n1) * ((n2 - 1) / max(n1 - 1, 1))
    lo = np.clip(np.floor(centre - band), 0, n2 - 1).astype(int)
    hi = np.clip(np.ceil(centre + band), 0, n2 - 1).astype(int) + 1
    lo[0] = 0
    hi[-1] = n2
    return lo, hi


def dtw_align(seq1, seq2, L: float, band: int | None = None) -> list[tuple[int, int]]:
    """Optimal monotone alignment of two summary sequences.

    Local cost is the weighted Euclidean distance (rotational triple weighted
    by L).  ``band`` optionally restricts the path to a Sakoe-Chiba band of
    that radius around the (scaled) diagonal.  Ties in the backtrace prefer
    the diagonal step, then (1, 0), then (0, 1).
    """
    seq1 = np.atleast_2d(np.asarray(seq1, dtype=float))
    seq2 = np.atleast_2d(np.asarray(seq2, dtype=float))
    n1, n2 = len(seq1), len(seq2)
    if n1 == 0 or n2 == 0:
        raise ValueError("sequences must be non-empty")
    cost = _cost_matrix(seq1, seq2, L)
    lo, hi = _band_limits(n1, n2, band)
    D = np.full((n1, n2), np.inf)
    for i in range(n1):
        a, b = lo[i], hi[i]
        c = cost[i, a:b]
        if i == 0:
            step = np.full(b - a, np.inf)
            step[0] = 0.0
        else:
            prev = D[i - 1]
            diag = np.concatenate([[np.inf], prev[:-1]])[a:b]
            step = np.minimum(diag, prev[a:b])
        # D[i, j] = min(c_j + step_j, c_j + D[i, j-1]), unrolled with a prefix sum
        C = np.cumsum(c)
        D[i, a:b] = C + np.minimum.accumulate(c + step - C)
    if not np.isfinite(D[-1, -1]):
        raise ValueError("band too narrow to connect the sequence ends")

    i, j = n1 - 1, n2 - 1
    path = [(i, j)]
    while i > 0 or j > 0:
        options = []
        if i > 0 and j > 0:
            options.append((D[i - 1, j - 1], i - 1, j - 1))
        if i > 0:
            options.append((D[i - 1, j], i - 1, j))
        if j > 0:
            options.append((D[i, j - 1], i, j - 1))
        best = min(o[0] for o in options)
        _, i, j = next(o for o in options if o[0] == best)
        path.append((i, j))
    path.reverse()
    return path


@dataclass(frozen=True)
class MeasureParams:
    """Parameters of a trajectory distance.

    ``xi`` is the progress scale in the progress units of the trajectories.
    """
    L: float
    xi: float
    regularize: bool = False
    plus: bool = False
    band: int | None = None


BILTS = dict(regularize=False, plus=False)
BILTS_PLUS = dict(regularize=True, plus=True)


def descriptors_for(traj, params: MeasureParams) -> desc.DescriptorSequence:
    m = desc.progress_scale_steps(params.xi, traj.ds)
    seq = desc.descriptor_sequence(traj, m, params.L, params.regularize)
    if len(seq) < 3:
        raise TooShort(f"{len(seq)} descriptors with m={m} on {len(traj.poses)} samples; need at least 3")
    return seq


def sequence_distance(seq1, seq2, L: float, plus: bool = False, band: int | None = None,
                      summaries=None, return_path: bool = False):
    """Path-averaged descriptor distance between two descriptor sequences."""
    ys1 = seq1.ys if hasattr(seq1, "ys") else np.asarray(seq1)
    ys2 = seq2.ys if hasattr(seq2, "ys") else np.asarray(seq2)
    s1, s2 = summaries if summaries is not None else (sv_summaries(ys1), sv_summaries(ys2))
    path = dtw_align(s1, s2, L, band)
    idx = np.array(path)
    d = batch_distances(ys1[idx[:, 0]], ys2[idx[:, 1]], L, plus)
    mean = float(d.mean())
    if return_path:
        return mean, path, d
    return mean


def trajectory_distance(t1, t2, params: MeasureParams, return_path: bool = False):
    """Average BILTS (or BILTS+) distance between two geometric trajectories."""
    seq1 = descriptors_for(t1, params)
    seq2 = descriptors_for(t2, params)
    return sequence_distance(seq1, seq2, params.L, params.plus, params.band,
                             return_path=return_path)


# ---- ISA-invariant baseline ----------------------------------------------

def isa_invariants(seq: desc.DescriptorSequence) -> np.ndarray:
    """ISA invariants recovered from each descriptor through R = Y C^-1."""
    Cinv = desc.taylor_matrix_inv(seq.m * seq.ds)
    return np.array([desc.isa_from_R(y @ Cinv) for y in seq.ys])


def isa_weights(L: float, lam: float) -> np.ndarray:
    return np.array([L, L * lam, L * lam, 1.0, lam, lam])


def isa_distance(inv1, inv2, L: float, lam: float, path=None) -> float:
    """Weighted invariant distance averaged along an alignment path."""
    inv1 = np.atleast_2d(np.asarray(inv1, dtype=float))
    inv2 = np.atleast_2d(np.asarray(inv2, dtype=float))
    if path is None:
        if len(inv1) != len(inv2):
            raise ValueError("sequences of unequal length need an alignment path")
        path = [(k, k) for k in range(len(inv1))]
    idx = np.array(path)
    d = (inv1[idx[:, 0]] - inv2[idx[:, 1]]) * isa_weights(L, lam)
    return float(np.mean(np.sqrt(np.sum(d * d, axis=1))))


def isa_trajectory_distance(t1, t2, L: float, lam: float, m: int = 1, band: int | None = None) -> float:
    seqs = []
    for t in (t1, t2):
        s = desc.descriptor_sequence(t, m)
        if len(s) < 3:
            raise TooShort(f"{len(s)} descriptors; need at least 3")
        seqs.append(s)
    path = dtw_align(sv_summaries(seqs[0].ys), sv_summaries(seqs[1].ys), L, band)
    return isa_distance(isa_invariants(seqs[0]), isa_invariants(seqs[1]), L, lam, path)
