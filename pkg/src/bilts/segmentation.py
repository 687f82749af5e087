"""Segmentation at sudden changes of the bi-invariant trajectory shape."""

from __future__ import annotations

import numpy as np

from . import descriptor as desc
from . import similarity as sim

# Signals below this level are roundoff, not shape changes.
MIN_THRESHOLD = 1e-8


def rule_of_thumb_L(tool_points) -> float:
    """L of about three times the largest distance between two points on the tool."""
    P = np.asarray(tool_points, dtype=float)
    if len(P) < 2:
        raise ValueError("need at least two tool points")
    diff = P[:, None, :] - P[None, :, :]
    return 3.0 * float(np.sqrt(np.max(np.sum(diff * diff, axis=-1))))


def shape_change_signal(traj, params: sim.MeasureParams, return_progress: bool = False):
    """Distances between descriptors at consecutive samples.

    Returns an array of length (number of descriptors - 1); with
    ``return_progress`` also the progress value s_k of each entry.
    """
    m = desc.progress_scale_steps(params.xi, traj.ds)
    seq = desc.descriptor_sequence(traj, m, params.L, params.regularize)
    if len(seq) < 2:
        raise sim.TooShort(f"{len(seq)} descriptors; need at least 2")
    d = sim.batch_distances(seq.ys[1:], seq.ys[:-1], params.L, params.plus)
    if return_progress:
        return d, seq.indices[:-1] * traj.ds
    return d


def default_threshold(signal) -> float:
    """Median plus three robust standard deviations (scaled MAD), floored at MIN_THRESHOLD.

    Robust statistics keep the peaks being searched for from inflating the
    threshold above themselves.
    """
    s = np.asarray(signal, dtype=float)
    med = float(np.median(s))
    mad = 1.4826 * float(np.median(np.abs(s - med)))
    return max(med + 3.0 * mad, MIN_THRESHOLD)


def default_min_gap(m: int) -> int:
    """One change at s_j disturbs every descriptor whose window covers it (k = j-m .. j+m)."""
    return 2 * m + 1


def segment(signal, threshold: float | None = None, min_gap: int = 1) -> list[int]:
    """Indices of local maxima above ``threshold``, at least ``min_gap`` apart.

    Among maxima closer than ``min_gap`` the larger is kept (earlier index on
    equal height).
    """
    s = np.asarray(signal, dtype=float)
    if threshold is None:
        threshold = default_threshold(s)
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    if min_gap < 1:
        raise ValueError("min_gap must be >= 1")
    if len(s) == 0:
        return []
    left = np.concatenate([[-np.inf], s[:-1]])
    right = np.concatenate([s[1:], [-np.inf]])
    # a flat top is reported at its first sample
    cand = np.flatnonzero((s > threshold) & (s > left) & (s >= right))
    kept = []
    for i in sorted(cand, key=lambda i: (-s[i], i)):
        if all(abs(i - j) >= min_gap for j in kept):
            kept.append(int(i))
    return sorted(kept)


def signal_csv(progress, signal) -> str:
    lines = ["s,d"] + [f"{s!r},{d!r}" for s, d in zip(map(float, progress), map(float, signal))]
    return "\n".join(lines) + "\n"
