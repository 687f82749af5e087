import numpy as np
import pytest

from bilts import se3
from bilts import segmentation as seg
from bilts import similarity as sim
from bilts.reparam import GeometricTrajectory, transform_poses
from conftest import TOOL_POINTS, integrate, random_pose, screw_twist, two_screw_poses


def test_rule_of_thumb_L():
    assert seg.rule_of_thumb_L([[0, 0, 0], [0.1, 0, 0]]) == pytest.approx(0.3)
    assert seg.rule_of_thumb_L(TOOL_POINTS) == pytest.approx(3 * 0.05 * np.sqrt(2))
    with pytest.raises(ValueError):
        seg.rule_of_thumb_L([[0, 0, 0]])


def test_segment_picks_separated_peaks():
    s = np.array([0, 1, 0, 0, 5, 4, 0, 0, 0, 3, 0])
    assert seg.segment(s, 0.5) == [1, 4, 9]
    assert seg.segment(s, 2.0) == [4, 9]
    assert seg.segment(s, 0.5, min_gap=4) == [4, 9]
    assert seg.segment(s, 0.5, min_gap=10) == [4]
    assert seg.segment(np.array([]), 1.0) == []


def test_segment_plateau_and_ties():
    # a flat top counts once, at its first sample
    assert seg.segment(np.array([0, 2, 2, 0]), 1.0) == [1]
    # equal peaks within min_gap: the earlier wins
    assert seg.segment(np.array([0, 3, 0, 3, 0]), 1.0, min_gap=3) == [1]


def test_segment_argument_checks():
    with pytest.raises(ValueError):
        seg.segment(np.ones(3), 0.0)
    with pytest.raises(ValueError):
        seg.segment(np.ones(3), 1.0, min_gap=0)


def test_default_threshold_is_robust(rng):
    s = 0.01 + 0.001 * rng.standard_normal(100)
    s[50] = 10.0
    thr = seg.default_threshold(s)
    assert 0.01 < thr < 1.0
    assert seg.default_threshold(np.zeros(10)) == seg.MIN_THRESHOLD


def test_constant_screw_has_flat_signal():
    P = integrate(lambda s: screw_twist([0, 0, 1], [0.1, 0, 0], 0.02), 40, 0.02)
    params = sim.MeasureParams(0.3, 0.1, **sim.BILTS_PLUS)
    s = seg.shape_change_signal(GeometricTrajectory(P, 0.02), params)
    assert s.max() < 1e-9
    assert seg.segment(s) == []


def test_two_screws_one_breakpoint():
    g = GeometricTrajectory(two_screw_poses(), 0.02)
    params = sim.MeasureParams(seg.rule_of_thumb_L(TOOL_POINTS), 0.1, **sim.BILTS_PLUS)
    s, progress = seg.shape_change_signal(g, params, return_progress=True)
    m = 5
    assert len(s) == len(g) - 2 * m - 3
    br = seg.segment(s, min_gap=seg.default_min_gap(m))
    assert len(br) == 1
    # the change at pose 30 is seen by descriptors m+1 .. 2m+... around it
    assert abs(progress[br[0]] / 0.02 - 30) <= m + 1


def test_signal_independent_of_body_point_and_world(rng):
    P = two_screw_poses()
    params = sim.MeasureParams(seg.rule_of_thumb_L(TOOL_POINTS), 0.1, **sim.BILTS_PLUS)
    ref = seg.shape_change_signal(GeometricTrajectory(P, 0.02), params)
    A = random_pose(rng)
    for b in TOOL_POINTS[1:]:
        moved = transform_poses(P, A, se3.make_pose(None, b))
        s = seg.shape_change_signal(GeometricTrajectory(moved, 0.02), params)
        assert np.abs(s - ref).max() < 1e-8


def test_signal_csv():
    text = seg.signal_csv([0.0, 0.5], [1.0, 2.0])
    assert text.splitlines() == ["s,d", "0.0,1.0", "0.5,2.0"]
