"""Acceptance suite: one test per criterion, each reporting a pass/fail line."""

import os
import time

import numpy as np
import pytest

from bilts import datasets as ds
from bilts import descriptor as desc
from bilts import recognition as rec
from bilts import se3
from bilts import segmentation as seg
from bilts import similarity as sim
from bilts.reparam import GeometricTrajectory, transform_poses
from conftest import (ACCEPTANCE_LINES, TOOL_POINTS, fs_block, integrate, isa_stack, poly_eval,
                      product_of_exponentials, random_pose, smooth_random_trajectory, two_screw_poses)


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_1_bi_invariance():
    rng = np.random.default_rng(1)
    params = sim.MeasureParams(0.5, 0.1, **sim.BILTS)
    t0 = time.perf_counter()
    worst_rel, worst_d = 0.0, 0.0
    for _ in range(100):
        traj = smooth_random_trajectory(rng)
        base = desc.descriptor_sequence(traj, 2).ys
        for _ in range(10):
            A, B = random_pose(rng), random_pose(rng)
            moved = GeometricTrajectory(transform_poses(traj.poses, A, B), traj.ds)
            ys = desc.descriptor_sequence(moved, 2).ys
            worst_rel = max(worst_rel, np.linalg.norm(ys - base) / np.linalg.norm(base))
            worst_d = max(worst_d, sim.sequence_distance(base, ys, params.L))
    elapsed = time.perf_counter() - t0
    ok = worst_rel < 1e-8 and worst_d < 1e-6 and elapsed < 30
    report(1, ok, f"max rel change {worst_rel:.2e} (<1e-8), max distance {worst_d:.2e} (<1e-6), "
                  f"{elapsed:.1f} s (<30 s)")


def test_criterion_2_eqr():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst, pattern_ok, diag_ok = 0.0, True, True
    for _ in range(10_000):
        X = rng.normal(size=(6, 3))
        frame, R = desc.eqr_decompose(X)
        worst = max(worst, np.linalg.norm(se3.adjoint(frame.pose) @ R - X) / np.linalg.norm(X))
        pattern_ok &= all(R[i, j] == 0.0 for i, j in desc.TRIANGULAR_ZEROS)
        diag_ok &= R[0, 0] > 0 and R[1, 1] > 0
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and pattern_ok and diag_ok and elapsed < 10
    report(2, ok, f"max reconstruction error {worst:.2e} (<1e-10), zero pattern {pattern_ok}, "
                  f"r11,r22>0 {diag_ok}, {elapsed:.1f} s (<10 s)")


def test_criterion_3_analytic_relation():
    rng = np.random.default_rng(3)
    worst_R, worst_inv = 0.0, 0.0
    for _ in range(1000):
        isa = np.concatenate([rng.uniform(0.2, 2.0, 2), rng.normal(size=4)])
        d1, d2, dmov = rng.normal(size=4), rng.normal(size=2), rng.normal(size=4)
        Xw, _ = isa_stack(isa, d1, d2, dmov, random_pose(rng))
        _, R = desc.eqr_decompose(Xw)
        expect = desc.analytic_R_from_isa(isa, d1, d2)
        worst_R = max(worst_R, np.linalg.norm(R - expect) / np.linalg.norm(expect))
        worst_inv = max(worst_inv, np.max(np.abs(desc.isa_from_R(expect) - isa) / np.maximum(1, np.abs(isa))))
    ok = worst_R < 1e-8 and worst_inv < 1e-10
    report(3, ok, f"max rel R error {worst_R:.2e} (<1e-8), invariant roundtrip {worst_inv:.2e} (<1e-10)")


def _discretization_errors(eta1, eta2, h=1e-4, s0=0.3, m0=2000, halvings=4):
    _, xi, d1, d2 = product_of_exponentials(eta1, eta2, s0)
    errs = []
    for i in range(halvings + 1):
        m = m0 >> i
        P = np.array([product_of_exponentials(eta1, eta2, s0 + k * h)[0] for k in range(-m - 1, m + 2)])
        y = desc.descriptor_at(GeometricTrajectory(P, h), m + 1, m).y
        errs.append(np.linalg.norm(y - desc.continuous_Y(xi, d1, d2, m * h).y))
    return np.array(errs)


def test_criterion_4_discretization_order():
    cases = {
        "helix": (np.array([0, 0, 0.5, 0, 0.1, 0]), np.array([1, 0.2, 0.1, 0.1, 0.3, -0.2])),
        "precession": (np.array([0, 0, 0.5, 0, 0, 0]), np.array([0, 0.389, 0.921, 0.05, 0, 0.1])),
    }
    ratios = {}
    for name, (e1, e2) in cases.items():
        errs = _discretization_errors(e1, e2)
        ratios[name] = errs[:-1] / errs[1:]
    ok = all(np.all((r >= 6) & (r <= 10)) for r in ratios.values())
    text = ", ".join(f"{k} " + "/".join(f"{x:.2f}" for x in v) for k, v in ratios.items())
    report(4, ok, f"error ratios per halving {text} (in [6, 10])")


def test_criterion_5_boundedness():
    ds_, m = 0.01, 20
    n = 2 * m + 3
    w3, ymax = [], []
    for eps in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6):
        c = 0.5 * np.sqrt(eps)
        s0 = -(m + 1) * ds_
        # rotation axis that bends ever less: r22 -> 0
        twist = lambda s: np.array([1, eps * (s + s0), c * (s + s0) ** 2 / 2, 0.1, 0.2, 0.05])
        d = desc.descriptor_at(GeometricTrajectory(integrate(twist, n, ds_), ds_), m + 1, m)
        w3.append(abs(desc.isa_from_R(d.y @ desc.taylor_matrix_inv(m * ds_))[2]))
        ymax.append(np.abs(d.y).max())
    growth = max(w3) / min(w3)
    spread = max(ymax) / min(ymax)
    ok = growth > 100 and spread < 2
    report(5, ok, f"|w3| grows {growth:.0f}x (>100x), max descriptor entry varies {spread:.3f}x (<2x)")


def test_criterion_6_fs_reductions():
    rng = np.random.default_rng(6)
    worst_rot, worst_tr = 0.0, 0.0
    for _ in range(5):
        C = rng.normal(size=(4, 3))
        s0 = rng.uniform(-0.5, 0.5)
        block = fs_block(C, s0)
        X = np.zeros((6, 3))
        for o in range(3):
            X[:3, o] = poly_eval(C, s0, o)
        _, R = desc.eqr_decompose(X)
        worst_rot = max(worst_rot, np.abs(R[:3] - block).max())
        X = np.zeros((6, 3))
        for o in range(3):
            X[3:, o] = poly_eval(C, s0, o)
        _, R = desc.eqr_decompose(X, rng.normal(size=3), 0.0, regularize=True)
        worst_tr = max(worst_tr, np.abs(R[3:] - block).max())
    ok = worst_rot < 1e-8 and worst_tr < 1e-8
    report(6, ok, f"rotation block error {worst_rot:.2e}, translation block (L=0) error {worst_tr:.2e} (<1e-8)")


def _published(env):
    path = os.environ.get(env)
    return path if path and os.path.isdir(path) else None


@pytest.mark.slow
def test_criterion_7_syn_recognition():
    t0 = time.perf_counter()
    noisy = ds.generate_syn(ds.SynConfig(seed=0))
    clean = ds.generate_syn(ds.SynConfig(seed=0, noise_rot=0.0, noise_trans=0.0))
    rate = lambda recs, measure: rec.run_protocol(recs, rec.RecognitionConfig(measure=measure)).recognition_rate
    clean_plus = rate(clean, "bilts_plus")
    plus = rate(noisy, "bilts_plus")
    plain = rate(noisy, "bilts")
    isa = rate(noisy, "isa")
    elapsed = time.perf_counter() - t0
    ok = clean_plus == 1.0 and plus >= 0.95 and plain < plus and isa < min(plus, plain) and elapsed < 300
    detail = (f"BILTS+ noiseless {clean_plus:.1%} (=100%), BILTS+ {plus:.1%} (>=95%), BILTS {plain:.1%}, "
              f"ISA {isa:.1%} (ISA < BILTS < BILTS+), {elapsed:.0f} s (<300 s)")
    published = _published("BILTS_SYN_DATA")
    if published:
        pub = rate(ds.read_dataset(published), "bilts_plus")
        ok = ok and pub == 1.0
        detail += f"; published SYN BILTS+ {pub:.1%} (=100%)"
    report(7, ok, detail)


def test_criterion_8_dla():
    path = _published("BILTS_DLA_DATA")
    if path is None:
        ACCEPTANCE_LINES.append("criterion 8: SKIP  recorded dataset not supplied (set BILTS_DLA_DATA)")
        pytest.skip("recorded dataset not supplied")
    records = ds.read_dataset(path)
    ref = os.environ.get("BILTS_DLA_REFERENCE", records[0].context_label)
    r = rec.run_protocol(records, rec.RecognitionConfig(measure="bilts_plus", reference_context=ref)).recognition_rate
    report(8, abs(r - 0.926) <= 0.02, f"BILTS+ {r:.1%} (92.6% +- 2%)")


def test_criterion_9_segmentation_invariance():
    P = two_screw_poses()
    params = sim.MeasureParams(seg.rule_of_thumb_L(TOOL_POINTS), 0.1, **sim.BILTS_PLUS)
    m = desc.progress_scale_steps(params.xi, 0.02)
    signals, breaks = [], []
    for b in TOOL_POINTS:
        g = GeometricTrajectory(transform_poses(P, None, se3.make_pose(None, b)), 0.02)
        s = seg.shape_change_signal(g, params)
        signals.append(s)
        breaks.append(seg.segment(s, min_gap=seg.default_min_gap(m)))
    diff = max(np.abs(s - signals[0]).max() for s in signals)
    same = all(b == breaks[0] for b in breaks)
    ok = diff < 1e-8 and same and len(breaks[0]) == 1
    report(9, ok, f"max signal difference {diff:.2e} (<1e-8), breakpoints {breaks}")


def test_criterion_10_measure_axioms():
    rng = np.random.default_rng(10)
    n = 2000
    Y1 = rng.normal(size=(n, 6, 3)) * rng.uniform(0.01, 10, (n, 1, 1))
    Y2 = rng.normal(size=(n, 6, 3)) * rng.uniform(0.01, 10, (n, 1, 1))
    Ls = rng.uniform(0, 3, n)
    violations = dict(symmetry=0, non_negative=0, L0_collapse=0, plus_dominance=0, sv_invariance=0)
    for y1, y2, L in zip(Y1, Y2, Ls):
        d, dp = sim.bilts_distance(y1, y2, L), sim.bilts_plus_distance(y1, y2, L)
        scale = 1e-9 * max(1.0, d)
        if abs(d - sim.bilts_distance(y2, y1, L)) > scale or abs(dp - sim.bilts_plus_distance(y2, y1, L)) > scale:
            violations["symmetry"] += 1
        if d < 0 or dp < 0:
            violations["non_negative"] += 1
        if abs(sim.bilts_distance(y1, y2, 0.0) - np.linalg.norm(y1[3:] - y2[3:])) > 1e-12 * max(1.0, d):
            violations["L0_collapse"] += 1
        if dp > d + scale:
            violations["plus_dominance"] += 1
        Ra, Rb = (random_pose(rng)[:3, :3] for _ in range(2))
        moved = np.vstack([Ra @ y1[:3], Rb @ y1[3:]])
        if np.abs(sim.sv_summary(moved) - sim.sv_summary(y1)).max() > 1e-9 * np.abs(y1).max():
            violations["sv_invariance"] += 1
    ok = not any(violations.values())
    report(10, ok, f"{n} random pairs per axiom, violations {violations}")
