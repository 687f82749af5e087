"""SYN synthetic dataset generation and trajectory file I/O.

Seven elementary rigid-body motions are generated analytically, perturbed by
Brownian velocity noise, and expressed in several world/body reference-frame
contexts.  Trajectories are stored as CSV (time, position, w-first unit
quaternion) with a JSON sidecar carrying the labels.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from . import se3
from .errors import ConfigError, ParseError, SchemaError
from .reparam import TemporalTrajectory, continuous_quaternions, transform_poses

SCHEMA_VERSION = "1"
CSV_HEADER = ("t", "px", "py", "pz", "qw", "qx", "qy", "qz")
SIDECAR_FIELDS = ("class", "context", "trial", "dt", "seed")
QUAT_NORM_TOL = 1e-6

CLASSES = (
    "linear",
    "circular",
    "helical",
    "fixed_axis_rotation",
    "precession_rotation",
    "screw_pos_pitch",
    "screw_neg_pitch",
)
CONTEXT_NAMES = ("original", "change_refs_1", "change_refs_2")


@dataclass(frozen=True)
class TrajectoryRecord:
    trajectory: TemporalTrajectory
    class_label: str
    context_label: str
    trial_id: int
    seed: int

    def __post_init__(self):
        if not self.class_label or not self.context_label:
            raise ValueError("labels must be non-empty")


@dataclass
class SynConfig:
    duration: float = 5.0
    dt: float = 0.01
    radius: float = 0.25
    pitch: float = 0.05
    helix_pitch: float = 0.25
    angular_rate: float = 1.0
    linear_rate: float = 0.2
    cone_angle: float = 0.4
    precession_rate: float = 0.5
    noise_rot: float = 0.02
    noise_trans: float = 0.005
    n_contexts: int = 3
    trials_per_context: int = 4
    context_box: float = 1.0
    seed: int = 0
    classes: tuple = CLASSES
    contexts: list | None = field(default=None, repr=False)  # explicit [(A, B), ...]

    def validate(self):
        if not self.dt > 0:
            raise ConfigError("dt", f"must be positive, got {self.dt!r}")
        if not self.duration >= 10 * self.dt:
            raise ConfigError("duration", f"must be at least 10*dt, got {self.duration!r}")
        for name in ("radius", "linear_rate", "angular_rate", "context_box"):
            if not getattr(self, name) > 0:
                raise ConfigError(name, "must be positive")
        for name in ("noise_rot", "noise_trans", "pitch", "helix_pitch", "precession_rate", "cone_angle"):
            if not getattr(self, name) >= 0:
                raise ConfigError(name, "must be non-negative")
        if self.n_contexts < 1 and self.contexts is None:
            raise ConfigError("n_contexts", "need at least one context")
        if self.trials_per_context < 1:
            raise ConfigError("trials_per_context", "must be >= 1")
        unknown = set(self.classes) - set(CLASSES)
        if unknown:
            raise ConfigError("classes", f"unknown classes {sorted(unknown)}")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "SynConfig":
        known = {f for f in cls.__dataclass_fields__ if f != "contexts"}
        extra = set(d) - known
        if extra:
            raise ConfigError(sorted(extra)[0], "unknown configuration field")
        d = dict(d)
        if "classes" in d:
            d["classes"] = tuple(d["classes"])
        try:
            cfg = cls(**d)
        except TypeError as e:
            raise ConfigError("config", str(e)) from None
        return cfg.validate()

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("contexts")
        d["classes"] = list(self.classes)
        return d


def _rot(axis, angle):
    return Rotation.from_rotvec(np.asarray(axis, float) * angle).as_matrix()


def clean_poses(name: str, cfg: SynConfig) -> np.ndarray:
    """Noise-free poses of one motion class sampled at cfg.dt."""
    t = np.arange(int(round(cfg.duration / cfg.dt)) + 1) * cfg.dt
    n = len(t)
    P = np.tile(np.eye(4), (n, 1, 1))
    z = np.array([0.0, 0.0, 1.0])
    if name == "linear":
        P[:, 0, 3] = cfg.linear_rate * t
    elif name in ("circular", "helical"):
        th = cfg.linear_rate / cfg.radius * t
        P[:, 0, 3] = cfg.radius * np.cos(th)
        P[:, 1, 3] = cfg.radius * np.sin(th)
        if name == "helical":
            P[:, 2, 3] = cfg.helix_pitch * th
    elif name == "fixed_axis_rotation":
        P[:, :3, :3] = Rotation.from_rotvec(np.outer(cfg.angular_rate * t, z)).as_matrix()
    elif name == "precession_rotation":
        tilt = _rot([1.0, 0.0, 0.0], cfg.cone_angle)
        outer = Rotation.from_rotvec(np.outer(cfg.precession_rate * t, z)).as_matrix()
        spin = Rotation.from_rotvec(np.outer(cfg.angular_rate * t, z)).as_matrix()
        P[:, :3, :3] = outer @ tilt @ spin
    elif name in ("screw_pos_pitch", "screw_neg_pitch"):
        sign = 1.0 if name == "screw_pos_pitch" else -1.0
        th = cfg.angular_rate * t
        P[:, :3, :3] = Rotation.from_rotvec(np.outer(th, z)).as_matrix()
        P[:, 2, 3] = sign * cfg.pitch * th
    else:
        raise ConfigError("class", f"unknown motion class {name!r}")
    return P


def add_brownian_noise(poses, dt: float, noise_rot: float, noise_trans: float, rng) -> np.ndarray:
    """Integrate a random-walk velocity perturbation into a pose stream.

    The body-frame velocity error performs a random walk with increments
    N(0, sigma^2 dt) per step and is integrated as T[k+1] = T[k] dT[k] exp(dt n[k]),
    where dT[k] is the clean relative motion.
    """
    n = len(poses)
    sig = np.array([noise_rot] * 3 + [noise_trans] * 3)
    steps = rng.standard_normal((n - 1, 6)) * sig * math.sqrt(dt)
    vel = np.cumsum(steps, axis=0)
    out = np.empty_like(poses)
    out[0] = poses[0]
    for k in range(n - 1):
        rel = se3.inverse(poses[k]) @ poses[k + 1]
        out[k + 1] = se3.compose(out[k], rel @ se3.se3_exp(vel[k], dt))
    return out


def generate_class(name: str, cfg: SynConfig, seed: int) -> TemporalTrajectory:
    cfg.validate()
    P = clean_poses(name, cfg)
    if cfg.noise_rot > 0 or cfg.noise_trans > 0:
        P = add_brownian_noise(P, cfg.dt, cfg.noise_rot, cfg.noise_trans, np.random.default_rng(seed))
    return TemporalTrajectory(P, cfg.dt, {"class": name})


def apply_context(traj: TemporalTrajectory, A=None, B=None) -> TemporalTrajectory:
    """Express a trajectory in another world frame (A) and body frame (B)."""
    return TemporalTrajectory(transform_poses(traj.poses, A, B), traj.dt, dict(traj.metadata))


def random_pose(rng, box: float = 1.0) -> np.ndarray:
    R = Rotation.random(random_state=rng).as_matrix()
    return se3.make_pose(R, rng.uniform(-0.5 * box, 0.5 * box, 3))


def make_contexts(cfg: SynConfig):
    """[(name, A, B), ...]; the first context is always the identity."""
    if cfg.contexts is not None:
        ctx = list(cfg.contexts)
    else:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xC0]))
        ctx = [(np.eye(4), np.eye(4))]
        for _ in range(cfg.n_contexts - 1):
            ctx.append((random_pose(rng, cfg.context_box), random_pose(rng, cfg.context_box)))
    names = [CONTEXT_NAMES[i] if i < len(CONTEXT_NAMES) else f"change_refs_{i}" for i in range(len(ctx))]
    return [(nm, np.asarray(A, float), np.asarray(B, float)) for nm, (A, B) in zip(names, ctx)]


def record_seed(seed: int, class_idx: int, context_idx: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, class_idx, context_idx, trial]).generate_state(1)[0])


def generate_syn(cfg: SynConfig) -> list[TrajectoryRecord]:
    cfg.validate()
    records = []
    for ci, name in enumerate(cfg.classes):
        for ki, (ctx_name, A, B) in enumerate(make_contexts(cfg)):
            for trial in range(cfg.trials_per_context):
                seed = record_seed(cfg.seed, ci, ki, trial)
                traj = apply_context(generate_class(name, cfg, seed), A, B)
                traj.metadata.update(context=ctx_name, trial=trial)
                records.append(TrajectoryRecord(traj, name, ctx_name, trial, seed))
    return records


# ---- file I/O ----------------------------------------------------------------

def poses_to_rows(poses, dt: float):
    q = continuous_quaternions(poses[:, :3, :3])  # x, y, z, w
    for k, T in enumerate(poses):
        yield (k * dt, *T[:3, 3], q[k, 3], q[k, 0], q[k, 1], q[k, 2])


def _fmt(x: float) -> str:
    return repr(float(x))


def write_trajectory(record: TrajectoryRecord, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    traj = record.trajectory
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADER)
        for row in poses_to_rows(traj.poses, traj.dt):
            w.writerow([_fmt(x) for x in row])
    side = {"class": record.class_label, "context": record.context_label,
            "trial": int(record.trial_id), "dt": float(traj.dt), "seed": int(record.seed)}
    with open(path.with_suffix(".json"), "w") as f:
        json.dump(side, f, indent=1)


def _read_rows(path):
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        header = [h.strip() for h in header]
        missing = [h for h in CSV_HEADER if h not in header]
        if missing:
            raise SchemaError(f"missing columns: {', '.join(missing)}")
        cols = [header.index(h) for h in CSV_HEADER]
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(row[c]) for c in cols])
            except (ValueError, IndexError):
                raise ParseError(f"malformed row {row!r}", line=line_no) from None
    if not rows:
        raise ParseError("no data rows", line=2)
    return np.array(rows)


def read_poses(path):
    """Poses and timestamps of a trajectory CSV."""
    data = _read_rows(path)
    q = data[:, 4:8]
    norms = np.linalg.norm(q, axis=1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > QUAT_NORM_TOL)
    if len(bad):
        raise SchemaError(f"quaternion on data row {bad[0] + 1} has norm {norms[bad[0]]!r}; rotation not orthonormal")
    R = Rotation.from_quat(q[:, [1, 2, 3, 0]] / norms[:, None]).as_matrix()
    P = np.tile(np.eye(4), (len(data), 1, 1))
    P[:, :3, :3] = R
    P[:, :3, 3] = data[:, 1:4]
    return data[:, 0], P


def read_trajectory(path) -> TrajectoryRecord:
    path = Path(path)
    t, P = read_poses(path)
    side_path = path.with_suffix(".json")
    if side_path.exists():
        try:
            side = json.loads(side_path.read_text())
        except json.JSONDecodeError as e:
            raise ParseError(f"{side_path.name}: {e.msg}", line=e.lineno) from None
        missing = [k for k in SIDECAR_FIELDS if k not in side]
        if missing:
            raise SchemaError(f"{side_path.name} missing fields: {', '.join(missing)}")
    else:
        if len(t) < 2:
            raise SchemaError("cannot infer dt from a single row without a sidecar")
        side = {"class": path.parent.parent.name or "unknown", "context": path.parent.name or "unknown",
                "trial": 0, "dt": float(np.median(np.diff(t))), "seed": 0}
    if len(P) < 3:
        raise SchemaError(f"{len(P)} samples; a trajectory needs at least 3")
    traj = TemporalTrajectory(P, float(side["dt"]),
                              {"class": side["class"], "context": side["context"], "trial": side["trial"]})
    return TrajectoryRecord(traj, str(side["class"]), str(side["context"]), int(side["trial"]), int(side["seed"]))


def record_relpath(record: TrajectoryRecord) -> str:
    return f"{record.class_label}/{record.context_label}/trial_{record.trial_id}.csv"


def write_dataset(records, root, extra: dict | None = None) -> dict:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    files = []
    for r in records:
        rel = record_relpath(r)
        write_trajectory(r, root / rel)
        files.append(rel)
    manifest = {"schema_version": SCHEMA_VERSION, "n_records": len(files), "files": files}
    if extra:
        manifest.update(extra)
    with open(root / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=1)
    return manifest


def read_dataset(root) -> list[TrajectoryRecord]:
    root = Path(root)
    man = root / "manifest.json"
    if man.exists():
        files = json.loads(man.read_text())["files"]
    else:
        files = sorted(os.path.relpath(p, root) for p in root.glob("*/*/*.csv"))
    if not files:
        raise FileNotFoundError(f"no trajectories under {root}")
    return [read_trajectory(root / f) for f in files]
