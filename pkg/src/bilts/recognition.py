"""1-NN recognition with invariant trajectory distances.

Protocol: trials recorded in the reference context serve as references; the
first trials of every other context form the training set used to tune the
measure parameters by grid search; the remaining trials are the test set.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import descriptor as desc
from . import similarity as sim
from .errors import BiltsError, ConfigError, ProtocolError, TooShort
from .reparam import DEFAULT_N_OUT, DEFAULT_SIGMA, canonical_progress, to_geometric

log = logging.getLogger(__name__)

MEASURES = ("bilts", "bilts_plus", "isa")
DEFAULT_L_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)
DEFAULT_XI_GRID = {
    "arclength": (0.03, 0.06, 0.12, 0.15),
    "screw_path": (0.03, 0.06, 0.12, 0.15),
    "angle": tuple(math.radians(d) for d in (10.0, 20.0, 30.0)),
}
DEFAULT_LAMBDA_GRID = (1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0)


def canonical_measure(name: str) -> str:
    name = {"bilts+": "bilts_plus", "bilts-plus": "bilts_plus"}.get(name, name)
    if name not in MEASURES:
        raise ConfigError("measure", f"unknown measure {name!r}; expected one of {MEASURES}")
    return name


@dataclass
class RecognitionConfig:
    measure: str = "bilts_plus"
    progress_type: str = "screw_path"
    L_grid: tuple = DEFAULT_L_GRID
    xi_grid: tuple | None = None  # meters for arclength/screw_path, radians for angle
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    reference_context: str = "original"
    n_train: int = 2
    n_out: int = DEFAULT_N_OUT
    sigma: float = DEFAULT_SIGMA
    band: int | None = None
    isa_m: int = 1

    def __post_init__(self):
        self.measure = canonical_measure(self.measure)
        self.progress_type = canonical_progress(self.progress_type)
        if self.xi_grid is None:
            self.xi_grid = DEFAULT_XI_GRID[self.progress_type]
        self.L_grid = tuple(float(x) for x in self.L_grid)
        self.xi_grid = tuple(float(x) for x in self.xi_grid)
        self.lambda_grid = tuple(float(x) for x in self.lambda_grid)
        if not self.L_grid:
            raise ConfigError("L_grid", "must be non-empty")
        if any(x <= 0 for x in self.L_grid):
            raise ConfigError("L_grid", "values must be positive")
        second = self.lambda_grid if self.measure == "isa" else self.xi_grid
        if not second:
            raise ConfigError("lambda_grid" if self.measure == "isa" else "xi_grid", "must be non-empty")

    def grid(self):
        """Grid points ordered so that the first maximum is the preferred tie-break."""
        second = self.lambda_grid if self.measure == "isa" else self.xi_grid
        return [ParamPoint(L, s) for L in sorted(self.L_grid) for s in sorted(second)]


@dataclass(frozen=True)
class ParamPoint:
    """L and the second parameter: progress scale xi, or lambda for the ISA measure."""
    L: float
    second: float


@dataclass
class RecognitionReport:
    recognition_rate: float
    classes: list
    confusion_matrix: list
    trials: list
    chosen_params: dict
    failed_pairs: int = 0
    grid_rates: list = field(default_factory=list)

    def to_json(self, **extra) -> str:
        d = asdict(self)
        d.update(extra)
        return json.dumps(d, indent=1, default=_json_default)

    def confusion_csv(self) -> str:
        lines = ["true\\predicted," + ",".join(self.classes)]
        for c, row in zip(self.classes, self.confusion_matrix):
            lines.append(c + "," + ",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"


def _json_default(o):
    if isinstance(o, float) and not math.isfinite(o):
        return None
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)


def xi_in_progress_units(xi: float, progress_type: str, L: float) -> float:
    """Screw-path progress is measured in radians; a scale in meters is divided by L."""
    return xi / L if canonical_progress(progress_type) == "screw_path" else xi


def split_protocol(records, reference_context: str, n_train: int = 2):
    """(references, train, test) following the reference/first-trials/rest split."""
    contexts = {r.context_label for r in records}
    if reference_context not in contexts:
        raise ProtocolError(f"reference context {reference_context!r} not in {sorted(contexts)}")
    refs = [r for r in records if r.context_label == reference_context]
    others = [r for r in records if r.context_label != reference_context]
    train = [r for r in others if r.trial_id < n_train]
    test = [r for r in others if r.trial_id >= n_train]
    return refs, train, test


class _Prepared:
    """Per-trajectory cached descriptors (or the failure that prevented them)."""

    def __init__(self, traj, measure, point: ParamPoint, cfg: RecognitionConfig):
        self.error = None
        self.ys = self.summaries = self.invariants = None
        try:
            if measure == "isa":
                seq = desc.descriptor_sequence(traj, cfg.isa_m)
                if len(seq) < 3:
                    raise TooShort("fewer than 3 descriptors")
                self.invariants = sim.isa_invariants(seq)
            else:
                params = measure_params(measure, point, cfg)
                seq = sim.descriptors_for(traj, params)
            self.ys = seq.ys
            self.summaries = sim.sv_summaries(seq.ys)
        except BiltsError as e:
            self.error = e


def measure_params(measure: str, point: ParamPoint, cfg: RecognitionConfig) -> sim.MeasureParams:
    flags = sim.BILTS_PLUS if measure == "bilts_plus" else sim.BILTS
    xi = xi_in_progress_units(point.second, cfg.progress_type, point.L)
    return sim.MeasureParams(point.L, xi, band=cfg.band, **flags)


def _pair_distance(a: _Prepared, b: _Prepared, measure, point: ParamPoint, cfg) -> float:
    if a.error is not None or b.error is not None:
        return math.inf
    L = point.L
    if measure == "isa":
        path = sim.dtw_align(a.summaries, b.summaries, L, cfg.band)
        d = sim.isa_distance(a.invariants, b.invariants, L, point.second, path)
    else:
        d = sim.sequence_distance(a.ys, b.ys, L, measure == "bilts_plus", cfg.band,
                                  summaries=(a.summaries, b.summaries))
    return d if math.isfinite(d) else math.inf


class _Preprocessor:
    """Geometric trajectories, cached per L (screw-path progress depends on L)."""

    def __init__(self, cfg: RecognitionConfig):
        self.cfg = cfg
        self.cache = {}

    def __call__(self, record, L):
        key = (id(record), L if self.cfg.progress_type == "screw_path" else None)
        if key not in self.cache:
            try:
                self.cache[key] = to_geometric(record.trajectory, self.cfg.progress_type,
                                               L if self.cfg.progress_type == "screw_path" else None,
                                               self.cfg.n_out, self.cfg.sigma)
            except BiltsError as e:
                self.cache[key] = e
        return self.cache[key]


def _prepare(records, point, cfg, pre):
    out = []
    for r in records:
        g = pre(r, point.L)
        if isinstance(g, BiltsError):
            p = _Prepared.__new__(_Prepared)
            p.error, p.ys, p.summaries, p.invariants = g, None, None, None
        else:
            p = _Prepared(g, cfg.measure, point, cfg)
        out.append(p)
    return out


def distance_matrix(queries, references, point: ParamPoint, cfg: RecognitionConfig, pre=None):
    """Distances (len(queries), len(references)); failed pairs are +inf."""
    pre = pre or _Preprocessor(cfg)
    q = _prepare(queries, point, cfg, pre)
    r = _prepare(references, point, cfg, pre)
    D = np.array([[_pair_distance(a, b, cfg.measure, point, cfg) for b in r] for a in q])
    n_fail = int(np.sum(~np.isfinite(D)))
    if n_fail:
        log.info("%d of %d pairs failed and count as infinitely distant", n_fail, D.size)
    return D


def nearest(D_row):
    """Index of the smallest distance; lowest index wins ties, all-inf gives index 0."""
    return int(np.argmin(D_row))


def classify_1nn(query, references, params: sim.MeasureParams | None = None, measure: str = "bilts_plus",
                 lam: float | None = None):
    """Label and distance of the nearest reference.

    ``query`` is a geometric trajectory and ``references`` a list of
    (geometric trajectory, label) pairs.  Pairs whose distance cannot be
    computed count as infinitely far.
    """
    if not references:
        raise ValueError("need at least one reference")
    measure = canonical_measure(measure)
    dists = []
    for traj, _ in references:
        try:
            if measure == "isa":
                d = sim.isa_trajectory_distance(query, traj, params.L, lam, band=params.band)
            else:
                d = sim.trajectory_distance(query, traj, params)
        except BiltsError as e:
            log.info("reference skipped: %s", e)
            d = math.inf
        dists.append(d)
    k = nearest(np.array(dists))
    return references[k][1], dists[k]


def _rate(D, q_labels, r_labels):
    pred = [r_labels[nearest(row)] for row in D]
    return float(np.mean([p == t for p, t in zip(pred, q_labels)])), pred


def _grid_cell(args):
    train, references, point, cfg = args
    D = distance_matrix(train, references, point, cfg)
    rate, _ = _rate(D, [r.class_label for r in train], [r.class_label for r in references])
    return rate


def grid_search(train, references, cfg: RecognitionConfig, jobs: int = 1):
    """Best grid point by training recognition rate and the full rate table.

    The grid is scanned in ascending L, then ascending xi (or lambda), and the
    first point reaching the maximum rate is returned.
    """
    grid = cfg.grid()
    if not train:
        return grid[0], []
    tasks = [(train, references, p, cfg) for p in grid]
    if jobs > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rates = list(ex.map(_grid_cell, tasks))
    else:
        pre = _Preprocessor(cfg)
        rates = []
        for p in grid:
            D = distance_matrix(train, references, p, cfg, pre)
            rates.append(_rate(D, [r.class_label for r in train], [r.class_label for r in references])[0])
    best = int(np.argmax(rates))
    table = [{"L": p.L, "second": p.second, "rate": r} for p, r in zip(grid, rates)]
    return grid[best], table


def evaluate(test, references, point: ParamPoint, cfg: RecognitionConfig) -> RecognitionReport:
    if not test:
        raise ValueError("test set is empty")
    if not references:
        raise ValueError("reference set is empty")
    D = distance_matrix(test, references, point, cfg)
    classes = sorted({r.class_label for r in references} | {r.class_label for r in test})
    index = {c: i for i, c in enumerate(classes)}
    conf = np.zeros((len(classes), len(classes)), dtype=int)
    trials = []
    for rec, row in zip(test, D):
        k = nearest(row)
        pred = references[k].class_label
        conf[index[rec.class_label], index[pred]] += 1
        trials.append({"class": rec.class_label, "context": rec.context_label, "trial": rec.trial_id,
                       "predicted": pred, "distance": float(row[k]),
                       "nearest_reference": f"{references[k].class_label}/{references[k].context_label}/"
                                            f"trial_{references[k].trial_id}"})
    correct = int(np.trace(conf))
    second = "lambda" if cfg.measure == "isa" else "xi"
    chosen = {"measure": cfg.measure, "progress_type": cfg.progress_type, "L": point.L, second: point.second}
    return RecognitionReport(correct / len(test), classes, conf.tolist(), trials, chosen,
                             failed_pairs=int(np.sum(~np.isfinite(D))))


def run_protocol(records, cfg: RecognitionConfig, tune: bool = True, point: ParamPoint | None = None,
                 jobs: int = 1) -> RecognitionReport:
    refs, train, test = split_protocol(records, cfg.reference_context, cfg.n_train)
    table = []
    if tune:
        point, table = grid_search(train, refs, cfg, jobs)
    elif point is None:
        point = cfg.grid()[0]
    report = evaluate(test, refs, point, cfg)
    report.grid_rates = table
    return report
