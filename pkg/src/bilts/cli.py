"""Command-line interface.

Exit codes: 0 success, 1 I/O, 2 configuration, 3 numerical/singular,
4 protocol (e.g. unknown reference context).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import shutil
import sys
import tempfile
from pathlib import Path

from . import __version__
from . import datasets as ds
from . import descriptor as desc
from . import recognition as rec
from . import segmentation as seg
from . import similarity as sim
from .errors import (BiltsError, ConfigError, DegenerateProgress, ParseError, ProtocolError,
                     RotationNearPi, SchemaError, SingularDecomposition, SingularInvariants, TooShort)
from .reparam import DEFAULT_N_OUT, DEFAULT_SIGMA, canonical_progress, to_geometric

EXIT_IO, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PROTOCOL = 1, 2, 3, 4

log = logging.getLogger("bilts")


def parse_scale(text: str) -> float:
    """Float, or degrees with a 'deg' suffix (converted to radians)."""
    t = text.strip().lower()
    try:
        if t.endswith("deg"):
            return math.radians(float(t[:-3]))
        return float(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def parse_list(text: str) -> tuple:
    return tuple(parse_scale(x) for x in text.split(",") if x.strip())


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _geometric(record, args, L):
    progress = canonical_progress(args.progress)
    return to_geometric(record.trajectory, progress, L if progress == "screw_path" else None,
                        args.n_out, args.sigma)


def _measure_params(args, plus: bool) -> sim.MeasureParams:
    if not args.L > 0:
        raise ConfigError("L", "must be positive")
    if not args.xi > 0:
        raise ConfigError("xi", "must be positive")
    xi = rec.xi_in_progress_units(args.xi, args.progress, args.L)
    flags = sim.BILTS_PLUS if plus else sim.BILTS
    return sim.MeasureParams(args.L, xi, band=getattr(args, "band", None), **flags)


# ---- commands ------------------------------------------------------------------

def cmd_syn_gen(args) -> int:
    cfg_dict = {}
    if args.config:
        try:
            cfg_dict = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as e:
            raise ConfigError("config", f"invalid JSON: {e.msg} (line {e.lineno})") from None
    if args.seed is not None:
        cfg_dict["seed"] = args.seed
    cfg = ds.SynConfig.from_dict(cfg_dict)
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.force:
        print(f"error: {out} exists and is not empty (use --force)", file=sys.stderr)
        return EXIT_IO
    records = ds.generate_syn(cfg)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(dir=out.parent, prefix=f".{out.name}."))
    try:
        manifest = ds.write_dataset(records, tmp, {"seed": cfg.seed, "config": cfg.to_dict(),
                                                   "generator": f"bilts {__version__}"})
        if out.exists():
            shutil.rmtree(out)
        os.replace(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    classes = sorted({r.class_label for r in records})
    contexts = sorted({r.context_label for r in records})
    print(f"wrote {manifest['n_records']} trajectories to {out} (seed {cfg.seed})")
    print(f"classes: {', '.join(classes)}")
    print(f"contexts: {', '.join(contexts)}")
    return 0


def cmd_compare(args) -> int:
    a = ds.read_trajectory(args.a)
    b = ds.read_trajectory(args.b)
    params = _measure_params(args, args.plus)
    ga, gb = _geometric(a, args, args.L), _geometric(b, args, args.L)
    d, path, per_pair = sim.trajectory_distance(ga, gb, params, return_path=True)
    print(repr(d))
    if args.dump:
        lines = [f"# seed={args.seed}", "i,j,d"]
        lines += [f"{i},{j},{float(x)!r}" for (i, j), x in zip(path, per_pair)]
        atomic_write(args.dump, "\n".join(lines) + "\n")
    return 0


def cmd_recognize(args) -> int:
    records = ds.read_dataset(args.dataset)
    kw = dict(measure=args.measure, progress_type=args.progress, reference_context=args.reference_context,
              n_out=args.n_out, sigma=args.sigma, band=args.band)
    if args.L_grid:
        kw["L_grid"] = args.L_grid
    if args.xi_grid:
        kw["xi_grid"] = args.xi_grid
    if args.lambda_grid:
        kw["lambda_grid"] = args.lambda_grid
    cfg = rec.RecognitionConfig(**kw)
    point = None
    if not args.tune:
        second = args.lam if cfg.measure == "isa" else args.xi
        if args.L is None or second is None:
            name = "--lambda" if cfg.measure == "isa" else "--xi"
            raise ConfigError("L", f"--L and {name} are required without --tune")
        point = rec.ParamPoint(args.L, second)
    report = rec.run_protocol(records, cfg, tune=args.tune, point=point, jobs=args.jobs)
    seed = _dataset_seed(args.dataset) if args.seed is None else args.seed
    out = Path(args.out)
    atomic_write(out / "report.json", report.to_json(seed=seed, dataset=str(args.dataset)))
    atomic_write(out / "confusion.csv", f"# seed={seed}\n" + report.confusion_csv())
    print(f"recognition rate: {report.recognition_rate:.4f} ({report.chosen_params})")
    if report.failed_pairs:
        print(f"{report.failed_pairs} pairs could not be compared (counted as infinitely distant)")
    return 0


def _dataset_seed(root):
    man = Path(root) / "manifest.json"
    try:
        return json.loads(man.read_text()).get("seed")
    except (OSError, json.JSONDecodeError):
        return None


def cmd_segment(args) -> int:
    record = ds.read_trajectory(args.file)
    params = _measure_params(args, not args.no_plus)
    g = _geometric(record, args, args.L)
    signal, progress = seg.shape_change_signal(g, params, return_progress=True)
    m = desc.progress_scale_steps(params.xi, g.ds)
    threshold = args.threshold if args.threshold is not None else seg.default_threshold(signal)
    min_gap = args.min_gap if args.min_gap is not None else seg.default_min_gap(m)
    breaks = seg.segment(signal, threshold, min_gap) if threshold > 0 else []
    prefix = Path(args.out) if args.out else Path(args.file).with_suffix("")
    atomic_write(f"{prefix}_signal.csv", f"# seed={args.seed}\n" + seg.signal_csv(progress, signal))
    atomic_write(f"{prefix}_breakpoints.json", json.dumps({
        "seed": args.seed, "threshold": threshold, "min_gap": min_gap,
        "breakpoints": breaks, "progress": [float(progress[i]) for i in breaks]}, indent=1))
    print("breakpoints:", " ".join(str(b) for b in breaks) if breaks else "none")
    return 0


# ---- parser --------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--seed", type=int, default=None, help="seed echoed into outputs")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")


def _add_preprocess(p, progress_default="screw"):
    p.add_argument("--progress", default=progress_default,
                   choices=["angle", "screw", "screw_path", "arclength"])
    p.add_argument("--n-out", type=int, default=DEFAULT_N_OUT)
    p.add_argument("--sigma", type=float, default=DEFAULT_SIGMA, help="smoothing kernel width (samples)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bilts", description="Bi-invariant trajectory-shape similarity tools")
    parser.add_argument("--version", action="version",
                        version=f"bilts {__version__} (file schema {ds.SCHEMA_VERSION})")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("syn-gen", help="generate the synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON file with generator settings")
    p.add_argument("--force", action="store_true", help="replace an existing output directory")
    _add_common(p)
    p.set_defaults(func=cmd_syn_gen)

    p = sub.add_parser("compare", help="distance between two trajectory files")
    p.add_argument("a")
    p.add_argument("b")
    _add_preprocess(p)
    p.add_argument("--L", type=float, required=True, help="length scale [m]")
    p.add_argument("--xi", type=parse_scale, required=True,
                   help="progress scale: meters for screw/arclength, radians (or 'deg' suffix) for angle")
    p.add_argument("--plus", action="store_true", help="regularized, rotation-aligned measure")
    p.add_argument("--band", type=int, default=None, help="Sakoe-Chiba band radius")
    p.add_argument("--dump", help="write per-pair distances along the warping path to CSV")
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("recognize", help="1-NN recognition experiment on a dataset directory")
    p.add_argument("--dataset", required=True)
    p.add_argument("--reference-context", required=True)
    p.add_argument("--measure", default="bilts+", choices=["bilts", "bilts+", "bilts_plus", "isa"])
    _add_preprocess(p)
    p.add_argument("--tune", action="store_true", help="grid search on the training trials first")
    p.add_argument("--L", type=float)
    p.add_argument("--xi", type=parse_scale)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--L-grid", type=parse_list)
    p.add_argument("--xi-grid", type=parse_list)
    p.add_argument("--lambda-grid", type=parse_list)
    p.add_argument("--band", type=int, default=None)
    p.add_argument("--out", default=".", help="directory for report.json and confusion.csv")
    _add_common(p)
    p.set_defaults(func=cmd_recognize)

    p = sub.add_parser("segment", help="shape-change signal and breakpoints of one trajectory")
    p.add_argument("file")
    _add_preprocess(p)
    p.add_argument("--L", type=float, required=True)
    p.add_argument("--xi", type=parse_scale, required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--min-gap", type=int)
    p.add_argument("--no-plus", action="store_true", help="use the unregularized measure")
    p.add_argument("--out", help="output prefix (default: next to the input file)")
    _add_common(p)
    p.set_defaults(func=cmd_segment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "seed", None) is None and args.command != "recognize":
        args.seed = 0
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ProtocolError as e:
        print(f"protocol error: {e}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (SingularDecomposition, SingularInvariants, DegenerateProgress, RotationNearPi, TooShort) as e:
        print(f"numerical error ({type(e).__name__}): {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, SchemaError, OSError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except BiltsError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
