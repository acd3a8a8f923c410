"""Command-line front end.

Subcommands:
  calibrate    per-frame scale factors for a dataset; JSON + CSV report
  evaluate     calibrate, then score against ground truth; prints a metrics table
  ablate       sweep the road-gate length and width grids; CSV of metrics
  synth-check  run the synthetic verification suite

Per-frame failures are recorded in the report instead of aborting the
batch.  Exit codes: 0 success, 1 configuration/environment error, 2 every
frame failed.
"""

from __future__ import annotations

import argparse
import csv
import fnmatch
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .calibration import (
    CameraRig,
    RoadFilterConfig,
    apply_scale,
    estimate_scale_road_model,
    scale_fixed_plane,
    scale_gt_median,
    scale_single_factor,
    select_road_pixels,
)
from .dataio import DatasetCalib, list_frame_ids, load_frame, read_calib, write_float_raster, write_report
from .errors import NoGroundTruth, RoadscaleError
from .metrics import EvalConfig, FrameMetrics, aggregate_metrics, compute_frame_metrics
from .plane_fit import LmedsConfig

LENGTH_GRID = (6.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 60.0, 80.0)
WIDTH_GRID = (0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 10.0, 15.0)
METRIC_COLUMNS = ("Abs Rel", "Sq Rel", "RMSE", "RMSE log", "δ<1.25", "δ<1.25²", "δ<1.25³")
_WORKERS = 4


class _UsageError(Exception):
    """Configuration problem reported on stderr with exit code 1."""


def frame_seed(seed: int, index: int) -> int:
    """Stable per-frame RNG seed derived from (global seed, frame index)."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _resolve_frame_ids(root: Path, frames_arg) -> list:
    available = list_frame_ids(root)
    if frames_arg is None:
        ids = available
    else:
        listing = Path(frames_arg)
        if listing.is_file():
            ids = [ln.strip() for ln in listing.read_text().splitlines() if ln.strip()]
        elif "*" in str(frames_arg) or "?" in str(frames_arg):
            ids = [fid for fid in available if fnmatch.fnmatch(fid, str(frames_arg))]
        else:
            ids = [tok.strip() for tok in str(frames_arg).split(",") if tok.strip()]
    if not ids:
        raise _UsageError("no frames selected")
    return ids


def _prepare(args):
    if args.root is None:
        raise _UsageError("--root is required")
    if args.seed < 0:
        raise _UsageError("--seed must be >= 0")
    calib = read_calib(Path(args.root) / "calib.json")
    if args.camera_height is not None:
        calib = DatasetCalib(
            intr=calib.intr,
            rig=CameraRig(args.camera_height),
            road_class_id=calib.road_class_id,
        )
    ids = _resolve_frame_ids(Path(args.root), args.frames)
    road_cfg = RoadFilterConfig(
        max_width_m=args.max_width,
        max_length_m=args.max_length,
        road_class_id=calib.road_class_id,
    )
    return calib, ids, road_cfg


def _config_echo(args, calib: DatasetCalib, n_frames: int) -> dict:
    return {
        "root": str(args.root),
        "strategy": args.strategy,
        "n_frames": n_frames,
        "camera_height_m": calib.rig.height_m,
        "road_class_id": calib.road_class_id,
        "max_width_m": args.max_width,
        "max_length_m": args.max_length,
        "lmeds_samples": args.lmeds_samples,
        "seed": args.seed,
        "min_depth_m": args.min_depth,
        "max_depth_m": args.max_depth,
        "crop": args.crop,
        "alpha": args.alpha,
        "alpha_from": str(args.alpha_from) if args.alpha_from else None,
        "emit_calibrated": bool(args.emit_calibrated),
    }


def _resolve_single_factor(args, calib: DatasetCalib, eval_ids) -> float:
    """Global factor: explicit --alpha, or the median of per-frame gt-median
    factors over --alpha-from frames (falling back to the processed frames)."""
    if args.alpha is not None:
        if not args.alpha > 0:
            raise _UsageError("--alpha must be positive")
        return float(args.alpha)
    if args.alpha_from is not None:
        listing = Path(args.alpha_from)
        if not listing.is_file():
            raise _UsageError(f"--alpha-from file not found: {listing}")
        source_ids = [ln.strip() for ln in listing.read_text().splitlines() if ln.strip()]
    else:
        source_ids = eval_ids
    factors = []
    for fid in source_ids:
        try:
            bundle = load_frame(args.root, fid, calib)
            if bundle.gt is None:
                continue
            factors.append(scale_gt_median(bundle.pred, bundle.gt))
        except RoadscaleError:
            continue
    if not factors:
        raise _UsageError(
            "single-factor needs --alpha, or ground truth on the factor frames"
        )
    return scale_single_factor(factors)


def _process_frame(args, calib, road_cfg, eval_cfg, fid, index, global_alpha, emit_dir, with_metrics):
    rec = {
        "frame_id": fid,
        "alpha": None,
        "h_uncal": None,
        "plane": None,
        "n_road_points": None,
        "metrics": None,
        "error": None,
        "message": None,
    }
    try:
        bundle = load_frame(args.root, fid, calib)
        if args.strategy == "road-model":
            points = select_road_pixels(bundle.pred, bundle.mask, calib.intr, calib.rig, road_cfg)
            est = estimate_scale_road_model(
                points,
                calib.rig,
                LmedsConfig(num_samples=args.lmeds_samples, seed=frame_seed(args.seed, index)),
            )
            rec["alpha"] = est.alpha
            rec["h_uncal"] = est.h_uncal
            rec["n_road_points"] = est.n_road_points
            rec["plane"] = {
                "normal": [float(x) for x in est.plane.normal],
                "offset": est.plane.offset,
            }
        elif args.strategy == "gt-median":
            if bundle.gt is None:
                raise NoGroundTruth(f"{fid}: no ground-truth depth")
            rec["alpha"] = scale_gt_median(bundle.pred, bundle.gt)
        elif args.strategy == "fixed-plane":
            rec["alpha"] = scale_fixed_plane(bundle.pred, bundle.mask, calib.intr, calib.rig, road_cfg)
        else:  # single-factor
            rec["alpha"] = global_alpha

        if rec["alpha"] is not None and (emit_dir is not None or with_metrics):
            calibrated = apply_scale(bundle.pred, rec["alpha"])
            if emit_dir is not None:
                write_float_raster(calibrated, emit_dir / f"{fid}.pfm")
            if with_metrics:
                if bundle.gt is None:
                    raise NoGroundTruth(f"{fid}: no ground-truth depth")
                rec["metrics"] = asdict(compute_frame_metrics(calibrated, bundle.gt, eval_cfg))
    except RoadscaleError as exc:
        rec["error"] = type(exc).__name__
        rec["message"] = str(exc)
    return rec


def _run_frames(args, calib, ids, road_cfg, eval_cfg, with_metrics):
    global_alpha = None
    if args.strategy == "single-factor":
        global_alpha = _resolve_single_factor(args, calib, ids)
    emit_dir = None
    if args.emit_calibrated:
        emit_dir = Path(args.out).parent / "calibrated" if args.out else Path("calibrated")
        emit_dir.mkdir(parents=True, exist_ok=True)
    with ThreadPoolExecutor(max_workers=min(_WORKERS, len(ids))) as pool:
        records = list(
            pool.map(
                lambda pair: _process_frame(
                    args, calib, road_cfg, eval_cfg, pair[1], pair[0], global_alpha, emit_dir, with_metrics
                ),
                enumerate(ids),
            )
        )
    return sorted(records, key=lambda r: r["frame_id"])


def _aggregate_records(records):
    per_frame = [FrameMetrics(**r["metrics"]) for r in records if r["metrics"] is not None]
    return aggregate_metrics(per_frame) if per_frame else None


def _metrics_values(m: FrameMetrics):
    return (m.abs_rel, m.sq_rel, m.rmse, m.rmse_log, m.d1, m.d2, m.d3)


def _print_metrics_table(agg: FrameMetrics):
    print(" | ".join(f"{c:>9}" for c in METRIC_COLUMNS))
    print(" | ".join(f"{v:>9.3f}" for v in _metrics_values(agg)))


def cmd_calibrate(args) -> int:
    calib, ids, road_cfg = _prepare(args)
    records = _run_frames(args, calib, ids, road_cfg, eval_cfg=None, with_metrics=False)
    out = Path(args.out) if args.out else Path("report.json")
    write_report(records, None, out, _config_echo(args, calib, len(ids)))
    n_ok = sum(1 for r in records if r["error"] is None)
    for r in records:
        if r["error"] is not None:
            print(f"{r['frame_id']}: {r['error']}: {r['message']}", file=sys.stderr)
    print(f"calibrate [{args.strategy}]: {n_ok}/{len(ids)} frames ok, report {out}")
    return 0 if n_ok else 2


def cmd_evaluate(args) -> int:
    calib, ids, road_cfg = _prepare(args)
    eval_cfg = EvalConfig(min_depth_m=args.min_depth, max_depth_m=args.max_depth, crop=args.crop)
    records = _run_frames(args, calib, ids, road_cfg, eval_cfg, with_metrics=True)
    agg = _aggregate_records(records)
    out = Path(args.out) if args.out else Path("report.json")
    write_report(records, agg, out, _config_echo(args, calib, len(ids)))
    n_ok = sum(1 for r in records if r["metrics"] is not None)
    for r in records:
        if r["error"] is not None:
            print(f"{r['frame_id']}: {r['error']}: {r['message']}", file=sys.stderr)
    print(f"evaluate [{args.strategy}]: {n_ok}/{len(ids)} frames scored, report {out}")
    if agg is not None:
        _print_metrics_table(agg)
    return 0 if n_ok else 2


def cmd_ablate(args) -> int:
    calib, ids, _ = _prepare(args)
    if args.strategy != "road-model":
        raise _UsageError("ablate sweeps the road gate; only --strategy road-model applies")
    eval_cfg = EvalConfig(min_depth_m=args.min_depth, max_depth_m=args.max_depth, crop=args.crop)
    sweeps = [("length", v) for v in LENGTH_GRID] + [("width", v) for v in WIDTH_GRID]
    rows = []
    for sweep, value in sweeps:
        road_cfg = RoadFilterConfig(
            max_width_m=value if sweep == "width" else args.max_width,
            max_length_m=value if sweep == "length" else args.max_length,
            road_class_id=calib.road_class_id,
        )
        records = _run_frames(args, calib, ids, road_cfg, eval_cfg, with_metrics=True)
        agg = _aggregate_records(records)
        n_failed = sum(1 for r in records if r["metrics"] is None)
        row = {
            "sweep": sweep,
            "value": value,
            "n_frames": len(ids),
            "n_failed": n_failed,
        }
        if agg is not None:
            row.update(
                abs_rel=agg.abs_rel,
                sq_rel=agg.sq_rel,
                rmse=agg.rmse,
                rmse_log=agg.rmse_log,
                d1=agg.d1,
                d2=agg.d2,
                d3=agg.d3,
                n_valid=agg.n_valid,
            )
        rows.append(row)
        shown = f"{row.get('abs_rel'):.4f}" if "abs_rel" in row else "all frames failed"
        print(f"ablate {sweep} = {value:g}: abs rel {shown} ({n_failed}/{len(ids)} failed)")

    out = Path(args.out) if args.out else Path("ablation.csv")
    columns = [
        "sweep",
        "value",
        "abs_rel",
        "sq_rel",
        "rmse",
        "rmse_log",
        "d1",
        "d2",
        "d3",
        "n_valid",
        "n_frames",
        "n_failed",
    ]
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(columns)
            for row in rows:
                writer.writerow(
                    [repr(row[c]) if isinstance(row.get(c), float) else row.get(c, "") for c in columns]
                )
    except OSError as exc:
        print(f"error: cannot write {out}: {exc}", file=sys.stderr)
        return 1
    print(f"ablate: wrote {len(rows)} settings to {out}")
    return 0


def cmd_synth_check(args) -> int:
    from .checks import run_checks  # here to avoid an import cycle

    names = None
    if args.criteria:
        names = [tok.strip() for tok in args.criteria.split(",") if tok.strip()]
    try:
        ok = run_checks(names, seed=args.seed)
    except KeyError as exc:
        raise _UsageError(str(exc)) from exc
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roadscale",
        description="Metric calibration of monocular depth predictions from "
        "camera height and a robustly fitted road plane.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--root", type=Path, help="dataset root (calib.json, pred/, mask/, gt/)")
    shared.add_argument(
        "--frames",
        help="frames to process: a file with one id per line, a comma list, or a glob "
        "over available ids (default: every pred/*.pfm)",
    )
    shared.add_argument(
        "--strategy",
        choices=("road-model", "gt-median", "single-factor", "fixed-plane"),
        default="road-model",
    )
    shared.add_argument(
        "--camera-height", type=float, default=None, help="override calib.json camera height, meters"
    )
    shared.add_argument("--max-width", type=float, default=3.0, help="road gate: keep |X| < this, meters")
    shared.add_argument("--max-length", type=float, default=30.0, help="road gate: keep Z < this, meters")
    shared.add_argument("--lmeds-samples", type=int, default=1000, help="random triplets per plane fit")
    shared.add_argument("--seed", type=int, default=0)
    shared.add_argument("--min-depth", type=float, default=1e-3, help="evaluation clamp lower bound, meters")
    shared.add_argument("--max-depth", type=float, default=80.0, help="evaluation clamp upper bound, meters")
    shared.add_argument("--crop", choices=("none", "garg"), default="garg", help="evaluation crop")
    shared.add_argument("--out", type=Path, default=None, help="report path (JSON, with a CSV beside it)")
    shared.add_argument(
        "--emit-calibrated",
        action="store_true",
        help="write calibrated depth PFMs into calibrated/ next to the report",
    )
    shared.add_argument("--alpha", type=float, default=None, help="explicit single-factor scale")
    shared.add_argument(
        "--alpha-from",
        type=Path,
        default=None,
        help="frame-id list whose gt-median factors define the single factor",
    )

    p = sub.add_parser("calibrate", parents=[shared], help="estimate per-frame scale factors")
    p.set_defaults(func=cmd_calibrate)
    p = sub.add_parser("evaluate", parents=[shared], help="calibrate and score against ground truth")
    p.set_defaults(func=cmd_evaluate)
    p = sub.add_parser("ablate", parents=[shared], help="sweep road-gate length and width grids")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("synth-check", help="run the synthetic verification suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--criteria",
        default=None,
        help="comma-separated criterion names to run (default: all); "
        "e.g. exact-scale,robust,breakdown,warp,metrics,ordering,ablation,determinism",
    )
    p.set_defaults(func=cmd_synth_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (RoadscaleError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
