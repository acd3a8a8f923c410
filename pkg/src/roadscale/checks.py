"""Synthetic verification suite.

Each check builds scenes with known geometry and scale, runs the relevant
pipeline pieces, and returns (passed, detail).  The criteria are the
package's acceptance gate: `roadscale synth-check` runs them from the
command line and tests/test_acceptance.py runs them under pytest.

The metrics check carries its own brute-force per-pixel reference
(plain Python loops) so the vectorized implementation is compared against
an independently written one.
"""

from __future__ import annotations

import io
import json
import math
import sys
import tempfile
import time
from contextlib import redirect_stdout
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import dataio
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
from .errors import NoRoadPixels, NoValidPixels, TooFewPoints
from .geometry import (
    CameraIntrinsics,
    RigidTransform,
    inverse_warp,
    rotation_about_x,
    rotation_about_y,
    rotation_about_z,
)
from .metrics import EvalConfig, aggregate_metrics, compute_frame_metrics
from .plane_fit import LmedsConfig, fit_plane_lmeds
from .synth import (
    Box,
    SceneSpec,
    export_dataset,
    generate_scene,
    run_scale_recovery_trial,
    warp_invariance_check,
)

_KITTI_LIKE = CameraIntrinsics(fx=320.0, fy=320.0, cx=320.0, cy=96.0, width=640, height=192)
_SMALL = CameraIntrinsics(fx=160.0, fy=160.0, cx=160.0, cy=48.0, width=320, height=96)


def check_exact_scale(seed: int = 0):
    """Flat noiseless scenes at widely spread scales: recovery within 0.5%."""
    rig = CameraRig(1.5)
    worst_err = 0.0
    worst_time = 0.0
    for i, s in enumerate((5.0, 30.0, 50.0)):
        frame = generate_scene(
            SceneSpec(intr=_KITTI_LIKE, camera_height_m=1.5, true_scale=s, seed=seed * 101 + i)
        )
        t0 = time.perf_counter()
        points = select_road_pixels(frame.pred, frame.mask, _KITTI_LIKE, rig)
        est = estimate_scale_road_model(points, rig, LmedsConfig(seed=seed * 101 + i))
        worst_time = max(worst_time, time.perf_counter() - t0)
        worst_err = max(worst_err, abs(est.alpha - s) / s)
    ok = worst_err <= 0.005 and worst_time < 1.0
    return ok, (
        f"max rel error {worst_err:.2e} (limit 5.0e-3), "
        f"max calibration time {worst_time:.3f}s (limit 1s)"
    )


def check_robust_recovery(seed: int = 0):
    """Tilted, noisy, outlier-ridden scenes: alpha within 5% in >= 19/20 trials."""
    n_trials, hits = 20, 0
    worst = 0.0
    for t in range(n_trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, t]))
        pitch, roll = rng.uniform(-5.0, 5.0, size=2)
        s = math.exp(rng.uniform(math.log(5.0), math.log(50.0)))
        box = Box(
            center=(rng.uniform(-2.0, 2.0), -1.1, rng.uniform(8.0, 16.0)),
            size=(1.2, 0.8, 1.2),
        )
        spec = SceneSpec(
            intr=_SMALL,
            camera_height_m=1.5,
            road_pitch_deg=float(pitch),
            road_roll_deg=float(roll),
            boxes=(box,),
            true_scale=s,
            noise_rel=0.02,
            outlier_frac=0.3,
            mislabel_frac=0.05,
            seed=int(rng.integers(2**31)),
        )
        res = run_scale_recovery_trial(spec, lmeds=LmedsConfig(seed=int(rng.integers(2**31))))
        worst = max(worst, res.road_model_error)
        if res.road_model_error <= 0.05:
            hits += 1
    ok = hits >= 19
    return ok, f"{hits}/{n_trials} trials within 5% (need 19), worst error {worst:.3f}"


def check_lmeds_breakdown(seed: int = 0):
    """500 points, 45% gross outliers: normal < 1 degree, offset < 1%, every seed."""
    n_rounds, good = 50, 0
    worst_angle = 0.0
    for r in range(n_rounds):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 500 + r]))
        pitch, roll = np.deg2rad(rng.uniform(-10.0, 10.0, size=2))
        normal = rotation_about_z(roll) @ rotation_about_x(pitch) @ np.array([0.0, 1.0, 0.0])
        offset = float(rng.uniform(0.5, 3.0))
        xz = rng.uniform(-10.0, 10.0, size=(275, 2))
        y = -(offset + normal[0] * xz[:, 0] + normal[2] * xz[:, 1]) / normal[1]
        inliers = np.column_stack([xz[:, 0], y, xz[:, 1]])
        outliers = rng.uniform(-10.0, 10.0, size=(225, 3))
        points = np.vstack([inliers, outliers])
        fit = fit_plane_lmeds(points, LmedsConfig(seed=int(rng.integers(2**31))))
        angle = math.degrees(math.acos(min(1.0, max(-1.0, float(fit.normal @ normal)))))
        worst_angle = max(worst_angle, angle)
        if angle < 1.0 and abs(fit.offset - offset) < 0.01 * offset:
            good += 1
    ok = good == n_rounds
    return ok, f"{good}/{n_rounds} seeds within 1 degree / 1% offset, worst angle {worst_angle:.2e} deg"


def check_warp_invariance(seed: int = 0):
    """Scaling depth and translation together must not change the warp."""
    frame = generate_scene(
        SceneSpec(
            intr=_SMALL,
            camera_height_m=1.5,
            boxes=(Box((0.5, -1.1, 8.0), (1.5, 0.8, 1.5)),),
            true_scale=1.0,
            seed=seed + 9,
        )
    )
    rng = np.random.default_rng(np.random.SeedSequence([seed, 77]))
    ax, ay, az = rng.uniform(-math.radians(2.0), math.radians(2.0), size=3)
    rotation = rotation_about_x(ax) @ rotation_about_y(ay) @ rotation_about_z(az)
    translation = rng.uniform(0.05, 0.12, size=3) * rng.choice([-1.0, 1.0], size=3)
    xform = RigidTransform(rotation, translation)

    identity_diff = float(warp_invariance_check(frame, xform, [1.0])[0])
    diffs = warp_invariance_check(frame, xform, [0.1, 10.0])

    image = frame.image.values.astype(np.float64)
    depth = frame.truth.values.astype(np.float64)
    ref, ref_valid = inverse_warp(image, depth, xform, frame.intr)
    neg, neg_valid = inverse_warp(image, depth, xform.with_translation_scaled(10.0), frame.intr)
    joint = ref_valid & neg_valid
    neg_diff = float(np.max(np.abs(neg[joint] - ref[joint])))

    ok = identity_diff == 0.0 and float(diffs.max()) < 1e-6 and neg_diff > 1e-3
    return ok, (
        f"alpha=1 diff {identity_diff}, max joint-scaling diff {diffs.max():.1e} "
        f"(limit 1e-6), translation-only control {neg_diff:.1e} (must exceed 1e-3)"
    )


def _reference_frame_metrics(pred, gt, min_depth, max_depth, crop):
    """Plain-Python per-pixel metrics; independent of the numpy implementation."""
    h, w = len(gt), len(gt[0])
    if crop == "garg":
        r0, r1 = int(0.40810811 * h), int(0.99189189 * h)
        c0, c1 = int(0.03594771 * w), int(0.96405229 * w)
    else:
        r0, r1, c0, c1 = 0, h, 0, w
    pairs = []
    for r in range(r0, r1):
        for c in range(c0, c1):
            g = float(gt[r][c])
            if min_depth < g < max_depth:
                p = float(pred[r][c])
                p = min(max(p, min_depth), max_depth)
                pairs.append((p, g))
    if not pairs:
        return None
    n = len(pairs)
    return {
        "abs_rel": sum(abs(p - g) / g for p, g in pairs) / n,
        "sq_rel": sum((p - g) ** 2 / g for p, g in pairs) / n,
        "rmse": math.sqrt(sum((p - g) ** 2 for p, g in pairs) / n),
        "rmse_log": math.sqrt(sum((math.log(p) - math.log(g)) ** 2 for p, g in pairs) / n),
        "d1": sum(1 for p, g in pairs if max(p / g, g / p) < 1.25) / n,
        "d2": sum(1 for p, g in pairs if max(p / g, g / p) < 1.25**2) / n,
        "d3": sum(1 for p, g in pairs if max(p / g, g / p) < 1.25**3) / n,
        "n_valid": n,
    }


def check_metrics_oracle(seed: int = 0):
    """Vectorized metrics agree with the brute-force reference within 1e-9."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 5]))
    fields = ("abs_rel", "sq_rel", "rmse", "rmse_log", "d1", "d2", "d3")
    computed, references = [], []
    max_diff = 0.0
    for k in range(100):
        gt = rng.uniform(0.0, 100.0, size=(16, 16))
        gt[gt < 0.5] = 0.0
        gt[rng.random((16, 16)) < 0.2] = 0.0
        pred = rng.uniform(0.1, 90.0, size=(16, 16))
        pred[rng.random((16, 16)) < 0.05] = 0.0
        crop = "garg" if k % 2 else "none"
        pred_r = dataio.DepthRaster(pred.astype(np.float32))
        gt_r = dataio.DepthRaster(gt.astype(np.float32))
        ref = _reference_frame_metrics(pred_r.values, gt_r.values, 1e-3, 80.0, crop)
        cfg = EvalConfig(1e-3, 80.0, crop)
        if ref is None:
            try:
                compute_frame_metrics(pred_r, gt_r, cfg)
                return False, f"frame {k}: expected NoValidPixels"
            except NoValidPixels:
                continue
        got = compute_frame_metrics(pred_r, gt_r, cfg)
        if got.n_valid != ref["n_valid"]:
            return False, f"frame {k}: n_valid {got.n_valid} != reference {ref['n_valid']}"
        for f in fields:
            max_diff = max(max_diff, abs(getattr(got, f) - ref[f]))
        computed.append(got)
        references.append(ref)

    agg = aggregate_metrics(computed)
    n = len(references)
    for f in fields:
        ref_mean = sum(r[f] for r in references) / n
        max_diff = max(max_diff, abs(getattr(agg, f) - ref_mean))
    if agg.n_valid != sum(r["n_valid"] for r in references):
        return False, "aggregate n_valid mismatch"
    ok = max_diff <= 1e-9
    return ok, f"{n} frames compared, max per-field deviation {max_diff:.2e} (limit 1e-9)"


def check_strategy_ordering(seed: int = 0):
    """Per-frame road model beats fixed plane on pitched roads and a global factor on jittered scales."""
    rig = CameraRig(1.5)
    eval_cfg = EvalConfig(1e-3, 80.0, "none")

    road_ms, fixed_ms = [], []
    for i in range(3):
        spec = SceneSpec(
            intr=_SMALL,
            camera_height_m=1.5,
            road_pitch_deg=3.0,
            boxes=(Box((1.0, -1.2, 10.0), (1.5, 0.9, 1.5)),),
            true_scale=30.0,
            seed=seed * 7 + i,
        )
        frame = generate_scene(spec)
        points = select_road_pixels(frame.pred, frame.mask, _SMALL, rig)
        est = estimate_scale_road_model(points, rig, LmedsConfig(seed=seed * 7 + i))
        road_ms.append(compute_frame_metrics(apply_scale(frame.pred, est.alpha), frame.truth, eval_cfg))
        fixed = scale_fixed_plane(frame.pred, frame.mask, _SMALL, rig)
        fixed_ms.append(compute_frame_metrics(apply_scale(frame.pred, fixed), frame.truth, eval_cfg))
    road_abs = aggregate_metrics(road_ms).abs_rel
    fixed_abs = aggregate_metrics(fixed_ms).abs_rel

    scales = (20.0, 24.0, 28.0, 32.0, 36.0, 40.0)
    frames, per_frame_alphas, gt_factors = [], [], []
    for i, s in enumerate(scales):
        frame = generate_scene(
            SceneSpec(intr=_SMALL, camera_height_m=1.5, true_scale=s, seed=seed * 13 + i)
        )
        points = select_road_pixels(frame.pred, frame.mask, _SMALL, rig)
        est = estimate_scale_road_model(points, rig, LmedsConfig(seed=seed * 13 + i))
        frames.append(frame)
        per_frame_alphas.append(est.alpha)
        gt_factors.append(scale_gt_median(frame.pred, frame.truth))
    single = scale_single_factor(gt_factors)
    jitter_road = aggregate_metrics(
        [
            compute_frame_metrics(apply_scale(f.pred, a), f.truth, eval_cfg)
            for f, a in zip(frames, per_frame_alphas)
        ]
    ).abs_rel
    jitter_single = aggregate_metrics(
        [compute_frame_metrics(apply_scale(f.pred, single), f.truth, eval_cfg) for f in frames]
    ).abs_rel

    ok = road_abs < fixed_abs and jitter_road < jitter_single
    return ok, (
        f"pitched abs rel: road model {road_abs:.4f} < fixed plane {fixed_abs:.4f}; "
        f"jittered abs rel: per-frame {jitter_road:.4f} < global factor {jitter_single:.4f}"
    )


def check_ablation_plateau(seed: int = 0):
    """Gate-length sweep: flat 10-80 m plateau, explicit failure at 6 m."""
    intr = CameraIntrinsics(fx=320.0, fy=320.0, cx=320.0, cy=80.0, width=640, height=160)
    rig = CameraRig(1.5)
    frame = generate_scene(SceneSpec(intr=intr, camera_height_m=1.5, true_scale=30.0, seed=seed + 3))
    eval_cfg = EvalConfig(1e-3, 80.0, "none")
    lengths = (6.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 60.0, 80.0)
    plateau = []
    short_failed = False
    for length in lengths:
        cfg = RoadFilterConfig(max_width_m=3.0, max_length_m=length)
        try:
            points = select_road_pixels(frame.pred, frame.mask, intr, rig, cfg)
            est = estimate_scale_road_model(points, rig, LmedsConfig(seed=seed + 3))
        except (NoRoadPixels, TooFewPoints) as exc:
            if length == 6.0:
                short_failed = True
                continue
            return False, f"length {length} unexpectedly failed: {type(exc).__name__}"
        if length == 6.0:
            return False, "length 6 produced a silent estimate instead of failing"
        m = compute_frame_metrics(apply_scale(frame.pred, est.alpha), frame.truth, eval_cfg)
        plateau.append(m.abs_rel)
    spread = max(plateau) - min(plateau)
    ok = short_failed and spread < 0.01
    return ok, (
        f"abs rel spread {spread:.2e} across lengths 10-80 (limit 0.01); "
        f"length 6 fails explicitly: {short_failed}"
    )


def check_determinism(seed: int = 0):
    """Identical calibrate invocations yield identical reports (timestamp aside)."""
    from .cli import main as cli_main  # here to avoid an import cycle

    with tempfile.TemporaryDirectory() as td:
        td = Path(td)
        root = td / "data"
        scene_params = ((7.5, 0.0), (19.63, 1.5), (30.0, -2.0), (36.4, 3.0))
        specs = [
            SceneSpec(
                intr=_SMALL,
                camera_height_m=1.5,
                road_pitch_deg=pitch,
                true_scale=s,
                noise_rel=0.01,
                outlier_frac=0.1,
                mislabel_frac=0.02,
                seed=1000 + i,
            )
            for i, (s, pitch) in enumerate(scene_params)
        ]
        export_dataset(root, specs)
        reports = []
        for run in (1, 2):
            out = td / f"report{run}.json"
            with redirect_stdout(io.StringIO()):
                rc = cli_main(
                    [
                        "calibrate",
                        "--root",
                        str(root),
                        "--strategy",
                        "road-model",
                        "--seed",
                        str(seed),
                        "--out",
                        str(out),
                    ]
                )
            if rc != 0:
                return False, f"calibrate run {run} exited with {rc}"
            reports.append(out)
        docs = [json.loads(p.read_text()) for p in reports]
        for doc in docs:
            doc.pop("timestamp", None)
        same_json = docs[0] == docs[1]
        same_csv = (
            reports[0].with_suffix(".csv").read_bytes()
            == reports[1].with_suffix(".csv").read_bytes()
        )
    ok = same_json and same_csv
    return ok, f"JSON equal with timestamp excluded: {same_json}; CSV byte-identical: {same_csv}"


@dataclass(frozen=True)
class Criterion:
    number: int
    name: str
    summary: str
    func: Callable


CRITERIA = (
    Criterion(
        1,
        "exact-scale",
        "flat scenes at scales 5/30/50 recover alpha within 0.5% in under 1 s per 640x192 frame",
        check_exact_scale,
    ),
    Criterion(
        2,
        "robust",
        "tilted scenes with 2% noise, 30% outliers, 5% mislabels: alpha within 5% in >= 19/20 trials",
        check_robust_recovery,
    ),
    Criterion(
        3,
        "breakdown",
        "plane fit with 45% gross outliers: normal within 1 degree, offset within 1%, 50/50 seeds",
        check_lmeds_breakdown,
    ),
    Criterion(
        4,
        "warp",
        "scaling depth and translation together changes the inverse warp by < 1e-6; scaling translation alone exceeds 1e-3",
        check_warp_invariance,
    ),
    Criterion(
        5,
        "metrics",
        "metrics match a brute-force per-pixel reference within 1e-9 on 100 random frames",
        check_metrics_oracle,
    ),
    Criterion(
        6,
        "ordering",
        "road model beats the fixed plane on pitched scenes and a global factor on per-frame jittered scales",
        check_strategy_ordering,
    ),
    Criterion(
        7,
        "ablation",
        "gate-length sweep: < 1% abs rel spread across 10-80 m and explicit failure at 6 m",
        check_ablation_plateau,
    ),
    Criterion(
        8,
        "determinism",
        "two identical calibrate runs write identical reports (timestamp excluded)",
        check_determinism,
    ),
)


def run_check(name: str, seed: int = 0):
    for crit in CRITERIA:
        if crit.name == name:
            return crit.func(seed)
    raise KeyError(f"unknown criterion {name!r}")


def run_checks(names=None, seed: int = 0, stream=None) -> bool:
    """Run selected criteria (all by default), print one line each."""
    stream = stream if stream is not None else sys.stdout
    known = {c.name for c in CRITERIA}
    if names is not None:
        unknown = sorted(set(names) - known)
        if unknown:
            raise KeyError(f"unknown criteria: {', '.join(unknown)} (known: {', '.join(sorted(known))})")
    all_ok = True
    for crit in CRITERIA:
        if names is not None and crit.name not in names:
            continue
        ok, detail = crit.func(seed)
        all_ok = all_ok and ok
        print(f"{'PASS' if ok else 'FAIL'}  criterion {crit.number} [{crit.name}]: {detail}", file=stream)
    return all_ok
