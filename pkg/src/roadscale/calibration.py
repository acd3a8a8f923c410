"""Per-frame metric scale recovery for monocular depth predictions.

A self-supervised depth network outputs depth up to an unknown per-frame
factor alpha (metric depth = alpha * prediction).  The road-model strategy
recovers alpha without ground truth: backproject road-labeled pixels with
the raw predicted depth, fit a plane robustly, and compare the camera's
height above that plane (in prediction units) with the known metric mount
height.  The remaining strategies are the reference baselines: per-frame
ground-truth median scaling, one global factor, and a fixed flat plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataio import DepthRaster, MaskRaster
from .errors import (
    DegeneratePrediction,
    EmptyInput,
    ImplausibleRoadPlane,
    InvalidScale,
    NoGroundTruth,
    NoRoadPixels,
    ShapeMismatch,
)
from .geometry import CameraIntrinsics, ray_direction
from .plane_fit import LmedsConfig, Plane3, fit_plane_lmeds


@dataclass(frozen=True)
class CameraRig:
    """Camera mount height above the road surface, meters."""

    height_m: float

    def __post_init__(self):
        if not self.height_m > 0:
            raise ValueError("camera height must be positive")


@dataclass(frozen=True)
class RoadFilterConfig:
    """Flat-ground gate for road pixels: keep |X| < max_width_m, Z < max_length_m.

    X and Z come from intersecting each pixel ray with the ideal plane
    Y = -height, so the gate depends only on pixel position, intrinsics and
    rig height, never on the prediction's unknown scale.
    """

    max_width_m: float = 3.0
    max_length_m: float = 30.0
    road_class_id: int = 0

    def __post_init__(self):
        if not (self.max_width_m > 0 and self.max_length_m > 0):
            raise ValueError("road gate extents must be positive")


@dataclass(frozen=True)
class ScaleEstimate:
    """Road-model result: metric depth = alpha * prediction.

    h_uncal is the camera height above the fitted plane in prediction
    units, so alpha * h_uncal equals the metric rig height by construction.
    """

    alpha: float
    h_uncal: float
    plane: Plane3
    n_road_points: int


def _gated_road_pixels(
    pred: DepthRaster,
    mask: MaskRaster,
    intr: CameraIntrinsics,
    rig: CameraRig,
    cfg: RoadFilterConfig,
):
    """Pixels that are road-labeled, have valid depth, and pass the flat gate.

    Returns (keep, dirs, ground_z): boolean pixel mask, per-pixel ray
    directions, and the Z of each ray's flat-ground intersection.
    """
    if pred.values.shape != mask.values.shape or pred.values.shape != (
        intr.height,
        intr.width,
    ):
        raise ShapeMismatch(
            f"pred {pred.values.shape}, mask {mask.values.shape} and intrinsics "
            f"{(intr.height, intr.width)} must agree"
        )
    u, v = np.meshgrid(
        np.arange(intr.width, dtype=np.float64),
        np.arange(intr.height, dtype=np.float64),
    )
    dirs = ray_direction(intr, u, v)
    dy = dirs[..., 1]
    below_horizon = dy < 0
    # Sentinel -1 for rays at or above the horizon; they fail the Z > 0 gate.
    ground_z = np.where(below_horizon, rig.height_m / np.where(below_horizon, -dy, 1.0), -1.0)
    ground_x = dirs[..., 0] * ground_z
    keep = (
        (mask.values == cfg.road_class_id)
        & pred.valid
        & below_horizon
        & (np.abs(ground_x) < cfg.max_width_m)
        & (ground_z > 0)
        & (ground_z < cfg.max_length_m)
    )
    return keep, dirs, ground_z


def select_road_pixels(
    pred: DepthRaster,
    mask: MaskRaster,
    intr: CameraIntrinsics,
    rig: CameraRig,
    cfg: RoadFilterConfig = RoadFilterConfig(),
) -> np.ndarray:
    """Backproject gated road pixels with their raw predicted depth.

    Returns an (N, 3) point array in uncalibrated prediction units, ready
    for the plane fit.
    """
    keep, dirs, _ = _gated_road_pixels(pred, mask, intr, rig, cfg)
    if not keep.any():
        raise NoRoadPixels("no road-labeled pixels pass the flat-ground gate")
    return dirs[keep] * pred.values[keep].astype(np.float64)[:, None]


def estimate_scale_road_model(
    points: np.ndarray,
    rig: CameraRig,
    lmeds: LmedsConfig = LmedsConfig(),
    tilt_correction: bool = True,
) -> ScaleEstimate:
    """Recover alpha from the road plane fitted in prediction units.

    The camera height above the plane normal . p + c = 0, measured straight
    down (-Y), is c / normal.y; without tilt_correction it is approximated
    by c alone.  alpha = rig.height_m / h_uncal.
    """
    plane = fit_plane_lmeds(points, lmeds)
    ny = float(plane.normal[1])
    if ny <= 0.5:
        raise ImplausibleRoadPlane(
            f"fitted plane tilted more than 60 degrees (normal.y = {ny:.3f})"
        )
    h_uncal = plane.offset / ny if tilt_correction else plane.offset
    if not h_uncal > 0:
        raise ImplausibleRoadPlane(
            f"fitted plane places the camera below the road (h_uncal = {h_uncal:.3g})"
        )
    return ScaleEstimate(
        alpha=rig.height_m / h_uncal,
        h_uncal=h_uncal,
        plane=plane,
        n_road_points=len(np.asarray(points).reshape(-1, 3)),
    )


def scale_gt_median(pred: DepthRaster, gt: DepthRaster) -> float:
    """Per-frame factor median(gt) / median(pred) over gt-valid pixels."""
    if pred.values.shape != gt.values.shape:
        raise ShapeMismatch(f"pred {pred.values.shape} vs gt {gt.values.shape}")
    sel = gt.valid
    if not sel.any():
        raise NoGroundTruth("ground truth has no valid pixels")
    med_pred = float(np.median(pred.values[sel].astype(np.float64)))
    med_gt = float(np.median(gt.values[sel].astype(np.float64)))
    if med_pred == 0:
        raise DegeneratePrediction("median prediction over gt-valid pixels is zero")
    return med_gt / med_pred


def scale_single_factor(per_frame_alphas) -> float:
    """Median of per-frame factors; the one-global-factor baseline."""
    arr = np.asarray(list(per_frame_alphas), dtype=np.float64)
    if arr.size == 0:
        raise EmptyInput("no per-frame factors")
    return float(np.median(arr))


def scale_fixed_plane(
    pred: DepthRaster,
    mask: MaskRaster,
    intr: CameraIntrinsics,
    rig: CameraRig,
    cfg: RoadFilterConfig = RoadFilterConfig(),
) -> float:
    """Factor from pseudo-depth of an assumed perfectly flat road.

    Each gated road pixel gets the depth of its ray's intersection with the
    plane Y = -height; the factor is median(pseudo) / median(pred) over the
    same pixels.  Biased whenever the real road is pitched or rolled.
    """
    keep, _, ground_z = _gated_road_pixels(pred, mask, intr, rig, cfg)
    if not keep.any():
        raise NoRoadPixels("no road-labeled pixels pass the flat-ground gate")
    med_pseudo = float(np.median(ground_z[keep]))
    med_pred = float(np.median(pred.values[keep].astype(np.float64)))
    return med_pseudo / med_pred


def apply_scale(pred: DepthRaster, alpha: float) -> DepthRaster:
    """Multiply valid depths by alpha; invalid (0) pixels stay invalid."""
    if not (math.isfinite(alpha) and alpha > 0):
        raise InvalidScale(f"scale must be finite and positive, got {alpha}")
    with np.errstate(over="ignore"):
        scaled = (pred.values.astype(np.float64) * alpha).astype(np.float32)
    if not np.isfinite(scaled).all():
        raise InvalidScale(f"scale {alpha} overflows float32 depth")
    return DepthRaster(scaled)
