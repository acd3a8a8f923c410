"""Standard dense-depth error metrics and dataset aggregation.

Evaluation follows the usual KITTI Eigen-split protocol: ground truth is
restricted to a depth range and (optionally) the Garg crop, predictions
are clamped to the same range on the evaluated pixels, and per-frame
statistics are averaged unweighted over frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataio import DepthRaster
from .errors import EmptyInput, NoValidPixels, ShapeMismatch

# Fractional Garg crop bounds: rows [0.408..H, 0.991..H), cols [0.035..W, 0.964..W).
GARG_CROP = (0.40810811, 0.99189189, 0.03594771, 0.96405229)


@dataclass(frozen=True)
class EvalConfig:
    min_depth_m: float = 1e-3
    max_depth_m: float = 80.0
    crop: str = "garg"

    def __post_init__(self):
        if not 0 < self.min_depth_m < self.max_depth_m:
            raise ValueError("need 0 < min_depth_m < max_depth_m")
        if self.crop not in ("none", "garg"):
            raise ValueError(f"unknown crop {self.crop!r}")


@dataclass(frozen=True)
class FrameMetrics:
    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    d1: float
    d2: float
    d3: float
    n_valid: int


def crop_bounds(height: int, width: int, crop: str):
    """Integer (row0, row1, col0, col1) of the evaluated sub-rectangle."""
    if crop == "none":
        return 0, height, 0, width
    r0, r1, c0, c1 = GARG_CROP
    return int(r0 * height), int(r1 * height), int(c0 * width), int(c1 * width)


def compute_frame_metrics(
    pred: DepthRaster, gt: DepthRaster, cfg: EvalConfig = EvalConfig()
) -> FrameMetrics:
    """Seven-statistic error summary of pred against gt on one frame.

    Evaluated pixels are those inside the crop whose gt lies strictly
    inside (min_depth_m, max_depth_m); pred is clamped to the same bounds
    there.  delta thresholds are strict: max(p/g, g/p) < 1.25**k.
    """
    if pred.values.shape != gt.values.shape:
        raise ShapeMismatch(f"pred {pred.values.shape} vs gt {gt.values.shape}")
    r0, r1, c0, c1 = crop_bounds(*gt.values.shape, cfg.crop)
    g = gt.values[r0:r1, c0:c1].astype(np.float64)
    p = pred.values[r0:r1, c0:c1].astype(np.float64)
    sel = (g > cfg.min_depth_m) & (g < cfg.max_depth_m)
    if not sel.any():
        raise NoValidPixels("no ground-truth pixels inside crop and depth bounds")
    g = g[sel]
    p = np.clip(p[sel], cfg.min_depth_m, cfg.max_depth_m)

    thresh = np.maximum(g / p, p / g)
    err = p - g
    return FrameMetrics(
        abs_rel=float(np.mean(np.abs(err) / g)),
        sq_rel=float(np.mean(err**2 / g)),
        rmse=float(np.sqrt(np.mean(err**2))),
        rmse_log=float(np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2))),
        d1=float(np.mean(thresh < 1.25)),
        d2=float(np.mean(thresh < 1.25**2)),
        d3=float(np.mean(thresh < 1.25**3)),
        n_valid=int(sel.sum()),
    )


def aggregate_metrics(frames) -> FrameMetrics:
    """Unweighted per-frame mean of every statistic; n_valid sums.

    Uses compensated summation so the result does not depend on frame
    order beyond 1e-12.
    """
    frames = list(frames)
    if not frames:
        raise EmptyInput("no frames to aggregate")
    n = len(frames)
    return FrameMetrics(
        abs_rel=math.fsum(f.abs_rel for f in frames) / n,
        sq_rel=math.fsum(f.sq_rel for f in frames) / n,
        rmse=math.fsum(f.rmse for f in frames) / n,
        rmse_log=math.fsum(f.rmse_log for f in frames) / n,
        d1=math.fsum(f.d1 for f in frames) / n,
        d2=math.fsum(f.d2 for f in frames) / n,
        d3=math.fsum(f.d3 for f in frames) / n,
        n_valid=sum(f.n_valid for f in frames),
    )
