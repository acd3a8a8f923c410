"""Metric calibration of scale-ambiguous monocular depth predictions.

Self-supervised depth networks recover scene structure only up to an
unknown per-frame factor.  This package converts such predictions to
metric depth using nothing but the camera intrinsics and the camera's
mount height: road-labeled pixels are backprojected with the raw
predicted depth, a plane is fitted robustly, and the ratio between the
known metric camera height and the height above that plane gives the
scale.  Ground-truth-based baselines, evaluation metrics, dataset I/O,
and a synthetic verification suite round out the toolkit.
"""

from .calibration import (
    CameraRig,
    RoadFilterConfig,
    ScaleEstimate,
    apply_scale,
    estimate_scale_road_model,
    scale_fixed_plane,
    scale_gt_median,
    scale_single_factor,
    select_road_pixels,
)
from .dataio import (
    DatasetCalib,
    DepthRaster,
    FrameBundle,
    ImageRaster,
    MaskRaster,
    list_frame_ids,
    load_frame,
    read_calib,
    read_depth_png16,
    read_float_raster,
    read_mask_png,
    write_calib,
    write_depth_png16,
    write_float_raster,
    write_mask_png,
    write_report,
)
from .errors import RoadscaleError
from .geometry import (
    CameraIntrinsics,
    RigidTransform,
    backproject,
    intersect_ray_ground,
    inverse_warp,
    project,
    ray_direction,
    rotation_about_x,
    rotation_about_y,
    rotation_about_z,
)
from .metrics import EvalConfig, FrameMetrics, aggregate_metrics, compute_frame_metrics
from .plane_fit import LmedsConfig, Plane3, fit_plane_lmeds, plane_residual, refine_plane_inliers
from .synth import (
    Box,
    SceneSpec,
    SynthFrame,
    TrialResult,
    export_dataset,
    generate_scene,
    run_scale_recovery_trial,
    warp_invariance_check,
)

__version__ = "0.1.0"

__all__ = [
    "Box",
    "CameraIntrinsics",
    "CameraRig",
    "DatasetCalib",
    "DepthRaster",
    "EvalConfig",
    "FrameBundle",
    "FrameMetrics",
    "ImageRaster",
    "LmedsConfig",
    "MaskRaster",
    "Plane3",
    "RigidTransform",
    "RoadFilterConfig",
    "RoadscaleError",
    "ScaleEstimate",
    "SceneSpec",
    "SynthFrame",
    "TrialResult",
    "aggregate_metrics",
    "apply_scale",
    "backproject",
    "compute_frame_metrics",
    "estimate_scale_road_model",
    "export_dataset",
    "fit_plane_lmeds",
    "generate_scene",
    "intersect_ray_ground",
    "inverse_warp",
    "list_frame_ids",
    "load_frame",
    "plane_residual",
    "project",
    "ray_direction",
    "read_calib",
    "read_depth_png16",
    "read_float_raster",
    "read_mask_png",
    "refine_plane_inliers",
    "rotation_about_x",
    "rotation_about_y",
    "rotation_about_z",
    "run_scale_recovery_trial",
    "scale_fixed_plane",
    "scale_gt_median",
    "scale_single_factor",
    "select_road_pixels",
    "warp_invariance_check",
    "write_calib",
    "write_depth_png16",
    "write_float_raster",
    "write_mask_png",
    "write_report",
]
