"""Synthetic scenes with known geometry and scale.

Every calibration claim in this package is checked against scenes built
here: a tilted ground plane plus axis-aligned boxes, ray-cast per pixel to
metric Z-depth, then exported as a scale-ambiguous "prediction" (truth
divided by a known factor), a road mask, an optional corruption layer
(noise, depth outliers, mislabeled pixels) and a procedural texture image
for warp checks.

The prediction is quantized to float32 before the truth raster is derived
from it, so that with corruptions disabled apply_scale(pred, true_scale)
reproduces truth bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataio
from .calibration import (
    CameraRig,
    RoadFilterConfig,
    estimate_scale_road_model,
    scale_fixed_plane,
    select_road_pixels,
)
from .errors import NoValidPixels
from .geometry import (
    CameraIntrinsics,
    RigidTransform,
    _bilinear_sample,
    inverse_warp,
    ray_direction,
    rotation_about_x,
    rotation_about_z,
)
from .plane_fit import LmedsConfig, Plane3

ROAD_CLASS_ID = 0
NON_ROAD_CLASS_ID = 1

# Geometry beyond this range counts as sky: invalid in truth, far filler in pred.
FAR_DEPTH_M = 200.0


@dataclass(frozen=True)
class Box:
    """Axis-aligned obstacle, camera frame, meters (full extents)."""

    center: tuple
    size: tuple

    def __post_init__(self):
        center = tuple(float(c) for c in self.center)
        size = tuple(float(s) for s in self.size)
        if len(center) != 3 or len(size) != 3:
            raise ValueError("box center and size must be 3-vectors")
        if any(s <= 0 for s in size):
            raise ValueError("box extents must be positive")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "size", size)


@dataclass(frozen=True)
class SceneSpec:
    intr: CameraIntrinsics
    camera_height_m: float = 1.5
    road_pitch_deg: float = 0.0
    road_roll_deg: float = 0.0
    boxes: tuple = ()
    true_scale: float = 1.0
    noise_rel: float = 0.0
    outlier_frac: float = 0.0
    mislabel_frac: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.camera_height_m > 0:
            raise ValueError("camera height must be positive")
        if abs(self.road_pitch_deg) > 15 or abs(self.road_roll_deg) > 15:
            raise ValueError("road tilt limited to +-15 degrees")
        if not self.true_scale > 0:
            raise ValueError("true_scale must be positive")
        for name in ("noise_rel", "outlier_frac", "mislabel_frac"):
            v = getattr(self, name)
            if name == "noise_rel":
                if v < 0:
                    raise ValueError("noise_rel must be >= 0")
            elif not 0 <= v < 1:
                raise ValueError(f"{name} must lie in [0, 1)")
        object.__setattr__(self, "boxes", tuple(self.boxes))

    def to_json(self) -> str:
        doc = {
            "intr": {
                "fx": self.intr.fx,
                "fy": self.intr.fy,
                "cx": self.intr.cx,
                "cy": self.intr.cy,
                "width": self.intr.width,
                "height": self.intr.height,
            },
            "camera_height_m": self.camera_height_m,
            "road_pitch_deg": self.road_pitch_deg,
            "road_roll_deg": self.road_roll_deg,
            "boxes": [{"center": list(b.center), "size": list(b.size)} for b in self.boxes],
            "true_scale": self.true_scale,
            "noise_rel": self.noise_rel,
            "outlier_frac": self.outlier_frac,
            "mislabel_frac": self.mislabel_frac,
            "seed": self.seed,
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SceneSpec":
        doc = json.loads(text)
        return cls(
            intr=CameraIntrinsics(**doc["intr"]),
            camera_height_m=doc["camera_height_m"],
            road_pitch_deg=doc.get("road_pitch_deg", 0.0),
            road_roll_deg=doc.get("road_roll_deg", 0.0),
            boxes=tuple(Box(tuple(b["center"]), tuple(b["size"])) for b in doc.get("boxes", ())),
            true_scale=doc.get("true_scale", 1.0),
            noise_rel=doc.get("noise_rel", 0.0),
            outlier_frac=doc.get("outlier_frac", 0.0),
            mislabel_frac=doc.get("mislabel_frac", 0.0),
            seed=doc.get("seed", 0),
        )


@dataclass(frozen=True)
class SynthFrame:
    truth: dataio.DepthRaster
    pred: dataio.DepthRaster
    mask: dataio.MaskRaster
    image: dataio.ImageRaster
    plane_truth: Plane3
    intr: CameraIntrinsics


def ground_plane(spec: SceneSpec) -> Plane3:
    """Metric road plane: (0,1,0) tilted by pitch about X then roll about Z.

    The offset is chosen so the camera sits exactly camera_height_m above
    the plane measured straight down (-Y): c / normal.y = height.
    """
    rot = rotation_about_z(np.deg2rad(spec.road_roll_deg)) @ rotation_about_x(
        np.deg2rad(spec.road_pitch_deg)
    )
    normal = rot @ np.array([0.0, 1.0, 0.0])
    normal = normal / np.linalg.norm(normal)
    return Plane3(normal, spec.camera_height_m * float(normal[1]))


def _ray_box_entry(dirs: np.ndarray, box: Box) -> np.ndarray:
    """Slab-method ray/AABB test; inf where the ray misses. Origin = camera."""
    lo = np.asarray(box.center) - np.asarray(box.size) / 2.0
    hi = np.asarray(box.center) + np.asarray(box.size) / 2.0
    tnear = np.full(dirs.shape[:-1], -np.inf)
    tfar = np.full(dirs.shape[:-1], np.inf)
    for axis in range(3):
        d = dirs[..., axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = lo[axis] / d
            t2 = hi[axis] / d
        tlo = np.minimum(t1, t2)
        thi = np.maximum(t1, t2)
        flat = d == 0
        if flat.any():
            inside = lo[axis] <= 0 <= hi[axis]
            tlo = np.where(flat, -np.inf if inside else np.inf, tlo)
            thi = np.where(flat, np.inf if inside else -np.inf, thi)
        tnear = np.maximum(tnear, tlo)
        tfar = np.minimum(tfar, thi)
    hit = (tnear <= tfar) & (tnear > 1e-9)
    return np.where(hit, tnear, np.inf)


def _value_noise_texture(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Multi-octave bilinear value noise in [0, 1]."""
    img = np.zeros((height, width))
    amp, total = 1.0, 0.0
    for cells in (4, 8, 16, 32):
        lattice = rng.uniform(0.0, 1.0, size=(cells + 1, cells + 1))
        u = np.linspace(0.0, cells, width)
        v = np.linspace(0.0, cells, height)
        uu, vv = np.meshgrid(u, v)
        img += amp * _bilinear_sample(lattice, uu, vv)
        total += amp
        amp /= 2.0
    return img / total


def generate_scene(spec: SceneSpec) -> SynthFrame:
    """Ray-cast the scene into truth/pred/mask/image rasters."""
    intr = spec.intr
    rng = np.random.default_rng(spec.seed)
    u, v = np.meshgrid(
        np.arange(intr.width, dtype=np.float64),
        np.arange(intr.height, dtype=np.float64),
    )
    dirs = ray_direction(intr, u, v)

    plane = ground_plane(spec)
    denom = dirs @ plane.normal
    with np.errstate(divide="ignore"):
        t_ground = np.where(denom < 0, -plane.offset / denom, np.inf)

    t_boxes = np.full(t_ground.shape, np.inf)
    for box in spec.boxes:
        t_boxes = np.minimum(t_boxes, _ray_box_entry(dirs, box))

    t_hit = np.minimum(t_ground, t_boxes)
    # dirs have unit z, so the ray parameter is the Z-depth directly.
    valid = t_hit <= FAR_DEPTH_M
    is_road = valid & (t_ground <= t_boxes)

    truth_m = np.where(valid, t_hit, 0.0)
    # Quantize pred first, then define truth from it, so that multiplying
    # pred by true_scale in float64 and rounding to float32 lands exactly
    # on the truth raster (the clean-scene bitwise invariant).
    pred32 = (np.where(valid, truth_m, FAR_DEPTH_M) / spec.true_scale).astype(np.float32)
    truth32 = np.where(
        valid, (pred32.astype(np.float64) * spec.true_scale).astype(np.float32), 0.0
    ).astype(np.float32)

    mask = np.where(is_road, ROAD_CLASS_ID, NON_ROAD_CLASS_ID).astype(np.uint8)

    # Corruptions, in a fixed draw order for reproducibility.
    if spec.mislabel_frac > 0:
        flat = np.flatnonzero(mask != ROAD_CLASS_ID)
        k = int(round(spec.mislabel_frac * flat.size))
        if k:
            chosen = rng.choice(flat, size=k, replace=False)
            mask.reshape(-1)[chosen] = ROAD_CLASS_ID
    pred64 = pred32.astype(np.float64)
    if spec.outlier_frac > 0:
        flat = np.flatnonzero(mask == ROAD_CLASS_ID)
        k = int(round(spec.outlier_frac * flat.size))
        if k:
            chosen = rng.choice(flat, size=k, replace=False)
            med = float(np.median(pred64[pred64 > 0]))
            pred64.reshape(-1)[chosen] = rng.uniform(0.1 * med, 4.0 * med, size=k)
    if spec.noise_rel > 0:
        pred64 = pred64 * np.exp(rng.normal(0.0, spec.noise_rel, size=pred64.shape))

    image = _value_noise_texture(rng, intr.height, intr.width)

    return SynthFrame(
        truth=dataio.DepthRaster(truth32),
        pred=dataio.DepthRaster(pred64.astype(np.float32)),
        mask=dataio.MaskRaster(mask),
        image=dataio.ImageRaster(image.astype(np.float32)),
        plane_truth=plane,
        intr=intr,
    )


@dataclass(frozen=True)
class TrialResult:
    alpha_est: float
    road_model_error: float
    fixed_plane_error: float


def run_scale_recovery_trial(
    spec: SceneSpec,
    road_cfg: RoadFilterConfig = RoadFilterConfig(),
    lmeds: LmedsConfig = LmedsConfig(),
) -> TrialResult:
    """Relative scale-recovery error of the road model vs the fixed plane."""
    frame = generate_scene(spec)
    rig = CameraRig(spec.camera_height_m)
    points = select_road_pixels(frame.pred, frame.mask, spec.intr, rig, road_cfg)
    est = estimate_scale_road_model(points, rig, lmeds)
    fixed = scale_fixed_plane(frame.pred, frame.mask, spec.intr, rig, road_cfg)
    s = spec.true_scale
    return TrialResult(
        alpha_est=est.alpha,
        road_model_error=abs(est.alpha - s) / s,
        fixed_plane_error=abs(fixed - s) / s,
    )


def warp_invariance_check(frame: SynthFrame, xform: RigidTransform, alphas) -> np.ndarray:
    """Max warp intensity change when depth and translation scale together.

    For each alpha, warps frame.image once with (depth, T) and once with
    (alpha * depth, alpha * T) and returns the largest absolute difference
    over pixels valid in both warps.  Scaling is done in float64.
    """
    image = frame.image.values.astype(np.float64)
    depth = frame.truth.values.astype(np.float64)
    ref, ref_valid = inverse_warp(image, depth, xform, frame.intr)
    diffs = []
    for alpha in alphas:
        scaled = inverse_warp(
            image, depth * float(alpha), xform.with_translation_scaled(float(alpha)), frame.intr
        )
        warped, valid = scaled
        joint = ref_valid & valid
        if not joint.any():
            raise NoValidPixels(f"no jointly valid pixels for alpha = {alpha}")
        diffs.append(float(np.max(np.abs(warped[joint] - ref[joint]))))
    return np.asarray(diffs)


def export_dataset(root, specs) -> list:
    """Write scenes to the on-disk dataset layout; returns the frame ids.

    All specs must share intrinsics and camera height (one calib.json per
    root).
    """
    root = Path(root)
    specs = list(specs)
    intr = specs[0].intr
    height = specs[0].camera_height_m
    for s in specs:
        if s.intr != intr or s.camera_height_m != height:
            raise ValueError("all scenes in one dataset must share intrinsics and rig")
    for sub in ("pred", "mask", "gt"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    dataio.write_calib(
        dataio.DatasetCalib(intr=intr, rig=CameraRig(height), road_class_id=ROAD_CLASS_ID),
        root / "calib.json",
    )
    ids = []
    for i, spec in enumerate(specs):
        frame_id = f"{i:06d}"
        frame = generate_scene(spec)
        dataio.write_float_raster(frame.pred, root / "pred" / f"{frame_id}.pfm")
        dataio.write_mask_png(frame.mask, root / "mask" / f"{frame_id}.png")
        dataio.write_depth_png16(frame.truth, root / "gt" / f"{frame_id}.png")
        ids.append(frame_id)
    return ids
