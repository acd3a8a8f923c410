"""Raster containers and dataset layout I/O.

Depth rasters travel as PFM (lossless float32) so scaling results never
depend on quantization; ground truth follows the 16-bit PNG convention
(meters = stored / 256, 0 = no reading); masks are 8-bit label PNGs.

Expected dataset layout:

    root/
      calib.json          fx, fy, cx, cy, width, height, camera_height_m
      pred/<frame>.pfm    raw network predictions (arbitrary scale)
      mask/<frame>.png    semantic labels, road class configurable
      gt/<frame>.png      optional metric ground truth
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import FormatError, IoError, MissingInput, ShapeMismatch
from .geometry import CameraIntrinsics

# Refuse to allocate rasters past this many pixels when parsing headers.
_MAX_PIXELS = 100_000_000


@dataclass(frozen=True)
class DepthRaster:
    """Dense per-pixel depth, float32, 0 marks invalid pixels.

    Units are meters for ground truth and calibrated output, arbitrary
    prediction units for raw network output.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float32)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError("depth raster must be a non-empty 2D array")
        if not np.isfinite(v).all() or (v < 0).any():
            raise ValueError("depth values must be finite and >= 0 (0 = invalid)")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def valid(self) -> np.ndarray:
        return self.values > 0


@dataclass(frozen=True)
class MaskRaster:
    """Per-pixel 8-bit class labels."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.uint8)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError("mask raster must be a non-empty 2D array")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ImageRaster:
    """Intensity image in [0, 1], single channel (H, W) or color (H, W, 3)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float32)
        if v.ndim not in (2, 3) or (v.ndim == 3 and v.shape[2] not in (1, 3)):
            raise ValueError("image must be (H, W) or (H, W, 1|3)")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError("image must be non-empty")
        if not np.isfinite(v).all() or v.min() < 0 or v.max() > 1:
            raise ValueError("intensities must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class FrameBundle:
    frame_id: str
    pred: DepthRaster
    mask: MaskRaster
    gt: Optional[DepthRaster]
    intr: CameraIntrinsics
    rig: "CameraRig"  # noqa: F821 - defined in calibration


@dataclass(frozen=True)
class DatasetCalib:
    intr: CameraIntrinsics
    rig: "CameraRig"  # noqa: F821
    road_class_id: int = 0


def read_float_raster(path) -> DepthRaster:
    """Read a grayscale PFM ("Pf") file. Round-trips written rasters bit-exactly."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    stream = io.BytesIO(data)
    magic = stream.readline().strip()
    if magic == b"PF":
        raise FormatError(f"{path}: color PFM not supported, expected grayscale 'Pf'")
    if magic != b"Pf":
        raise FormatError(f"{path}: bad PFM magic {magic!r}")
    dims = stream.readline().split()
    try:
        w, h = (int(tok) for tok in dims)
        scale = float(stream.readline())
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PFM header") from exc
    if w < 1 or h < 1 or w * h > _MAX_PIXELS:
        raise FormatError(f"{path}: bad PFM dimensions {w}x{h}")
    if scale == 0:
        raise FormatError(f"{path}: PFM scale must be non-zero")
    raw = stream.read(4 * w * h)
    if len(raw) < 4 * w * h:
        raise FormatError(f"{path}: truncated PFM payload")
    # Negative scale marks little-endian data; rows are stored bottom-up.
    dtype = "<f4" if scale < 0 else ">f4"
    vals = np.flipud(np.frombuffer(raw, dtype=dtype).reshape(h, w))
    vals = np.ascontiguousarray(vals, dtype=np.float32)
    if not np.isfinite(vals).all() or (vals < 0).any():
        raise FormatError(f"{path}: depth values must be finite and >= 0")
    return DepthRaster(vals)


def write_float_raster(raster: DepthRaster, path) -> None:
    header = f"Pf\n{raster.width} {raster.height}\n-1.0\n".encode("ascii")
    payload = np.flipud(raster.values).astype("<f4").tobytes()
    try:
        Path(path).write_bytes(header + payload)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_depth_png16(path) -> DepthRaster:
    """Read 16-bit single-channel PNG depth: meters = stored / 256, 0 = invalid."""
    try:
        with Image.open(path) as img:
            mode = img.mode
            arr = np.array(img)
    except UnidentifiedImageError as exc:
        raise FormatError(f"{path}: not a PNG image") from exc
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if mode not in ("I;16", "I;16B", "I") or arr.ndim != 2:
        raise FormatError(f"{path}: expected 16-bit single-channel PNG, got mode {mode}")
    if arr.min() < 0 or arr.max() > 65535:
        raise FormatError(f"{path}: stored values exceed 16-bit range")
    return DepthRaster((arr.astype(np.float64) / 256.0).astype(np.float32))


def write_depth_png16(raster: DepthRaster, path) -> None:
    stored = np.round(raster.values.astype(np.float64) * 256.0)
    if stored.max() > 65535:
        raise FormatError(
            f"depth {raster.values.max():.2f} m exceeds the 16-bit PNG range (255.99 m)"
        )
    try:
        Image.fromarray(stored.astype(np.uint16)).save(path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_mask_png(path) -> MaskRaster:
    try:
        with Image.open(path) as img:
            mode = img.mode
            arr = np.array(img)
    except UnidentifiedImageError as exc:
        raise FormatError(f"{path}: not a PNG image") from exc
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if mode != "L" or arr.ndim != 2:
        raise FormatError(f"{path}: expected 8-bit single-channel PNG, got mode {mode}")
    return MaskRaster(arr)


def write_mask_png(mask: MaskRaster, path) -> None:
    try:
        Image.fromarray(mask.values, mode="L").save(path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_calib(path) -> DatasetCalib:
    from .calibration import CameraRig  # here to avoid an import cycle

    path = Path(path)
    if not path.is_file():
        raise MissingInput(f"calibration file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    try:
        intr = CameraIntrinsics(
            fx=float(doc["fx"]),
            fy=float(doc["fy"]),
            cx=float(doc["cx"]),
            cy=float(doc["cy"]),
            width=int(doc["width"]),
            height=int(doc["height"]),
        )
        rig = CameraRig(height_m=float(doc["camera_height_m"]))
    except KeyError as exc:
        raise FormatError(f"{path}: missing calibration key {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{path}: invalid calibration: {exc}") from exc
    return DatasetCalib(intr=intr, rig=rig, road_class_id=int(doc.get("road_class_id", 0)))


def write_calib(calib: DatasetCalib, path) -> None:
    doc = {
        "fx": calib.intr.fx,
        "fy": calib.intr.fy,
        "cx": calib.intr.cx,
        "cy": calib.intr.cy,
        "width": calib.intr.width,
        "height": calib.intr.height,
        "camera_height_m": calib.rig.height_m,
        "road_class_id": calib.road_class_id,
    }
    try:
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def list_frame_ids(root) -> list:
    return sorted(p.stem for p in (Path(root) / "pred").glob("*.pfm"))


def load_frame(root, frame_id: str, calib: Optional[DatasetCalib] = None) -> FrameBundle:
    """Assemble one frame from the dataset layout; gt is optional."""
    root = Path(root)
    if calib is None:
        calib = read_calib(root / "calib.json")
    pred_path = root / "pred" / f"{frame_id}.pfm"
    mask_path = root / "mask" / f"{frame_id}.png"
    gt_path = root / "gt" / f"{frame_id}.png"
    if not pred_path.is_file():
        raise MissingInput(f"missing prediction: {pred_path}")
    if not mask_path.is_file():
        raise MissingInput(f"missing mask: {mask_path}")
    pred = read_float_raster(pred_path)
    mask = read_mask_png(mask_path)
    gt = read_depth_png16(gt_path) if gt_path.is_file() else None

    expected = (calib.intr.height, calib.intr.width)
    for name, raster in (("pred", pred), ("mask", mask), ("gt", gt)):
        if raster is not None and raster.values.shape != expected:
            raise ShapeMismatch(
                f"{frame_id}/{name}: {raster.values.shape} does not match "
                f"calibration {expected}"
            )
    return FrameBundle(
        frame_id=frame_id, pred=pred, mask=mask, gt=gt, intr=calib.intr, rig=calib.rig
    )


_CSV_COLUMNS = [
    "frame_id",
    "alpha",
    "h_uncal",
    "normal_x",
    "normal_y",
    "normal_z",
    "plane_offset",
    "n_road_points",
    "abs_rel",
    "sq_rel",
    "rmse",
    "rmse_log",
    "d1",
    "d2",
    "d3",
    "n_valid",
    "error",
]


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _frame_row(rec: dict) -> list:
    plane = rec.get("plane") or {}
    normal = plane.get("normal") or (None, None, None)
    metrics = rec.get("metrics") or {}
    return [
        _csv_cell(rec.get("frame_id")),
        _csv_cell(rec.get("alpha")),
        _csv_cell(rec.get("h_uncal")),
        _csv_cell(normal[0]),
        _csv_cell(normal[1]),
        _csv_cell(normal[2]),
        _csv_cell(plane.get("offset")),
        _csv_cell(rec.get("n_road_points")),
        _csv_cell(metrics.get("abs_rel")),
        _csv_cell(metrics.get("sq_rel")),
        _csv_cell(metrics.get("rmse")),
        _csv_cell(metrics.get("rmse_log")),
        _csv_cell(metrics.get("d1")),
        _csv_cell(metrics.get("d2")),
        _csv_cell(metrics.get("d3")),
        _csv_cell(metrics.get("n_valid")),
        _csv_cell(rec.get("error")),
    ]


def write_report(frames: list, aggregate, path, config: Optional[dict] = None) -> None:
    """Write a JSON report plus a one-row-per-frame companion CSV.

    frames: per-frame record dicts (frame_id, alpha, h_uncal, plane,
    n_road_points, metrics, error).  aggregate: FrameMetrics or None; the
    aggregate section is omitted when there is nothing to aggregate.
    Floats are serialized with full round-trip precision.
    """
    path = Path(path)
    doc = {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "config": config or {},
        "n_frames": len(frames),
        "frames": frames,
    }
    if aggregate is not None:
        doc["aggregate"] = {
            "abs_rel": aggregate.abs_rel,
            "sq_rel": aggregate.sq_rel,
            "rmse": aggregate.rmse,
            "rmse_log": aggregate.rmse_log,
            "d1": aggregate.d1,
            "d2": aggregate.d2,
            "d3": aggregate.d3,
            "n_valid": aggregate.n_valid,
        }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            json.dump(doc, f, indent=2)
            f.write("\n")
        with open(path.with_suffix(".csv"), "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(_CSV_COLUMNS)
            for rec in frames:
                writer.writerow(_frame_row(rec))
    except OSError as exc:
        raise IoError(f"cannot write report {path}: {exc}") from exc
