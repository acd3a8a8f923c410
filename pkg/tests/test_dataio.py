import json
import struct

import numpy as np
import pytest

from roadscale.calibration import CameraRig
from roadscale.dataio import (
    DatasetCalib,
    DepthRaster,
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
from roadscale.errors import FormatError, MissingInput, ShapeMismatch
from roadscale.geometry import CameraIntrinsics


def test_float_raster_header_and_payload(tmp_path):
    """Little-endian single channel, bottom row first."""
    path = tmp_path / "d.pfm"
    write_float_raster(DepthRaster(np.array([[3.0, 4.0], [1.0, 2.0]], dtype=np.float32)), path)
    raw = path.read_bytes()
    assert raw.startswith(b"Pf\n2 2\n-1.0\n")
    payload = struct.unpack("<4f", raw[len(b"Pf\n2 2\n-1.0\n") :])
    assert payload == (1.0, 2.0, 3.0, 4.0)


def test_float_raster_roundtrip(tmp_path):
    rng = np.random.default_rng(77)
    values = rng.uniform(0, 100, (17, 31)).astype(np.float32)
    path = tmp_path / "r.pfm"
    write_float_raster(DepthRaster(values), path)
    back = read_float_raster(path)
    assert back.values.dtype == np.float32
    np.testing.assert_array_equal(back.values, values)


def test_float_raster_subnormal_roundtrip(tmp_path):
    values = np.array([[1e-40, 0.0]], dtype=np.float32)
    path = tmp_path / "s.pfm"
    write_float_raster(DepthRaster(values), path)
    np.testing.assert_array_equal(read_float_raster(path).values, values)


def test_float_raster_big_endian_read(tmp_path):
    path = tmp_path / "be.pfm"
    payload = struct.pack(">4f", 1.0, 2.0, 3.0, 4.0)
    path.write_bytes(b"Pf\n2 2\n1.0\n" + payload)
    np.testing.assert_array_equal(
        read_float_raster(path).values,
        np.array([[3.0, 4.0], [1.0, 2.0]], dtype=np.float32),
    )


def test_float_raster_rejects_color(tmp_path):
    path = tmp_path / "c.pfm"
    path.write_bytes(b"PF\n1 1\n-1.0\n" + b"\x00" * 12)
    with pytest.raises(FormatError):
        read_float_raster(path)


def test_float_raster_rejects_truncation(tmp_path):
    path = tmp_path / "t.pfm"
    path.write_bytes(b"Pf\n2 2\n-1.0\n" + b"\x00" * 8)
    with pytest.raises(FormatError):
        read_float_raster(path)


def test_float_raster_rejects_bad_header(tmp_path):
    path = tmp_path / "b.pfm"
    path.write_bytes(b"P6\n2 2\n255\n" + b"\x00" * 12)
    with pytest.raises(FormatError):
        read_float_raster(path)


def test_float_raster_rejects_absurd_dims(tmp_path):
    path = tmp_path / "huge.pfm"
    path.write_bytes(b"Pf\n100000 100000\n-1.0\n")
    with pytest.raises(FormatError):
        read_float_raster(path)


def test_png16_roundtrip_quantizes_to_256ths(tmp_path):
    path = tmp_path / "d.png"
    values = np.array([[100.0, 0.00390625], [0.0, 7.25]], dtype=np.float32)
    write_depth_png16(DepthRaster(values), path)
    np.testing.assert_array_equal(read_depth_png16(path).values, values)


def test_png16_rejects_out_of_range(tmp_path):
    with pytest.raises(FormatError):
        write_depth_png16(DepthRaster(np.array([[256.0]], dtype=np.float32)), tmp_path / "x.png")


def test_png16_rejects_wrong_mode(tmp_path):
    from PIL import Image

    path = tmp_path / "rgb.png"
    Image.new("RGB", (4, 4)).save(path)
    with pytest.raises(FormatError):
        read_depth_png16(path)


def test_mask_png_roundtrip(tmp_path):
    mask = np.array([[0, 1], [255, 3]], dtype=np.uint8)
    path = tmp_path / "m.png"
    write_mask_png(MaskRaster(mask), path)
    np.testing.assert_array_equal(read_mask_png(path).values, mask)


def test_depth_raster_validation():
    with pytest.raises(ValueError):
        DepthRaster(np.array([[1.0, -2.0]], dtype=np.float32))
    with pytest.raises(ValueError):
        DepthRaster(np.array([[np.nan]], dtype=np.float32))


def test_depth_raster_valid_property():
    d = DepthRaster(np.array([[0.0, 3.0]], dtype=np.float32))
    np.testing.assert_array_equal(d.valid, [[False, True]])


def test_image_raster_range_check():
    with pytest.raises(ValueError):
        ImageRaster(np.full((2, 2), 1.5, dtype=np.float32))


def _calib():
    return DatasetCalib(
        intr=CameraIntrinsics(fx=50.0, fy=50.0, cx=20.0, cy=10.0, width=40, height=20),
        rig=CameraRig(height_m=1.5),
    )


def test_calib_roundtrip(tmp_path):
    calib = DatasetCalib(
        intr=CameraIntrinsics(
            fx=721.5, fy=721.5, cx=609.6, cy=172.9, width=1242, height=375
        ),
        rig=CameraRig(height_m=1.65),
        road_class_id=7,
    )
    path = tmp_path / "calib.json"
    write_calib(calib, path)
    back = read_calib(path)
    assert back.intr == calib.intr
    assert back.rig.height_m == calib.rig.height_m
    assert back.road_class_id == 7


def test_calib_missing_file(tmp_path):
    with pytest.raises(MissingInput):
        read_calib(tmp_path / "nope.json")


def test_calib_rejects_garbage(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"fx": 1}')
    with pytest.raises(FormatError):
        read_calib(path)


def _write_dataset(root, n=2, with_gt=True):
    calib = _calib()
    (root / "pred").mkdir(parents=True)
    (root / "mask").mkdir()
    if with_gt:
        (root / "gt").mkdir()
    write_calib(calib, root / "calib.json")
    rng = np.random.default_rng(3)
    for i in range(n):
        frame_id = f"{i:06d}"
        write_float_raster(
            DepthRaster(rng.uniform(0.1, 2, (20, 40)).astype(np.float32)),
            root / "pred" / f"{frame_id}.pfm",
        )
        write_mask_png(
            MaskRaster((rng.uniform(size=(20, 40)) < 0.5).astype(np.uint8)),
            root / "mask" / f"{frame_id}.png",
        )
        if with_gt:
            write_depth_png16(
                DepthRaster(rng.uniform(1, 60, (20, 40)).astype(np.float32)),
                root / "gt" / f"{frame_id}.png",
            )
    return calib


def test_list_frame_ids(tmp_path):
    _write_dataset(tmp_path, n=3)
    assert list_frame_ids(tmp_path) == ["000000", "000001", "000002"]


def test_load_frame_complete(tmp_path):
    _write_dataset(tmp_path)
    frame = load_frame(tmp_path, "000001")  # calib picked up from calib.json
    assert frame.pred.values.shape == (20, 40)
    assert frame.mask.values.dtype == np.uint8
    assert frame.gt is not None
    assert frame.rig.height_m == 1.5


def test_load_frame_gt_optional(tmp_path):
    calib = _write_dataset(tmp_path, with_gt=False)
    frame = load_frame(tmp_path, "000000", calib)
    assert frame.gt is None


def test_load_frame_missing_pred(tmp_path):
    calib = _write_dataset(tmp_path)
    with pytest.raises(MissingInput):
        load_frame(tmp_path, "999999", calib)


def test_load_frame_shape_mismatch(tmp_path):
    _write_dataset(tmp_path)
    other = DatasetCalib(
        intr=CameraIntrinsics(fx=50.0, fy=50.0, cx=20.0, cy=10.0, width=41, height=20),
        rig=CameraRig(height_m=1.5),
    )
    with pytest.raises(ShapeMismatch):
        load_frame(tmp_path, "000000", other)


def test_write_report_roundtrip(tmp_path):
    out = tmp_path / "report.json"
    frames = [
        {
            "frame_id": "000000",
            "alpha": 29.993817740224417,
            "h_uncal": 0.05,
            "plane": {"normal": [0.0, 1.0, 0.0], "offset": 0.05},
            "n_road_points": 1234,
        },
        {"frame_id": "000001", "error": "NoRoadPixels", "message": "empty corridor"},
    ]
    write_report(frames, None, out, config={"strategy": "road-model"})
    data = json.loads(out.read_text())
    assert data["n_frames"] == 2
    assert data["frames"][0]["alpha"] == 29.993817740224417
    assert "aggregate" not in data
    assert "timestamp" in data
    lines = out.with_suffix(".csv").read_text().strip().split("\n")
    assert len(lines) == 3  # header + 2 frames
    assert lines[0].startswith("frame_id,alpha,h_uncal")
    # full round-trip precision: parsing the cell reproduces the exact float
    alpha_cell = lines[1].split(",")[1]
    assert float(alpha_cell) == 29.993817740224417
    assert "NoRoadPixels" in lines[2]


def test_write_report_aggregate_section(tmp_path):
    from roadscale.metrics import EvalConfig, compute_frame_metrics

    m = compute_frame_metrics(
        DepthRaster(np.full((4, 4), 11.0, dtype=np.float32)),
        DepthRaster(np.full((4, 4), 10.0, dtype=np.float32)),
        EvalConfig(min_depth_m=1e-3, max_depth_m=80.0, crop="none"),
    )
    out = tmp_path / "agg.json"
    write_report([], m, out, config={})
    data = json.loads(out.read_text())
    assert abs(data["aggregate"]["abs_rel"] - 0.1) < 1e-12
    assert data["aggregate"]["n_valid"] == 16


def test_write_report_empty_frames(tmp_path):
    out = tmp_path / "empty.json"
    write_report([], None, out)
    data = json.loads(out.read_text())
    assert data["n_frames"] == 0
    assert data["frames"] == []
