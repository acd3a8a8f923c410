"""Pinhole camera model and image warping.

Camera frame convention: X right, Y up, Z forward (optical axis), so the
road point directly below a camera mounted at height h is (0, -h, 0).
Pixel rows grow downward, hence the sign flip between v and Y.  Depth is
Z-depth (distance along the optical axis), not ray length.

3D points are float64 arrays of shape (3,) or batches of shape (N, 3).
All functions are pure and accept scalars or broadcastable arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BehindCamera, InvalidDepth, NoGroundIntersection, ShapeMismatch


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid motion: p' = rotation @ p + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-9):
            raise ValueError("rotation must be orthonormal")
        if not math.isclose(float(np.linalg.det(r)), 1.0, abs_tol=1e-9):
            raise ValueError("rotation must have determinant +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def with_translation_scaled(self, alpha: float) -> "RigidTransform":
        return RigidTransform(self.rotation, alpha * self.translation)


def rotation_about_x(angle_rad: float) -> np.ndarray:
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_about_y(angle_rad: float) -> np.ndarray:
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_about_z(angle_rad: float) -> np.ndarray:
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def ray_direction(intr: CameraIntrinsics, u, v) -> np.ndarray:
    """Unnormalized viewing ray of pixel (u, v), with dir.z = 1."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    dx = (u - intr.cx) / intr.fx
    dy = -(v - intr.cy) / intr.fy
    return np.stack(np.broadcast_arrays(dx, dy, np.ones_like(dx)), axis=-1)


def backproject(intr: CameraIntrinsics, u, v, d) -> np.ndarray:
    """Lift pixel (u, v) at Z-depth d to a camera-frame 3D point.

    Homogeneous in depth: backproject(u, v, a*d) == a * backproject(u, v, d).
    """
    d = np.asarray(d, dtype=np.float64)
    if not np.all(np.isfinite(d) & (d > 0)):
        raise InvalidDepth("depth must be finite and positive")
    return ray_direction(intr, u, v) * d[..., None]


def project(intr: CameraIntrinsics, p: np.ndarray):
    """Project camera-frame point(s) to pixel coordinates (u, v).

    The result may lie outside the image bounds; callers check.
    """
    p = np.asarray(p, dtype=np.float64)
    z = p[..., 2]
    if not np.all(z > 0):
        raise BehindCamera("point has non-positive z")
    u = intr.fx * p[..., 0] / z + intr.cx
    v = -intr.fy * p[..., 1] / z + intr.cy
    return u, v


def intersect_ray_ground(intr: CameraIntrinsics, u, v, h: float) -> np.ndarray:
    """Intersect the viewing ray of pixel (u, v) with the plane Y = -h.

    Defined only for rays pointing below the horizon (dir.y < 0); the
    returned point satisfies Y = -h exactly and Z > 0.
    """
    if not h > 0:
        raise ValueError("camera height must be positive")
    d = ray_direction(intr, u, v)
    dy = d[..., 1]
    if not np.all(dy < 0):
        raise NoGroundIntersection("pixel at or above the horizon")
    t = h / -dy
    pts = d * t[..., None]
    # dy * (h / -dy) rounds twice; pin Y to the plane it lands on.
    pts[..., 1] = -h
    return pts


def _bilinear_sample(src: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sample src at fractional (u, v), clamping coordinates to the border."""
    h, w = src.shape[:2]
    u = np.clip(u, 0.0, w - 1.0)
    v = np.clip(v, 0.0, h - 1.0)
    u0 = np.floor(u).astype(np.intp)
    v0 = np.floor(v).astype(np.intp)
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    fu = u - u0
    fv = v - v0
    if src.ndim == 3:
        fu = fu[..., None]
        fv = fv[..., None]
    top = src[v0, u0] * (1.0 - fu) + src[v0, u1] * fu
    bot = src[v1, u0] * (1.0 - fu) + src[v1, u1] * fu
    return top * (1.0 - fv) + bot * fv


def inverse_warp(
    src: np.ndarray,
    depth: np.ndarray,
    xform: RigidTransform,
    intr: CameraIntrinsics,
):
    """Synthesize the target view by sampling src at depth-reprojected pixels.

    For every target pixel with valid depth (> 0, finite): backproject,
    apply xform, project into src, sample bilinearly.  Returns
    (warped, valid) where valid marks pixels whose transformed z is
    positive and whose reprojection lands inside the source image;
    warped is 0 wherever valid is False.

    The warp is invariant to scaling depth and translation jointly:
    inverse_warp(src, a*depth, (R, a*T)) == inverse_warp(src, depth, (R, T))
    on the intersection of the valid masks, for any a > 0.
    """
    src = np.asarray(src, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    if src.shape[:2] != depth.shape or depth.shape != (intr.height, intr.width):
        raise ShapeMismatch(
            f"src {src.shape[:2]}, depth {depth.shape} and intrinsics "
            f"{(intr.height, intr.width)} must agree"
        )
    h, w = depth.shape
    u, v = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    has_depth = np.isfinite(depth) & (depth > 0)

    d = np.where(has_depth, depth, 1.0)  # placeholder depth; masked out below
    pts = ray_direction(intr, u, v) * d[..., None]
    pts = pts @ xform.rotation.T + xform.translation

    z = pts[..., 2]
    in_front = z > 0
    zs = np.where(in_front, z, 1.0)
    up = intr.fx * pts[..., 0] / zs + intr.cx
    vp = -intr.fy * pts[..., 1] / zs + intr.cy

    in_bounds = (up >= 0) & (up <= w - 1) & (vp >= 0) & (vp <= h - 1)
    valid = has_depth & in_front & in_bounds

    warped = _bilinear_sample(src, up, vp)
    if warped.ndim == 3:
        warped = np.where(valid[..., None], warped, 0.0)
    else:
        warped = np.where(valid, warped, 0.0)
    return warped, valid
