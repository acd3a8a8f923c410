"""Robust plane estimation with Least Median of Squares.

The estimator draws random 3-point subsets, scores each exact plane by the
median of squared orthogonal residuals over all points, keeps the best, and
polishes it with a total-least-squares fit over the inliers of the winning
candidate.  Tolerates up to ~50% gross outliers.

Planes are stored as normal . p + c = 0 with a unit normal oriented so
normal.y > 0; for a camera (origin) above the road this makes c > 0 and
c / normal.y the distance to the plane straight down.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry, TooFewInliers, TooFewPoints

# Candidates scored per chunk; bounds the (n_points x chunk) residual matrix.
_SCORE_CHUNK = 64
# Oversampling budget for replacing degenerate (collinear) triplets.
_OVERSAMPLE = 10


@dataclass(frozen=True)
class Plane3:
    """Plane normal . p + offset = 0 with unit, upward-oriented normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        if abs(float(np.linalg.norm(n)) - 1.0) > 1e-12:
            raise ValueError("plane normal must be unit length")
        if not n[1] > 0:
            raise ValueError("plane normal must point upward (normal.y > 0)")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))


@dataclass(frozen=True)
class LmedsConfig:
    num_samples: int = 1000
    seed: int = 0
    inlier_k: float = 2.5
    min_points: int = 50

    def __post_init__(self):
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if not self.inlier_k > 0:
            raise ValueError("inlier_k must be positive")
        if self.min_points < 3:
            raise ValueError("min_points must be >= 3")


def plane_residual(plane: Plane3, p) -> np.ndarray:
    """Orthogonal point-to-plane distance |normal . p + offset|."""
    p = np.asarray(p, dtype=np.float64)
    return np.abs(p @ plane.normal + plane.offset)


def _oriented_plane(normal: np.ndarray, offset: float) -> Plane3:
    norm = float(np.linalg.norm(normal))
    n = normal / norm
    c = offset / norm
    if n[1] < 0:
        n, c = -n, -c
    if n[1] == 0:
        # An exactly vertical plane cannot satisfy the upward orientation
        # convention, so it is unrepresentable rather than merely implausible.
        raise DegenerateGeometry("fitted plane is vertical (normal.y = 0)")
    return Plane3(n, c)


def _tls_plane(points: np.ndarray):
    """Total-least-squares plane through points; returns raw (normal, offset)."""
    centroid = points.mean(axis=0)
    centered = points - centroid
    cov = centered.T @ centered
    _, vecs = np.linalg.eigh(cov)
    normal = vecs[:, 0]  # eigenvector of the smallest eigenvalue
    return normal, -float(normal @ centroid)


def refine_plane_inliers(points, plane: Plane3, band: float) -> Plane3:
    """Least-squares polish over the points within band of plane."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    inliers = points[plane_residual(plane, points) <= band]
    if len(inliers) < 3:
        raise TooFewInliers(f"only {len(inliers)} points within band {band}")
    normal, offset = _tls_plane(inliers)
    return _oriented_plane(normal, offset)


def fit_plane_lmeds(points, cfg: LmedsConfig = LmedsConfig()) -> Plane3:
    """Fit a plane by LMedS over random triplets, then refine on inliers.

    Bit-reproducible for a fixed cfg.seed: all candidate triplets are drawn
    up front and ties in the median score go to the earliest candidate.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = len(points)
    if n < cfg.min_points:
        raise TooFewPoints(f"{n} points, need at least {cfg.min_points}")

    rng = np.random.default_rng(cfg.seed)
    idx = rng.integers(0, n, size=(_OVERSAMPLE * cfg.num_samples, 3))

    p0 = points[idx[:, 0]]
    e1 = points[idx[:, 1]] - p0
    e2 = points[idx[:, 2]] - p0
    normals = np.cross(e1, e2)
    # A triplet is degenerate when its points are (nearly) collinear:
    # |e1 x e2| = |e1||e2| sin(angle), so compare against the edge scale.
    edge_scale = np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1)
    keep = np.linalg.norm(normals, axis=1) > 1e-12 * edge_scale
    if not keep.any():
        raise DegenerateGeometry("every sampled triplet was collinear")
    idx_kept = idx[keep][: cfg.num_samples]
    normals = normals[keep][: cfg.num_samples]
    offsets = -np.einsum("ij,ij->i", normals, p0[keep][: cfg.num_samples])
    norms = np.linalg.norm(normals, axis=1, keepdims=True)
    normals = normals / norms
    offsets = offsets / norms[:, 0]

    best_med = np.inf
    best = 0
    for start in range(0, len(normals), _SCORE_CHUNK):
        chunk_n = normals[start : start + _SCORE_CHUNK]
        chunk_c = offsets[start : start + _SCORE_CHUNK]
        sq = (points @ chunk_n.T + chunk_c) ** 2
        medians = np.median(sq, axis=0)
        i = int(np.argmin(medians))
        if medians[i] < best_med:
            best_med = float(medians[i])
            best = start + i

    # Rousseeuw's robust scale with the small-sample correction.
    if n > 3:
        s = 1.4826 * (1.0 + 5.0 / (n - 3)) * np.sqrt(best_med)
        band = cfg.inlier_k * s
    else:
        band = np.inf
    resid = np.abs(points @ normals[best] + offsets[best])
    inliers = points[resid <= band]
    if len(inliers) < 3:
        # On near-perfect data best_med can round to ~0, leaving a band
        # tighter than the rounding error of the winning triplet itself.
        inliers = points[idx_kept[best]]
    normal, offset = _tls_plane(inliers)
    return _oriented_plane(normal, offset)
