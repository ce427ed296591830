"""Camera model, planes, back-projection and plane fitting.

Planes are kept in Hessian normal form (unit normal ``n``, signed offset
``d``) so that ``n . X + d = 0`` for points ``X`` on the plane.  A general
``(a, b, c, d)`` 4-vector maps onto this form by dividing through by
``||(a, b, c)||``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    DegenerateRayError,
    InvalidInputError,
    NoConsensusError,
    RankDeficientError,
)

# Rays with |n . K^-1 x| below this are treated as parallel to the plane.
EPS_RAY = 1e-8


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics: focal length and principal point, in pixels."""

    f: float
    c_x: float
    c_y: float

    def __post_init__(self):
        if not (np.isfinite(self.f) and self.f > 0):
            raise InvalidInputError(f"focal length must be positive, got {self.f}")
        if not (np.isfinite(self.c_x) and np.isfinite(self.c_y)):
            raise InvalidInputError("principal point must be finite")

    def ray(self, u, v):
        """Unnormalized viewing direction K^-1 (u, v, 1) as an array."""
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        return np.stack(
            [(u - self.c_x) / self.f, (v - self.c_y) / self.f, np.ones_like(u)],
            axis=-1,
        )


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float

    def as_array(self):
        return np.array([self.x, self.y, self.z], dtype=np.float64)


@dataclass(frozen=True)
class PixelDepth:
    u: float
    v: float
    depth: float

    def __post_init__(self):
        if not (np.isfinite(self.u) and np.isfinite(self.v) and np.isfinite(self.depth)):
            raise InvalidInputError("pixel sample must be finite")
        if self.depth <= 0:
            raise InvalidInputError(f"depth must be positive, got {self.depth}")


def canonical_normal(normal, offset):
    """Fix the sign ambiguity: prefer n_z >= 0, then n_y >= 0, then n_x >= 0."""
    n = np.asarray(normal, dtype=np.float64)
    if n[2] < 0 or (n[2] == 0 and (n[1] < 0 or (n[1] == 0 and n[0] < 0))):
        return -n, -float(offset)
    return n, float(offset)


@dataclass(frozen=True)
class Plane:
    """Plane n . X + offset = 0 with unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64)
        if n.shape != (3,) or not np.all(np.isfinite(n)) or not np.isfinite(self.offset):
            raise InvalidInputError("plane parameters must be three finite components")
        norm = float(np.linalg.norm(n))
        if norm < 1e-12:
            raise InvalidInputError("plane normal must be nonzero")
        n, off = canonical_normal(n / norm, self.offset / norm)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", off)

    @classmethod
    def from_abcd(cls, a, b, c, d):
        return cls(np.array([a, b, c], dtype=np.float64), float(d))

    @classmethod
    def front_parallel(cls, depth):
        """Plane z = depth."""
        return cls(np.array([0.0, 0.0, 1.0]), -float(depth))

    def as_abcd(self):
        return np.array([*self.normal, self.offset], dtype=np.float64)

    def __eq__(self, other):
        if not isinstance(other, Plane):
            return NotImplemented
        return bool(np.all(self.normal == other.normal) and self.offset == other.offset)


def backproject(p: PixelDepth, k: CameraIntrinsics) -> Point3:
    """Lift a pixel with known depth to camera coordinates."""
    z = p.depth
    return Point3((p.u - k.c_x) * z / k.f, (p.v - k.c_y) * z / k.f, z)


def plane_depth_at(s: Plane, u: float, v: float, k: CameraIntrinsics) -> float:
    """Depth of plane ``s`` along the ray through pixel (u, v).

    May return a non-positive value (plane behind the camera); callers treat
    that as an infeasible hypothesis.  Raises :class:`DegenerateRayError` when
    the ray is parallel to the plane.
    """
    denom = float(s.normal @ k.ray(u, v))
    if abs(denom) <= EPS_RAY:
        raise DegenerateRayError(f"ray through ({u}, {v}) parallel to plane")
    return -s.offset / denom


def plane_depth_grid(normal, offset, rays):
    """Vectorized plane depth over precomputed rays (..., 3).

    Returns (depth, degenerate_mask); depth is NaN where degenerate.
    """
    denom = rays @ np.asarray(normal, dtype=np.float64)
    degenerate = np.abs(denom) <= EPS_RAY
    with np.errstate(divide="ignore", invalid="ignore"):
        depth = np.where(degenerate, np.nan, -offset / denom)
    return depth, degenerate


def _points_matrix(points):
    if len(points) and isinstance(points[0], Point3):
        return np.array([[p.x, p.y, p.z] for p in points], dtype=np.float64)
    return np.asarray(points, dtype=np.float64).reshape(-1, 3)


def fit_plane_lsq(points) -> Plane:
    """Total-least-squares plane through 3D points.

    Uses the smallest-scatter direction of the centred point cloud, which
    stays stable for near-vertical planes.  Raises
    :class:`RankDeficientError` for fewer than 3 points or collinear input.
    """
    pts = _points_matrix(points)
    if pts.shape[0] < 3:
        raise RankDeficientError(f"need at least 3 points, got {pts.shape[0]}")
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("points must be finite")
    centroid = pts.mean(axis=0)
    centred = pts - centroid
    scatter = centred.T @ centred
    evals, evecs = np.linalg.eigh(scatter)
    scale = float(np.max(np.abs(evals)))
    # Collinear input leaves two (near-)zero scatter directions.
    if evals[1] <= max(1e-12 * scale, 1e-30):
        raise RankDeficientError("points are collinear; plane is not determined")
    normal = evecs[:, 0]
    return Plane(normal, -float(normal @ centroid))


def point_plane_distance(p, s: Plane) -> float:
    """Euclidean point-to-plane distance |n . p + offset|."""
    pt = p.as_array() if isinstance(p, Point3) else np.asarray(p, dtype=np.float64)
    return float(abs(s.normal @ pt + s.offset))


def points_plane_distance(points, s: Plane):
    """Vectorized |n . p + offset| for an (N, 3) array."""
    pts = np.asarray(points, dtype=np.float64)
    return np.abs(pts @ s.normal + s.offset)


def ransac_plane(points, inlier_tol: float, iters: int = 200, rng_seed: int = 0):
    """RANSAC plane fit: maximize inliers, then refit on them.

    Deterministic for a fixed ``rng_seed``.  Returns ``(plane, inlier_mask)``
    where the mask is evaluated against the refit plane.
    """
    pts = _points_matrix(points)
    n = pts.shape[0]
    if n < 3:
        raise RankDeficientError(f"need at least 3 points, got {n}")
    rng = np.random.default_rng(rng_seed)

    best_count = -1
    best_mask = None
    for _ in range(iters):
        idx = rng.choice(n, size=3, replace=False)
        p0, p1, p2 = pts[idx]
        normal = np.cross(p1 - p0, p2 - p0)
        norm = np.linalg.norm(normal)
        if norm < 1e-12:
            continue
        normal /= norm
        dist = np.abs((pts - p0) @ normal)
        mask = dist <= inlier_tol
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask

    if best_mask is None or best_count < 3:
        raise NoConsensusError("no plane with at least 3 inliers found")
    try:
        plane = fit_plane_lsq(pts[best_mask])
    except RankDeficientError as exc:
        raise NoConsensusError(f"consensus set is degenerate: {exc}") from exc
    final_mask = points_plane_distance(pts, plane) <= inlier_tol
    if int(final_mask.sum()) < 3:
        raise NoConsensusError("refit plane keeps fewer than 3 inliers")
    return plane, final_mask
