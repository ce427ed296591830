"""Sparse/dense depth containers, cropping and lattice sparsification."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .exceptions import InvalidInputError
from .geometry import CameraIntrinsics


@dataclass
class SparseDepth:
    """Irregular (u, v, depth) measurements on an image grid.

    ``u``, ``v`` are int arrays (column, row); duplicates per pixel are
    averaged on construction.
    """

    u: np.ndarray
    v: np.ndarray
    depth: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.int64)
        v = np.asarray(self.v, dtype=np.int64)
        d = np.asarray(self.depth, dtype=np.float64)
        if not (u.shape == v.shape == d.shape):
            raise InvalidInputError("u, v, depth must have matching shapes")
        if u.size:
            if u.min() < 0 or u.max() >= self.width or v.min() < 0 or v.max() >= self.height:
                raise InvalidInputError("sample coordinates outside image bounds")
            if not np.all(np.isfinite(d)) or np.any(d <= 0):
                raise InvalidInputError("depths must be finite and positive")
        # Average duplicate samples per pixel.
        key = v * self.width + u
        uniq, inverse = np.unique(key, return_inverse=True)
        if uniq.size != key.size:
            sums = np.bincount(inverse, weights=d)
            counts = np.bincount(inverse)
            d = sums / counts
            v, u = np.divmod(uniq, self.width)
        self.u = u.astype(np.int32)
        self.v = v.astype(np.int32)
        self.depth = d.astype(np.float64)

    def __len__(self):
        return self.u.size

    def to_grid(self):
        """Dense (H, W) array with NaN at unmeasured pixels."""
        grid = np.full((self.height, self.width), np.nan)
        grid[self.v, self.u] = self.depth
        return grid

    @classmethod
    def from_grid(cls, grid):
        """Collect valid (finite, positive) pixels of a dense grid."""
        grid = np.asarray(grid, dtype=np.float64)
        valid = np.isfinite(grid) & (grid > 0)
        v, u = np.nonzero(valid)
        return cls(u, v, grid[valid], grid.shape[1], grid.shape[0])


@dataclass
class DenseDepth:
    """Per-pixel depth grid; NaN marks invalid pixels."""

    grid: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.float64)
        valid = self.valid_mask
        if np.any(self.grid[valid] <= 0):
            raise InvalidInputError("valid depths must be positive")

    @property
    def width(self):
        return self.grid.shape[1]

    @property
    def height(self):
        return self.grid.shape[0]

    @property
    def valid_mask(self):
        return np.isfinite(self.grid)


@dataclass
class FrameBundle:
    """One input frame: color image, sparse depth, intrinsics, optional gt."""

    image: np.ndarray
    sparse: SparseDepth
    intrinsics: CameraIntrinsics
    gt: DenseDepth | None = None

    def __post_init__(self):
        h, w = self.image.shape[:2]
        if (self.sparse.height, self.sparse.width) != (h, w):
            raise InvalidInputError("image and sparse depth dimensions differ")
        if self.gt is not None and self.gt.grid.shape != (h, w):
            raise InvalidInputError("image and gt dimensions differ")


def crop_lower_half(bundle: FrameBundle, crop_height: int = 200) -> FrameBundle:
    """Keep the bottom ``crop_height`` rows, shifting c_y and sample rows."""
    h = bundle.image.shape[0]
    if h < crop_height:
        raise InvalidInputError(f"image height {h} below crop height {crop_height}")
    top = h - crop_height
    keep = bundle.sparse.v >= top
    sparse = SparseDepth(
        bundle.sparse.u[keep],
        bundle.sparse.v[keep] - top,
        bundle.sparse.depth[keep],
        bundle.sparse.width,
        crop_height,
    )
    k = bundle.intrinsics
    intr = CameraIntrinsics(k.f, k.c_x, k.c_y - top)
    gt = DenseDepth(bundle.gt.grid[top:]) if bundle.gt is not None else None
    return FrameBundle(bundle.image[top:], sparse, intr, gt)


def sparsify(source, h_factor: int, v_factor: int) -> SparseDepth:
    """Keep samples on the (u % h_factor == 0) and (v % v_factor == 0) lattice."""
    if h_factor < 1 or v_factor < 1:
        raise InvalidInputError("downsample factors must be >= 1")
    if isinstance(source, DenseDepth):
        source = SparseDepth.from_grid(source.grid)
    keep = (source.u % h_factor == 0) & (source.v % v_factor == 0)
    return SparseDepth(
        source.u[keep], source.v[keep], source.depth[keep],
        source.width, source.height,
    )
