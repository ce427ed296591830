"""Depth-map PNG and PLY point-cloud serialization."""

from __future__ import annotations

import struct

import numpy as np
from PIL import Image

from .data import DenseDepth
from .exceptions import InvalidInputError, RangeError
from .geometry import CameraIntrinsics

DEPTH_SCALE = 256.0  # stored value = round(depth * 256); 0 marks invalid
MAX_DEPTH = 65535 / DEPTH_SCALE


def write_depth_png(d: DenseDepth, path):
    """16-bit single-channel PNG, value = round(depth * 256), 0 = invalid."""
    grid = d.grid
    valid = d.valid_mask
    if np.any(grid[valid] >= MAX_DEPTH):
        raise RangeError(f"depths must be below {MAX_DEPTH:.2f} m for 16-bit storage")
    enc = np.zeros(grid.shape, dtype=np.uint16)
    enc[valid] = np.maximum(np.round(grid[valid] * DEPTH_SCALE), 1).astype(np.uint16)
    Image.fromarray(enc).save(path, format="PNG")


def read_depth_png(path) -> DenseDepth:
    enc = np.asarray(Image.open(path), dtype=np.uint16)
    grid = enc.astype(np.float64) / DEPTH_SCALE
    grid[enc == 0] = np.nan
    return DenseDepth(grid)


def write_image_png(image, path):
    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(path, format="PNG")


def read_image_png(path):
    return np.asarray(Image.open(path).convert("RGB"))


def write_mask_png(mask, path):
    Image.fromarray((np.asarray(mask, bool) * 255).astype(np.uint8)).save(path, "PNG")


def read_mask_png(path):
    return np.asarray(Image.open(path).convert("L")) > 127


def write_labels_png(labels, path):
    labels = np.asarray(labels)
    if labels.max() > 65535:
        raise RangeError("more than 65536 segments cannot be stored as 16-bit PNG")
    Image.fromarray(labels.astype(np.uint16)).save(path, "PNG")


def write_ply(d: DenseDepth, image, k: CameraIntrinsics, path,
              road_mask=None, binary: bool = True):
    """Colored point cloud of the valid depth pixels, camera coordinates.

    Road-mask pixels, when given, are tinted green in the vertex colors.
    """
    image = np.asarray(image, dtype=np.uint8)
    if image.shape[:2] != d.grid.shape:
        raise InvalidInputError("image and depth dimensions differ")
    valid = d.valid_mask
    v, u = np.nonzero(valid)
    z = d.grid[valid]
    x = (u - k.c_x) * z / k.f
    y = (v - k.c_y) * z / k.f
    colors = image[v, u].astype(np.float64)
    if road_mask is not None:
        green = np.asarray(road_mask, bool)[v, u]
        colors[green] = 0.5 * colors[green] + 0.5 * np.array([0.0, 255.0, 0.0])
    colors = np.clip(np.round(colors), 0, 255).astype(np.uint8)

    n = z.size
    fmt = "binary_little_endian" if binary else "ascii"
    header = (
        "ply\n"
        f"format {fmt} 1.0\n"
        f"element vertex {n}\n"
        "property float x\nproperty float y\nproperty float z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        "end_header\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            rec = np.empty(n, dtype=[("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
                                     ("r", "u1"), ("g", "u1"), ("b", "u1")])
            rec["x"], rec["y"], rec["z"] = x, y, z
            rec["r"], rec["g"], rec["b"] = colors.T
            fh.write(rec.tobytes())
        else:
            for i in range(n):
                fh.write(
                    f"{x[i]:.6f} {y[i]:.6f} {z[i]:.6f} "
                    f"{colors[i, 0]} {colors[i, 1]} {colors[i, 2]}\n".encode("ascii")
                )
