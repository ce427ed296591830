"""KITTI-format ingestion: velodyne binaries, calibration text, frame assembly."""

from __future__ import annotations

import numpy as np

from .data import FrameBundle, SparseDepth
from .exceptions import CalibError, ParseError
from .fileio import read_image_png
from .geometry import CameraIntrinsics

VELO_RECORD = 16  # little-endian float32 x, y, z, reflectance


def read_velodyne(path) -> np.ndarray:
    """(N, 4) float32 LiDAR records from a KITTI .bin file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) % VELO_RECORD:
        offset = len(raw) - len(raw) % VELO_RECORD
        raise ParseError(
            f"{path}: trailing {len(raw) % VELO_RECORD} bytes at offset {offset} "
            f"are not a full x,y,z,reflectance record"
        )
    return np.frombuffer(raw, dtype="<f4").reshape(-1, 4)


def write_velodyne(points, path):
    """Serialize (N, 4) records in KITTI layout (test/roundtrip helper)."""
    np.asarray(points, dtype="<f4").reshape(-1, 4).tofile(path)


def read_calib(path) -> dict:
    """Whitespace-separated `key: v0 v1 ...` lines into float arrays."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if ":" not in line:
                raise ParseError(f"{path}:{lineno}: expected 'key: values' line")
            key, _, rest = line.partition(":")
            try:
                out[key.strip()] = np.array([float(tok) for tok in rest.split()])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return out


def _matrix(calib, key, rows, cols):
    if key not in calib:
        raise CalibError(f"calibration key {key!r} missing")
    vals = calib[key]
    if vals.size != rows * cols:
        raise CalibError(f"calibration key {key!r} has {vals.size} values, "
                         f"expected {rows * cols}")
    return vals.reshape(rows, cols)


def parse_calibration(path, cam: int = 2):
    """(projection P, velo-to-cam 4x4 T, intrinsics) from a KITTI calib file.

    Accepts both the odometry layout (``P0..P3``, ``Tr``) and the raw/stereo
    layout (``P2``, ``Tr_velo_to_cam``, optional ``R0_rect``).
    """
    calib = read_calib(path)
    proj = _matrix(calib, f"P{cam}", 3, 4)

    tr_key = "Tr" if "Tr" in calib else "Tr_velo_to_cam"
    tr = _matrix(calib, tr_key, 3, 4)
    T = np.eye(4)
    T[:3] = tr
    if "R0_rect" in calib:
        R = np.eye(4)
        R[:3, :3] = _matrix(calib, "R0_rect", 3, 3)
        T = R @ T

    intr = CameraIntrinsics(float(proj[0, 0]), float(proj[0, 2]), float(proj[1, 2]))
    return proj, T, intr


def project_lidar(points, proj, T, width, height) -> SparseDepth:
    """Project LiDAR records into the image; nearest depth wins per pixel."""
    xyz = np.asarray(points, dtype=np.float64)[:, :3]
    cam = (T @ np.concatenate([xyz, np.ones((xyz.shape[0], 1))], axis=1).T).T
    img = (proj @ np.concatenate([cam[:, :3], np.ones((cam.shape[0], 1))], axis=1).T).T
    z = img[:, 2]
    keep = z > 1e-6
    u = np.round(img[keep, 0] / z[keep]).astype(np.int64)
    v = np.round(img[keep, 1] / z[keep]).astype(np.int64)
    z = z[keep]
    inside = (u >= 0) & (u < width) & (v >= 0) & (v < height)
    u, v, z = u[inside], v[inside], z[inside]

    # Keep the nearest return per pixel.
    key = v * width + u
    order = np.lexsort((z, key))
    key, u, v, z = key[order], u[order], v[order], z[order]
    first = np.ones(key.size, dtype=bool)
    first[1:] = key[1:] != key[:-1]
    return SparseDepth(u[first], v[first], z[first], width, height)


def load_kitti_frame(image_path, velodyne_path, calib_path, cam: int = 2) -> FrameBundle:
    """Assemble a frame from KITTI files: image, projected sparse depth, intrinsics."""
    image = read_image_png(image_path)
    points = read_velodyne(velodyne_path)
    proj, T, intr = parse_calibration(calib_path, cam=cam)
    h, w = image.shape[:2]
    sparse = project_lidar(points, proj, T, w, h)
    return FrameBundle(image, sparse, intr)
