"""Dense initialization from sparse depth and per-superpixel initial planes."""

from __future__ import annotations

import numpy as np
from scipy.fft import dctn, idctn
from scipy.ndimage import distance_transform_edt

from .data import DenseDepth, SparseDepth
from .exceptions import InvalidRoadPlaneError, NoDataError, RankDeficientError
from .geometry import CameraIntrinsics, Plane, fit_plane_lsq, points_plane_distance
from .segmentation import SuperpixelGraph

# Cap on points per superpixel used for plane fitting; fixed-stride subsample.
FIT_POINT_CAP = 200


def object_normal_from_road(road: Plane) -> np.ndarray:
    """Normal (0, -c/b, 1) of front-parallel object planes, unit length.

    Orthogonal to the road normal by construction; undefined when the road
    normal has no vertical component.
    """
    a, b, c = road.normal
    if abs(b) < 1e-12:
        raise InvalidRoadPlaneError(
            "road normal has zero vertical component; object-plane normal undefined"
        )
    n = np.array([0.0, -c / b, 1.0])
    return n / np.linalg.norm(n)


def pls_interpolate(sparse: SparseDepth, smoothness: float = 1.0,
                    max_iters: int = 200, tol: float = 1e-5) -> DenseDepth:
    """Penalized least squares fill-in of a sparse depth grid.

    Minimizes ``sum_measured w (D - d)^2 + smoothness * ||Lap D||^2`` via
    cosine-basis spectral filtering with iterated reweighting on the missing
    pixels, plus one robust reweight pass that down-weights outlier samples.
    Samples are linearly detrended first: the cosine basis imposes
    zero-gradient image borders, which would otherwise flatten depth ramps
    near the edges; the residual after removing the least-squares linear
    trend is border-safe, and the trend is added back at the end.
    """
    if len(sparse) == 0:
        raise NoDataError("cannot interpolate from zero samples")
    h, w = sparse.height, sparse.width
    trend = _linear_trend(sparse)
    data = np.zeros((h, w))
    data[sparse.v, sparse.u] = sparse.depth - trend[sparse.v, sparse.u]
    weight = np.zeros((h, w))
    weight[sparse.v, sparse.u] = 1.0

    if smoothness == 0:
        # Pure data term: measured pixels pass through, gaps nearest-filled.
        out = _nearest_fill(data, weight > 0)
        return DenseDepth(np.maximum(out + trend, 1e-3))

    out = _pls_solve(data, weight, smoothness, max_iters, tol)

    # One robust pass: bisquare weights on sample residuals.
    resid = (out - data)[sparse.v, sparse.u]
    scale = 1.4826 * np.median(np.abs(resid - np.median(resid)))
    if scale > 1e-9:
        r = resid / (4.685 * scale)
        robust = np.where(np.abs(r) < 1, (1 - r**2) ** 2, 0.0)
        if robust.max() > 0:
            weight[sparse.v, sparse.u] = robust
            out = _pls_solve(data, weight, smoothness, max_iters, tol, init=out)

    return DenseDepth(np.maximum(out + trend, 1e-3))


def _linear_trend(sparse: SparseDepth):
    """Least-squares plane d ~ a u + b v + c over the samples, as a grid."""
    n = len(sparse)
    u = sparse.u.astype(np.float64)
    v = sparse.v.astype(np.float64)
    if n < 3:
        coef = np.array([0.0, 0.0, float(sparse.depth.mean())])
    else:
        A = np.stack([u, v, np.ones(n)], axis=1)
        coef, *_ = np.linalg.lstsq(A, sparse.depth, rcond=None)
    vv, uu = np.mgrid[0:sparse.height, 0:sparse.width].astype(np.float64)
    return coef[0] * uu + coef[1] * vv + coef[2]


def _nearest_fill(data, valid):
    if valid.all():
        return data.copy()
    idx = distance_transform_edt(~valid, return_distances=False, return_indices=True)
    return data[tuple(idx)]


def _pls_solve(data, weight, lam, max_iters, tol, init=None):
    h, w = data.shape
    ly = 2.0 - 2.0 * np.cos(np.pi * np.arange(h) / h)
    lx = 2.0 - 2.0 * np.cos(np.pi * np.arange(w) / w)
    gamma = 1.0 / (1.0 + lam * (ly[:, None] + lx[None, :]) ** 2)

    out = _nearest_fill(data, weight > 0) if init is None else init.copy()
    scale = max(float(np.abs(data).max()), 1e-12)
    for _ in range(max_iters):
        upd = idctn(gamma * dctn(weight * (data - out) + out, norm="ortho"),
                    norm="ortho")
        delta = float(np.max(np.abs(upd - out)))
        out = upd
        if delta < tol * scale:
            break
    return out


def _region_points(region, dense0, k: CameraIntrinsics):
    """Backprojected 3D points for (sub-sampled) region pixels with valid depth."""
    if len(region) > FIT_POINT_CAP:
        stride = int(np.ceil(len(region) / FIT_POINT_CAP))
        region = region[::stride]
    v = region[:, 0].astype(np.float64)
    u = region[:, 1].astype(np.float64)
    z = dense0.grid[region[:, 0], region[:, 1]]
    ok = np.isfinite(z) & (z > 0)
    u, v, z = u[ok], v[ok], z[ok]
    pts = np.stack([(u - k.c_x) * z / k.f, (v - k.c_y) * z / k.f, z], axis=1)
    return pts, z


def init_planes(graph: SuperpixelGraph, dense0: DenseDepth,
                sparse: SparseDepth, k: CameraIntrinsics) -> list[Plane]:
    """Initial plane per superpixel from the interpolated depth map.

    Rank-deficient regions fall back to a front-parallel plane at the
    region's median depth.
    """
    planes = []
    for region in graph.regions:
        pts, z = _region_points(region, dense0, k)
        fallback_depth = float(np.median(z)) if z.size else 1.0
        if pts.shape[0] >= 3:
            try:
                planes.append(fit_plane_lsq(pts))
                continue
            except RankDeficientError:
                pass
        planes.append(Plane.front_parallel(max(fallback_depth, 1e-3)))
    return planes


ROAD, OBJECT = 0, 1


def init_cardboard(graph: SuperpixelGraph, dense0: DenseDepth,
                   sparse: SparseDepth, road: Plane, k: CameraIntrinsics,
                   eps: float = 0.2):
    """Cardboard-world initial state: road/object labels and planes.

    Superpixels whose mean point-to-road distance is below ``eps`` join the
    road plane; the rest get the front-parallel object plane (normal
    orthogonal to the road) at the region's mean depth.
    """
    n_obj = object_normal_from_road(road)
    planes = []
    flags = []
    for region in graph.regions:
        pts, z = _region_points(region, dense0, k)
        if pts.shape[0] and float(points_plane_distance(pts, road).mean()) <= eps:
            planes.append(road)
            flags.append(ROAD)
            continue
        mean_depth = float(z.mean()) if z.size else 1.0
        vc, uc = region.mean(axis=0)
        ray = np.array([(uc - k.c_x) / k.f, (vc - k.c_y) / k.f, 1.0])
        point = ray * max(mean_depth, 1e-3)
        planes.append(Plane(n_obj, -float(n_obj @ point)))
        flags.append(OBJECT)
    return planes, flags
