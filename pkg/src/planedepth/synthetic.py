"""Synthetic road-plus-objects scenes used as test oracles.

The generator renders exact per-pixel ground-truth depth by nearest-plane
visibility, a flat-shaded color image with optional color-only texture and
painted "shadow" patches (color edges with no depth edge), the ground-truth
road mask, and lattice-sparsified samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import DenseDepth, FrameBundle, sparsify
from .exceptions import InvalidSceneError
from .geometry import CameraIntrinsics, Plane
from .initialization import object_normal_from_road


@dataclass
class SceneObject:
    plane: Plane
    rect: tuple          # (u0, v0, u1, v1) image-space extent, half-open
    color: tuple = (180, 60, 60)


@dataclass
class SyntheticScene:
    road: Plane
    intrinsics: CameraIntrinsics
    width: int
    height: int
    objects: list = field(default_factory=list)
    road_color: tuple = (90, 90, 95)
    shadow_rects: list = field(default_factory=list)  # color-only patches
    shadow_factor: float = 0.45
    noise_amp: float = 4.0
    texture_seed: int = 0
    h_factor: int = 6
    v_factor: int = 3


def _plane_depth_map(plane: Plane, k: CameraIntrinsics, width, height):
    vv, uu = np.mgrid[0:height, 0:width].astype(np.float64)
    denom = ((uu - k.c_x) / k.f * plane.normal[0]
             + (vv - k.c_y) / k.f * plane.normal[1] + plane.normal[2])
    with np.errstate(divide="ignore", invalid="ignore"):
        depth = -plane.offset / denom
    depth[~np.isfinite(depth) | (depth <= 0)] = np.inf
    return depth


def generate_synthetic(scene: SyntheticScene):
    """Render a scene: (FrameBundle with gt and sparse samples, road mask)."""
    w, h, k = scene.width, scene.height, scene.intrinsics

    depth = _plane_depth_map(scene.road, k, w, h)
    owner = np.zeros((h, w), dtype=np.int64)  # 0 = road, i+1 = object i
    for i, obj in enumerate(scene.objects):
        u0, v0, u1, v1 = obj.rect
        d = _plane_depth_map(obj.plane, k, w, h)
        cover = np.zeros((h, w), dtype=bool)
        cover[max(v0, 0):v1, max(u0, 0):u1] = True
        win = cover & (d < depth)
        depth[win] = d[win]
        owner[win] = i + 1

    if not np.all(np.isfinite(depth)):
        raise InvalidSceneError("some pixels are covered by no forward-facing plane")

    road_mask = owner == 0

    colors = np.array([scene.road_color] + [o.color for o in scene.objects],
                      dtype=np.float64)
    image = colors[owner]
    for (u0, v0, u1, v1) in scene.shadow_rects:
        patch = image[max(v0, 0):v1, max(u0, 0):u1]
        patch *= scene.shadow_factor
    if scene.noise_amp > 0:
        rng = np.random.default_rng(scene.texture_seed)
        image = image + rng.uniform(-scene.noise_amp, scene.noise_amp, image.shape)
    image = np.clip(np.round(image), 0, 255).astype(np.uint8)

    gt = DenseDepth(depth)
    sparse = sparsify(gt, scene.h_factor, scene.v_factor)
    return FrameBundle(image, sparse, k, gt=gt), road_mask


def demo_scene(width: int = 640, height: int = 240, n_shadows: int = 0,
               seed: int = 0, pitch_deg: float = 4.0,
               camera_height: float = 1.5) -> SyntheticScene:
    """Road + back wall + two boxes; object planes orthogonal to the road."""
    k = CameraIntrinsics(f=0.55 * width, c_x=width / 2.0, c_y=height / 6.0)
    alpha = np.deg2rad(pitch_deg)
    road = Plane(np.array([0.0, np.cos(alpha), np.sin(alpha)]),
                 -camera_height * np.cos(alpha))
    n_obj = object_normal_from_road(road)

    def object_at(depth_m):
        point = np.array([0.0, 0.0, depth_m])
        return Plane(n_obj.copy(), -float(n_obj @ point))

    objects = [
        SceneObject(object_at(30.0), (0, 0, width, height), color=(70, 110, 160)),
        SceneObject(object_at(8.0), (int(0.12 * width), int(0.18 * height),
                                     int(0.32 * width), int(0.52 * height)),
                    color=(180, 70, 60)),
        SceneObject(object_at(14.0), (int(0.62 * width), int(0.12 * height),
                                      int(0.80 * width), int(0.42 * height)),
                    color=(200, 170, 60)),
    ]

    shadow_rects = []
    if n_shadows:
        rng = np.random.default_rng(seed + 7)
        for _ in range(n_shadows):
            u0 = int(rng.integers(0, width - width // 6))
            v0 = int(rng.integers(int(0.55 * height), height - height // 10))
            shadow_rects.append((u0, v0, u0 + width // 6, v0 + height // 10))

    return SyntheticScene(road=road, intrinsics=k, width=width, height=height,
                          objects=objects, shadow_rects=shadow_rects,
                          texture_seed=seed)
