"""End-to-end sparse-to-dense completion pipeline."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .data import DenseDepth, FrameBundle, crop_lower_half
from .energy import EnergyParams
from .geometry import Plane, ransac_plane
from .inference import (
    CARDBOARD,
    Labeling,
    SolverConfig,
    free_space_mask,
    pcbp_run,
    render_depth,
)
from .initialization import init_cardboard, init_planes, pls_interpolate
from .segmentation import SuperpixelGraph, slic_segment


@dataclass
class CompletionResult:
    depth: DenseDepth
    planes: list
    labeling: Labeling
    trace: np.ndarray          # (n_i, 3) rows of (iteration, unary, total)
    graph: SuperpixelGraph
    dense0: DenseDepth
    road: Plane | None
    free_space: np.ndarray | None
    timings: dict

    def trace_csv(self) -> str:
        lines = ["iteration,unary_energy,total_energy"]
        for it, unary, total in self.trace:
            lines.append(f"{int(it)},{unary:.9g},{total:.9g}")
        return "\n".join(lines) + "\n"


def energy_params(cfg: PipelineConfig) -> EnergyParams:
    return EnergyParams(cfg.theta1, cfg.theta2, cfg.theta3, cfg.tau1, cfg.tau2)


def solver_config(cfg: PipelineConfig) -> SolverConfig:
    return SolverConfig(
        n_p=cfg.n_p,
        n_i=cfg.resolved_n_i(),
        sigma=np.asarray(cfg.sigma),
        sigma_depth=cfg.sigma_depth,
        rho=cfg.rho,
        trws_iters=cfg.resolved_trws_iters(),
        seed=cfg.seed,
        mode=cfg.mode,
        eps=cfg.epsilon,
    )


def complete_frame(bundle: FrameBundle, cfg: PipelineConfig) -> CompletionResult:
    """Run segmentation, initialization and PCBP on one frame."""
    timings = {}
    t0 = time.perf_counter()
    if cfg.crop_height > 0:
        bundle = crop_lower_half(bundle, cfg.crop_height)
    k = bundle.intrinsics

    graph = slic_segment(bundle.image, cfg.resolved_superpixels(),
                         cfg.compactness, cfg.slic_iters)
    timings["segmentation"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    dense0 = pls_interpolate(bundle.sparse, cfg.smoothing_lambda)
    timings["interpolation"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    road = None
    if cfg.mode == CARDBOARD:
        pts = np.stack(
            [
                (bundle.sparse.u - k.c_x) * bundle.sparse.depth / k.f,
                (bundle.sparse.v - k.c_y) * bundle.sparse.depth / k.f,
                bundle.sparse.depth,
            ],
            axis=1,
        )
        road, _ = ransac_plane(pts, cfg.ransac_tol, cfg.ransac_iters, cfg.seed)
        init, flags = init_cardboard(graph, dense0, bundle.sparse, road, k,
                                     cfg.epsilon)
    else:
        init = init_planes(graph, dense0, bundle.sparse, k)
        flags = None
    timings["initialization"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    result = pcbp_run(graph, bundle.sparse, k, energy_params(cfg),
                      solver_config(cfg), init, flags, road)
    timings["optimization"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    depth = render_depth(result.planes, graph, k, fallback=dense0)
    timings["rendering"] = time.perf_counter() - t0

    free = (free_space_mask(result.labeling, graph)
            if cfg.mode == CARDBOARD else None)
    return CompletionResult(depth, result.planes, result.labeling, result.trace,
                            graph, dense0, road, free, timings)
