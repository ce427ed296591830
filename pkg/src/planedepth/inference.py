"""Particle belief propagation outer loop (planar and cardboard modes)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import DenseDepth, SparseDepth
from .energy import (
    CardboardTables,
    EnergyParams,
    SampleIndex,
    TableWorkspace,
    build_cost_tables,
    build_cost_tables_cardboard,
    energy_of_labels,
)
from .exceptions import InvalidInputError, ModeMismatchError
from .geometry import EPS_RAY, CameraIntrinsics, Plane, canonical_normal
from .initialization import OBJECT, ROAD, object_normal_from_road
from .mrf import build_chain_layout, trws_solve
from .segmentation import SuperpixelGraph

PLANAR = "planar"
CARDBOARD = "cardboard"


@dataclass
class SolverConfig:
    n_p: int = 10             # particles per superpixel
    n_i: int = 40             # outer iterations
    sigma: np.ndarray = field(default_factory=lambda: np.array([0.02, 0.02, 0.02, 0.2]))
    sigma_depth: float = 0.5  # cardboard proposal std on the plane offset, meters
    rho: float = 0.9          # per-iteration proposal decay
    trws_iters: int = 30      # inner message-passing sweeps
    seed: int = 0
    mode: str = PLANAR
    eps: float = 0.2          # cardboard road threshold, meters (mean distance)

    def __post_init__(self):
        self.sigma = np.asarray(self.sigma, dtype=np.float64).reshape(4)
        if self.n_p < 2:
            raise InvalidInputError("need at least 2 particles")
        if self.mode == CARDBOARD and self.n_p < 3:
            raise InvalidInputError("cardboard mode needs at least 3 particles")
        if self.n_i < 0:
            raise InvalidInputError("iteration count must be >= 0")
        if np.any(self.sigma <= 0) or self.sigma_depth <= 0:
            raise InvalidInputError("proposal stds must be positive")
        if not (0 < self.rho <= 1):
            raise InvalidInputError("decay must be in (0, 1]")
        if self.mode not in (PLANAR, CARDBOARD):
            raise InvalidInputError(f"unknown mode {self.mode!r}")


@dataclass
class ParticleSet:
    """Per-superpixel plane hypotheses; slot 0 is always the incumbent."""

    normals: np.ndarray  # (S, P, 3) unit normals
    offsets: np.ndarray  # (S, P)

    @property
    def n_particles(self):
        return self.normals.shape[1]

    def plane(self, node: int, slot: int) -> Plane:
        return Plane(self.normals[node, slot].copy(), float(self.offsets[node, slot]))


@dataclass
class Labeling:
    """Chosen particle index per superpixel, plus road flags in cardboard mode."""

    particle_index: np.ndarray
    mode: str
    road_flags: np.ndarray | None = None  # per-superpixel ROAD/OBJECT


def state_arrays(planes):
    normals = np.stack([p.normal for p in planes])
    offsets = np.array([p.offset for p in planes])
    return normals, offsets


def _neighbor_lists(graph: SuperpixelGraph):
    S = graph.n_segments
    out = [[] for _ in range(S)]
    for i, j in graph.adjacency:
        out[i].append(int(j))
        out[j].append(int(i))
    return [sorted(n) for n in out]


def _normalize_particles(vecs):
    """(..., 4) general-form plane vectors -> unit-normal form, sign-fixed."""
    norms = np.linalg.norm(vecs[..., :3], axis=-1, keepdims=True)
    norms = np.where(norms < 1e-12, 1.0, norms)
    out = vecs / norms
    flip = out[..., 2] < 0
    flip |= (out[..., 2] == 0) & (out[..., 1] < 0)
    flip |= (out[..., 2] == 0) & (out[..., 1] == 0) & (out[..., 0] < 0)
    out[flip] *= -1
    return out


def _neighbor_index(graph: SuperpixelGraph, count: int) -> np.ndarray:
    """(S, count) borrow indices: each node's neighbors in id order, cycled.

    Nodes without neighbors point at themselves (repeat the incumbent).
    """
    S = graph.n_segments
    idx = np.empty((S, max(count, 0)), dtype=np.int64)
    if count <= 0:
        return idx
    for i, nbrs in enumerate(_neighbor_lists(graph)):
        idx[i] = [nbrs[c % len(nbrs)] for c in range(count)] if nbrs else i
    return idx


def _centroid_rays(graph: SuperpixelGraph, k: CameraIntrinsics) -> np.ndarray:
    """(S, 3) viewing rays through the superpixel centroids."""
    h, w = graph.shape
    lab = graph.labels.ravel()
    cnt = np.bincount(lab, minlength=graph.n_segments).astype(np.float64)
    vv, uu = np.mgrid[0:h, 0:w].astype(np.float64)
    vc = np.bincount(lab, weights=vv.ravel(), minlength=graph.n_segments) / cnt
    uc = np.bincount(lab, weights=uu.ravel(), minlength=graph.n_segments) / cnt
    return np.stack([(uc - k.c_x) / k.f, (vc - k.c_y) / k.f, np.ones_like(uc)],
                    axis=1)


def _fill_neighbor_slots(particles: ParticleSet, incumbents_n, incumbents_o,
                         nbr_idx, start_slot: int, count: int):
    if count <= 0:
        return
    particles.normals[:, start_slot:start_slot + count] = incumbents_n[nbr_idx]
    particles.offsets[:, start_slot:start_slot + count] = incumbents_o[nbr_idx]


def sample_particles_planar(incumbents, graph: SuperpixelGraph, sigma_t,
                            seed: int, n_p: int,
                            nbr_idx: np.ndarray | None = None) -> ParticleSet:
    """Planar particle proposals: incumbent, Gaussian jitter, neighbor states.

    Slot 0 holds the incumbent, the next floor(n_p / 2) slots jitter the
    incumbent's (a, b, c, d) vector, the remaining slots cycle through the
    neighbors' incumbents in id order.
    """
    if n_p < 2:
        raise InvalidInputError("need at least 2 particles")
    inc_n, inc_o = (incumbents if isinstance(incumbents, tuple)
                    else state_arrays(incumbents))
    S = inc_n.shape[0]
    n_mcmc = n_p // 2
    n_nbr = n_p - 1 - n_mcmc

    particles = ParticleSet(np.empty((S, n_p, 3)), np.empty((S, n_p)))
    particles.normals[:, 0] = inc_n
    particles.offsets[:, 0] = inc_o

    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, 1]))
    base = np.concatenate([inc_n, inc_o[:, None]], axis=1)
    noise = rng.normal(size=(S, n_mcmc, 4)) * np.asarray(sigma_t).reshape(4)
    prop = _normalize_particles(base[:, None, :] + noise)
    particles.normals[:, 1:1 + n_mcmc] = prop[..., :3]
    particles.offsets[:, 1:1 + n_mcmc] = prop[..., 3]

    if nbr_idx is None:
        nbr_idx = _neighbor_index(graph, n_nbr)
    _fill_neighbor_slots(particles, inc_n, inc_o, nbr_idx, 1 + n_mcmc, n_nbr)
    return particles


ROAD_SLOT = 1


def sample_particles_cardboard(incumbents, flags, road: Plane,
                               graph: SuperpixelGraph, k: CameraIntrinsics,
                               sigma_t: float, seed: int, n_p: int,
                               nbr_idx: np.ndarray | None = None,
                               centroid_rays: np.ndarray | None = None) -> ParticleSet:
    """Cardboard proposals: incumbent, road plane, 1-DOF depth jitter, neighbors.

    Slot 0 is the incumbent and slot 1 the road plane (every superpixel can
    join the road).  Jitter slots keep the fixed object normal and perturb
    only the plane offset; remaining slots cycle through neighbor incumbents.
    """
    if n_p < 3:
        raise InvalidInputError("cardboard mode needs at least 3 particles")
    inc_n, inc_o = (incumbents if isinstance(incumbents, tuple)
                    else state_arrays(incumbents))
    S = inc_n.shape[0]
    n_obj = object_normal_from_road(road)
    n_obj, _ = canonical_normal(n_obj, 0.0)
    n_mcmc = (n_p - 2 + 1) // 2
    n_nbr = n_p - 2 - n_mcmc

    particles = ParticleSet(np.empty((S, n_p, 3)), np.empty((S, n_p)))
    particles.normals[:, 0] = inc_n
    particles.offsets[:, 0] = inc_o
    particles.normals[:, ROAD_SLOT] = road.normal
    particles.offsets[:, ROAD_SLOT] = road.offset

    # Base object offset per node: keep the incumbent's offset when it is
    # already an object plane, otherwise anchor the object plane at the
    # incumbent's depth along the region-centroid ray.
    is_object = np.asarray(flags) == OBJECT
    base_off = np.empty(S)
    base_off[is_object] = inc_o[is_object]
    sel = np.nonzero(~is_object)[0]
    if sel.size:
        rays = (centroid_rays if centroid_rays is not None
                else _centroid_rays(graph, k))[sel]
        denom = np.einsum("sc,sc->s", inc_n[sel], rays)
        with np.errstate(divide="ignore"):
            depth = np.where(np.abs(denom) > EPS_RAY, -inc_o[sel] / denom, 1.0)
        base_off[sel] = -(rays * np.maximum(depth, 1e-3)[:, None]) @ n_obj

    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, 2]))
    noise = rng.normal(size=(S, n_mcmc)) * float(sigma_t)
    particles.normals[:, 2:2 + n_mcmc] = n_obj
    particles.offsets[:, 2:2 + n_mcmc] = base_off[:, None] + noise

    if nbr_idx is None:
        nbr_idx = _neighbor_index(graph, n_nbr)
    _fill_neighbor_slots(particles, inc_n, inc_o, nbr_idx, 2 + n_mcmc, n_nbr)
    return particles


@dataclass
class PcbpResult:
    planes: list
    labeling: Labeling
    trace: np.ndarray  # rows (iteration, unary_energy, total_energy)


def pcbp_run(graph: SuperpixelGraph, sparse: SparseDepth, k: CameraIntrinsics,
             params: EnergyParams, config: SolverConfig, init_planes,
             init_flags=None, road: Plane | None = None) -> PcbpResult:
    """Outer PCBP loop: sample particles, solve the discrete MRF, accept if better.

    Returns the final plane per superpixel, the final labeling and the
    per-iteration energy trace.  Total energy is non-increasing by
    construction (worse TRW-S candidates are rejected).
    """
    S = graph.n_segments
    if len(init_planes) != S:
        raise InvalidInputError("init state length must equal superpixel count")
    cardboard = config.mode == CARDBOARD
    if cardboard and (init_flags is None or road is None):
        raise InvalidInputError("cardboard mode needs init flags and a road plane")

    samples = SampleIndex(sparse, graph, k)
    workspace = TableWorkspace(graph, samples, k)
    layout = build_chain_layout(S, graph.adjacency)
    inc_n, inc_o = state_arrays(init_planes)
    flags = np.asarray(init_flags, dtype=np.int64) if cardboard else None

    if cardboard:
        n_mcmc = (config.n_p - 2 + 1) // 2
        nbr_idx = _neighbor_index(graph, config.n_p - 2 - n_mcmc)
        centroids = _centroid_rays(graph, k)
        n_obj, _ = canonical_normal(object_normal_from_road(road), 0.0)
        tables = CardboardTables(workspace, road.normal, n_obj)
    else:
        n_mcmc = config.n_p // 2
        nbr_idx = _neighbor_index(graph, config.n_p - 1 - n_mcmc)

    sigma_vec = config.sigma.copy()
    sigma_depth = config.sigma_depth
    best_energy = np.inf
    trace = []
    labeling = Labeling(np.zeros(S, dtype=np.int64), config.mode,
                        flags.copy() if cardboard else None)

    for it in range(config.n_i):
        seed_t = (config.seed * 100003 + it) & 0x7FFFFFFF
        if cardboard:
            particles = sample_particles_cardboard(
                (inc_n, inc_o), flags, road, graph, k, sigma_depth, seed_t,
                config.n_p, nbr_idx, centroids
            )
            # Which slots carry the road plane (vs the fixed object normal).
            road_mask = np.zeros((S, config.n_p), dtype=bool)
            road_mask[:, 0] = flags == ROAD
            road_mask[:, ROAD_SLOT] = True
            road_mask[:, 2 + n_mcmc:] = (flags == ROAD)[nbr_idx]
            node_costs, edge_costs = build_cost_tables_cardboard(
                particles.offsets, road_mask, tables, params
            )
        else:
            particles = sample_particles_planar(
                (inc_n, inc_o), graph, sigma_vec, seed_t, config.n_p, nbr_idx
            )
            node_costs, edge_costs = build_cost_tables(
                particles.normals, particles.offsets, graph, samples, k, params,
                workspace=workspace
            )
        result = trws_solve(node_costs, graph.adjacency, edge_costs,
                            sweeps=config.trws_iters, layout=layout)
        cand = result.labels
        incumbent_unary, incumbent_total = energy_of_labels(
            node_costs, edge_costs, graph.adjacency, np.zeros(S, dtype=np.int64)
        )
        cand_unary, cand_total = energy_of_labels(
            node_costs, edge_costs, graph.adjacency, cand
        )

        if cand_total <= incumbent_total:
            inc_n = particles.normals[np.arange(S), cand].copy()
            inc_o = particles.offsets[np.arange(S), cand].copy()
            if cardboard:
                flags = np.where(road_mask[np.arange(S), cand], ROAD, OBJECT)
            unary, total = cand_unary, cand_total
            labeling = Labeling(cand.copy(), config.mode,
                                flags.copy() if cardboard else None)
        else:
            unary, total = incumbent_unary, incumbent_total
            labeling = Labeling(np.zeros(S, dtype=np.int64), config.mode,
                                flags.copy() if cardboard else None)

        best_energy = min(best_energy, total)
        trace.append((it, unary, total))
        sigma_vec = sigma_vec * config.rho
        sigma_depth = sigma_depth * config.rho

    planes = [Plane(inc_n[i].copy(), float(inc_o[i])) for i in range(S)]
    return PcbpResult(planes, labeling, np.array(trace, dtype=np.float64).reshape(-1, 3))


def render_depth(state, graph: SuperpixelGraph, k: CameraIntrinsics,
                 fallback: DenseDepth | None = None) -> DenseDepth:
    """Rasterize per-superpixel planes into a dense depth map.

    Degenerate or non-positive plane depths fall back to the superpixel's
    median feasible depth, then to ``fallback``, then to 1 m.
    """
    normals, offsets = state_arrays(state)
    h, w = graph.shape
    vv, uu = np.mgrid[0:h, 0:w].astype(np.float64)
    rays = np.stack([(uu - k.c_x) / k.f, (vv - k.c_y) / k.f, np.ones_like(uu)],
                    axis=-1)
    lab = graph.labels
    denom = np.einsum("hwc,hwc->hw", rays, normals[lab])
    bad = np.abs(denom) <= EPS_RAY
    with np.errstate(divide="ignore", invalid="ignore"):
        depth = np.where(bad, np.nan, -offsets[lab] / denom)
    invalid = bad | ~(depth > 0)

    if invalid.any():
        depth_ok = np.where(invalid, np.nan, depth)
        sums = np.zeros(graph.n_segments)
        for i in range(graph.n_segments):
            region = depth_ok[lab == i]
            feasible = region[np.isfinite(region)]
            if feasible.size:
                sums[i] = np.median(feasible)
            elif fallback is not None:
                fb = fallback.grid[lab == i]
                fb = fb[np.isfinite(fb)]
                sums[i] = np.median(fb) if fb.size else 1.0
            else:
                sums[i] = 1.0
        depth = np.where(invalid, sums[lab], depth)
    return DenseDepth(np.maximum(depth, 1e-3))


def free_space_mask(labeling: Labeling, graph: SuperpixelGraph) -> np.ndarray:
    """Per-pixel boolean mask of road-labeled superpixels (cardboard only)."""
    if labeling.mode != CARDBOARD or labeling.road_flags is None:
        raise ModeMismatchError("free space is only defined for cardboard-mode output")
    return (np.asarray(labeling.road_flags) == ROAD)[graph.labels]
