"""CRF energy: squared-error data term and truncated-l1 smoothness terms.

Scalar functions mirror the per-superpixel / per-edge definitions; the
``build_cost_tables`` helper evaluates the same quantities vectorized over
all particles for the inner discrete solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SparseDepth
from .exceptions import InvalidInputError
from .geometry import EPS_RAY, CameraIntrinsics, Plane
from .segmentation import SuperpixelGraph

try:
    from . import _trws_core as _kernels
except ImportError:  # pragma: no cover - depends on build environment
    _kernels = None


@dataclass(frozen=True)
class EnergyParams:
    theta1: float = 1.0   # data weight
    theta2: float = 0.2   # depth-smoothness weight
    theta3: float = 20.0  # orientation-smoothness weight
    tau1: float = 3.0     # depth truncation, meters
    tau2: float = 0.3     # orientation truncation

    def __post_init__(self):
        if min(self.theta1, self.theta2, self.theta3) < 0:
            raise InvalidInputError("energy weights must be non-negative")
        if self.tau1 <= 0 or self.tau2 <= 0:
            raise InvalidInputError("truncation thresholds must be positive")


def truncated_l1(x: float, tau: float):
    """Robust penalty min(|x|, tau)."""
    if tau <= 0:
        raise InvalidInputError("tau must be positive")
    return np.minimum(np.abs(x), tau)


def _plane_depths(plane: Plane, u, v, k: CameraIntrinsics):
    """(depth, degenerate) arrays of plane depth at pixels; depth NaN if degenerate."""
    rays = k.ray(np.asarray(u, np.float64), np.asarray(v, np.float64))
    denom = rays @ plane.normal
    degenerate = np.abs(denom) <= EPS_RAY
    with np.errstate(divide="ignore", invalid="ignore"):
        depth = np.where(degenerate, np.nan, -plane.offset / denom)
    return depth, degenerate


def data_term(s: Plane, region_samples, k: CameraIntrinsics, theta1: float) -> float:
    """theta1 * sum of squared depth discrepancies at the region's samples.

    ``region_samples`` is an (N, 3) array of (u, v, depth) rows; empty input
    gives 0.  Degenerate rays or non-positive predicted depth make the plane
    infeasible: +inf.
    """
    samples = np.asarray(region_samples, dtype=np.float64).reshape(-1, 3)
    if samples.shape[0] == 0:
        return 0.0
    depth, degenerate = _plane_depths(s, samples[:, 0], samples[:, 1], k)
    if np.any(degenerate) or np.any(depth[~degenerate] <= 0):
        return float("inf")
    return float(theta1 * np.sum((depth - samples[:, 2]) ** 2))


def smoothness_depth(s_i: Plane, s_j: Plane, boundary, k: CameraIntrinsics,
                     tau1: float) -> float:
    """Sum over shared boundary pixels of truncated depth disagreement.

    ``boundary`` is an (N, 2) array of (v, u) pixel rows.  Degenerate rays
    contribute the maximum penalty ``tau1``.
    """
    bp = np.asarray(boundary, dtype=np.float64).reshape(-1, 2)
    if bp.shape[0] == 0:
        raise InvalidInputError("boundary must be nonempty")
    di, deg_i = _plane_depths(s_i, bp[:, 1], bp[:, 0], k)
    dj, deg_j = _plane_depths(s_j, bp[:, 1], bp[:, 0], k)
    deg = deg_i | deg_j
    vals = np.where(deg, tau1, truncated_l1(np.where(deg, 0.0, di - dj), tau1))
    return float(vals.sum())


def smoothness_orient(s_i: Plane, s_j: Plane, tau2: float) -> float:
    """Truncated deviation of |cos angle| between the two normals from 1."""
    cos = abs(float(s_i.normal @ s_j.normal))
    return float(truncated_l1(1.0 - cos, tau2))


def split_samples(sparse: SparseDepth, graph: SuperpixelGraph):
    """Per-superpixel (N_i, 3) arrays of (u, v, depth) sample rows."""
    node = graph.labels[sparse.v, sparse.u]
    rows = np.stack(
        [sparse.u.astype(np.float64), sparse.v.astype(np.float64), sparse.depth],
        axis=1,
    )
    order = np.argsort(node, kind="stable")
    counts = np.bincount(node, minlength=graph.n_segments)
    return list(np.split(rows[order], np.cumsum(counts)[:-1]))


def total_energy(state, graph: SuperpixelGraph, samples_by_region, k: CameraIntrinsics,
                 params: EnergyParams) -> float:
    """Full CRF energy of a plane assignment (scalar reference path)."""
    if len(state) != graph.n_segments:
        raise InvalidInputError("state length must equal superpixel count")
    total = 0.0
    for plane, samples in zip(state, samples_by_region):
        total += data_term(plane, samples, k, params.theta1)
    boundaries = graph.boundaries
    for (i, j) in boundaries:
        total += params.theta2 * smoothness_depth(
            state[i], state[j], boundaries[(i, j)], k, params.tau1
        )
        total += params.theta3 * smoothness_orient(state[i], state[j], params.tau2)
    return float(total)


def unary_energy(state, samples_by_region, k: CameraIntrinsics,
                 params: EnergyParams) -> float:
    """Sum of data terms only (the 'unary' curve of the energy trace)."""
    return float(
        sum(data_term(p, s, k, params.theta1) for p, s in zip(state, samples_by_region))
    )


class SampleIndex:
    """Flat sample arrays with their owning superpixel, for the table builder."""

    def __init__(self, sparse: SparseDepth, graph: SuperpixelGraph,
                 k: CameraIntrinsics):
        self.node = graph.labels[sparse.v, sparse.u].astype(np.int64)
        self.depth = sparse.depth
        self.rays = k.ray(sparse.u.astype(np.float64), sparse.v.astype(np.float64))


def _segment_sum(vals, off):
    """Sum rows of ``vals`` over CSR-style ranges ``off`` (empty ranges -> 0)."""
    c = np.zeros((vals.shape[0] + 1,) + vals.shape[1:])
    np.cumsum(vals, axis=0, out=c[1:])
    return c[off[1:]] - c[off[:-1]]


def _as_u8(a):
    a = np.ascontiguousarray(a)
    return a.view(np.uint8) if a.dtype == np.bool_ else a.astype(np.uint8)


def _edge_sums(di, dj, bad_i, bad_j, b_off, tau):
    """(E, P, P) per-edge sums of truncated boundary depth disagreement."""
    if _kernels is not None:
        return _kernels.edge_table_sums(
            np.ascontiguousarray(di), np.ascontiguousarray(dj),
            _as_u8(bad_i), _as_u8(bad_j), b_off, float(tau),
        )
    diff = np.abs(di[:, :, None] - dj[:, None, :])
    np.minimum(diff, tau, out=diff)
    np.copyto(diff, tau, where=bad_i[:, :, None] | bad_j[:, None, :])
    return _segment_sum(diff, b_off)


class TableWorkspace:
    """Per-graph precomputation shared by repeated cost-table builds.

    Sorts the depth samples by owning superpixel and the boundary pixels by
    edge so that per-node / per-edge sums reduce to contiguous segment sums,
    and caches the back-projection rays, which do not change across the
    outer-loop iterations.
    """

    def __init__(self, graph: SuperpixelGraph, samples: SampleIndex,
                 k: CameraIntrinsics):
        S = graph.n_segments
        order = np.argsort(samples.node, kind="stable")
        self.node = samples.node[order]
        self.depth = samples.depth[order]
        self.rays = samples.rays[order]
        counts = np.bincount(self.node, minlength=S)
        self.node_off = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

        E = graph.adjacency.shape[0]
        self.adjacency = graph.adjacency
        order_b = np.argsort(graph.boundary_edge, kind="stable")
        bp = graph.boundary_pixels[order_b]
        self.b_edge = graph.boundary_edge[order_b]
        self.b_rays = k.ray(bp[:, 1].astype(np.float64), bp[:, 0].astype(np.float64))
        bcounts = np.bincount(self.b_edge, minlength=E)
        self.b_off = np.concatenate([[0], np.cumsum(bcounts)]).astype(np.int64)
        adj = graph.adjacency.astype(np.int64)
        self.b_i = adj[self.b_edge, 0] if E else self.b_edge
        self.b_j = adj[self.b_edge, 1] if E else self.b_edge


def build_cost_tables(normals, offsets, graph: SuperpixelGraph,
                      samples: SampleIndex, k: CameraIntrinsics,
                      params: EnergyParams, workspace: TableWorkspace | None = None):
    """Node and edge cost tables over a particle set.

    normals  (S, P, 3) unit normals per superpixel particle
    offsets  (S, P) plane offsets
    Returns (node_costs (S, P), edge_costs (E, P, P)) where edge e couples
    adjacency pair (i, j) with axes (label_i, label_j).  Pass a prebuilt
    ``workspace`` when calling repeatedly on the same graph.
    """
    ws = workspace if workspace is not None else TableWorkspace(graph, samples, k)
    S, P, _ = normals.shape

    denom = np.einsum("mpc,mc->mp", normals[ws.node], ws.rays)
    bad = np.abs(denom) <= EPS_RAY
    with np.errstate(divide="ignore", invalid="ignore"):
        depth = np.where(bad, np.nan, -offsets[ws.node] / denom)
    infeasible = bad | (depth <= 0)
    sq = (np.where(infeasible, 0.0, depth) - ws.depth[:, None]) ** 2
    # Keep infinities out of the sums so theta1 = 0 and cumulation stay valid.
    node_costs = _segment_sum(np.where(infeasible, 0.0, params.theta1 * sq),
                              ws.node_off)
    n_inf = _segment_sum(infeasible.astype(np.float64), ws.node_off)
    node_costs[n_inf > 0] = np.inf

    E = graph.adjacency.shape[0]
    if not E:
        return node_costs, np.zeros((E, P, P))

    di, bad_i = _depths_for(normals, offsets, ws.b_i, ws.b_rays)
    dj, bad_j = _depths_for(normals, offsets, ws.b_j, ws.b_rays)
    edge_costs = _edge_sums(di, dj, bad_i, bad_j, ws.b_off, params.tau1)
    edge_costs *= params.theta2

    ni = normals[graph.adjacency[:, 0]]
    nj = normals[graph.adjacency[:, 1]]
    cos = np.abs(np.einsum("epc,eqc->epq", ni, nj))
    edge_costs += params.theta3 * np.minimum(np.abs(1.0 - cos), params.tau2)
    return node_costs, edge_costs


def _depths_for(normals, offsets, nodes, rays):
    denom = np.einsum("mpc,mc->mp", normals[nodes], rays)
    bad = np.abs(denom) <= EPS_RAY
    with np.errstate(divide="ignore", invalid="ignore"):
        depth = np.where(bad, 0.0, -offsets[nodes] / denom)
    return depth, bad


class CardboardTables:
    """Closed-form cost-table pieces for the cardboard model.

    Every cardboard particle carries one of exactly two normals: the road
    normal or the fixed object normal.  For a fixed normal the predicted
    depth at a pixel is linear in the plane offset, so the squared data
    term collapses to a per-superpixel quadratic ``A*off^2 + B*off + C``
    whose coefficients depend only on the graph and samples — computed once
    here — and edge depths reduce to ``offset * gain(pixel)``.
    """

    def __init__(self, ws: TableWorkspace, road_normal, object_normal):
        self.ws = ws
        S = ws.node_off.size - 1
        self.quad = {}      # family -> (A, B, C, feasible_pos, feasible_neg) per node
        self.b_gain = {}    # family -> per-boundary-pixel depth gain
        self.b_bad = {}     # family -> per-boundary-pixel degenerate flag
        n_samples = np.diff(ws.node_off)
        for fam, normal in ((0, object_normal), (1, road_normal)):
            t = ws.rays @ np.asarray(normal, dtype=np.float64)
            bad = np.abs(t) <= EPS_RAY
            with np.errstate(divide="ignore"):
                q = np.where(bad, 0.0, -1.0 / t)  # depth = offset * q
            stats = _segment_sum(
                np.stack([q * q, -2.0 * q * ws.depth, ws.depth ** 2,
                          bad.astype(np.float64),
                          (q > 0).astype(np.float64),
                          (q < 0).astype(np.float64)], axis=1),
                ws.node_off,
            )
            a, b, c, n_bad, n_pos, n_neg = stats.T
            # Positive offsets need every sample gain positive and vice versa.
            feas_pos = (n_bad == 0) & (n_neg == 0) & (n_samples > 0)
            feas_neg = (n_bad == 0) & (n_pos == 0) & (n_samples > 0)
            empty = n_samples == 0
            self.quad[fam] = (a, b, c, feas_pos | empty, feas_neg | empty)

            tb = ws.b_rays @ np.asarray(normal, dtype=np.float64)
            bbad = np.abs(tb) <= EPS_RAY
            with np.errstate(divide="ignore"):
                self.b_gain[fam] = np.where(bbad, 0.0, -1.0 / tb)
            self.b_bad[fam] = bbad


def build_cost_tables_cardboard(offsets, road_mask, tables: CardboardTables,
                                params: EnergyParams):
    """Cost tables for cardboard particle sets, exploiting the 1-DOF structure.

    offsets    (S, P) plane offsets
    road_mask  (S, P) True where the particle carries the road normal
    Matches ``build_cost_tables`` on the same particles up to rounding.
    """
    ws = tables.ws
    road_mask = np.asarray(road_mask, dtype=bool)
    pick = lambda obj, road: np.where(road_mask, road[:, None], obj[:, None])

    a0, b0, c0, fp0, fn0 = tables.quad[0]
    a1, b1, c1, fp1, fn1 = tables.quad[1]
    poly = (offsets ** 2 * pick(a0, a1) + offsets * pick(b0, b1) + pick(c0, c1))
    feasible = np.where(offsets > 0, pick(fp0, fp1),
                        np.where(offsets < 0, pick(fn0, fn1),
                                 pick(fp0 & fn0, fp1 & fn1)))
    # The quadratic is a sum of squares; clamp rounding-induced negatives.
    node_costs = np.where(feasible, params.theta1 * np.maximum(poly, 0.0), np.inf)

    E = ws.adjacency.shape[0]
    P = offsets.shape[1]
    if not E:
        return node_costs, np.zeros((E, P, P))

    g0, g1 = tables.b_gain[0], tables.b_gain[1]
    bad0, bad1 = tables.b_bad[0], tables.b_bad[1]
    if _kernels is not None:
        edge_costs = _kernels.cardboard_edge_table_sums(
            np.ascontiguousarray(offsets), _as_u8(road_mask),
            ws.b_i, ws.b_j, g0, g1, _as_u8(bad0), _as_u8(bad1),
            ws.b_off, params.tau1,
        )
    else:
        road_i = road_mask[ws.b_i]
        road_j = road_mask[ws.b_j]
        di = offsets[ws.b_i] * np.where(road_i, g1[:, None], g0[:, None])
        dj = offsets[ws.b_j] * np.where(road_j, g1[:, None], g0[:, None])
        bad_i = np.where(road_i, bad1[:, None], bad0[:, None])
        bad_j = np.where(road_j, bad1[:, None], bad0[:, None])
        edge_costs = _edge_sums(di, dj, bad_i, bad_j, ws.b_off, params.tau1)
    edge_costs *= params.theta2

    # The two normal families are orthogonal: the orientation penalty is 0
    # within a family and the truncation cap tau2 across families.
    cross = (road_mask[ws.adjacency[:, 0], :, None]
             != road_mask[ws.adjacency[:, 1], None, :])
    edge_costs += (params.theta3 * min(1.0, params.tau2)) * cross
    return node_costs, edge_costs


def energy_of_labels(node_costs, edge_costs, adjacency, labels):
    """(unary, total) energy of a discrete labeling under the cost tables."""
    labels = np.asarray(labels)
    unary = float(node_costs[np.arange(node_costs.shape[0]), labels].sum())
    total = unary
    if adjacency.shape[0]:
        total += float(
            edge_costs[np.arange(adjacency.shape[0]),
                       labels[adjacency[:, 0]],
                       labels[adjacency[:, 1]]].sum()
        )
    return unary, total
