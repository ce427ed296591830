"""Sequential tree-reweighted message passing on pairwise MRFs.

The graph's edges are decomposed into monotonic chains (each edge in exactly
one chain, node indices strictly increasing along a chain).  Each sweep runs
a forward and a backward pass of exact min-marginal averaging over the
chains: processing nodes in index order keeps every chain's opposite-end
dynamic-programming table valid, so each averaging step provably never
decreases the dual bound ``sum over chains of the chain's minimum energy``.

Two interchangeable backends implement the sweeps: a compiled Cython kernel
(``planedepth._trws_core``) and a pure-NumPy fallback, selected at import
time.  ``benchmarks/bench_trws.py`` compares the two.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InfeasibleNodeError, InvalidInputError

try:
    from . import _trws_core

    HAVE_EXTENSION = True
except ImportError:  # pragma: no cover - depends on build environment
    _trws_core = None
    HAVE_EXTENSION = False

from . import _trws_py

# Infinite costs are clamped to this before message passing; label choices at
# or above INFEASIBLE_LEVEL in the output are treated as infeasible.
BIG_COST = 1e18
INFEASIBLE_LEVEL = 1e17


@dataclass
class ChainLayout:
    """Flattened monotonic-chain decomposition of the graph."""

    chain_off: np.ndarray   # (C+1,) position ranges per chain
    pos_node: np.ndarray    # (P,) global node id per chain position
    chain_edge: np.ndarray  # (P,) edge id linking position p to p+1, -1 at chain ends
    node_pos_off: np.ndarray  # (S+1,) CSR offsets into node_pos
    node_pos: np.ndarray    # positions grouped by node, ascending
    n_nodes: int

    @property
    def n_positions(self):
        return self.pos_node.size


def build_chain_layout(n_nodes: int, edges: np.ndarray) -> ChainLayout:
    """Greedy edge-disjoint decomposition into strictly increasing chains."""
    forward = [[] for _ in range(n_nodes)]
    for e, (i, j) in enumerate(edges):
        forward[i].append((int(j), e))
    for lst in forward:
        lst.sort()

    used = np.zeros(edges.shape[0], dtype=bool)
    chain_nodes, chain_eids, chain_lens = [], [], []
    for i in range(n_nodes):
        for (j, e) in forward[i]:
            if used[e]:
                continue
            nodes = [i]
            eids = []
            cur_j, cur_e = j, e
            while True:
                used[cur_e] = True
                nodes.append(cur_j)
                eids.append(cur_e)
                ext = next(((k, e2) for (k, e2) in forward[cur_j] if not used[e2]), None)
                if ext is None:
                    break
                cur_j, cur_e = ext
            chain_nodes.append(nodes)
            chain_eids.append(eids)
            chain_lens.append(len(nodes))

    covered = np.zeros(n_nodes, dtype=bool)
    for nodes in chain_nodes:
        covered[nodes] = True
    for i in np.nonzero(~covered)[0]:
        chain_nodes.append([int(i)])
        chain_eids.append([])
        chain_lens.append(1)

    chain_off = np.concatenate([[0], np.cumsum(chain_lens)]).astype(np.int64)
    pos_node = np.concatenate(chain_nodes).astype(np.int64)
    chain_edge = np.full(pos_node.size, -1, dtype=np.int64)
    for c, eids in enumerate(chain_eids):
        if eids:
            chain_edge[chain_off[c]:chain_off[c] + len(eids)] = eids

    order = np.argsort(pos_node, kind="stable")
    counts = np.bincount(pos_node, minlength=n_nodes)
    node_pos_off = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return ChainLayout(chain_off, pos_node, chain_edge, node_pos_off,
                       order.astype(np.int64), n_nodes)


@dataclass
class TrwsResult:
    labels: np.ndarray        # (S,) chosen label per node
    lower_bound: float        # best dual certificate
    bounds: np.ndarray        # per-sweep certified lower bounds, non-decreasing
    energy: float             # labeling energy under the input costs
    backend: str


def available_backends():
    return ("python", "cython") if HAVE_EXTENSION else ("python",)


def trws_solve(node_costs, edges, edge_costs, sweeps: int = 30,
               backend: str | None = None,
               layout: ChainLayout | None = None) -> TrwsResult:
    """Approximate MAP labeling and lower bound for a pairwise MRF.

    node_costs  (S, L) unary costs, +inf allowed
    edges       (E, 2) node pairs with i < j
    edge_costs  (E, L, L) pairwise costs indexed (label_i, label_j)
    layout      optional prebuilt chain decomposition of ``edges`` (reuse it
                when solving repeatedly on one graph)

    The per-sweep bound trace is non-decreasing (each entry is the best dual
    certificate seen so far, capped at the primal value to guard float
    roundoff).  On tree-structured graphs the labeling converges to the
    exact optimum.
    """
    node_costs = np.ascontiguousarray(node_costs, dtype=np.float64)
    if node_costs.ndim != 2:
        raise InvalidInputError("node_costs must be (nodes, labels)")
    S, L = node_costs.shape
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    edge_costs = np.ascontiguousarray(edge_costs, dtype=np.float64).reshape(-1, L, L)
    if edges.shape[0] != edge_costs.shape[0]:
        raise InvalidInputError("edges and edge_costs disagree on edge count")
    if edges.size and (np.any(edges[:, 0] >= edges[:, 1]) or np.any(edges < 0)
                       or np.any(edges >= S)):
        raise InvalidInputError("edges must be (i, j) pairs with 0 <= i < j < nodes")
    if sweeps < 1:
        raise InvalidInputError("sweeps must be >= 1")

    infeasible_nodes = ~np.isfinite(node_costs).any(axis=1)
    if infeasible_nodes.any():
        raise InfeasibleNodeError(
            f"nodes {np.nonzero(infeasible_nodes)[0][:5].tolist()} have no finite label"
        )

    nc = np.minimum(node_costs, BIG_COST)
    ec = np.minimum(edge_costs, BIG_COST)

    if backend is None:
        backend = "cython" if HAVE_EXTENSION else "python"
    if backend not in ("python", "cython"):
        raise InvalidInputError(f"unknown backend {backend!r}")
    if backend == "cython" and not HAVE_EXTENSION:
        raise InvalidInputError("cython backend requested but extension not built")

    if layout is None:
        layout = build_chain_layout(S, edges)
    elif layout.n_nodes != S:
        raise InvalidInputError("layout node count disagrees with node_costs")
    r = np.maximum(np.diff(layout.node_pos_off), 1)
    theta = np.ascontiguousarray(nc[layout.pos_node] / r[layout.pos_node, None])

    if backend == "cython":
        bounds = _trws_core.run_sweeps(
            theta, layout.chain_off, layout.pos_node, layout.chain_edge,
            layout.node_pos_off, layout.node_pos, ec, int(sweeps),
        )
    else:
        bounds = _trws_py.run_sweeps(
            theta, layout.chain_off, layout.pos_node, layout.chain_edge,
            layout.node_pos_off, layout.node_pos, ec, int(sweeps),
        )
    bounds = np.asarray(bounds, dtype=np.float64)

    if backend == "cython":
        labels = _trws_core.extract_labels(
            theta, layout.chain_off, layout.chain_edge,
            layout.node_pos_off, layout.node_pos, ec,
        )
    else:
        labels = _extract_labels(theta, layout, ec)
    unary = node_costs[np.arange(S), labels]
    energy = float(unary.sum())
    if edges.size:
        energy += float(
            edge_costs[np.arange(edges.shape[0]),
                       labels[edges[:, 0]], labels[edges[:, 1]]].sum()
        )

    certified = np.minimum(np.maximum.accumulate(bounds), energy)
    return TrwsResult(labels, float(certified[-1]), certified, energy, backend)


def _extract_labels(theta, layout: ChainLayout, ecosts):
    """Sequential labeling from chain min-marginals, earlier nodes conditioned."""
    P, L = theta.shape
    B = _trws_py.compute_backward(theta, layout.chain_off, layout.chain_edge, ecosts)
    cond = np.zeros_like(theta)
    labels = np.empty(layout.n_nodes, dtype=np.int64)
    for i in range(layout.n_nodes):
        ps = layout.node_pos[layout.node_pos_off[i]:layout.node_pos_off[i + 1]]
        score = np.zeros(L)
        for p in ps:
            score += cond[p] + theta[p] + B[p]
        x = int(np.argmin(score))
        labels[i] = x
        for p in ps:
            e = layout.chain_edge[p]
            if e >= 0:
                cond[p + 1] = ecosts[e][x, :]
    return labels
