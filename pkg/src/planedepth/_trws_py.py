"""Pure-NumPy backend for the chain-based TRW-S sweeps.

Mirrors the Cython kernel in ``_trws_core.pyx``; used when the compiled
extension is unavailable.
"""

from __future__ import annotations

import numpy as np


def compute_backward(theta, chain_off, chain_edge, ecosts):
    """Suffix DP tables B[p][x] = min cost of the chain after position p."""
    B = np.zeros_like(theta)
    for c in range(chain_off.size - 1):
        for p in range(chain_off[c + 1] - 2, chain_off[c] - 1, -1):
            t = theta[p + 1] + B[p + 1]
            B[p] = np.min(ecosts[chain_edge[p]] + t[None, :], axis=1)
    return B


def compute_forward(theta, chain_off, chain_edge, ecosts):
    """Prefix DP tables F[p][x] = min cost of the chain before position p."""
    F = np.zeros_like(theta)
    for c in range(chain_off.size - 1):
        for p in range(chain_off[c] + 1, chain_off[c + 1]):
            s = F[p - 1] + theta[p - 1]
            F[p] = np.min(s[:, None] + ecosts[chain_edge[p - 1]], axis=0)
    return F


def chain_bound(theta, chain_off, chain_edge, ecosts):
    """Dual bound: sum over chains of the chain's exact minimum energy."""
    bound = 0.0
    for c in range(chain_off.size - 1):
        f = theta[chain_off[c]].copy()
        for p in range(chain_off[c] + 1, chain_off[c + 1]):
            f = theta[p] + np.min(f[:, None] + ecosts[chain_edge[p - 1]], axis=0)
        bound += float(f.min())
    return bound


def run_sweeps(theta, chain_off, pos_node, chain_edge, node_pos_off, node_pos,
               ecosts, sweeps):
    """In-place min-marginal-averaging sweeps; returns per-sweep bounds."""
    is_first = np.zeros(pos_node.size, dtype=bool)
    is_first[chain_off[:-1]] = True
    n_nodes = node_pos_off.size - 1
    bounds = np.empty(sweeps)

    for s in range(sweeps):
        # Forward pass: B exact from sweep start, F maintained incrementally.
        B = compute_backward(theta, chain_off, chain_edge, ecosts)
        F = np.zeros_like(theta)
        for i in range(n_nodes):
            ps = node_pos[node_pos_off[i]:node_pos_off[i + 1]]
            mus = np.empty((ps.size, theta.shape[1]))
            for idx, p in enumerate(ps):
                if not is_first[p]:
                    sv = F[p - 1] + theta[p - 1]
                    F[p] = np.min(sv[:, None] + ecosts[chain_edge[p - 1]], axis=0)
                mus[idx] = F[p] + theta[p] + B[p]
            mubar = mus.mean(axis=0)
            for idx, p in enumerate(ps):
                theta[p] += mubar - mus[idx]

        # Backward pass: F exact, B maintained incrementally.
        F = compute_forward(theta, chain_off, chain_edge, ecosts)
        B = np.zeros_like(theta)
        for i in range(n_nodes - 1, -1, -1):
            ps = node_pos[node_pos_off[i]:node_pos_off[i + 1]]
            mus = np.empty((ps.size, theta.shape[1]))
            for idx, p in enumerate(ps):
                if chain_edge[p] >= 0:
                    t = theta[p + 1] + B[p + 1]
                    B[p] = np.min(ecosts[chain_edge[p]] + t[None, :], axis=1)
                mus[idx] = F[p] + theta[p] + B[p]
            mubar = mus.mean(axis=0)
            for idx, p in enumerate(ps):
                theta[p] += mubar - mus[idx]

        bounds[s] = chain_bound(theta, chain_off, chain_edge, ecosts)
    return bounds
