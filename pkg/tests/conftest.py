"""Shared fixtures: a standard camera, tiny label grids, a small scene."""

import numpy as np
import pytest

from planedepth.geometry import CameraIntrinsics
from planedepth.segmentation import graph_from_labels
from planedepth.synthetic import demo_scene, generate_synthetic


@pytest.fixture
def k500():
    """Pinhole camera with f=500 and principal point (320, 120)."""
    return CameraIntrinsics(f=500.0, c_x=320.0, c_y=120.0)


@pytest.fixture
def strip_graph():
    """12x12 grid split into three 4-column vertical strips (a 3-node chain)."""
    labels = np.repeat(np.array([0, 1, 2], dtype=np.int32), 4)[None, :]
    labels = np.repeat(labels, 12, axis=0)
    return graph_from_labels(labels)


@pytest.fixture(scope="session")
def small_scene():
    """Small synthetic road scene: (FrameBundle with gt, road mask)."""
    scene = demo_scene(width=160, height=96)
    return generate_synthetic(scene)


def random_tree_edges(rng, n_nodes):
    """Uniform random spanning tree edges as an (n-1, 2) array with i < j."""
    edges = []
    for child in range(1, n_nodes):
        parent = int(rng.integers(0, child))
        edges.append((parent, child))
    return np.array(edges, dtype=np.int64).reshape(-1, 2)


def brute_force_map(node_costs, edges, edge_costs):
    """Exhaustive MAP over all label vectors; returns (labels, energy)."""
    S, L = node_costs.shape
    best_energy = np.inf
    best = None
    for flat in range(L**S):
        labels = np.unravel_index(flat, (L,) * S)
        e = sum(node_costs[i, labels[i]] for i in range(S))
        for idx, (i, j) in enumerate(edges):
            e += edge_costs[idx, labels[i], labels[j]]
        if e < best_energy:
            best_energy = e
            best = np.array(labels)
    return best, float(best_energy)
