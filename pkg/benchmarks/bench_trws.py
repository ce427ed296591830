"""Benchmark the compiled TRW-S kernels against the pure-Python fallback.

Times the inner solver on random loopy graphs shaped like real superpixel
problems, then the full optimization stage of the pipeline on a synthetic
scene.  Run as ``python3 benchmarks/bench_trws.py``.
"""

import time

import numpy as np

from planedepth.config import PipelineConfig
from planedepth.mrf import HAVE_EXTENSION, available_backends, trws_solve
from planedepth.pipeline import complete_frame
from planedepth.synthetic import demo_scene, generate_synthetic


def random_loopy_instance(rng, n_nodes, n_labels, avg_degree=5.0):
    full = [(i, j) for i in range(n_nodes) for j in range(i + 1, n_nodes)]
    m = min(len(full), int(avg_degree * n_nodes / 2))
    idx = rng.choice(len(full), size=m, replace=False)
    edges = np.array([full[i] for i in sorted(idx)], dtype=np.int64)
    node_costs = rng.uniform(0, 10, (n_nodes, n_labels))
    edge_costs = rng.uniform(0, 10, (len(edges), n_labels, n_labels))
    return node_costs, edges, edge_costs


def time_backend(backend, instances, sweeps=30, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for node_costs, edges, edge_costs in instances:
            trws_solve(node_costs, edges, edge_costs, sweeps=sweeps,
                       backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_solver():
    rng = np.random.default_rng(0)
    print(f"available backends: {', '.join(available_backends())}")
    print()
    print(f"{'nodes':>6} {'labels':>6} {'python':>10} {'cython':>10} "
          f"{'speedup':>8}")
    for n_nodes, n_labels in ((100, 10), (300, 10), (800, 10), (300, 20)):
        instances = [random_loopy_instance(rng, n_nodes, n_labels)
                     for _ in range(5)]
        t_py = time_backend("python", instances)
        if HAVE_EXTENSION:
            t_cy = time_backend("cython", instances)
            print(f"{n_nodes:>6} {n_labels:>6} {t_py:>9.3f}s {t_cy:>9.3f}s "
                  f"{t_py / t_cy:>7.1f}x")
        else:
            print(f"{n_nodes:>6} {n_labels:>6} {t_py:>9.3f}s {'n/a':>10} "
                  f"{'n/a':>8}")


def bench_pipeline():
    print()
    print("full pipeline on a 640x240 synthetic scene:")
    bundle, _ = generate_synthetic(demo_scene(640, 240))
    for mode, superpixels, n_i, trws_iters in (("planar", 300, 40, 30),
                                               ("cardboard", 450, 20, 10)):
        cfg = PipelineConfig(mode=mode, superpixels=superpixels, n_p=10,
                             n_i=n_i, trws_iters=trws_iters, seed=0)
        t0 = time.perf_counter()
        result = complete_frame(bundle, cfg)
        wall = time.perf_counter() - t0
        stages = ", ".join(f"{k} {v:.2f}s" for k, v in result.timings.items())
        print(f"  {mode:>9}: {wall:.2f}s total ({stages})")


if __name__ == "__main__":
    bench_solver()
    bench_pipeline()
