"""Acceptance gate: one test per release criterion, printing PASS/FAIL lines.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
summary inline; without ``-s`` the lines appear for failing tests only.
"""

import time
from collections import defaultdict

import numpy as np
import pytest

from conftest import random_tree_edges
from planedepth.cli import main as cli_main
from planedepth.config import PipelineConfig
from planedepth.data import DenseDepth
from planedepth.fileio import write_image_png
from planedepth.geometry import Plane, ransac_plane
from planedepth.kitti import read_calib, read_velodyne, write_velodyne
from planedepth.metrics import evaluate
from planedepth.mrf import trws_solve
from planedepth.pipeline import complete_frame
from planedepth.synthetic import demo_scene, generate_synthetic

D_TH = 3.0


def verdict(capsys, criterion, ok, detail):
    with capsys.disabled():
        print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {criterion}: {detail}"


# ---------------------------------------------------------------------------
# Shared pipeline runs (computed once; several criteria read them).

@pytest.fixture(scope="module")
def scene640():
    return generate_synthetic(demo_scene(640, 240))


@pytest.fixture(scope="module")
def planar_run(scene640):
    bundle, _ = scene640
    cfg = PipelineConfig(mode="planar", superpixels=300, n_p=10, n_i=40,
                         trws_iters=30, seed=0)
    t0 = time.perf_counter()
    result = complete_frame(bundle, cfg)
    wall = time.perf_counter() - t0
    return result, evaluate(result.depth, bundle.gt, D_TH), wall


@pytest.fixture(scope="module")
def cardboard_run(scene640):
    bundle, road_mask = scene640
    cfg = PipelineConfig(mode="cardboard", superpixels=450, n_p=10, n_i=20,
                         trws_iters=10, seed=0)
    result = complete_frame(bundle, cfg)
    return result, evaluate(result.depth, bundle.gt, D_TH), road_mask


# ---------------------------------------------------------------------------
# Criterion 1: the dataset-protocol harness runs end to end on a KITTI-layout
# directory (paper-scale metrics are out of desk-scale reach; this verifies
# the protocol code path: lidar projection, crop, completion, evaluation).

def fabricate_kitti(root, width=320, height=220):
    seq = root / "sequences" / "00"
    (seq / "image_2").mkdir(parents=True)
    (seq / "velodyne").mkdir()
    bundle, _ = generate_synthetic(demo_scene(width, height))
    k = bundle.intrinsics
    write_image_png(bundle.image, seq / "image_2" / "000000.png")
    # LiDAR-frame points (x fwd, y left, z up) whose camera projection
    # reproduces the ground truth at a subsampled pixel lattice.
    vv, uu = np.mgrid[0:height:2, 0:width:2]
    z = bundle.gt.grid[vv, uu].ravel()
    x = (uu.ravel() - k.c_x) * z / k.f
    y = (vv.ravel() - k.c_y) * z / k.f
    rot = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])
    velo = np.column_stack([x, y, z]) @ rot  # == rot.T applied row-wise
    pts = np.column_stack([velo, np.zeros(len(z))]).astype(np.float32)
    write_velodyne(pts, seq / "velodyne" / "000000.bin")
    tr = " ".join(f"{v:g}" for v in np.column_stack([rot, np.zeros(3)]).ravel())
    (seq / "calib.txt").write_text(
        f"P2: {k.f:g} 0 {k.c_x:g} 0 0 {k.f:g} {k.c_y:g} 0 0 0 1 0\n"
        f"Tr: {tr}\n"
    )
    return root


def test_criterion_1_dataset_protocol_harness(tmp_path, capsys):
    root = fabricate_kitti(tmp_path / "kitti")
    cli_main(["paper-protocol", "--kitti-root", str(root),
              "--sequence", "00", "--stride", "1", "--frames", "1",
              "--mode", "cardboard", "--superpixels", "120",
              "--n_i", "4", "--trws_iters", "5"])
    out = capsys.readouterr().out
    ok = "AVERAGE over 1 frames" in out
    mae = float(out.rsplit("MAE", 1)[1].split()[0]) if ok else float("nan")
    ok = ok and np.isfinite(mae) and mae < 1.0
    verdict(capsys, 1, ok, f"harness ran 1 frame, MAE {mae:.3f} m")


# ---------------------------------------------------------------------------
# Criterion 2: planar mode at 640x240, (6, 3) sample lattice, 300
# superpixels, n_p=10, n_i=40 reaches MAE < 0.3 m and BPR(3 m) < 5%
# within 120 s.

def test_criterion_2_planar_quality(planar_run, capsys):
    _, report, wall = planar_run
    ok = report.mae < 0.3 and report.bpr < 0.05 and wall < 120.0
    verdict(capsys, 2, ok,
            f"MAE {report.mae:.3f} m, BPR {100 * report.bpr:.2f}%, "
            f"{wall:.1f} s")


# ---------------------------------------------------------------------------
# Criterion 3: cardboard mode with 5 shadow patches keeps free-space
# IoU >= 0.9 and degrades MAE by at most 10% vs the clean scene.

def test_criterion_3_shadow_robustness(cardboard_run, capsys):
    clean_result, clean_report, _ = cardboard_run
    bundle, road_mask = generate_synthetic(demo_scene(640, 240, n_shadows=5))
    cfg = PipelineConfig(mode="cardboard", superpixels=450, n_p=10, n_i=20,
                         trws_iters=10, seed=0)
    result = complete_frame(bundle, cfg)
    report = evaluate(result.depth, bundle.gt, D_TH)
    inter = (result.free_space & road_mask).sum()
    union = (result.free_space | road_mask).sum()
    iou = inter / union
    degrade = report.mae / clean_report.mae - 1.0
    ok = iou >= 0.9 and degrade <= 0.10
    verdict(capsys, 3, ok,
            f"free-space IoU {iou:.3f}, MAE change {100 * degrade:+.1f}%")


# ---------------------------------------------------------------------------
# Criterion 4: the total energy trace is monotone non-increasing and the
# unary term flattens (last-5-iteration relative change below 5%).

def test_criterion_4_energy_convergence(planar_run, cardboard_run, capsys):
    planar_result = planar_run[0]
    cardboard_result = cardboard_run[0]
    details = []
    ok = True
    for name, result in (("planar", planar_result),
                         ("cardboard", cardboard_result)):
        totals = result.trace[:, 2]
        unary = result.trace[:, 1]
        monotone = bool(np.all(np.diff(totals) <= 1e-9 * np.abs(totals[:-1])))
        rel = abs(unary[-1] - unary[-5]) / max(abs(unary[-5]), 1e-12)
        ok = ok and monotone and rel < 0.05
        details.append(f"{name}: monotone={monotone}, "
                       f"unary last-5 change {100 * rel:.2f}%")
    verdict(capsys, 4, ok, "; ".join(details))


# ---------------------------------------------------------------------------
# Criterion 5: the discrete solver is exact on 200 random trees (<= 10
# nodes, <= 4 labels) and bound-consistent on 200 random loopy graphs
# (<= 8 nodes): monotone bound trace, bound <= labeling energy.

def exact_tree_map_energy(node_costs, edges, edge_costs):
    """Independent min-sum tree DP (leaf-to-root elimination)."""
    S, L = node_costs.shape
    nbrs = defaultdict(list)
    for idx, (i, j) in enumerate(edges):
        nbrs[i].append((j, idx, True))
        nbrs[j].append((i, idx, False))
    order, seen, stack = [], {0}, [0]
    parent = {0: None}
    while stack:
        node = stack.pop()
        order.append(node)
        for nbr, idx, node_is_i in nbrs[node]:
            if nbr not in seen:
                seen.add(nbr)
                parent[nbr] = (node, idx, node_is_i)
                stack.append(nbr)
    cost = node_costs.copy()
    for node in reversed(order[1:]):
        par, idx, par_is_i = parent[node]
        table = edge_costs[idx] if par_is_i else edge_costs[idx].T
        cost[par] += (table + cost[node][None, :]).min(axis=1)
    return float(cost[0].min())


def test_criterion_5_solver_exactness_and_bounds(capsys):
    rng = np.random.default_rng(42)
    tree_fail = 0
    for _ in range(200):
        n = int(rng.integers(2, 11))
        L = int(rng.integers(2, 5))
        edges = random_tree_edges(rng, n)
        node_costs = rng.uniform(0, 10, (n, L))
        edge_costs = rng.uniform(0, 10, (len(edges), L, L))
        res = trws_solve(node_costs, edges, edge_costs, sweeps=30)
        want = exact_tree_map_energy(node_costs, edges, edge_costs)
        if not (abs(res.energy - want) < 1e-8
                and abs(res.lower_bound - want) < 1e-8):
            tree_fail += 1

    loopy_fail = 0
    for _ in range(200):
        n = int(rng.integers(3, 9))
        L = int(rng.integers(2, 5))
        full = np.array([(i, j) for i in range(n) for j in range(i + 1, n)],
                        dtype=np.int64)
        m = int(rng.integers(n, len(full) + 1))
        edges = full[rng.choice(len(full), size=m, replace=False)]
        edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
        node_costs = rng.uniform(0, 10, (n, L))
        edge_costs = rng.uniform(0, 10, (len(edges), L, L))
        res = trws_solve(node_costs, edges, edge_costs, sweeps=20)
        e = node_costs[np.arange(n), res.labels].sum()
        for idx, (i, j) in enumerate(edges):
            e += edge_costs[idx, res.labels[i], res.labels[j]]
        if not (np.all(np.diff(res.bounds) >= 0)
                and res.lower_bound <= res.energy + 1e-9
                and abs(res.energy - e) < 1e-9):
            loopy_fail += 1

    ok = tree_fail == 0 and loopy_fail == 0
    verdict(capsys, 5, ok,
            f"200 trees exact ({tree_fail} fail), "
            f"200 loopy bound-consistent ({loopy_fail} fail)")


# ---------------------------------------------------------------------------
# Criterion 6: serialization roundtrips within 1e-6 and seeded RANSAC
# recovers a plane normal within 1 degree over 50 seeds (100 inliers,
# 10% outliers, tolerance 0.15).

def test_criterion_6_roundtrips_and_ransac(tmp_path, capsys):
    rng = np.random.default_rng(0)
    pts = rng.uniform(-60, 60, (500, 4)).astype(np.float32)
    write_velodyne(pts, tmp_path / "scan.bin")
    velo_err = float(np.max(np.abs(read_velodyne(tmp_path / "scan.bin") - pts)))

    values = rng.uniform(-1000, 1000, 12)
    (tmp_path / "calib.txt").write_text(
        "Tr: " + " ".join(f"{v:.9g}" for v in values) + "\n")
    calib_err = float(np.max(np.abs(read_calib(tmp_path / "calib.txt")["Tr"]
                                    - values)))
    roundtrip_err = max(velo_err, calib_err / 1000.0)  # relative for calib

    worst_angle = 0.0
    truth = Plane(np.array([0.0, 1.0, 0.0]), -1.5)
    for seed in range(50):
        r = np.random.default_rng(seed)
        inliers = np.column_stack([r.uniform(-10, 10, 100),
                                   np.full(100, 1.5),
                                   r.uniform(4, 40, 100)])
        inliers += r.normal(0, 0.02, inliers.shape)
        outliers = r.uniform(-10, 10, (10, 3))
        cloud = np.vstack([inliers, outliers])
        plane, _ = ransac_plane(cloud, inlier_tol=0.15, rng_seed=seed)
        cos = min(abs(float(plane.normal @ truth.normal)), 1.0)
        worst_angle = max(worst_angle, np.degrees(np.arccos(cos)))

    ok = roundtrip_err < 1e-6 and worst_angle < 1.0
    verdict(capsys, 6, ok,
            f"roundtrip err {roundtrip_err:.2e}, "
            f"worst RANSAC normal error {worst_angle:.3f} deg")


# ---------------------------------------------------------------------------
# Criterion 7: metric worked examples hold at full precision and BPR is
# monotone non-increasing in the threshold.

def test_criterion_7_metric_examples(capsys):
    gt = DenseDepth(np.full((4, 4), 10.0))
    r1 = evaluate(DenseDepth(np.full((4, 4), 11.0)), gt, D_TH)
    exact = (r1.mre == 0.10 and r1.mae == 1.0 and r1.bpr == 0.0)

    gt2 = DenseDepth(np.array([[10.0, 20.0]]))
    r2 = evaluate(DenseDepth(np.array([[14.0, 20.0]])), gt2, D_TH)
    exact = exact and r2.mre == 0.20 and r2.mae == 2.0 and r2.bpr == 0.5

    r3 = evaluate(gt, gt, D_TH)
    exact = exact and r3.mre == 0.0 and r3.mae == 0.0 and r3.bpr == 0.0

    rng = np.random.default_rng(1)
    g = DenseDepth(rng.uniform(1, 30, (16, 16)))
    p = DenseDepth(np.abs(g.grid + rng.normal(0, 2, (16, 16))) + 0.1)
    bprs = [evaluate(p, g, t).bpr for t in (0.5, 1.0, 2.0, 3.0, 5.0)]
    monotone = all(a >= b for a, b in zip(bprs, bprs[1:]))

    ok = exact and monotone
    verdict(capsys, 7, ok,
            f"worked examples exact={exact}, BPR monotone={monotone}")


# ---------------------------------------------------------------------------
# Criterion 8: with iteration counts 40 (planar) vs 20 (cardboard) and
# superpixel counts scaled 300 vs 450 (the 800:1200 default ratio), the
# cardboard optimization stage takes at most half the planar one.  The
# comparison is on the optimization stage because segmentation and
# initialization are identical between modes (itemized in timings).

def test_criterion_8_cardboard_speedup(planar_run, cardboard_run, capsys):
    planar_opt = planar_run[0].timings["optimization"]
    cardboard_opt = cardboard_run[0].timings["optimization"]
    ratio = cardboard_opt / planar_opt
    ok = ratio <= 0.5
    verdict(capsys, 8, ok,
            f"optimization stage: cardboard {cardboard_opt:.2f} s / "
            f"planar {planar_opt:.2f} s = {ratio:.2f}x")


# ---------------------------------------------------------------------------
# Criterion 9: repeat runs are bit-identical (depth PNG and trace CSV),
# exercised through the command-line entry point.

def test_criterion_9_determinism(tmp_path, capsys):
    scene = tmp_path / "scene"
    cli_main(["synth", "--out", str(scene),
              "--width", "640", "--height", "240"])
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        cli_main(["complete",
                  "--image", str(scene / "image.png"),
                  "--sparse", str(scene / "sparse.png"),
                  "--intrinsics", str(scene / "intrinsics.txt"),
                  "--mode", "planar", "--out", str(out),
                  "--superpixels", "300", "--n_i", "40"])
        outputs.append(((out / "depth.png").read_bytes(),
                        (out / "trace.csv").read_bytes()))
    same_png = outputs[0][0] == outputs[1][0]
    same_csv = outputs[0][1] == outputs[1][1]
    ok = same_png and same_csv
    verdict(capsys, 9, ok,
            f"depth PNG identical={same_png}, trace CSV identical={same_csv}")
