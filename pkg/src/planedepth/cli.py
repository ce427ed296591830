"""Command-line interface: synth, segment, sparsify, complete, eval, paper-protocol."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .config import PipelineConfig
from .data import FrameBundle, SparseDepth, sparsify
from .exceptions import InvalidInputError, PlaneDepthError
from .fileio import (
    read_depth_png,
    read_image_png,
    write_depth_png,
    write_image_png,
    write_labels_png,
    write_mask_png,
    write_ply,
)
from .geometry import CameraIntrinsics
from .kitti import load_kitti_frame
from .metrics import EvalReport, evaluate
from .pipeline import complete_frame
from .segmentation import slic_segment
from .synthetic import demo_scene, generate_synthetic


def _add_config_flags(parser: argparse.ArgumentParser, skip=()):
    parser.add_argument("--config", type=Path, help="key = value config file")
    for key in PipelineConfig.field_names():
        if key in skip:
            continue
        flag = "lambda" if key == "smoothing_lambda" else key
        parser.add_argument(f"--{flag}", dest=f"cfg_{key}", default=None,
                            metavar="V", help=argparse.SUPPRESS)


def _build_config(args) -> PipelineConfig:
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        cfg.update_from_file(args.config)
    for key in PipelineConfig.field_names():
        val = getattr(args, f"cfg_{key}", None)
        if val is not None:
            cfg.set(key, val)
    return cfg


def _read_intrinsics(path) -> CameraIntrinsics:
    vals = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line or "=" not in line:
                continue
            key, _, value = line.partition("=")
            vals[key.strip()] = float(value)
    try:
        return CameraIntrinsics(vals["f"], vals["c_x"], vals["c_y"])
    except KeyError as exc:
        raise InvalidInputError(f"intrinsics file {path} missing key {exc}") from exc


def _write_intrinsics(k: CameraIntrinsics, path):
    with open(path, "w") as fh:
        fh.write(f"f = {k.f!r}\nc_x = {k.c_x!r}\nc_y = {k.c_y!r}\n")


def cmd_synth(args):
    scene = demo_scene(width=args.width, height=args.height,
                       n_shadows=args.shadows, seed=args.seed)
    scene.h_factor, scene.v_factor = args.h_factor, args.v_factor
    bundle, road_mask = generate_synthetic(scene)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_image_png(bundle.image, out / "image.png")
    write_depth_png(bundle.gt, out / "gt.png")
    grid = np.full((bundle.sparse.height, bundle.sparse.width), np.nan)
    grid[bundle.sparse.v, bundle.sparse.u] = bundle.sparse.depth
    from .data import DenseDepth

    write_depth_png(DenseDepth(grid), out / "sparse.png")
    write_mask_png(road_mask, out / "road_mask.png")
    _write_intrinsics(bundle.intrinsics, out / "intrinsics.txt")
    print(f"wrote synthetic scene to {out}")


def cmd_segment(args):
    image = read_image_png(args.image)
    cfg = _build_config(args)
    n = cfg.resolved_superpixels()
    graph = slic_segment(image, n, cfg.compactness, cfg.slic_iters)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_labels_png(graph.labels, out / "labels.png")
    overlay = image.copy()
    overlay[graph.boundary_pixels[:, 0], graph.boundary_pixels[:, 1]] = (255, 0, 0)
    write_image_png(overlay, out / "overlay.png")
    print(f"{graph.n_segments} segments -> {out}")


def cmd_sparsify(args):
    dense = read_depth_png(args.depth)
    sparse = sparsify(dense, args.h_factor, args.v_factor)
    grid = np.full((sparse.height, sparse.width), np.nan)
    grid[sparse.v, sparse.u] = sparse.depth
    from .data import DenseDepth

    write_depth_png(DenseDepth(grid), args.out)
    print(f"kept {len(sparse)} samples -> {args.out}")


def _load_bundle(args) -> FrameBundle:
    if args.velodyne or args.calib:
        if not (args.velodyne and args.calib and args.image):
            raise InvalidInputError("KITTI input needs --image, --velodyne and --calib")
        return load_kitti_frame(args.image, args.velodyne, args.calib)
    if not (args.image and args.sparse and args.intrinsics):
        raise InvalidInputError(
            "need --image, --sparse and --intrinsics (or KITTI --velodyne/--calib)"
        )
    image = read_image_png(args.image)
    sparse_grid = read_depth_png(args.sparse)
    sparse = SparseDepth.from_grid(sparse_grid.grid)
    return FrameBundle(image, sparse, _read_intrinsics(args.intrinsics))


def cmd_complete(args):
    cfg = _build_config(args)
    if args.mode:
        cfg.mode = args.mode
    bundle = _load_bundle(args)
    result = complete_frame(bundle, cfg)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_depth_png(result.depth, out / "depth.png")
    image = bundle.image
    intr = bundle.intrinsics
    if cfg.crop_height > 0:
        # Match the crop applied inside the pipeline.
        image = image[-cfg.crop_height:]
        intr = CameraIntrinsics(intr.f, intr.c_x,
                                intr.c_y - (bundle.image.shape[0] - cfg.crop_height))
    write_ply(result.depth, image, intr, out / "cloud.ply",
              road_mask=result.free_space)
    (out / "trace.csv").write_text(result.trace_csv())
    if result.free_space is not None:
        write_mask_png(result.free_space, out / "freespace.png")
    cfg.write(out / "effective_config.txt")
    with open(out / "timings.txt", "w") as fh:
        for stage, secs in result.timings.items():
            fh.write(f"{stage} = {secs:.3f} s\n")
    total = sum(result.timings.values())
    print(f"completed frame in {total:.2f} s -> {out}")


def cmd_eval(args):
    pred = read_depth_png(args.pred)
    gt = read_depth_png(args.gt)
    report = evaluate(pred, gt, d_th=args.d_th)
    print(report)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(EvalReport.CSV_HEADER + "\n" + report.csv_line() + "\n")


def cmd_paper_protocol(args):
    """Paper-scale harness: every Nth frame of a KITTI odometry sequence.

    Not part of CI; requires a local KITTI directory laid out as
    ``<root>/sequences/<seq>/{image_2, velodyne, calib.txt}``.
    """
    cfg = _build_config(args)
    if args.mode:
        cfg.mode = args.mode
    cfg.crop_height = cfg.crop_height or 200
    seq = Path(args.kitti_root) / "sequences" / args.sequence
    images = sorted((seq / "image_2").glob("*.png"))[::args.stride]
    if args.frames:
        images = images[:args.frames]
    if not images:
        raise InvalidInputError(f"no frames found under {seq}")

    reports = []
    for img_path in images:
        velo = seq / "velodyne" / (img_path.stem + ".bin")
        bundle = load_kitti_frame(img_path, velo, seq / "calib.txt")
        # Ground truth: the full projected LiDAR; input: the sparsified lattice.
        gt_bundle = bundle
        sparse_in = sparsify(bundle.sparse, cfg.h_factor, cfg.v_factor)
        bundle = FrameBundle(bundle.image, sparse_in, bundle.intrinsics)
        result = complete_frame(bundle, cfg)
        from .data import crop_lower_half

        gt_crop = crop_lower_half(gt_bundle, cfg.crop_height)
        from .data import DenseDepth

        gt_grid = np.full(result.depth.grid.shape, np.nan)
        gt_grid[gt_crop.sparse.v, gt_crop.sparse.u] = gt_crop.sparse.depth
        report = evaluate(result.depth, DenseDepth(gt_grid), d_th=cfg.d_th)
        reports.append(report)
        print(f"{img_path.stem}: {report}")

    mre = np.mean([r.mre for r in reports])
    bpr = np.mean([r.bpr for r in reports])
    mae = np.mean([r.mae for r in reports])
    print(f"AVERAGE over {len(reports)} frames: "
          f"MRE {100 * mre:.2f}%  BPR {100 * bpr:.2f}%  MAE {mae:.3f} m")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="planedepth",
        description="Sparse-to-dense depth completion with a piecewise-planar CRF",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene bundle")
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=240)
    p.add_argument("--shadows", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h_factor", type=int, default=6)
    p.add_argument("--v_factor", type=int, default=3)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("segment", help="debug SLIC segmentation")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("sparsify", help="lattice-downsample a depth PNG")
    p.add_argument("--depth", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--h_factor", type=int, default=6)
    p.add_argument("--v_factor", type=int, default=3)
    p.set_defaults(func=cmd_sparsify)

    p = sub.add_parser("complete", help="run the full completion pipeline")
    p.add_argument("--image")
    p.add_argument("--sparse", help="sparse depth as 16-bit PNG (x256)")
    p.add_argument("--intrinsics", help="key = value file with f, c_x, c_y")
    p.add_argument("--velodyne", help="KITTI velodyne .bin (with --calib)")
    p.add_argument("--calib", help="KITTI calibration text file")
    p.add_argument("--mode", choices=["planar", "cardboard"])
    p.add_argument("--out", required=True)
    _add_config_flags(p, skip=("mode",))
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("eval", help="evaluate a depth PNG against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--d_th", type=float, default=3.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("paper-protocol",
                       help="optional KITTI odometry harness (not part of CI)")
    p.add_argument("--kitti-root", required=True)
    p.add_argument("--sequence", default="00")
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--frames", type=int, default=0)
    p.add_argument("--mode", choices=["planar", "cardboard"])
    _add_config_flags(p, skip=("mode",))
    p.set_defaults(func=cmd_paper_protocol)

    args = parser.parse_args(argv)
    try:
        args.func(args)
    except PlaneDepthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
