"""Command line entry point: ``diffcv register|depth|attack|bench|synth``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from ..autodiff import OptimizerHyper, Tensor, set_num_threads
from ..features import DetectorConfig
from ..geometry import PinholeCamera
from ..losses import AttackLossWeights, DepthLossWeights
from .attack import AttackConfig, attack
from .bench import DEFAULT_BATCHES, bench_sobel
from .depth import depth_schedule, solve_depth
from .image_io import ImageIOError, load_image, save_image
from .manifest import RunManifest
from .pyramid import NumericError, PyramidSchedule
from .register import register
from .synth import (
    blob_noise,
    corner_error,
    normalized_to_pixel_homography,
    plane_scene,
    random_homography,
    textured_homography_pair,
)

log = logging.getLogger("diffcv")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(ValueError):
    pass


def _dtype(args):
    return np.float32 if args.dtype == "f32" else np.float64


def _out(args) -> Path:
    p = Path(args.out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _load(path, dtype) -> Tensor:
    img = load_image(path)
    return img.astype(dtype)


# -- subcommands -----------------------------------------------------------------


def cmd_synth(args) -> RunManifest:
    out = _out(args)
    dtype = _dtype(args)
    h, w = args.size
    man = RunManifest("synth", args.seed, {"kind": args.kind, "size": [h, w]})
    if args.kind == "plane":
        scene = plane_scene(args.seed, (h, w), depth=args.depth, baseline=args.baseline, focal=args.focal,
                            n_views=args.views, dtype=dtype)
        views = []
        for i, (img, cam) in enumerate(zip(scene.images, scene.cameras)):
            path = out / f"view_{i}.png"
            save_image(path, img)
            views.append({"image": path.name, "K": cam.K.data.tolist(), "T": cam.T.data.tolist()})
        scene_file = out / "scene.json"
        scene_file.write_text(json.dumps({"ref": scene.ref, "depth": args.depth, "views": views}, indent=2))
        man.config.update(depth=args.depth, baseline=args.baseline, focal=args.focal, views=args.views)
        man.artifacts = {"scene": str(scene_file), "views": [str(out / v["image"]) for v in views]}
    else:
        pair = textured_homography_pair(args.seed, (h, w), args.max_shift, dtype=dtype)
        save_image(out / "src.png", pair.src)
        save_image(out / "dst.png", pair.dst)
        (out / "homography.json").write_text(json.dumps({"H_normalized": pair.H.tolist()}, indent=2))
        man.config.update(max_shift=args.max_shift)
        man.results = {"H_normalized": pair.H}
        man.artifacts = {"src": str(out / "src.png"), "dst": str(out / "dst.png"),
                         "homography": str(out / "homography.json")}
    return man


def cmd_register(args) -> RunManifest:
    out = _out(args)
    dtype = _dtype(args)
    truth = None
    if args.src or args.dst:
        if not (args.src and args.dst):
            raise UsageError("--src and --dst must be given together")
        src, dst = _load(args.src, dtype), _load(args.dst, dtype)
    else:
        pair = textured_homography_pair(args.seed, tuple(args.size), args.max_shift, dtype=dtype)
        src, dst, truth = pair.src, pair.dst, pair.H
    schedule = PyramidSchedule(args.levels, 2, args.iters, "adam", OptimizerHyper(lr=args.lr))
    man = RunManifest("register", args.seed, {"schedule": schedule.to_dict(), "src": args.src, "dst": args.dst,
                                              "dtype": args.dtype})
    t0 = time.perf_counter()
    res = register(src, dst, schedule)
    man.timings["solve_s"] = time.perf_counter() - t0
    man.losses = res.losses
    h, w = src.shape[-2:]
    man.results = {"H_normalized": res.H, "H_pixels": normalized_to_pixel_homography(res.H, h, w),
                   "initial_loss": res.initial_loss, "final_loss": res.final_loss}
    if truth is not None:
        man.results["H_true_normalized"] = truth
        man.results["corner_error_px"] = corner_error(res.H, truth, h, w)
    for i, wimg in enumerate(res.warped):
        path = out / f"warped_level{len(res.warped) - 1 - i}.png"
        save_image(path, wimg)
        man.artifacts[path.stem] = str(path)
    return man


def _load_scene(scene_dir: Path, dtype):
    meta = json.loads((scene_dir / "scene.json").read_text())
    images, cams = [], []
    for v in meta["views"]:
        img = _load(scene_dir / v["image"], dtype)
        images.append(img)
        cams.append(PinholeCamera(np.array(v["K"], dtype=dtype), np.array(v["T"], dtype=dtype),
                                  img.shape[-2], img.shape[-1]))
    return images, cams, int(meta.get("ref", 0)), meta.get("depth")


def cmd_depth(args) -> RunManifest:
    out = _out(args)
    dtype = _dtype(args)
    if args.scene:
        images, cams, ref, true_depth = _load_scene(Path(args.scene), dtype)
    else:
        scene = plane_scene(args.seed, tuple(args.size), dtype=dtype)
        images, cams, ref, true_depth = scene.images, scene.cameras, scene.ref, 2.0
    schedule = depth_schedule(args.levels, args.iters, args.lr, args.momentum)
    weights = DepthLossWeights(args.alpha, args.lam)
    man = RunManifest("depth", args.seed, {"schedule": schedule.to_dict(), "alpha": args.alpha, "lambda": args.lam,
                                           "scene": args.scene, "dtype": args.dtype})
    t0 = time.perf_counter()
    res = solve_depth(images, cams, ref, schedule, weights, seed=args.seed, anneal=not args.constant_lr,
                      on_level_end=lambda l, d, tr: log.info("level %d: loss %.5f -> %.5f", l, tr[0], tr[-1]))
    man.timings["solve_s"] = time.perf_counter() - t0
    man.losses = res.losses
    man.results = {"initial_loss": res.initial_loss, "final_loss": res.final_loss,
                   "median_depth": float(np.median(res.depth))}
    if true_depth is not None:
        rel = np.abs(res.depth - true_depth) / true_depth
        man.results["median_rel_error"] = float(np.median(rel))
    np.save(out / "depth.npy", res.depth)
    vis = res.depth / max(float(res.depth.max()), 1e-12)
    save_image(out / "depth.png", vis[0])
    man.artifacts = {"depth": str(out / "depth.npy"), "depth_png": str(out / "depth.png")}
    return man


def cmd_attack(args) -> RunManifest:
    out = _out(args)
    dtype = _dtype(args)
    if args.img_a or args.img_b:
        if not (args.img_a and args.img_b):
            raise UsageError("--img-a and --img-b must be given together")
        a, b = _load(args.img_a, dtype), _load(args.img_b, dtype)
    else:
        h, w = args.size
        a = blob_noise(h, w, args.seed, dtype=dtype)
        b = blob_noise(h, w, args.seed + 1000, dtype=dtype)
    h, w = a.shape[-2:]
    if args.homography:
        H = np.array(json.loads(Path(args.homography).read_text())["H_pixels"], dtype=float)
    else:
        H = normalized_to_pixel_homography(random_homography(args.seed + 1, 0.1), h, w)
    cfg = AttackConfig(
        steps=args.steps, lr=args.lr, anneal=not args.constant_lr, k=args.k, pair_radius=args.pair_radius,
        hinge=not args.literal_margin,
        consistency_px=args.consistency_px, ratio=args.ratio, seed=args.seed,
        detector=DetectorConfig(upright=not args.oriented),
        weights=AttackLossWeights(args.alpha, args.beta),
    )
    man = RunManifest("attack", args.seed, {"attack": cfg.to_dict(), "H_b_to_a_pixels": H.tolist(),
                                            "dtype": args.dtype})
    t0 = time.perf_counter()

    def progress(step, rec):
        if step % 50 == 0:
            log.info("step %d: total %.5f loc %.5f desc %.5f reg %.6f", step, rec["total"], rec["loc"],
                     rec["desc"], rec["reg"])

    res = attack(a, b, H, cfg, progress)
    man.timings["solve_s"] = time.perf_counter() - t0
    man.losses = res.losses
    man.results = {"before": res.before.to_dict(), "after": res.after.to_dict()}
    save_image(out / "attacked_a.png", res.img_a)
    save_image(out / "attacked_b.png", res.img_b)
    man.artifacts = {"img_a": str(out / "attacked_a.png"), "img_b": str(out / "attacked_b.png")}
    return man


def cmd_bench(args) -> RunManifest:
    out = _out(args)
    threads = args.bench_threads or [args.threads]
    csv_path = out / "bench_sobel.csv"
    plot_path = out / "bench_sobel.png"
    cfg = {"batches": args.batches, "resolution": args.resolution, "reps": args.reps, "threads": threads,
           "dtype": args.dtype}
    man = RunManifest("bench", args.seed, cfg)
    t0 = time.perf_counter()
    rows = bench_sobel(args.batches, tuple(args.resolution), args.reps, threads, _dtype(args), args.seed,
                       csv_path, plot_path)
    man.timings["bench_s"] = time.perf_counter() - t0
    man.timings["rows"] = rows
    man.artifacts = {"csv": str(csv_path), "plot": str(plot_path)}
    return man


# -- parser ------------------------------------------------------------------------


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _positive_float(s: str) -> float:
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out-dir", default="runs")
    common.add_argument("--threads", type=_positive_int, default=1)
    common.add_argument("--dtype", choices=("f32", "f64"), default="f64")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="diffcv", description="Differentiable computer vision solvers.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="render a synthetic scene with ground truth")
    p.add_argument("--kind", choices=("plane", "homography"), default="homography")
    p.add_argument("--size", type=_positive_int, nargs=2, metavar=("H", "W"), default=None)
    p.add_argument("--max-shift", type=float, default=0.1)
    p.add_argument("--depth", type=_positive_float, default=2.0)
    p.add_argument("--baseline", type=_positive_float, default=0.1)
    p.add_argument("--focal", type=_positive_float, default=300.0)
    p.add_argument("--views", type=_positive_int, default=3)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("register", parents=[common], help="estimate a homography between two images")
    p.add_argument("--src")
    p.add_argument("--dst")
    p.add_argument("--size", type=_positive_int, nargs=2, metavar=("H", "W"), default=(256, 256))
    p.add_argument("--max-shift", type=float, default=0.1)
    p.add_argument("--levels", type=_positive_int, default=6)
    p.add_argument("--iters", type=_positive_int, default=200)
    p.add_argument("--lr", type=_positive_float, default=1e-3)
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("depth", parents=[common], help="multi-view depth of a reference view")
    p.add_argument("--scene", help="directory written by 'synth --kind plane'")
    p.add_argument("--size", type=_positive_int, nargs=2, metavar=("H", "W"), default=(240, 320))
    p.add_argument("--levels", type=_positive_int, default=7)
    p.add_argument("--iters", type=_positive_int, default=500)
    p.add_argument("--lr", type=_positive_float, default=2.0)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--alpha", type=float, default=0.85)
    p.add_argument("--lam", type=float, default=0.1)
    p.add_argument("--constant-lr", action="store_true", help="disable cosine annealing of the learning rate")
    p.set_defaults(func=cmd_depth)

    p = sub.add_parser("attack", parents=[common], help="make unrelated images match under a homography")
    p.add_argument("--img-a")
    p.add_argument("--img-b")
    p.add_argument("--homography", help="JSON file with 'H_pixels' mapping image b to image a")
    p.add_argument("--size", type=_positive_int, nargs=2, metavar=("H", "W"), default=(240, 320))
    p.add_argument("--steps", type=_positive_int, default=1000)
    p.add_argument("--lr", type=_positive_float, default=0.003)
    p.add_argument("--k", type=_positive_int, default=2500)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=10.0)
    p.add_argument("--pair-radius", type=_positive_float, default=8.0)
    p.add_argument("--consistency-px", type=_positive_float, default=3.0)
    p.add_argument("--ratio", type=_positive_float, default=0.8)
    p.add_argument("--literal-margin", action="store_true", help="use the unclamped triplet margin")
    p.add_argument("--oriented", action="store_true", help="rotate patches to their dominant orientation")
    p.add_argument("--constant-lr", action="store_true", help="disable cosine annealing of the learning rate")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("bench", parents=[common], help="time sobel_edges over batch sizes")
    p.add_argument("--batches", type=_positive_int, nargs="+", default=list(DEFAULT_BATCHES))
    p.add_argument("--resolution", type=_positive_int, nargs=2, default=(256, 256))
    p.add_argument("--reps", type=_positive_int, default=500)
    p.add_argument("--bench-threads", type=_positive_int, nargs="+", help="thread counts to sweep")
    p.set_defaults(func=cmd_bench, dtype="f32")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad arguments
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "size", "unset") is None:
        args.size = (240, 320) if args.kind == "plane" else (256, 256)
    set_num_threads(args.threads)
    out = Path(args.out_dir)
    try:
        man = args.func(args)
    except NumericError as exc:
        RunManifest(args.command, args.seed, {"argv": list(argv or sys.argv[1:])}, status=f"numeric failure: {exc}") \
            .write(out / f"{args.command}_manifest.json")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ImageIOError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    path = man.write(out / f"{args.command}_manifest.json")
    print(json.dumps({"manifest": str(path), "result_hash": man.result_hash(), **{
        k: v for k, v in man.to_dict()["results"].items() if not isinstance(v, list)}}, indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
