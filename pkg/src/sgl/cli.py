"""Command-line interface: ``sgl {synth,segment,classify,sweep,eval}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .core import (TrainingSet, generate_synthetic_scene, load_cube, load_raster,
                   make_scene_spec, save_cube, save_raster)
from .dimred import pca_fit, pca_reduce
from .errors import DataError, NumericalError, StageError
from .metrics import compute_metrics
from .pipeline import PRESETS, RunConfig, normalize_cube, run_pipeline, sweep_k, sweep_to_csv
from .render import boundary_overlay, render_map, write_png, write_ppm, png_available
from .superpixel import HmsConfig, compute_covariance_field, hms_segment

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class UsageError(Exception):
    pass


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _tiles(text: str) -> tuple[int, int]:
    try:
        r, c = text.lower().split("x")
        return int(r), int(c)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ROWSxCOLS, got {text!r}") from None


# flag name -> RunConfig / sub-config field
_OVERRIDES = {
    "k": "k_init", "m": "compactness", "cov_window": "cov_window", "cov_neighbors": "cov_neighbors",
    "max_iters": "max_iters", "kernel_beta": "kernel_beta", "sigma_s": "sigma_s", "sigma_l": "sigma_l",
    "knn": "k_nn", "mu": "mu", "per_class": "per_class", "seed": "seed", "h": "h",
    "pca_threshold": "pca_threshold", "label_lift": "label_lift", "normalize": "normalize",
}
_SWITCHES = {"pca_standardize": "pca_standardize", "eval_include_train": "eval_include_train",
             "mu_jitter": "mu_jitter"}


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON run configuration to start from")
    p.add_argument("--preset", choices=sorted(PRESETS), help="dataset preset")
    g = p.add_argument_group("segmentation")
    g.add_argument("--k", type=int, help="requested superpixel count")
    g.add_argument("--m", type=float, help="compactness")
    g.add_argument("--cov-window", type=int)
    g.add_argument("--cov-neighbors", type=int)
    g.add_argument("--max-iters", type=int)
    g = p.add_argument_group("graph and propagation")
    g.add_argument("--kernel-beta", type=float)
    g.add_argument("--sigma-s", type=float)
    g.add_argument("--sigma-l", type=float)
    g.add_argument("--knn", type=int)
    g.add_argument("--mu", type=float)
    g.add_argument("--mu-jitter", action="store_true", help="draw mu (and preset sigma_l) per seed")
    g.add_argument("--h", type=float, help="neighbour-weighting kernel")
    g.add_argument("--label-lift", choices=["labeled", "all"])
    g = p.add_argument_group("data")
    g.add_argument("--per-class", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--pca-threshold", type=float)
    g.add_argument("--pca-standardize", action="store_true")
    g.add_argument("--normalize", choices=["none", "minmax"])
    g.add_argument("--eval-include-train", action="store_true")


def _run_config(args) -> RunConfig:
    try:
        if args.config is not None:
            cfg = RunConfig.from_dict(json.loads(Path(args.config).read_text()))
        elif args.preset:
            cfg = RunConfig.from_preset(args.preset)
        else:
            cfg = RunConfig()
        kw = {f: getattr(args, a) for a, f in _OVERRIDES.items() if getattr(args, a, None) is not None}
        kw.update({f: True for a, f in _SWITCHES.items() if getattr(args, a, False)})
        return cfg.with_overrides(**kw)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    except OSError as exc:
        raise DataError(str(exc)) from exc


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    try:
        spec = make_scene_spec(args.width, args.height, args.bands, args.classes, args.noise_factor,
                               args.tiles, None, args.seed, args.scale)
        cube, gt = generate_synthetic_scene(spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = save_cube(args.out, cube, gt)
    print(json.dumps({"header": str(out), "noise_sigma": spec.noise_sigma,
                      "min_separation": spec.min_separation}, sort_keys=True))
    return EXIT_OK


def cmd_segment(args) -> int:
    cube, _ = load_cube(args.cube)
    try:
        cfg = HmsConfig(k_init=args.k, compactness=args.m, cov_window=args.cov_window,
                        max_iters=args.max_iters)
        if args.normalize == "minmax":
            cube = normalize_cube(cube)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    with threadpool_limits(limits=1):
        img = pca_reduce(cube, pca_fit(cube, args.pca_threshold))
        try:
            cfg.check_image(img.n_pixels)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        smap = hms_segment(img, compute_covariance_field(img, cfg), cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_raster(out / "assignment.json", smap.assignment, "u32le", count=smap.count)
    summary = {"k_init": cfg.k_init, "count": smap.count, "iterations": smap.info["iterations"],
               "energy": smap.info["energy"], "pca_components": img.dims}
    _dump(out / "segment.json", summary)
    if args.overlay:
        rgb = boundary_overlay(smap.assignment, img.data[:, :, 0])
        write_ppm(out / "overlay.ppm", rgb)
        if png_available():
            write_png(out / "overlay.png", rgb)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg = _run_config(args)
    cube, gt = load_cube(args.cube)
    train = None
    if args.train is not None:
        try:
            train = TrainingSet.from_dict(json.loads(Path(args.train).read_text()))
        except (OSError, KeyError, ValueError) as exc:
            raise DataError(f"cannot read training set {args.train}: {exc}") from exc
    t0 = time.perf_counter()
    res = run_pipeline(cfg, cube, gt, train)
    elapsed = time.perf_counter() - t0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    num_classes = gt.num_classes if gt is not None else int(res.train.labels.max())
    save_raster(out / "labels.json", res.prediction, "u16le", num_classes=num_classes)
    _dump(out / "report.json", res.report)
    _dump(out / "train.json", res.train.to_dict())
    _dump(out / "timing.json", {"seconds": elapsed})
    if not args.no_map:
        render_map(res.prediction, out / "map")
    summary = {"count": res.superpixels.count}
    if res.metrics is not None:
        summary.update(oa=res.metrics.oa, aa=res.metrics.aa, kappa=res.metrics.kappa)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _run_config(args)
    cube, gt = load_cube(args.cube)
    if gt is None:
        raise DataError("sweep needs ground truth in the cube header")
    if args.repetitions < 1:
        raise UsageError("repetitions must be >= 1")
    rows = sweep_k(cfg, cube, gt, args.k_values, args.repetitions)
    text = sweep_to_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_eval(args) -> int:
    pred, _ = load_raster(args.pred)
    if args.gt.suffix == ".json":
        _, gt = load_cube(args.gt)
        if gt is None:
            raise DataError(f"{args.gt} declares no ground truth")
    else:
        raise UsageError("--gt must be a cube header (.json) with a gt_file entry")
    train = None
    if args.train is not None:
        try:
            train = TrainingSet.from_dict(json.loads(Path(args.train).read_text()))
        except (OSError, KeyError, ValueError) as exc:
            raise DataError(f"cannot read training set {args.train}: {exc}") from exc
    m = compute_metrics(pred, gt, train, args.include_train)
    text = json.dumps(m.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sgl", description="Superpixel graph semi-supervised classification of hyperspectral cubes.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write a synthetic tiled scene")
    s.add_argument("--out", type=Path, required=True, help="header path to write")
    s.add_argument("--width", type=int, default=64)
    s.add_argument("--height", type=int, default=64)
    s.add_argument("--bands", type=int, default=20)
    s.add_argument("--classes", type=int, default=4)
    s.add_argument("--noise-factor", type=float, default=0.0,
                   help="noise std as a fraction of the minimum class separation")
    s.add_argument("--tiles", type=_tiles, default=(2, 2), help="ROWSxCOLS")
    s.add_argument("--scale", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("segment", help="HMS superpixels only")
    s.add_argument("cube", type=Path)
    s.add_argument("--out", type=Path, required=True, help="output directory")
    s.add_argument("--k", type=int, default=HmsConfig.k_init)
    s.add_argument("--m", type=float, default=HmsConfig.compactness)
    s.add_argument("--cov-window", type=int, default=HmsConfig.cov_window)
    s.add_argument("--max-iters", type=int, default=HmsConfig.max_iters)
    s.add_argument("--pca-threshold", type=float, default=0.999)
    s.add_argument("--normalize", choices=["none", "minmax"], default="none")
    s.add_argument("--overlay", action="store_true", help="also write a boundary overlay image")
    s.set_defaults(func=cmd_segment)

    s = sub.add_parser("classify", help="full pipeline: labels, report and map")
    s.add_argument("cube", type=Path)
    s.add_argument("--out", type=Path, required=True, help="output directory")
    s.add_argument("--train", type=Path, help="training set JSON (default: draw from ground truth)")
    s.add_argument("--no-map", action="store_true")
    _add_run_flags(s)
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("sweep", help="mean/std OA over repetitions for several K")
    s.add_argument("cube", type=Path)
    s.add_argument("--k-values", type=_int_list, required=True, help="e.g. 100,200,400")
    s.add_argument("--repetitions", type=int, default=10)
    s.add_argument("--out", type=Path, help="CSV path")
    _add_run_flags(s)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("eval", help="accuracy of a label raster")
    s.add_argument("--pred", type=Path, required=True, help="label raster header")
    s.add_argument("--gt", type=Path, required=True, help="cube header with ground truth")
    s.add_argument("--train", type=Path, help="training set JSON to exclude")
    s.add_argument("--include-train", action="store_true")
    s.add_argument("--out", type=Path)
    s.set_defaults(func=cmd_eval)
    return p


def _exit_code(exc: BaseException) -> int | None:
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, (DataError, OSError)):
        return EXIT_DATA
    if isinstance(exc, (NumericalError, np.linalg.LinAlgError, FloatingPointError, ArithmeticError)):
        return EXIT_NUMERICAL
    if isinstance(exc, (UsageError, ValueError)):
        return EXIT_USAGE
    return None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        code = _exit_code(exc)
        if code is None:
            raise
        print(f"sgl {args.command}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
