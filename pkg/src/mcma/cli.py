"""Command line front end: generate / run / sweep / bench / eval.

Scene configs are plain ``key = value`` text; see the README for the
documented keys. All outputs are files (PPM/PGM/MCFL/MCFE/CSV).
"""

from __future__ import annotations

import argparse
import os
import sys

from .core import PipelineConfig, read_flow, read_frame, read_mask, write_mask
from .evaluation import evaluate_run, report_csv
from .flow import FlowParams
from .model import ModelSpec
from .pipeline import (PipelineError, alpha_sweep, benchmark_report, run,
                       timings_csv)
from .synth import (SceneObject, SceneSpec, generate, model_spec_from_scene,
                    save_dataset)


def _parse_tuple(text, count, conv=float):
    parts = [conv(p) for p in text.split(",")]
    if len(parts) != count:
        raise ValueError(f"expected {count} comma-separated values: {text!r}")
    return tuple(parts)


def _parse_object(text: str) -> SceneObject:
    kv = {}
    for token in text.split():
        if "=" not in token:
            raise ValueError(f"bad object token {token!r}")
        key, val = token.split("=", 1)
        kv[key] = val
    shape = kv.pop("shape")
    cls = int(kv.pop("class"))
    color = _parse_tuple(kv.pop("color"), 3, int)
    velocity = _parse_tuple(kv.pop("velocity", "0,0"), 2)
    if shape == "disk":
        position = _parse_tuple(kv.pop("center"), 2)
        obj = SceneObject("disk", cls, color, position, velocity,
                          radius=float(kv.pop("radius")))
    else:
        position = _parse_tuple(kv.pop("topleft"), 2)
        obj = SceneObject("rectangle", cls, color, position, velocity,
                          size=_parse_tuple(kv.pop("size"), 2))
    if kv:
        raise ValueError(f"unknown object keys: {sorted(kv)}")
    return obj


def parse_scene_config(text: str) -> SceneSpec:
    kv = {}
    objects = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key == "object":
            objects.append(_parse_object(val))
        else:
            kv[key] = val

    spec = SceneSpec(
        width=int(kv.pop("width", 320)),
        height=int(kv.pop("height", 256)),
        num_classes=int(kv.pop("num_classes", 2)),
        objects=objects,
        background_class=int(kv.pop("background_class", 0)),
        background_color=_parse_tuple(kv.pop("background_color", "40,110,40"),
                                      3, int),
        texture_amplitude=float(kv.pop("texture_amplitude", 8.0)),
        label_noise_rate=float(kv.pop("label_noise_rate", 0.0)),
        noise_class=(int(kv.pop("noise_class"))
                     if "noise_class" in kv else None),
        frames=int(kv.pop("frames", 10)),
        seed=int(kv.pop("seed", 0)),
        global_velocity=_parse_tuple(kv.pop("global_velocity", "0,0"), 2),
    )
    if kv:
        raise ValueError(f"unknown config keys: {sorted(kv)}")
    return spec


def load_scene(path: str) -> SceneSpec:
    with open(path) as fh:
        return parse_scene_config(fh.read())


def _load_dir(dirpath, suffix, reader):
    names = sorted(n for n in os.listdir(dirpath) if n.endswith(suffix))
    if not names:
        raise ValueError(f"no *{suffix} files in {dirpath}")
    return [reader(os.path.join(dirpath, n),
                   **({"index": i} if reader is read_frame else {}))
            for i, n in enumerate(names)]


def load_frames(dirpath):
    return _load_dir(dirpath, ".ppm", read_frame)


def _model_spec(args, frames_dir) -> ModelSpec:
    if getattr(args, "features", None):
        return ModelSpec(kind="feature-files", num_classes=args.classes,
                         feature_stride=args.stride,
                         feature_dir=args.features)
    scene_path = args.scene or os.path.join(os.path.dirname(
        os.path.abspath(frames_dir)), "scene.cfg")
    scene = load_scene(scene_path)
    return model_spec_from_scene(scene, feature_stride=args.stride)


def _flow_params(args) -> FlowParams:
    return FlowParams(pyramid_levels=args.flow_levels,
                      pyramid_scale=args.flow_pyramid_scale,
                      window_size=args.flow_window,
                      iterations=args.flow_iterations,
                      poly_n=args.poly_n, poly_sigma=args.poly_sigma,
                      negate=args.flow_negate)


def _add_flow_args(p):
    p.add_argument("--flow-levels", type=int, default=3)
    p.add_argument("--flow-pyramid-scale", type=float, default=0.5)
    p.add_argument("--flow-window", type=int, default=15)
    p.add_argument("--flow-iterations", type=int, default=3)
    p.add_argument("--poly-n", type=int, default=5)
    p.add_argument("--poly-sigma", type=float, default=1.1)
    p.add_argument("--flow-negate", action="store_true",
                   help="flip the flow sign convention (experimentation)")


def _add_model_args(p):
    p.add_argument("--scene", help="scene config used to build the reference "
                                   "model (default: <frames>/../scene.cfg)")
    p.add_argument("--features", help="MCFE directory for feature-files mode")
    p.add_argument("--classes", type=int, default=2,
                   help="class count for feature-files mode")
    p.add_argument("--stride", type=int, default=4, help="feature stride")


def cmd_generate(args) -> int:
    with open(args.config) as fh:
        text = fh.read()
    spec = parse_scene_config(text)
    save_dataset(generate(spec), args.out, scene_text=text)
    print(f"wrote {spec.frames} frames to {args.out}")
    return 0


def cmd_run(args) -> int:
    frames = load_frames(args.frames)
    cfg = PipelineConfig(alpha=args.alpha, lam=getattr(args, "lambda"),
                         flow_scale=args.flow_scale,
                         num_classes=args.classes,
                         executor={"seq": "sequential",
                                   "par": "parallel"}[args.executor],
                         model="feature-files" if args.features else "reference",
                         mode=args.mode)
    spec = _model_spec(args, args.frames)
    cfg.num_classes = spec.num_classes
    masks, timings = run(frames, cfg, spec, _flow_params(args))
    os.makedirs(args.out, exist_ok=True)
    for j, mask in enumerate(masks):
        write_mask(mask, os.path.join(args.out, f"{j:06d}.pgm"))
    with open(os.path.join(args.out, "timings.csv"), "w") as fh:
        fh.write(timings_csv(timings))
    print(f"wrote {len(masks)} masks to {args.out}")
    return 0


def cmd_sweep(args) -> int:
    frames = load_frames(args.frames)
    gts = _load_dir(args.gt, ".pgm", read_mask)
    cfg = PipelineConfig(alpha=0.5, lam=getattr(args, "lambda"),
                         flow_scale=args.flow_scale, num_classes=2)
    spec = _model_spec(args, args.frames)
    cfg.num_classes = spec.num_classes
    rows = alpha_sweep(frames, gts, cfg, spec, _flow_params(args))
    with open(args.out, "w") as fh:
        fh.write("alpha,method,miou\n")
        for alpha, method, value in rows:
            fh.write(f"{alpha},{method},{value:.6f}\n")
    print(f"wrote sweep to {args.out}")
    return 0


def cmd_bench(args) -> int:
    frames = load_frames(args.frames)
    spec = _model_spec(args, args.frames)
    reports = []
    for scale in (1.0, 0.5, 0.25):
        for executor in ("sequential", "parallel"):
            cfg = PipelineConfig(alpha=args.alpha, lam=getattr(args, "lambda"),
                                 flow_scale=scale,
                                 num_classes=spec.num_classes,
                                 executor=executor, mode="mcma")
            _, timings = run(frames, cfg, spec, _flow_params(args))
            reports.append(benchmark_report(timings[1:]))
    header, *_ = reports[0].splitlines()
    body = [line for rep in reports for line in rep.splitlines()[1:]]
    with open(args.out, "w") as fh:
        fh.write(header + "\n" + "\n".join(body) + "\n")
    print(f"wrote benchmark to {args.out}")
    return 0


def cmd_eval(args) -> int:
    preds = {}
    for item in args.pred:
        if "=" not in item:
            raise ValueError("--pred expects NAME=DIR")
        name, dirpath = item.split("=", 1)
        preds[name] = _load_dir(dirpath, ".pgm", read_mask)
    gts = _load_dir(args.gt, ".pgm", read_mask)
    flows = _load_dir(args.flows, ".mcfl", read_flow)
    rows = evaluate_run(preds, gts, flows, args.classes)
    csv = report_csv(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv)
    else:
        sys.stdout.write(csv)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcma",
        description="Motion-corrected moving average video segmentation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="render a synthetic dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="segment a frame directory")
    p.add_argument("--frames", required=True)
    p.add_argument("--mode", choices=("baseline", "ema", "mcma"),
                   default="mcma")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--lambda", type=float, default=2.0)
    p.add_argument("--flow-scale", type=float, choices=(1.0, 0.5, 0.25),
                   default=1.0)
    p.add_argument("--executor", choices=("seq", "par"), default="seq")
    p.add_argument("--out", required=True)
    _add_model_args(p)
    _add_flow_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="mIoU of EMA vs MCMA over an alpha grid")
    p.add_argument("--frames", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--lambda", type=float, default=2.0)
    p.add_argument("--flow-scale", type=float, choices=(1.0, 0.5, 0.25),
                   default=1.0)
    p.add_argument("--out", required=True)
    _add_model_args(p)
    _add_flow_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="timing study over scales and executors")
    p.add_argument("--frames", required=True)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--lambda", type=float, default=2.0)
    p.add_argument("--out", required=True)
    _add_model_args(p)
    _add_flow_args(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("eval", help="motion-partitioned mIoU table")
    p.add_argument("--pred", action="append", required=True,
                   metavar="NAME=DIR")
    p.add_argument("--gt", required=True)
    p.add_argument("--flows", required=True)
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures exit 1, argparse exits 2
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
