"""Command-line interface.

Exit status: 0 on success, 1 on usage errors, 2 on data errors.
"""

import argparse
import hashlib
import json
import logging
import os
import sys

import numpy as np

from . import _backend, apply, baselines, evaluate, net, train
from .manifest import ManifestError, read_manifest
from .netpbm import NetpbmError, read_image, write_image

log = logging.getLogger("jointfilter")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _config(args):
    overrides = {}
    if getattr(args, "config", None):
        text = args.config
        if os.path.exists(text):
            with open(text) as fh:
                text = fh.read()
        try:
            overrides = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--config is not valid JSON: {exc}") from None
        if not isinstance(overrides, dict):
            raise UsageError("--config must be a JSON object")
    if getattr(args, "seed", None) is not None:
        overrides.setdefault("seed", args.seed)
    try:
        return net.NetworkConfig.from_dict({**net.NetworkConfig().to_dict(), **overrides})
    except (net.ConfigError, TypeError) as exc:
        raise UsageError(f"--config: {exc}") from None


def _task(args):
    return train.TaskSpec(kind=args.task, scale=args.scale, noise_variance=args.noise_var,
                          seed=args.seed or 0)


def _save_image(path, img, bits):
    write_image(path, img, 65535 if bits == 16 else 255)


def cmd_train(args):
    manifest = read_manifest(args.manifest)
    if not manifest.pairs:
        raise ManifestError(f"{args.manifest}: manifest is empty")
    cfg = _config(args)
    tc = train.TrainConfig(patch_size=args.patch_size, patches_total=args.patches,
                           batch_size=args.batch, learning_rate=args.lr, momentum=args.momentum,
                           weight_decay=args.weight_decay, epochs=args.epochs, seed=args.seed or 0)
    result = train.train(manifest, _task(args), cfg, tc, max_steps=args.steps)
    ckpt = result.checkpoint
    with open(args.out, "wb") as fh:
        fh.write(ckpt)
    if args.loss_csv:
        train.write_loss_csv(result.losses, args.loss_csv)
    print(f"steps {len(result.losses)} final loss {result.losses[-1].loss:.6g}" if result.losses
          else "steps 0")
    print(f"sha256 {hashlib.sha256(ckpt).hexdigest()}")


def cmd_apply(args):
    model = net.load(args.model)
    target = read_image(args.target)
    guidance = read_image(args.guidance)
    if args.mode == "upsample":
        out = apply.upsample(model, target, guidance, args.scale)
    else:
        out = apply.denoise(model, target, guidance)
    _save_image(args.out, out, args.bits)


def cmd_separate(args):
    model = net.load(args.model)
    out = apply.texture_separate(model, read_image(args.image), args.iterations, args.guidance_mode)
    _save_image(args.out, out, args.bits)


def cmd_features(args):
    model = net.load(args.model)
    maps = apply.dump_features(model, read_image(args.target), read_image(args.guidance),
                               args.branch, args.layer)
    os.makedirs(args.out, exist_ok=True)
    for i, m in enumerate(maps):
        write_image(os.path.join(args.out, f"{args.branch}{args.layer}_{i:03d}.pgm"), m)
    print(f"wrote {len(maps)} maps to {args.out}")


def _baseline_filter(name, scale):
    if name == "bicubic":
        return lambda t, g, low: baselines.bicubic_upsample(low, scale) if low is not None else t
    if name == "jbu":
        return lambda t, g, low: baselines.joint_bilateral_upsample(low, g)
    if name == "gf":
        return lambda t, g, low: baselines.guided_upsample(low, g) if low is not None else \
            baselines.guided_filter(t, baselines.luminance(g), baselines.GFParams(radius=4))
    if name == "identity":
        return lambda t, g, low: t
    raise UsageError(f"unknown baseline {name!r}")


def _filter_for(args):
    if args.model:
        model = net.load(args.model)
        return lambda t, g, low: apply.joint_filter(model, t, g)
    return _baseline_filter(args.baseline, args.scale)


def cmd_eval(args):
    manifest = read_manifest(args.manifest)
    if not manifest.pairs:
        raise ManifestError(f"{args.manifest}: manifest is empty")
    conv = evaluate.EvalConvention(args.unit_scale, args.mask_missing)
    if args.unit_scale is None and not args.mask_missing and manifest.convention is not None:
        conv = manifest.convention
    report = evaluate.eval_dataset(_filter_for(args), manifest, _task(args), conv)
    if args.out_json:
        report.write_json(args.out_json)
    if args.out_csv:
        report.write_csv(args.out_csv)
    print(f"images {len(report.rmse)} skipped {len(report.skipped)} "
          f"rmse {report.mean:.4f} +- {report.std:.4f}")
    if not report.rmse:
        return EXIT_DATA


def cmd_bench(args):
    if args.model:
        filt = net.load(args.model)
    else:
        base = _baseline_filter(args.baseline, args.scale)
        s = args.scale

        def filt(t, g):
            return base(t, g, baselines.nearest_downsample(t, s))
    r = evaluate.benchmark_runtime(filt, args.height, args.width, args.threads, args.repetitions)
    print(json.dumps({"seconds": r.seconds, "threads": r.threads, "times": r.times,
                      "backend": r.backend}))


def cmd_baseline(args):
    low = read_image(args.target)
    guidance = read_image(args.guidance)
    if args.method == "bicubic":
        out = baselines.bicubic_upsample(low, args.scale)
    elif args.method == "jbu":
        out = baselines.joint_bilateral_upsample(low, guidance)
    else:
        out = baselines.guided_upsample(low, guidance)
    _save_image(args.out, out, args.bits)


def cmd_inspect(args):
    with open(args.checkpoint, "rb") as fh:
        data = fh.read()
    cfg, offset = net.read_header(data)
    model = net.deserialize(data)
    info = {
        "config": cfg.to_dict(),
        "param_count": net.param_count(cfg),
        "payload_bytes": len(data) - offset,
        "payload_params": (len(data) - offset) // 4,
        "layers": {b: [list(l.weights.shape) for l in model.branch(b)] for b in net.BRANCHES},
        "sha256": hashlib.sha256(data).hexdigest(),
    }
    print(json.dumps(info, indent=2))


def build_parser():
    p = _Parser(prog="jointfilter", description="Deep joint image filtering.")
    p.add_argument("--threads", type=int, default=1, help="kernel worker threads")
    p.add_argument("--backend", choices=sorted(_backend.BACKENDS), default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def task_args(sp):
        sp.add_argument("--task", choices=[train.UPSAMPLE, train.DENOISE], default=train.UPSAMPLE)
        sp.add_argument("--scale", type=int, default=8)
        sp.add_argument("--noise-var", type=float, default=1e-3)
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("train", help="train a model from a manifest")
    sp.add_argument("--manifest", required=True)
    task_args(sp)
    sp.add_argument("--config", help="JSON object (or file) overriding NetworkConfig fields")
    sp.add_argument("--out", required=True)
    sp.add_argument("--loss-csv")
    sp.add_argument("--patch-size", type=int, default=32)
    sp.add_argument("--patches", type=int, default=1024)
    sp.add_argument("--batch", type=int, default=128)
    sp.add_argument("--epochs", type=int, default=1)
    sp.add_argument("--steps", type=int, default=None, help="stop after this many steps")
    sp.add_argument("--lr", type=float, default=1e-3)
    sp.add_argument("--momentum", type=float, default=0.9)
    sp.add_argument("--weight-decay", type=float, default=1e-4)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("apply", help="upsample or denoise one image")
    sp.add_argument("mode", choices=["upsample", "denoise"])
    sp.add_argument("--model", required=True)
    sp.add_argument("--target", required=True)
    sp.add_argument("--guidance", required=True)
    sp.add_argument("--scale", type=int, default=8)
    sp.add_argument("--out", required=True)
    sp.add_argument("--bits", type=int, choices=[8, 16], default=16)
    sp.set_defaults(func=cmd_apply)

    sp = sub.add_parser("separate", help="iterative self-guided texture removal")
    sp.add_argument("--model", required=True)
    sp.add_argument("--image", required=True)
    sp.add_argument("--iterations", type=int, default=3)
    sp.add_argument("--guidance-mode", choices=[apply.FIXED, apply.ROLLING], default=apply.FIXED)
    sp.add_argument("--out", required=True)
    sp.add_argument("--bits", type=int, choices=[8, 16], default=8)
    sp.set_defaults(func=cmd_separate)

    sp = sub.add_parser("features", help="dump normalized feature maps of one layer")
    sp.add_argument("--model", required=True)
    sp.add_argument("--target", required=True)
    sp.add_argument("--guidance", required=True)
    sp.add_argument("--branch", choices=list(net.BRANCHES), default="t")
    sp.add_argument("--layer", type=int, default=1)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_features)

    sp = sub.add_parser("eval", help="RMSE of a model or baseline over a manifest")
    sp.add_argument("--manifest", required=True)
    task_args(sp)
    grp = sp.add_mutually_exclusive_group(required=True)
    grp.add_argument("--model")
    grp.add_argument("--baseline", choices=["bicubic", "jbu", "gf", "identity"])
    sp.add_argument("--unit-scale", type=float, default=None)
    sp.add_argument("--mask-missing", action="store_true")
    sp.add_argument("--out-json")
    sp.add_argument("--out-csv")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("bench", help="median run time per image")
    grp = sp.add_mutually_exclusive_group(required=True)
    grp.add_argument("--model")
    grp.add_argument("--baseline", choices=["bicubic", "jbu", "gf"])
    sp.add_argument("--scale", type=int, default=8)
    sp.add_argument("--height", type=int, default=480)
    sp.add_argument("--width", type=int, default=640)
    sp.add_argument("--repetitions", type=int, default=3)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("baseline", help="run a classical upsampler")
    sp.add_argument("method", choices=["bicubic", "jbu", "gf"])
    sp.add_argument("--target", required=True, help="low-resolution target")
    sp.add_argument("--guidance", required=True)
    sp.add_argument("--scale", type=int, default=8)
    sp.add_argument("--out", required=True)
    sp.add_argument("--bits", type=int, choices=[8, 16], default=16)
    sp.set_defaults(func=cmd_baseline)

    sp = sub.add_parser("inspect-checkpoint", help="print checkpoint config and sizes")
    sp.add_argument("checkpoint")
    sp.set_defaults(func=cmd_inspect)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError(parser.format_help())
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    _backend.set_num_threads(args.threads)
    if args.backend:
        _backend.set_backend(args.backend)
    try:
        code = args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, NetpbmError, ManifestError, net.CheckpointError,
            train.TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return code or EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
