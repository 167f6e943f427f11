"""Command-line pipeline: prepare, extract, train, gradcheck, eval, predict.

Every subcommand prints its fully resolved configuration (defaults and
seed included) before doing anything, so any run can be reproduced from
its output.  Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import dataset as ds
from . import evaluation, media, training
from .blocks import (assemble_inputs, extract_block, extract_samples,
                     required_chroma_format)
from .gradcheck import (NONSMOOTH_TOL, OP_TOLERANCES, check_all_ops,
                        check_model)
from .model import VARIANTS, forward, load_checkpoint, save_checkpoint

IMAGE_SUFFIXES = (".png", ".ppm")


def _sidecar(yuv_path: Path) -> Path:
    return Path(str(yuv_path) + ".json")


def _print_config(args: argparse.Namespace) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    print(f"resolved config: {json.dumps(resolved, sort_keys=True, default=str)}")


def cmd_prepare(args) -> int:
    in_dir = Path(args.in_dir)
    out_dir = Path(args.out)
    images = sorted(p for p in in_dir.iterdir()
                    if p.suffix.lower() in IMAGE_SUFFIXES)
    if not images:
        raise ValueError(f"no PNG/PPM images found in {in_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)
    for path in images:
        frame = media.rgb_to_yuv444(media.decode_image(path),
                                    bit_depth=args.bit_depth)
        if args.format == 420:
            frame = media.subsample_420(frame)
        yuv_path = out_dir / (path.stem + ".yuv")
        media.write_yuv(frame, yuv_path)
        _sidecar(yuv_path).write_text(json.dumps({
            "width": frame.width,
            "height": frame.height,
            "bit_depth": frame.bit_depth,
            "chroma_format": frame.chroma_format,
            "source": path.name,
        }, indent=2))
        if args.verbose:
            print(f"prepared {yuv_path} ({frame.width}x{frame.height}, "
                  f"{frame.chroma_format})")
    print(f"prepared {len(images)} frames into {out_dir}")
    return 0


def _read_yuv_with_sidecar(path: Path) -> media.Frame:
    meta_path = _sidecar(path)
    if not meta_path.exists():
        raise ValueError(f"{path}: missing sidecar {meta_path.name} "
                         "(produced by the prepare step)")
    meta = json.loads(meta_path.read_text())
    return media.read_yuv(path, meta["width"], meta["height"],
                          meta["bit_depth"], meta["chroma_format"])


def cmd_extract(args) -> int:
    yuv_dir = Path(args.yuv)
    sizes = [int(s) for s in args.sizes.split(",") if s]
    if not sizes or any(n < 1 for n in sizes):
        raise ValueError(f"bad --sizes value {args.sizes!r}")
    files = sorted(yuv_dir.glob("*.yuv"))
    if not files:
        raise ValueError(f"no .yuv files found in {yuv_dir}")
    samples = []
    for i, path in enumerate(files):
        frame = _read_yuv_with_sidecar(path)
        for n in sizes:
            # Stable per-(frame, size) stream derived from the global seed.
            sub_seed = args.seed * 1_000_003 + i * 101 + n
            samples.extend(extract_samples(frame, n, args.per_size, sub_seed))
        if args.verbose:
            print(f"extracted from {path.name}")
    ds.write_dataset(samples, args.out, manifest={
        "sources": [p.name for p in files],
        "seed": args.seed,
        "sizes": sizes,
        "per_size_per_frame": args.per_size,
        "policy": "origins uniform over the chroma plane, per-frame streams",
    })
    print(f"wrote {len(samples)} samples to {args.out}")
    return 0


def cmd_train(args) -> int:
    train_samples = ds.read_dataset(args.dataset)
    val_samples = ds.read_dataset(args.val) if args.val else []
    config = training.TrainConfig(
        variant=args.variant,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        max_steps=args.steps,
        seed=args.seed,
        val_interval=args.val_interval,
        train_path=str(args.dataset),
        val_path=str(args.val) if args.val else None,
    )
    result = training.train(config, train_samples, val_samples)
    save_checkpoint(result.params, result.model_config, args.out)
    log_path = Path(str(args.out) + ".log.jsonl")
    with open(log_path, "w") as f:
        for record in result.log:
            f.write(json.dumps(record) + "\n")
    last = result.log[-1]["loss"] if result.log else float("nan")
    print(f"trained {config.max_steps} steps, final loss {last:.6g}, "
          f"best step {result.best_step}, checkpoint {args.out}")
    return 0


def cmd_gradcheck(args) -> int:
    failures = 0
    for name, err in check_all_ops(args.seed).items():
        tol = OP_TOLERANCES[name]
        ok = err <= tol
        failures += not ok
        print(f"op {name}: max relative error {err:.3e} "
              f"(tolerance {tol:.0e}) {'ok' if ok else 'FAIL'}")
    worst = 0.0
    for s in range(args.seeds):
        worst = max(worst, check_model(args.variant, seed=args.seed + s,
                                       max_entries=args.max_entries))
    ok = worst <= NONSMOOTH_TOL
    failures += not ok
    print(f"model {args.variant}: max relative error {worst:.3e} over "
          f"{args.seeds} seeds (tolerance {NONSMOOTH_TOL:.0e}) "
          f"{'ok' if ok else 'FAIL'}")
    return 1 if failures else 0


def cmd_eval(args) -> int:
    params, config = load_checkpoint(args.ckpt)
    samples = ds.read_dataset(args.dataset)
    report = evaluation.evaluate(params, config, samples)
    evaluation.save_report(report, args.out)
    csv_path = str(args.out) + ".csv"
    with open(csv_path, "w") as f:
        f.write(evaluation.comparison_csv(evaluation.compare([report])))
    overall = report.aggregates["overall"]
    print(f"evaluated {overall['count']} blocks: nn mse {overall['nn_mse']:.6g}, "
          f"lm mse {overall['lm_mse']:.6g}; report {args.out}")
    return 0


def cmd_predict(args) -> int:
    params, config = load_checkpoint(args.ckpt)
    frame = _read_yuv_with_sidecar(Path(args.yuv))
    needed = required_chroma_format(config.variant)
    if frame.chroma_format != needed:
        raise ValueError(
            f"checkpoint variant {config.variant!r} needs {needed} input, "
            f"file is {frame.chroma_format}"
        )
    try:
        x0, y0, n = (int(v) for v in args.block.split(","))
    except ValueError:
        raise ValueError(f"--block expects x,y,N, got {args.block!r}") from None
    sample = extract_block(frame, n, (x0, y0))
    s, x = assemble_inputs(sample, config.variant)
    pred = forward(params, config, s, x, clamp=True)
    peak = (1 << frame.bit_depth) - 1
    as_int = media.round_half_away(pred * peak).astype(int)
    print(f"predicted Cb block at ({x0},{y0}) size {n}:")
    print(as_int[:, :, 0])
    print(f"predicted Cr block at ({x0},{y0}) size {n}:")
    print(as_int[:, :, 1])
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0,
                        help="seed for every random choice (default 0)")
    common.add_argument("--verbose", action="store_true",
                        help="print per-item progress")

    parser = argparse.ArgumentParser(
        prog="chromapred",
        description="Chroma intra prediction pipeline: data preparation, "
                    "block extraction, training, verification and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", parents=[common],
                       help="convert PNG/PPM images to planar YUV")
    p.add_argument("--in", dest="in_dir", required=True, help="image directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", type=int, choices=(420, 444), required=True)
    p.add_argument("--bit-depth", type=int, choices=(8, 10), default=10)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("extract", parents=[common],
                       help="extract block samples into a dataset file")
    p.add_argument("--yuv", required=True, help="directory of prepared .yuv files")
    p.add_argument("--sizes", default="4,8,16",
                   help="comma-separated chroma block sides")
    p.add_argument("--per-size", type=int, required=True,
                   help="samples per size per frame")
    p.add_argument("--out", required=True, help="dataset file to write")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", parents=[common],
                       help="train one model variant")
    p.add_argument("--variant", choices=VARIANTS, required=True)
    p.add_argument("--dataset", required=True, help="training dataset file")
    p.add_argument("--val", default=None, help="validation dataset file")
    p.add_argument("--out", required=True, help="checkpoint file to write")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--val-interval", type=int, default=200)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("gradcheck", parents=[common],
                       help="finite-difference check of every op and one variant")
    p.add_argument("--variant", choices=VARIANTS, required=True)
    p.add_argument("--seeds", type=int, default=5,
                   help="random points per full-model check")
    p.add_argument("--max-entries", type=int, default=None,
                   help="sample this many coordinates instead of all")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("eval", parents=[common],
                       help="evaluate a checkpoint against the linear baseline")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="report JSON path (+ .csv)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", parents=[common],
                       help="predict one chroma block from a YUV file")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--yuv", required=True)
    p.add_argument("--block", required=True, help="x,y,N in chroma coordinates")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _print_config(args)
    try:
        return args.func(args)
    except Exception as exc:  # surface a diagnostic, not a traceback
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
