"""Command-line entry point: synthesize data, train, sweep, predict, serve.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import imaging
from .dataset import ManifestError, load_manifest, load_samples
from .network import ModelConfig, build, predict
from .sweep import run_sweep
from .trainer import (
    Checkpoint,
    CheckpointError,
    HyperParams,
    TrainingDivergedError,
    load_checkpoint,
    save_checkpoint,
    split_dataset,
    train,
)

PRESETS = {
    "default": ModelConfig(),
    "small": ModelConfig(input_size=32, conv_stages=((8, 3), (16, 3)), hidden_units=48),
    "tiny": ModelConfig(input_size=8, conv_stages=((2, 3),), hidden_units=4),
}


def _emit(obj: dict) -> None:
    print(json.dumps(obj), flush=True)


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _positive_int(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {n}")
    return n


def _parse_tiers(text: str) -> list[imaging.ResolutionTier]:
    tiers = []
    for part in text.replace(",", " ").split():
        tiers.append(imaging.ResolutionTier.from_height(int(part.lstrip("Rr"))))
    if not tiers:
        raise ValueError("empty tier list")
    return tiers


def cmd_gen_synthetic(args) -> int:
    try:
        manifest = imaging.gen_synthetic(args.per_class, args.seed, args.out)
    except OSError as exc:
        return _fail(f"cannot write to {args.out}: {exc}", 2)
    print(Path(args.out) / "manifest.jsonl")
    print(f"digest {manifest.digest}")
    return 0


def cmd_train(args) -> int:
    manifest_path = Path(args.manifest)
    if not manifest_path.is_file():
        return _fail(f"manifest not found: {manifest_path}", 2)
    try:
        manifest = load_manifest(manifest_path)
        config = dataclasses.replace(PRESETS[args.preset], seed=args.seed)
        hp = HyperParams(
            batch_size=args.batch,
            epochs=args.epochs,
            learning_rate=args.lr,
            momentum=args.momentum,
            eval_fraction=args.eval_fraction,
            seed=args.seed,
        )
        train_manifest, eval_manifest = split_dataset(manifest, hp.eval_fraction, hp.seed)
        train_samples = load_samples(train_manifest, config.input_size)
        eval_samples = load_samples(eval_manifest, config.input_size)
        _emit(
            {
                "event": "start",
                "batch": hp.batch_size,
                "epochs": hp.epochs,
                "lr": hp.learning_rate,
                "momentum": hp.momentum,
                "seed": hp.seed,
                "preset": args.preset,
                "train_size": len(train_samples),
                "eval_size": len(eval_samples),
            }
        )
        model = build(config)
        model, history = train(model, train_samples, eval_samples, hp, progress=_emit)
        final_eval = history.records[-1].eval
        metadata = {
            "seed": hp.seed,
            "epochs_completed": hp.epochs,
            "dataset_digest": manifest.digest,
            "batch_size": hp.batch_size,
            "learning_rate": hp.learning_rate,
            "momentum": hp.momentum,
            "preset": args.preset,
            "weight_updates": history.weight_updates,
            "final_eval_accuracy": final_eval.accuracy if final_eval else None,
        }
        digest = save_checkpoint(model, args.out, metadata)
    except (ManifestError, imaging.ImageError, TrainingDivergedError, ValueError, OSError) as exc:
        return _fail(str(exc), 1)
    final = history.records[-1]
    summary = {
        "event": "summary",
        "checkpoint": str(args.out),
        "checkpoint_digest": digest,
        "weight_updates": history.weight_updates,
        "mean_train_loss": final.mean_train_loss,
    }
    if final.eval is not None:
        summary["eval"] = final.eval.summary_dict()
    _emit(summary)
    return 0


def cmd_sweep(args) -> int:
    ckpt_path, manifest_path = Path(args.ckpt), Path(args.manifest)
    if not ckpt_path.is_file():
        return _fail(f"checkpoint not found: {ckpt_path}", 2)
    if not manifest_path.is_file():
        return _fail(f"manifest not found: {manifest_path}", 2)
    try:
        tiers = _parse_tiers(args.tiers) if args.tiers else list(imaging.ALL_TIERS)
    except ValueError as exc:
        return _fail(f"bad --tiers value: {exc}", 2)
    try:
        checkpoint = load_checkpoint(ckpt_path)
        manifest = load_manifest(manifest_path)
        report = run_sweep(manifest, checkpoint, tiers)
        out = Path(args.out)
        out.write_text(report.to_json(), encoding="utf-8")
        csv_path = out.with_suffix(".csv")
        csv_path.write_text(report.to_csv(), encoding="utf-8")
    except (CheckpointError, ManifestError, imaging.ImageError, ValueError, OSError) as exc:
        return _fail(str(exc), 1)
    print(f"report {out}")
    print(f"csv {csv_path}")
    if report.fit is not None:
        print(f"log_fit a={report.fit.a:.6f} b={report.fit.b:.6f} r2={report.fit.r2:.6f}")
    else:
        print(f"log_fit omitted: {report.fit_notice}")
    return 0


def cmd_predict(args) -> int:
    ckpt_path, image_path = Path(args.ckpt), Path(args.image)
    if not ckpt_path.is_file():
        return _fail(f"checkpoint not found: {ckpt_path}", 2)
    if not image_path.is_file():
        return _fail(f"image not found: {image_path}", 2)
    try:
        checkpoint = load_checkpoint(ckpt_path)
        img = imaging.decode(image_path.read_bytes())
        if args.tier is not None:
            img = imaging.degrade_to_tier(img, imaging.ResolutionTier.from_height(args.tier))
        tensor = imaging.to_input_tensor(img, checkpoint.model.config.input_size)
        pred = predict(checkpoint.model, tensor)
    except (CheckpointError, imaging.ImageError) as exc:
        return _fail(str(exc), 1)
    _emit(
        {
            "label": pred.label.wire_name,
            "confidence": pred.confidence,
            "distribution": list(pred.distribution),
        }
    )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    host, _, port = args.addr.rpartition(":")
    if not host or not port.isdigit():
        return _fail(f"bad --addr {args.addr!r}, expected HOST:PORT", 2)
    try:
        checkpoint = load_checkpoint(args.ckpt)
    except (CheckpointError, OSError) as exc:
        return _fail(str(exc), 1)
    app = create_app(checkpoint, cors=args.cors)
    print(f"listening on http://{host}:{port}", flush=True)
    try:
        uvicorn.run(app, host=host, port=int(port), log_level="warning")
    except (OSError, SystemExit) as exc:
        return _fail(f"server failed: {exc}", 1)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oralscan",
                                     description="Oral-cavity screening CNN pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="generate the synthetic PPM corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--per-class", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("train", help="split, train, and save a checkpoint")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--batch", type=_positive_int, default=32)
    p.add_argument("--epochs", type=_positive_int, default=20)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--eval-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--preset", choices=sorted(PRESETS), default="default")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="resolution-degradation sweep over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True, help="JSON report path (CSV written alongside)")
    p.add_argument("--tiers", help="tier heights, e.g. '144,360,720'")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("predict", help="classify one image")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--tier", type=int, help="degrade to this tier height first")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--addr", default="127.0.0.1:8000")
    p.add_argument("--cors", action="store_true",
                   help="permissive CORS headers for local UI development")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "tier", None) is not None:
        try:
            imaging.ResolutionTier.from_height(args.tier)
        except ValueError as exc:
            build_parser().error(str(exc))
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
