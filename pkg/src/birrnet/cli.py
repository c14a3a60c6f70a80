"""Command-line entry points.

    birrnet synth     generate the deterministic synthetic corpus
    birrnet split     scan a dataset tree and write a stratified split file
    birrnet train     train a model; writes history.csv + history.png,
                      config.json, checkpoints, and the final weights
    birrnet evaluate  accuracy + confusion matrix for a split; optionally
                      writes metrics.json, confusion.csv, confusion.png
    birrnet classify  classify one image file, print the prediction as JSON
    birrnet serve     run the HTTP classification service

BIRR_MODEL_PATH is the default model location for classify/serve.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

from .augment import AugmentConfig
from .data import (DEFAULT_FRACTIONS, read_split_file, scan_dataset, split_dataset,
                   synth_generate, write_split_file)
from .errors import BirrnetError
from .evaluate import evaluate, render_confusion, write_confusion_csv
from .labels import DEFAULT_LABELS, load_labels
from .model import ModelConfig, build_model
from .rng import make_rng
from .trainer import TrainConfig, fit, save_train_config, write_history_csv
from .weights import load_model, model_digest, save_weights


def _add_model_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.25,
                   help="width multiplier (default 0.25, desk scale)")
    p.add_argument("--resolution", type=int, default=32,
                   help="input resolution, multiple of 32 (default 32)")
    p.add_argument("--classes", type=int, default=6)
    p.add_argument("--head-pooling", choices=("avg", "max", "avg_concat_max"),
                   default="avg")
    p.add_argument("--dropout", type=float, default=0.2)


def _model_config(args) -> ModelConfig:
    return ModelConfig(width_multiplier=args.alpha, input_resolution=args.resolution,
                       num_classes=args.classes, head_pooling=args.head_pooling,
                       dropout_rate=args.dropout)


def cmd_synth(args) -> int:
    manifest = synth_generate(args.out, per_class=args.per_class,
                              resolution=args.image_size, seed=args.seed)
    counts = {code: manifest.class_counts[lab_id]
              for code, lab_id in sorted((lab.code, lab.id) for lab in DEFAULT_LABELS)}
    print(json.dumps({"root": str(manifest.root), "total": len(manifest.entries),
                      "class_counts": counts}))
    return 0


def cmd_split(args) -> int:
    manifest = scan_dataset(args.data)
    for name in manifest.unknown_dirs:
        print(f"warning: skipping unknown class directory {name!r}", file=sys.stderr)
    for rel in manifest.undecodable:
        print(f"warning: skipping undecodable file {rel}", file=sys.stderr)
    split = split_dataset(manifest, fractions=(args.train, args.val, args.test),
                          seed=args.seed)
    write_split_file(split, args.out)
    print(json.dumps({"out": str(args.out), "train": len(split.train),
                      "val": len(split.val), "test": len(split.test)}))
    return 0


def cmd_train(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    split = read_split_file(args.split, root=args.data)
    model_cfg = _model_config(args)
    augment = AugmentConfig(
        rotation_range=args.rotation_range, zoom_range=args.zoom_range,
        width_shift_range=args.width_shift, height_shift_range=args.height_shift,
        enabled=not args.no_augment)
    config = TrainConfig(
        epochs=args.epochs, learning_rate=args.lr, batch_size=args.batch_size,
        freeze_policy="freeze_backbone" if args.freeze_backbone else "unfreeze_all",
        seed=args.seed, augment=augment)

    model = build_model(model_cfg, make_rng(args.seed, 1))
    save_train_config(config, out_dir / "config.json")
    model, history = fit(model, split, config, out_dir=out_dir, log=print)

    weights_path = out_dir / "model.birrw"
    save_weights(model, weights_path)
    write_history_csv(history, out_dir / "history.csv")
    from .report import save_history_figure
    save_history_figure(history, out_dir / "history.png")
    print(json.dumps({"weights": str(weights_path),
                      "model_id": model_digest(weights_path),
                      "final_val_acc": history.val_acc[-1],
                      "wall_time_s": round(history.wall_time_s, 2)}))
    return 0


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    labels = load_labels(args.labels) if args.labels else list(DEFAULT_LABELS)
    split = read_split_file(args.split, root=args.data)
    metrics, matrix = evaluate(model, split.subset(args.subset), split.root)
    for failure in metrics.failures:
        print(f"warning: {failure}", file=sys.stderr)
    print(render_confusion(matrix, labels))
    summary = {"subset": args.subset, "accuracy": metrics.accuracy,
               "evaluated": metrics.evaluated,
               "precision": metrics.precision, "recall": metrics.recall,
               "failed": len(metrics.failures)}
    print(json.dumps(summary))
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "metrics.json").write_text(
            json.dumps(summary, indent=2) + "\n", encoding="utf-8")
        write_confusion_csv(matrix, labels, out_dir / "confusion.csv")
        from .report import save_confusion_figure
        save_confusion_figure(matrix, labels, out_dir / "confusion.png")
    return 0


def cmd_classify(args) -> int:
    from .service import classify_bytes, response_to_json

    model_path = args.model or os.environ.get("BIRR_MODEL_PATH")
    if not model_path:
        print("error: no model given (use --model or BIRR_MODEL_PATH)",
              file=sys.stderr)
        return 2
    model = load_model(model_path)
    labels = load_labels(args.labels) if args.labels else list(DEFAULT_LABELS)
    resp = classify_bytes(model, labels, Path(args.image).read_bytes(),
                          model_digest(model_path))
    # stdout stays byte-identical across runs; the measured latency goes to stderr
    print(response_to_json(resp, include_latency=False))
    print(f"classified in {resp.latency_ms:.1f} ms", file=sys.stderr)
    return 0


def cmd_serve(args) -> int:
    from .service import build_server

    model_path = args.model or os.environ.get("BIRR_MODEL_PATH")
    if not model_path:
        print("error: no model given (use --model or BIRR_MODEL_PATH)",
              file=sys.stderr)
        return 2
    model = load_model(model_path)
    labels = load_labels(args.labels) if args.labels else list(DEFAULT_LABELS)
    server = build_server(model, labels, model_digest(model_path),
                          host=args.host, port=args.port, verbose=True)
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port} (model {server.model_id})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="birrnet",
                                     description="Birr banknote classification toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=int, default=60)
    p.add_argument("--image-size", type=int, default=48)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="scan a dataset and write a split file")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--train", type=float, default=DEFAULT_FRACTIONS[0])
    p.add_argument("--val", type=float, default=DEFAULT_FRACTIONS[1])
    p.add_argument("--test", type=float, default=DEFAULT_FRACTIONS[2])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a model on a split")
    p.add_argument("--data", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    freeze = p.add_mutually_exclusive_group()
    freeze.add_argument("--freeze-backbone", action="store_true")
    freeze.add_argument("--unfreeze-all", action="store_true")
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--rotation-range", type=float, default=0.2)
    p.add_argument("--zoom-range", type=float, default=0.1)
    p.add_argument("--width-shift", type=float, default=0.2)
    p.add_argument("--height-shift", type=float, default=0.2)
    _add_model_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a model on a split subset")
    p.add_argument("--data", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--subset", choices=("train", "val", "test"), default="test")
    p.add_argument("--model", required=True)
    p.add_argument("--labels")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("classify", help="classify one image file")
    p.add_argument("image")
    p.add_argument("--model")
    p.add_argument("--labels")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("serve", help="run the HTTP classification service")
    p.add_argument("--model")
    p.add_argument("--labels")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8300)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BirrnetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
