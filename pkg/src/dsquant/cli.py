"""Command-line pipeline: ingest -> score -> allocate -> quantize -> stats
-> train/compare.

Each stage reads the previous stage's file and writes its own output
atomically (temp file + rename), so a failing stage never leaves a
truncated artifact. Exit codes: 0 success, 1 I/O failure, 2 validation
failure. --porcelain switches output to machine-readable key=value
lines.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import allocator, dataset as ds, qds, sensitivity, trainer

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2


class _Emitter:
    def __init__(self, porcelain: bool):
        self.porcelain = porcelain

    def kv(self, key, value):
        if self.porcelain:
            print(f"{key}={value}")
        else:
            print(f"{key}: {value}")


def _atomic_write_text(path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _atomic(path, writer) -> None:
    """Run writer against a temp path, then rename into place."""
    tmp = f"{path}.tmp-stage"
    writer(tmp)
    os.replace(tmp, path)


def _read_file(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _parse_shape(text: str) -> ds.SampleShape:
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise ValueError(f"shape must be HxWxC, got {text!r}")
    h, w, c = (int(p) for p in parts)
    return ds.SampleShape(h, w, c)


def _parse_bits(text: str) -> tuple:
    return tuple(int(p) for p in text.split(","))


def _cmd_ingest(args, emit: _Emitter) -> int:
    if args.cifar:
        data = _read_file(args.cifar)
        dset = ds.ingest_cifar_binary(data, args.num_classes)
    elif args.raw:
        values_path, labels_path = args.raw
        if args.shape is None:
            raise ValueError("--raw requires --shape HxWxC")
        dset = ds.ingest_raw(
            _read_file(values_path), _read_file(labels_path),
            _parse_shape(args.shape), args.num_classes,
        )
    else:
        parts = args.synth.split(",")
        if len(parts) != 4:
            raise ValueError("--synth takes CLASSES,DIM,COUNT,SPREAD")
        classes, dim, total = int(parts[0]), int(parts[1]), int(parts[2])
        spread = float(parts[3])
        if classes < 2 or total % classes:
            raise ValueError("--synth sample count must divide evenly by classes")
        dset = ds.synth_blobs(classes, dim, total // classes, spread, args.seed)
    _atomic(args.out, lambda tmp: ds.write_dataset_file(dset, tmp))
    emit.kv("samples", len(dset))
    shape = dset.shape
    emit.kv("shape", f"{shape.height}x{shape.width}x{shape.channels}")
    emit.kv("classes", dset.num_classes)
    return EXIT_OK


def _cmd_score(args, emit: _Emitter) -> int:
    dset = ds.read_dataset_file(args.dataset)
    oracle = trainer.fit_scoring_model(dset, args.model_init, args.seed)
    scores = sensitivity.score_dataset(dset, oracle, args.probe_bits)
    _atomic(args.out, lambda tmp: sensitivity.write_scores(scores, tmp))
    emit.kv("samples", scores.size)
    emit.kv("mean_score", f"{scores.mean():.9g}" if scores.size else "0")
    return EXIT_OK


def _cmd_allocate(args, emit: _Emitter) -> int:
    scores = sensitivity.read_scores(args.scores)
    bits = _parse_bits(args.bits)
    if args.groups is not None and args.groups != len(bits):
        raise ValueError(f"--groups {args.groups} does not match {len(bits)} bit levels")
    fractions = None
    if args.fractions:
        fractions = tuple(float(f) for f in args.fractions.split(","))
    if args.strategy == "fixed":
        strategy = "fixed_uniform"
        if len(bits) != 1:
            raise ValueError("fixed strategy takes a single bit level")
        fractions = (1.0,)
    else:
        strategy = "adaptive_two_group" if len(bits) == 2 else "adaptive_k_group"
    config = allocator.AllocationConfig(
        strategy=strategy, bit_levels=bits, group_fractions=fractions,
        prune_ratio=args.prune_ratio,
    )
    keep = allocator.read_keep_list(args.keep_list) if args.keep_list else None
    plan = allocator.allocate(scores, config, seed=args.seed, keep_indices=keep)
    _atomic(args.out, lambda tmp: allocator.write_plan(plan, tmp))
    emit.kv("samples", len(plan))
    emit.kv("b_avg", f"{plan.b_avg:.9g}")
    emit.kv("ratio", f"{plan.compression_ratio:.9g}")
    return EXIT_OK


def _cmd_quantize(args, emit: _Emitter) -> int:
    dset = ds.read_dataset_file(args.dataset)
    plan = allocator.read_plan(args.plan)
    if len(plan) != len(dset):
        raise ValueError(
            f"plan covers {len(plan)} samples, dataset has {len(dset)}"
        )
    report_holder = {}

    def writer(tmp):
        report_holder["report"] = qds.write_qds(dset, plan, tmp)

    _atomic(args.out, writer)
    for line in report_holder["report"].as_lines():
        key, value = line.split("=", 1)
        emit.kv(key, value)
    return EXIT_OK


def _cmd_stats(args, emit: _Emitter) -> int:
    report = qds.storage_report(args.qds)
    if emit.porcelain:
        for line in report.as_lines():
            print(line)
    else:
        width = max(len(k) for k in report.__dataclass_fields__)
        for line in report.as_lines():
            key, value = line.split("=", 1)
            print(f"{key:<{width}}  {value}")
    return EXIT_OK


def _train_config(args) -> trainer.TrainConfig:
    return trainer.TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size,
        learning_rate=args.learning_rate, momentum=args.momentum,
        weight_decay=args.weight_decay, seed=args.seed,
        normalize=not args.no_normalize,
    )


def _cmd_train(args, emit: _Emitter) -> int:
    dset = ds.read_dataset_file(args.dataset)
    config = _train_config(args)
    train_idx, test_idx = trainer.stratified_split(dset, 0.2, config.seed)
    model = trainer.train(dset.subset(train_idx), config)
    emit.kv("train_accuracy", f"{trainer.evaluate(model, dset.subset(train_idx)):.9g}")
    emit.kv("test_accuracy", f"{trainer.evaluate(model, dset.subset(test_idx)):.9g}")
    return EXIT_OK


def _cmd_compare(args, emit: _Emitter) -> int:
    dset = ds.read_dataset_file(args.dataset)
    report = trainer.compare(dset, args.qds, _train_config(args))
    emit.kv("train_accuracy", f"{report.train_accuracy:.9g}")
    emit.kv("test_accuracy", f"{report.test_accuracy:.9g}")
    emit.kv("baseline_test_accuracy", f"{report.baseline_test_accuracy:.9g}")
    emit.kv("accuracy_delta", f"{report.accuracy_delta:.9g}")
    if args.loss_csv:
        lines = ["epoch,loss\n"]
        lines += [f"{i},{loss:.9g}\n" for i, loss in enumerate(report.loss_curve)]
        _atomic_write_text(args.loss_csv, "".join(lines))
    return EXIT_OK


def _add_train_flags(parser):
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--learning-rate", type=float, default=0.1)
    parser.add_argument("--momentum", type=float, default=0.9)
    parser.add_argument("--weight-decay", type=float, default=2e-4)
    parser.add_argument("--no-normalize", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dsquant",
        description="Compress training datasets with sensitivity-driven "
                    "per-sample quantization.",
    )
    parser.add_argument("--porcelain", action="store_true",
                        help="machine-readable key=value output")
    parser.add_argument("--threads", type=int, default=1,
                        help="reserved; all stages currently run single-threaded")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build the internal dataset file")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--cifar", metavar="PATH")
    src.add_argument("--raw", nargs=2, metavar=("VALUES", "LABELS"))
    src.add_argument("--synth", metavar="C,DIM,N,SPREAD")
    p.add_argument("--shape", metavar="HxWxC")
    p.add_argument("--num-classes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("score", help="sensitivity-score every sample")
    p.add_argument("--dataset", required=True)
    p.add_argument("--probe-bits", type=int, default=sensitivity.DEFAULT_PROBE_BIT_WIDTH)
    p.add_argument("--model-init", choices=("trained", "random"), default="trained")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("allocate", help="assign per-sample bit-widths")
    p.add_argument("--scores", required=True)
    p.add_argument("--bits", required=True,
                   help="comma-separated descending bit levels, e.g. 8,0")
    p.add_argument("--fractions", help="comma-separated group fractions")
    p.add_argument("--groups", type=int, help="expected group count (validated)")
    p.add_argument("--strategy", choices=("adaptive", "fixed"), default="adaptive")
    p.add_argument("--prune-ratio", type=float, default=0.0)
    p.add_argument("--keep-list", help="file of surviving indices, one per line")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_allocate)

    p = sub.add_parser("quantize", help="write the packed QDS container")
    p.add_argument("--dataset", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_quantize)

    p = sub.add_parser("stats", help="storage accounting for a QDS file")
    p.add_argument("--qds", required=True)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("train", help="train/evaluate on a dataset file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--seed", type=int, default=42)
    _add_train_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("compare", help="original vs dequantized training")
    p.add_argument("--dataset", required=True)
    p.add_argument("--qds", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--loss-csv", help="write the quantized arm's loss curve")
    _add_train_flags(p)
    p.set_defaults(func=_cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    emit = _Emitter(args.porcelain)
    try:
        return args.func(args, emit)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
