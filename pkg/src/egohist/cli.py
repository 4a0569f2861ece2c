"""Command-line entry point: train, cv, sweep, inspect, bench.

Every artifact-producing command writes a manifest.json capturing the
resolved configuration, dataset, seed and command line, so any output can
be reproduced from its manifest alone. Config precedence is flags over
config file over defaults.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, replace

from . import __version__
from .bench import run_scaling
from .errors import ConfigError, EgohistError
from .graphs import build_egonets, load_fixed_split, load_tudataset
from .interpret import export_masks, importance_summary, mask_importance
from .model import Model, config_for_dataset, load_checkpoint, save_checkpoint
from .optim import (
    TrainConfig,
    TrainSplit,
    ablation_cells,
    cross_validate,
    grid_search,
    holdout_split,
    train,
)

_MODEL_FLAGS = {
    "layers": "num_layers",
    "radius": "egonet_radius",
    "masks": "masks_per_layer",
    "dict_size": "dict_size",
    "hidden": "mlp_hidden",
    "dropout": "dropout",
    "pooling": "pooling",
}
_TRAIN_FLAGS = {
    "epochs": "epochs",
    "lr": "learning_rate",
    "batch_size": "batch_size",
    "patience": "patience",
    "seed": "seed",
}
_MODEL_KEYS = set(_MODEL_FLAGS.values())
_TRAIN_KEYS = set(_TRAIN_FLAGS.values())


def _add_dataset_args(p):
    p.add_argument("--dataset-root", required=True, help="directory holding the dataset files")
    p.add_argument("--dataset", required=True, help="dataset name (file prefix)")


def _add_config_args(p):
    p.add_argument("--config", help="JSON file with model/train settings")
    p.add_argument("--layers", type=int)
    p.add_argument("--radius", type=int)
    p.add_argument("--masks", type=int)
    p.add_argument("--dict-size", type=int, dest="dict_size")
    p.add_argument("--hidden", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--pooling", choices=["sum", "max"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--patience", type=int)
    p.add_argument("--seed", type=int)


def _resolve_configs(args, dataset):
    file_cfg = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - _MODEL_KEYS - _TRAIN_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    model_over = {k: v for k, v in file_cfg.items() if k in _MODEL_KEYS}
    train_over = {k: v for k, v in file_cfg.items() if k in _TRAIN_KEYS}
    for flag, key in _MODEL_FLAGS.items():
        val = getattr(args, flag, None)
        if val is not None:
            model_over[key] = val
    for flag, key in _TRAIN_FLAGS.items():
        val = getattr(args, flag, None)
        if val is not None:
            train_over[key] = val
    return config_for_dataset(dataset, **model_over), TrainConfig(**train_over)


def _write_manifest(out_dir, command, argv, dataset_name, model_config, train_config, extra=None):
    manifest = {
        "command": command,
        "argv": list(argv),
        "dataset": dataset_name,
        "seed": train_config.seed if train_config else None,
        "model_config": asdict(model_config) if model_config else None,
        "train_config": asdict(train_config) if train_config else None,
        "version": __version__,
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_metrics_csv(path, records):
    """records: iterable of (fold, RunRecord); fold column dropped if None."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["# schema: egohist.metrics.v1"])
        with_fold = any(f is not None for f, _ in records)
        header = ["epoch", "train_loss", "val_loss", "train_metric", "val_metric"]
        writer.writerow((["fold"] if with_fold else []) + header)
        for fold, rec in records:
            for e in range(rec.epochs_run):
                row = [
                    e,
                    repr(rec.train_loss[e]),
                    repr(rec.val_loss[e]),
                    repr(rec.train_metric[e]),
                    repr(rec.val_metric[e]),
                ]
                writer.writerow(([fold] if with_fold else []) + row)


def _metric_name(task):
    return "accuracy" if task == "classification" else "mae"


def cmd_train(args) -> int:
    dataset = load_tudataset(args.dataset_root, args.dataset)
    model_config, train_config = _resolve_configs(args, dataset)
    os.makedirs(args.out, exist_ok=True)

    split = None
    if args.fixed_split:
        parts = load_fixed_split(args.dataset_root, args.dataset)
        if parts is None:
            raise ConfigError(
                f"--fixed-split given but {args.dataset} ships no *_indices.txt files"
            )
        split = TrainSplit(train=parts[0], val=parts[1], test=parts[2])
    else:
        split = holdout_split(dataset, train_config.seed, val_fraction=args.val_fraction)

    model = Model(model_config, seed=train_config.seed)
    record = train(model, dataset, split, train_config)

    ckpt = os.path.join(args.out, "checkpoint.egh")
    save_checkpoint(model, ckpt)
    metrics = os.path.join(args.out, "metrics.csv")
    _write_metrics_csv(metrics, [(None, record)])
    _write_manifest(
        args.out, "train", sys.argv[1:], args.dataset, model_config, train_config,
        extra={"outputs": ["checkpoint.egh", "metrics.csv"]},
    )
    summary = {
        "best_epoch": record.best_epoch,
        "best_val_loss": record.best_val_loss,
        "epochs_run": record.epochs_run,
        "stopped_early": record.stopped_early,
    }
    if record.test_metric is not None:
        summary[f"test_{_metric_name(dataset.task)}"] = record.test_metric
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_cv(args) -> int:
    dataset = load_tudataset(args.dataset_root, args.dataset)
    model_config, train_config = _resolve_configs(args, dataset)
    os.makedirs(args.out, exist_ok=True)

    result = cross_validate(
        dataset, model_config, train_config,
        n_folds=args.folds, workers=args.workers,
    )
    _write_metrics_csv(
        os.path.join(args.out, "folds.csv"),
        [(o.fold, o.record) for o in result.outcomes],
    )
    name = _metric_name(dataset.task)
    scale = 100.0 if dataset.task == "classification" else 1.0
    summary = {
        "dataset": dataset.name,
        "task": dataset.task,
        "metric": name,
        "folds": [
            {
                "fold": o.fold,
                "best_epoch": o.best_epoch,
                "best_val_loss": o.best_val_loss,
                f"val_{name}": o.val_metric,
                f"test_{name}": o.test_metric,
                "epochs_run": o.epochs_run,
            }
            for o in result.outcomes
        ],
        "mean": result.mean,
        "stderr": result.stderr,
        "display": f"{result.mean * scale:.2f} ± {result.stderr * scale:.2f}",
    }
    with open(os.path.join(args.out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(
        args.out, "cv", sys.argv[1:], args.dataset, model_config, train_config,
        extra={"outputs": ["folds.csv", "summary.json"], "folds": args.folds},
    )
    print(summary["display"])
    return 0


def cmd_sweep(args) -> int:
    dataset = load_tudataset(args.dataset_root, args.dataset)
    model_config, train_config = _resolve_configs(args, dataset)
    with open(args.grid, "r", encoding="utf-8") as fh:
        grid = json.load(fh)
    if not isinstance(grid, dict) or not grid:
        raise ConfigError(f"{args.grid}: grid must be a non-empty JSON object")
    os.makedirs(args.out, exist_ok=True)

    fold_subset = list(range(args.fold_subset)) if args.fold_subset else None
    entries = grid_search(
        dataset, grid, model_config, train_config,
        n_folds=args.folds, fold_subset=fold_subset, workers=args.workers,
    )
    payload = []
    for rank, entry in enumerate(entries):
        item = {
            "rank": rank,
            "index": entry.index,
            "overrides": entry.overrides,
            "error": entry.error,
        }
        if entry.result is not None:
            item.update(
                mean_val_loss=entry.result.mean_val_loss,
                mean_val_metric=entry.result.mean_val_metric,
                mean_test_metric=entry.result.mean,
                stderr_test_metric=entry.result.stderr,
                fold_test_metrics=[o.test_metric for o in entry.result.outcomes],
            )
        payload.append(item)
    with open(os.path.join(args.out, "sweep.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

    outputs = ["sweep.json"]
    if args.cells:
        keys = [k.strip() for k in args.cells.split(",") if k.strip()]
        report = ablation_cells(entries, keys, top=args.cells_top)
        cells_path = os.path.join(args.out, "cells.csv")
        _write_cells_csv(cells_path, report, keys)
        outputs.append("cells.csv")
    _write_manifest(
        args.out, "sweep", sys.argv[1:], args.dataset, model_config, train_config,
        extra={"outputs": outputs, "grid": grid},
    )
    best = next((e for e in entries if e.result is not None), None)
    if best is not None:
        print(json.dumps({"best_overrides": best.overrides,
                          "mean_test_metric": best.result.mean}, sort_keys=True))
    return 0


def _write_cells_csv(path, report, keys):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["# schema: egohist.cells.v1"])
        if len(keys) == 2:
            rows = sorted({k[0] for k in report})
            cols = sorted({k[1] for k in report})
            writer.writerow([f"{keys[0]}\\{keys[1]}"] + cols)
            for r in rows:
                writer.writerow([r] + [repr(report.get((r, c), "")) for c in cols])
        else:
            writer.writerow(list(keys) + ["mean_test_metric"])
            for key, value in sorted(report.items()):
                writer.writerow(list(key) + [repr(value)])


def cmd_inspect(args) -> int:
    model = load_checkpoint(args.checkpoint)
    dataset = load_tudataset(args.dataset_root, args.dataset)
    os.makedirs(args.out, exist_ok=True)

    seed = args.seed if args.seed is not None else 0
    fixed = load_fixed_split(args.dataset_root, args.dataset) if args.fixed_split else None
    if args.fixed_split and fixed is None:
        raise ConfigError(
            f"--fixed-split given but {args.dataset} ships no *_indices.txt files"
        )
    val = fixed[1] if fixed else holdout_split(dataset, seed).val

    egonets = build_egonets(dataset, model.config.egonet_radius)
    reports = mask_importance(model, dataset, val, args.layer, egonets=egonets)
    summary = importance_summary(reports)
    with open(os.path.join(args.out, "importance.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths = export_masks(model, args.out)
    _write_manifest(
        args.out, "inspect", sys.argv[1:], args.dataset, model.config, None,
        extra={
            "outputs": ["importance.json"] + [os.path.basename(p) for p in paths],
            "checkpoint": args.checkpoint,
            "layer": args.layer,
            "seed": seed,
        },
    )
    print(json.dumps({"baseline": summary["baseline"],
                      "top_mask": summary["masks"][0]["mask"]}, sort_keys=True))
    return 0


def cmd_bench(args) -> int:
    nodes = [int(tok) for tok in args.nodes.split(",") if tok.strip()]
    dict_sizes = (
        [int(tok) for tok in args.dict_sizes.split(",") if tok.strip()]
        if args.dict_sizes
        else None
    )
    result = run_scaling(
        nodes,
        degree=args.degree,
        feature_dim=args.feature_dim,
        masks=args.masks if args.masks else 8,
        dict_size=args.dict_size if args.dict_size else 16,
        layers=args.layers if args.layers else 1,
        radius=args.radius if args.radius else 1,
        repeats=args.repeats,
        seed=args.seed if args.seed is not None else 0,
        dict_sizes=dict_sizes,
    )
    for n, s in zip(result.node_counts, result.seconds):
        print(f"n={n:>8d}  {s * 1e3:10.3f} ms")
    print(f"slope(time vs n) = {result.slope:.3f}")
    if result.dict_slope is not None:
        for w, s in zip(result.dict_ladder, result.dict_seconds):
            print(f"W={w:>8d}  {s * 1e3:10.3f} ms")
        print(f"slope(time vs W) = {result.dict_slope:.3f}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        report = {k: v for k, v in asdict_bench(result).items()}
        with open(os.path.join(args.out, "bench.json"), "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        _write_manifest(
            args.out, "bench", sys.argv[1:], "synthetic-circulant", None, None,
            extra={"outputs": ["bench.json"], "bench": report},
        )
    return 0


def asdict_bench(result):
    return {
        "node_counts": result.node_counts,
        "seconds": result.seconds,
        "slope": result.slope,
        "degree": result.degree,
        "feature_dim": result.feature_dim,
        "masks": result.masks,
        "dict_size": result.dict_size,
        "layers": result.layers,
        "radius": result.radius,
        "repeats": result.repeats,
        "dict_ladder": result.dict_ladder,
        "dict_seconds": result.dict_seconds,
        "dict_slope": result.dict_slope,
    }


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="egohist",
        description="Graph classification/regression with egonet histogram-intersection layers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on a single train/val split")
    _add_dataset_args(p)
    _add_config_args(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--val-fraction", type=float, default=0.1, dest="val_fraction")
    p.add_argument("--fixed-split", action="store_true",
                   help="use the *_indices.txt files shipped with the dataset")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cv", help="k-fold cross-validation")
    _add_dataset_args(p)
    _add_config_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("sweep", help="grid search over hyper-parameters")
    _add_dataset_args(p)
    _add_config_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", required=True, help="JSON object: config field -> list of values")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--fold-subset", type=int, default=0, dest="fold_subset",
                   help="train only the first k folds of each configuration")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--cells", help="comma-separated config fields for a cell report")
    p.add_argument("--cells-top", type=int, default=3, dest="cells_top")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("inspect", help="mask importance and mask exports for a checkpoint")
    _add_dataset_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--layer", type=int, default=0)
    p.add_argument("--seed", type=int)
    p.add_argument("--fixed-split", action="store_true")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("bench", help="scaling benchmark on synthetic graphs")
    p.add_argument("--nodes", required=True, help="comma-separated node-count ladder")
    p.add_argument("--degree", type=int, default=4)
    p.add_argument("--feature-dim", type=int, default=16, dest="feature_dim")
    p.add_argument("--masks", type=int)
    p.add_argument("--dict-size", type=int, dest="dict_size")
    p.add_argument("--dict-sizes", dest="dict_sizes",
                   help="optional comma-separated dictionary-size ladder")
    p.add_argument("--layers", type=int)
    p.add_argument("--radius", type=int)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EgohistError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
