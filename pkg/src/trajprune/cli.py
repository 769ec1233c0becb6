"""Command-line front end.

Every subcommand is a pure function of its flags and input files: given
the same inputs it writes byte-identical primary outputs. Exit codes:
0 success, 2 bad flags or out-of-range values, 3 runtime failure
(corrupt input, divergent training, unreadable file).

Each subcommand that writes files also drops a `<out>.run.json` manifest
recording the resolved config, input/output content hashes, wall time,
and tool version. Manifests and `.meta.json`/`.summary.json` sidecars
carry timestamps; primary outputs never do.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bench import BASELINES, aggregate, grid_compare
from .errors import DivergenceDetected, FormatError, TrajPruneError
from .metrics import (
    METRICS,
    EpochSelector,
    ensemble_average,
    read_scores,
    score_dataset,
    write_scores,
)
from .prune import apply_plan, read_manifest, write_manifest
from .purify import PurifyConfig, purify, read_plan, write_plan
from .store import open_log, write_log
from .trainer import (
    FEATURE_MAGIC,
    SyntheticSpec,
    TrainConfig,
    read_features,
    synth_dataset,
    train_softmax,
    write_features,
)
from .store import MAGIC as LOG_MAGIC


def _err(msg: str) -> None:
    print(f"trajprune: error: {msg}", file=sys.stderr)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def _write_run_manifest(subcommand, args, inputs, outputs, t0, anchor) -> None:
    manifest = {
        "tool": {"name": "trajprune", "version": __version__},
        "subcommand": subcommand,
        "config": {
            k: v for k, v in sorted(vars(args).items()) if k != "func" and not callable(v)
        },
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {str(p): _sha256(p) for p in outputs},
        "wall_time_s": round(time.monotonic() - t0, 6),
        "created": datetime.now(timezone.utc).isoformat(),
    }
    with open(str(anchor) + ".run.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _selector_from_flags(args) -> EpochSelector:
    if getattr(args, "at_epoch", None) is not None:
        return EpochSelector.single(args.at_epoch)
    if getattr(args, "upto", None) is not None:
        return EpochSelector.upto(args.upto)
    if getattr(args, "select", None) is not None:
        return EpochSelector.explicit(int(v) for v in args.select.split(","))
    return EpochSelector.every_k(getattr(args, "every_k", 1) or 1)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args, t0) -> int:
    spec = SyntheticSpec(
        classes=args.classes,
        dim=args.dim,
        per_class=args.per_class,
        sigma=args.sigma,
        sep=args.sep,
        noise=args.noise,
        dup_frac=args.dup_frac,
        seed=args.seed,
        geometry=args.geometry,
    )
    ds = synth_dataset(spec)
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    feat_path = Path(str(prefix) + ".features.lfea")
    manifest_path = Path(str(prefix) + ".manifest.jsonl")
    truth_path = Path(str(prefix) + ".truth.json")
    write_features(ds.features, feat_path)
    rows = [
        {
            "sample_id": int(sid),
            "label": int(ds.labels[i]),
            "payload_ref": f"{feat_path.name}#row={i}",
        }
        for i, sid in enumerate(ds.sample_ids)
    ]
    write_manifest(rows, manifest_path)
    truth = {
        "spec": asdict(spec),
        "true_labels": [int(v) for v in ds.true_labels],
        "flips": [asdict(fr) for fr in ds.flips],
        "dup_ids": [int(v) for v in ds.dup_ids],
    }
    with open(truth_path, "w", encoding="utf-8") as f:
        json.dump(truth, f, sort_keys=True)
        f.write("\n")
    print(
        f"synthesized {ds.n_samples} samples ({spec.classes} classes, dim {spec.dim}, "
        f"{len(ds.flips)} flipped, {len(ds.dup_ids)} duplicates) -> {prefix}.*"
    )
    _write_run_manifest(
        "synth", args, [], [feat_path, manifest_path, truth_path], t0, prefix
    )
    return 0


def _load_dataset(manifest_path: Path, features_override: str | None):
    rows = read_manifest(manifest_path)
    refs = []
    for r in rows:
        ref = str(r["payload_ref"])
        fname, sep, tail = ref.partition("#row=")
        if not sep:
            raise FormatError(f"payload_ref {ref!r} lacks a #row= fragment")
        try:
            refs.append((fname, int(tail)))
        except ValueError as exc:
            raise FormatError(f"payload_ref {ref!r} has a non-integer row") from exc
    files = {f for f, _ in refs}
    if features_override:
        feat_path = Path(features_override)
    else:
        if len(files) != 1:
            raise FormatError(
                f"manifest references {len(files)} feature files; pass --features"
            )
        feat_path = manifest_path.parent / next(iter(files))
    feats = read_features(feat_path)
    idx = np.array([i for _, i in refs], dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= len(feats)):
        raise FormatError(
            f"payload_ref rows outside [0, {len(feats)}) in {manifest_path}"
        )
    x = feats[idx].astype(np.float64)
    y = np.array([int(r["label"]) for r in rows], dtype=np.int64)
    ids = np.array([int(r["sample_id"]) for r in rows], dtype=np.uint64)
    return x, y, ids, feat_path


def cmd_train(args, t0) -> int:
    if args.data:
        manifest_path = Path(args.data + ".manifest.jsonl")
        features = args.data + ".features.lfea"
    elif args.manifest:
        manifest_path = Path(args.manifest)
        features = args.features
    else:
        _err("pass --data PREFIX or --manifest FILE")
        return 2
    x, y, ids, feat_path = _load_dataset(manifest_path, features)
    if args.classes is not None and y.size and int(y.max()) >= args.classes:
        _err(f"--classes {args.classes} but manifest has label {int(y.max())}")
        return 2
    cfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        lr=args.lr,
        seed=args.seed,
        weight_init_scale=args.init_scale,
    )
    res = train_softmax(x, y, cfg, classes=args.classes, sample_ids=ids)
    fmt = args.format or ("jsonl" if str(args.out).endswith(".jsonl") else "binary")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_log(res.log, out, format=fmt)
    print(
        f"trained {res.log.n_epochs} epochs on {res.log.n_samples} samples "
        f"({res.log.n_classes} classes) -> {out}"
    )
    _write_run_manifest("train", args, [manifest_path, feat_path], [out], t0, out)
    return 0


def cmd_score(args, t0) -> int:
    sel = _selector_from_flags(args)
    log_paths = [args.log] + (
        [p for p in args.ensemble.split(",") if p.strip()] if args.ensemble else []
    )
    tables = [score_dataset(open_log(p), args.metric, sel) for p in log_paths]
    table = tables[0] if len(tables) == 1 else ensemble_average(tables)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_scores(table, out, source_log=";".join(str(p) for p in log_paths))
    print(f"scored {len(table)} samples with {args.metric} -> {out}")
    _write_run_manifest(
        "score", args, log_paths, [out, Path(str(out) + ".meta.json")], t0, out
    )
    return 0


def cmd_purify(args, t0) -> int:
    inputs = []
    if args.scores:
        table = read_scores(args.scores)
        inputs.append(args.scores)
    elif args.log:
        table = score_dataset(open_log(args.log), "entropy", _selector_from_flags(args))
        inputs.append(args.log)
    else:
        _err("pass --scores CSV or --log LOG")
        return 2
    cfg = PurifyConfig(
        delta=args.delta,
        prune_rate=args.prune_rate,
        correct=not args.no_correct,
        drop_outliers=not args.no_outliers,
    )
    plan = purify(table, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_plan(plan, out)
    counts = plan.counts()
    print(
        f"purified {len(plan.sample_ids)} samples: {counts['drop_outlier']} outliers, "
        f"{counts['relabel']} relabeled, {counts['prune_easy']} pruned easy, "
        f"{counts['keep']} kept -> {out}"
    )
    _write_run_manifest(
        "purify", args, inputs, [out, Path(str(out) + ".summary.json")], t0, out
    )
    return 0


def cmd_apply(args, t0) -> int:
    rows = read_manifest(args.manifest)
    plan = read_plan(args.plan)
    out_rows = apply_plan(rows, plan)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_manifest(out_rows, out)
    print(f"kept {len(out_rows)} of {len(rows)} manifest rows -> {out}")
    _write_run_manifest("apply", args, [args.manifest, args.plan], [out], t0, out)
    return 0


def cmd_validate(args, t0) -> int:
    path = args.path or args.log
    if path is None:
        _err("pass a file to validate")
        return 2
    with open(path, "rb") as f:
        head = f.read(4)
    if head == FEATURE_MAGIC:
        x = read_features(path)
        print(f"OK: feature file, {x.shape[0]} samples, dim {x.shape[1]}")
        return 0
    log = open_log(path)
    print(
        f"OK: trajectory log, {log.n_samples} samples, {log.n_classes} classes, "
        f"{log.n_epochs} epochs, seed {log.run_seed}"
    )
    return 0


def cmd_compare(args, t0) -> int:
    rates = _floats(args.rates)
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    for m in metrics:
        if m not in METRICS + BASELINES:
            _err(f"unknown metric {m!r} (choose from {METRICS + BASELINES})")
            return 2
    threads = int(os.environ.get("TRAJPRUNE_THREADS", "0") or 0)
    if threads <= 0:
        threads = min(4, os.cpu_count() or 1)
    spec = SyntheticSpec(
        classes=args.classes,
        dim=args.dim,
        per_class=args.per_class,
        sigma=args.sigma,
        sep=args.sep,
        noise=args.noise,
        dup_frac=args.dup_frac,
        seed=args.seed,
        geometry=args.geometry,
    )
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch, lr=args.lr, seed=args.seed)
    results = grid_compare(
        spec, cfg, rates, metrics, args.seeds, every_k=args.every_k, threads=threads
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    import csv as _csv

    with open(out, "w", newline="", encoding="utf-8") as f:
        w = _csv.writer(f)
        w.writerow(["rate", "metric", "mean_accuracy", "std_accuracy"])
        for rate, metric, mean, std in aggregate(results):
            w.writerow([repr(rate), metric, repr(mean), repr(std)])
    print(
        f"compared {len(metrics)} metrics x {len(rates)} rates over {args.seeds} seeds "
        f"({threads} threads) -> {out}"
    )
    _write_run_manifest("compare", args, [], [out], t0, out)
    return 0


def cmd_report(args, t0) -> int:
    if not args.plan and not args.scores:
        _err("pass --scores CSV or --plan PLAN_CSV")
        return 2
    if args.plan:
        plan = read_plan(args.plan)
        counts = plan.counts()
        print(f"plan over {len(plan.sample_ids)} samples (budget {plan.budget}):")
        for verdict in ("drop_outlier", "relabel", "prune_easy", "keep"):
            print(f"  {verdict:13s} {counts[verdict]}")
        return 0
    table = read_scores(args.scores)
    order = np.lexsort((table.sample_ids, table.scores))
    k = min(args.top, len(table))
    print(f"metric {table.metric}, {len(table)} samples")
    s = table.scores
    print(
        f"score range [{s.min():.6g}, {s.max():.6g}], mean {s.mean():.6g}, "
        f"median {np.median(s):.6g}"
    )
    print(f"hardest {k}:")
    for i in order[::-1][:k]:
        print(f"  id={int(table.sample_ids[i])} label={int(table.labels[i])} score={s[i]:.6g}")
    print(f"easiest {k}:")
    for i in order[:k]:
        print(f"  id={int(table.sample_ids[i])} label={int(table.labels[i])} score={s[i]:.6g}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_selector_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--every-k", type=int, default=1, metavar="K",
                   help="use epochs K, 2K, ... (default 1: every epoch)")
    g.add_argument("--at-epoch", type=int, default=None, metavar="E",
                   help="use exactly epoch E")
    g.add_argument("--upto", type=int, default=None, metavar="T",
                   help="use epochs 1..T")
    g.add_argument("--select", type=str, default=None, metavar="LIST",
                   help="comma-separated explicit epoch list")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajprune",
        description="Prune, relabel, and audit datasets using per-sample "
        "logit trajectories from a training run.",
    )
    parser.add_argument("--version", action="version", version=f"trajprune {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")

    p = sub.add_parser("synth", help="generate a synthetic benchmark dataset")
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--per-class", type=int, default=200)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--sep", type=float, default=6.0,
                   help="adjacent class-mean distance in sigmas")
    p.add_argument("--noise", type=float, default=0.0,
                   help="fraction of labels flipped to a random other class")
    p.add_argument("--dup-frac", type=float, default=0.0,
                   help="fraction of each class replaced by near-copies of its mean")
    p.add_argument("--geometry", choices=["blob", "ring"], default="blob",
                   help="blob: isotropic class noise; ring: tangential noise only")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, metavar="PREFIX")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the reference model, logging logits per epoch")
    p.add_argument("--data", metavar="PREFIX",
                   help="dataset prefix from synth (expects PREFIX.manifest.jsonl)")
    p.add_argument("--manifest", help="dataset manifest JSONL (alternative to --data)")
    p.add_argument("--features", help="feature file override")
    p.add_argument("--classes", type=int, default=None,
                   help="class count when labels alone understate it")
    p.add_argument("--epochs", type=int, default=12)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-scale", type=float, default=0.0)
    p.add_argument("--format", choices=["binary", "jsonl"], default=None,
                   help="log format (default: by --out extension)")
    p.add_argument("--out", required=True, metavar="LOG")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score every sample in a trajectory log")
    p.add_argument("--log", required=True)
    p.add_argument("--metric", choices=list(METRICS), default="entropy")
    _add_selector_flags(p)
    p.add_argument("--ensemble", metavar="LOG2,LOG3,...",
                   help="average scores with runs from these logs")
    p.add_argument("--out", required=True, metavar="CSV")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("purify", help="plan outlier removal, relabeling, and easy pruning")
    p.add_argument("--scores", help="entropy score CSV from `score`")
    p.add_argument("--log", help="trajectory log (scores computed on the fly)")
    _add_selector_flags(p)
    p.add_argument("--delta", type=float, default=0.10,
                   help="outlier threshold on max soft-label probability")
    p.add_argument("--prune-rate", type=float, default=0.0,
                   help="total fraction of the dataset to remove")
    p.add_argument("--no-correct", action="store_true", help="skip relabeling")
    p.add_argument("--no-outliers", action="store_true", help="skip outlier removal")
    p.add_argument("--out", required=True, metavar="PLAN_CSV")
    p.set_defaults(func=cmd_purify)

    p = sub.add_parser("apply", help="rewrite a dataset manifest per a purification plan")
    p.add_argument("--manifest", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("validate", help="check a log or feature file and print its shape")
    p.add_argument("path", nargs="?", default=None)
    p.add_argument("--log", help="alias for the positional path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("compare", help="prune/retrain grid over metrics and rates")
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--per-class", type=int, default=200)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--sep", type=float, default=6.0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--dup-frac", type=float, default=0.0)
    p.add_argument("--geometry", choices=["blob", "ring"], default="blob")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rates", default="0.1,0.2,0.3")
    p.add_argument("--metrics", default="entropy,aum,forgetting,el2n,random,none")
    p.add_argument("--seeds", type=int, default=4, help="number of reseeded repeats")
    p.add_argument("--epochs", type=int, default=12)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--every-k", type=int, default=1)
    p.add_argument("--out", required=True, metavar="CSV")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="summarize a score table or plan on stdout")
    p.add_argument("--scores", help="score CSV")
    p.add_argument("--plan", help="purification plan CSV")
    p.add_argument("--top", type=int, default=10, metavar="K")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help()
        return 2
    t0 = time.monotonic()
    try:
        return args.func(args, t0)
    except (FormatError, DivergenceDetected) as exc:
        _err(str(exc))
        return 3
    except OSError as exc:
        _err(str(exc))
        return 3
    except (TrajPruneError, ValueError) as exc:
        _err(str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
