"""Benchmark harness: prune with a metric, retrain, measure on held-out data.

One cell of the comparison grid is (seed, metric, rate): train on the
corrupted training set, score every sample, drop the easiest
ceil(rate * n), retrain from scratch on the survivors, and report accuracy
on a clean held-out set. Pseudo-metrics: "random" drops a seeded uniform
subset, "none" keeps everything.

"Easiest" depends on the metric's direction: high margin means easy, so
the margin metric drops its highest scores while every other metric drops
its lowest.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import MetricMismatch
from .metrics import METRICS, EpochSelector, ScoreTable, score_dataset
from .prune import make_prune_plan
from .rng import derive_seed
from .store import TrajectoryLog
from .trainer import (
    SyntheticDataset,
    SyntheticSpec,
    TrainConfig,
    accuracy,
    synth_dataset,
    train_softmax,
)

# metrics where a LOW score marks an easy sample; margin is the exception
EASY_IS_LOW = {
    "entropy": True,
    "aum": False,
    "forgetting": True,
    "el2n": True,
    "moving_avg_loss": True,
}

BASELINES = ("random", "none")


@dataclass
class Benchmark:
    train: SyntheticDataset
    holdout: SyntheticDataset  # clean labels, no duplicates


def make_benchmark(spec: SyntheticSpec, holdout_per_class: int | None = None) -> Benchmark:
    """Corrupted training set plus a clean held-out set from the same geometry."""
    hold_spec = replace(
        spec,
        per_class=holdout_per_class or spec.per_class,
        noise=0.0,
        dup_frac=0.0,
        seed=derive_seed(spec.seed, 0x11),
    )
    return Benchmark(train=synth_dataset(spec), holdout=synth_dataset(hold_spec))


def prune_kept_ids(table: ScoreTable, rate: float, metric: str, seed: int = 0) -> np.ndarray:
    """Sample ids that survive dropping ceil(rate * n) easiest under the metric."""
    if metric in BASELINES:
        policy = "random" if metric == "random" else "none"
    elif metric in METRICS:
        policy = "drop_easiest" if EASY_IS_LOW[metric] else "drop_hardest"
    else:
        raise MetricMismatch(f"unknown metric {metric!r}")
    return make_prune_plan(table, rate, policy, seed=seed).kept_ids


def selector_for(metric: str, every_k: int, n_epochs: int) -> EpochSelector:
    """A sensible selector per metric: el2n wants one late epoch, the rest a stride."""
    if metric == "el2n":
        return EpochSelector.single(n_epochs)
    if metric == "forgetting":
        return EpochSelector.every_k(1)
    return EpochSelector.every_k(every_k)


@dataclass
class CellResult:
    seed: int
    metric: str
    rate: float
    accuracy: float
    n_kept: int


def _retrain_subset(
    bench: Benchmark, kept_ids: np.ndarray, cfg: TrainConfig, classes: int
) -> float:
    keep = np.isin(bench.train.sample_ids, kept_ids)
    res = train_softmax(
        bench.train.features[keep],
        bench.train.labels[keep],
        cfg,
        classes=classes,
        sample_ids=bench.train.sample_ids[keep],
    )
    return accuracy(res.weights, bench.holdout.features, bench.holdout.true_labels)


def run_seed_cells(
    spec: SyntheticSpec,
    cfg: TrainConfig,
    rates: list[float],
    metrics: list[str],
    every_k: int = 1,
) -> list[CellResult]:
    """All (metric, rate) cells for one seed, sharing a single base training run."""
    bench = make_benchmark(spec)
    c = spec.classes
    base = train_softmax(
        bench.train.features,
        bench.train.labels,
        cfg,
        classes=c,
        sample_ids=bench.train.sample_ids,
    )
    results: list[CellResult] = []
    full_acc = accuracy(base.weights, bench.holdout.features, bench.holdout.true_labels)
    tables: dict[str, ScoreTable] = {}
    for metric in metrics:
        if metric == "none":
            results.append(
                CellResult(
                    seed=spec.seed,
                    metric="none",
                    rate=0.0,
                    accuracy=full_acc,
                    n_kept=bench.train.n_samples,
                )
            )
            continue
        if metric != "random":
            tables[metric] = score_dataset(
                base.log, metric, selector_for(metric, every_k, base.log.n_epochs)
            )
        for rate in rates:
            if metric == "random":
                table = tables.get("entropy") or score_dataset(
                    base.log, "entropy", EpochSelector.every_k(every_k)
                )
                tables.setdefault("entropy", table)
                kept = prune_kept_ids(
                    table, rate, "random", seed=derive_seed(spec.seed, 5, int(rate * 10000))
                )
            else:
                kept = prune_kept_ids(tables[metric], rate, metric)
            acc = _retrain_subset(bench, kept, cfg, c)
            results.append(
                CellResult(
                    seed=spec.seed, metric=metric, rate=rate, accuracy=acc, n_kept=len(kept)
                )
            )
    return results


def grid_compare(
    base_spec: SyntheticSpec,
    cfg: TrainConfig,
    rates: list[float],
    metrics: list[str],
    n_seeds: int,
    every_k: int = 1,
    threads: int = 1,
) -> list[CellResult]:
    """The full grid over `n_seeds` reseeded datasets. Deterministic for a
    fixed argument set regardless of thread count."""
    specs = [replace(base_spec, seed=derive_seed(base_spec.seed, 7, s)) for s in range(n_seeds)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(specs))) as pool:
            per_seed = list(
                pool.map(lambda sp: run_seed_cells(sp, cfg, rates, metrics, every_k), specs)
            )
    else:
        per_seed = [run_seed_cells(sp, cfg, rates, metrics, every_k) for sp in specs]
    out: list[CellResult] = []
    for cells in per_seed:
        out.extend(cells)
    return out


def aggregate(results: list[CellResult]) -> list[tuple[float, str, float, float]]:
    """(rate, metric, mean accuracy, std accuracy) rows, sorted for stable CSV."""
    groups: dict[tuple[float, str], list[float]] = {}
    for r in results:
        groups.setdefault((r.rate, r.metric), []).append(r.accuracy)
    rows = []
    for (rate, metric), accs in sorted(groups.items()):
        a = np.asarray(accs, dtype=np.float64)
        rows.append((rate, metric, float(a.mean()), float(a.std())))
    return rows
