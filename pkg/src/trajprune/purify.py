"""Dataset purification: drop outliers, fix wrong labels, prune easy samples.

The pipeline runs in a fixed order on one entropy score table:

1. Samples whose soft label peaks at or below `delta` belong to no class
   confidently; they are dropped as outliers.
2. Remaining samples whose soft-label argmax disagrees with the assigned
   label are relabeled to the argmax.
3. Of the remaining samples, the `ceil(prune_rate * n) - n_outliers` with
   the lowest entropy are pruned as easy (clamped at zero when outliers
   already exceed the budget). Ties break by ascending sample id.

So when the outlier count fits inside the budget, outliers plus easy
prunes together account for exactly ceil(prune_rate * n) samples.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .errors import (
    EmptyTable,
    MetricMismatch,
    MissingSoftLabels,
    RateOutOfRange,
    RatioOutOfRange,
)
from .metrics import ScoreTable

VERDICTS = ("keep", "relabel", "drop_outlier", "prune_easy")


@dataclass(frozen=True)
class PurifyConfig:
    delta: float = 0.10  # outlier threshold on max soft-label prob, boundary inclusive
    prune_rate: float = 0.0  # fraction of the dataset to remove in total
    correct: bool = True  # step 2 on/off
    drop_outliers: bool = True  # step 1 on/off

    def validate(self) -> None:
        if not 0.0 <= self.delta <= 1.0:
            raise RatioOutOfRange(f"delta must be in [0, 1], got {self.delta}")
        if not 0.0 <= self.prune_rate <= 1.0:
            raise RateOutOfRange(f"prune_rate must be in [0, 1], got {self.prune_rate}")


@dataclass
class PurificationPlan:
    """Per-sample verdicts plus enough context to audit each one."""

    config: PurifyConfig
    sample_ids: np.ndarray  # (n,) uint64
    verdicts: list  # (n,) strings from VERDICTS
    old_labels: np.ndarray  # (n,) int64
    new_labels: np.ndarray  # (n,) int64; differs from old only on relabel rows
    entropy: np.ndarray  # (n,) float64
    max_prob: np.ndarray  # (n,) float64
    budget: int = 0  # ceil(prune_rate * n)

    def _ids(self, verdict: str) -> np.ndarray:
        mask = np.array([v == verdict for v in self.verdicts])
        return self.sample_ids[mask]

    @property
    def outlier_ids(self) -> np.ndarray:
        return self._ids("drop_outlier")

    @property
    def relabel_ids(self) -> np.ndarray:
        return self._ids("relabel")

    @property
    def prune_ids(self) -> np.ndarray:
        return self._ids("prune_easy")

    @property
    def surviving_ids(self) -> np.ndarray:
        mask = np.array([v in ("keep", "relabel") for v in self.verdicts])
        return self.sample_ids[mask]

    def counts(self) -> dict:
        out = {v: 0 for v in VERDICTS}
        for v in self.verdicts:
            out[v] += 1
        return out


def detect_outliers(table: ScoreTable, delta: float) -> np.ndarray:
    """Boolean mask of samples whose best class probability is <= delta."""
    if not 0.0 <= delta <= 1.0:
        raise RatioOutOfRange(f"delta must be in [0, 1], got {delta}")
    probs = _require_soft(table)
    return probs.max(axis=1) <= delta


def correct_labels(table: ScoreTable) -> np.ndarray:
    """Proposed labels: soft-label argmax (ties to the lowest class index)."""
    return _require_soft(table).argmax(axis=1).astype(np.int64)


def _require_soft(table: ScoreTable) -> np.ndarray:
    if table.soft_labels is None:
        raise MissingSoftLabels(
            "this step needs per-sample soft labels; score with metric=entropy"
        )
    return table.soft_labels


def purify(table: ScoreTable, config: PurifyConfig) -> PurificationPlan:
    """Run the three-step pipeline and return one verdict per sample."""
    config.validate()
    if len(table) == 0:
        raise EmptyTable("cannot purify an empty table")
    if table.metric != "entropy":
        raise MetricMismatch(f"purification needs entropy scores, got {table.metric!r}")
    probs = _require_soft(table)
    n = len(table)
    max_prob = probs.max(axis=1)
    proposed = probs.argmax(axis=1).astype(np.int64)

    outlier = (
        max_prob <= config.delta if config.drop_outliers else np.zeros(n, dtype=bool)
    )
    budget = math.ceil(config.prune_rate * n)
    easy_quota = max(0, budget - int(outlier.sum()))

    # lowest entropy first, sample id breaks ties; outliers are out of the pool
    order = np.lexsort((table.sample_ids, table.scores))
    prune = np.zeros(n, dtype=bool)
    taken = 0
    for i in order:
        if taken >= easy_quota:
            break
        if not outlier[i]:
            prune[i] = True
            taken += 1

    relabel = (
        (~outlier) & (~prune) & (proposed != table.labels)
        if config.correct
        else np.zeros(n, dtype=bool)
    )

    verdicts = []
    new_labels = table.labels.copy()
    for i in range(n):
        if outlier[i]:
            verdicts.append("drop_outlier")
        elif prune[i]:
            verdicts.append("prune_easy")
        elif relabel[i]:
            verdicts.append("relabel")
            new_labels[i] = proposed[i]
        else:
            verdicts.append("keep")
    return PurificationPlan(
        config=config,
        sample_ids=table.sample_ids.copy(),
        verdicts=verdicts,
        old_labels=table.labels.copy(),
        new_labels=new_labels,
        entropy=table.scores.copy(),
        max_prob=max_prob,
        budget=budget,
    )


# ---------------------------------------------------------------------------
# serialization: CSV + JSON summary


def summary_path(path) -> str:
    return str(path) + ".summary.json"


def write_plan(plan: PurificationPlan, path) -> None:
    """CSV `sample_id,verdict,old_label,new_label,entropy,max_prob` + summary JSON."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["sample_id", "verdict", "old_label", "new_label", "entropy", "max_prob"])
        for i in range(len(plan.sample_ids)):
            w.writerow(
                [
                    int(plan.sample_ids[i]),
                    plan.verdicts[i],
                    int(plan.old_labels[i]),
                    int(plan.new_labels[i]),
                    repr(float(plan.entropy[i])),
                    repr(float(plan.max_prob[i])),
                ]
            )
    summary = {
        "n_samples": len(plan.sample_ids),
        "counts": plan.counts(),
        "budget": plan.budget,
        "config": {
            "delta": plan.config.delta,
            "prune_rate": plan.config.prune_rate,
            "correct": plan.config.correct,
            "drop_outliers": plan.config.drop_outliers,
        },
        "created": datetime.now(timezone.utc).isoformat(),
    }
    with open(summary_path(path), "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")


def read_plan(path) -> PurificationPlan:
    import csv

    with open(path, "r", newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    expected = ["sample_id", "verdict", "old_label", "new_label", "entropy", "max_prob"]
    if not rows or rows[0] != expected:
        raise EmptyTable(f"{path}: not a purification plan")
    body = rows[1:]
    if not body:
        raise EmptyTable(f"{path}: no samples")
    for r in body:
        if r[1] not in VERDICTS:
            raise EmptyTable(f"{path}: unknown verdict {r[1]!r}")
    config = PurifyConfig()
    budget = 0
    try:
        with open(summary_path(path), "r", encoding="utf-8") as f:
            summary = json.load(f)
        c = summary.get("config", {})
        config = PurifyConfig(
            delta=c.get("delta", 0.10),
            prune_rate=c.get("prune_rate", 0.0),
            correct=c.get("correct", True),
            drop_outliers=c.get("drop_outliers", True),
        )
        budget = summary.get("budget", 0)
    except FileNotFoundError:
        pass
    return PurificationPlan(
        config=config,
        sample_ids=np.array([int(r[0]) for r in body], dtype=np.uint64),
        verdicts=[r[1] for r in body],
        old_labels=np.array([int(r[2]) for r in body], dtype=np.int64),
        new_labels=np.array([int(r[3]) for r in body], dtype=np.int64),
        entropy=np.array([float(r[4]) for r in body], dtype=np.float64),
        max_prob=np.array([float(r[5]) for r in body], dtype=np.float64),
        budget=budget,
    )
