"""Per-sample importance metrics computed from logit trajectories.

The headline metric is the entropy (in bits) of a sample's soft label,
where the soft label is the softmax of the sample's logits averaged over a
chosen set of epochs. Low entropy means the sample is canonical for one
class (easy); high entropy means it wavers between classes (hard, or
mislabeled, or an outlier).

Also provided, for comparison: margin against the best other class
averaged over epochs (aum), counts of correct->incorrect transitions
(forgetting), the L2 norm of the prediction-error vector at one epoch
(el2n), and epoch-averaged cross-entropy loss (moving_avg_loss).

All arithmetic runs in float64 regardless of the f32 storage precision;
softmax is always max-shifted.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .errors import (
    EmptyTable,
    EpochOutOfRange,
    MaxOverEmptySet,
    MetricMismatch,
    MissingSoftLabels,
    SampleSetMismatch,
    SelectorOutOfRange,
)
from .store import TrajectoryLog

METRICS = ("entropy", "aum", "forgetting", "el2n", "moving_avg_loss")

_SQRT2 = float(np.sqrt(2.0))


@dataclass(frozen=True)
class SoftLabel:
    """Probability vector over classes; sums to 1 within 1e-12."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=np.float64))


@dataclass(frozen=True)
class EpochSelector:
    """Which logged epochs feed an epoch-averaged metric.

    Modes: every_k(k) selects {k, 2k, ..., floor(T/k)*k}; single(t) one
    epoch; upto(t) the prefix 1..t; explicit(list) any fixed set.
    """

    mode: str
    k: int | None = None
    t: int | None = None
    epoch_list: tuple[int, ...] | None = None

    @classmethod
    def every_k(cls, k: int) -> "EpochSelector":
        return cls(mode="every_k", k=int(k))

    @classmethod
    def single(cls, t: int) -> "EpochSelector":
        return cls(mode="single", t=int(t))

    @classmethod
    def upto(cls, t: int) -> "EpochSelector":
        return cls(mode="upto", t=int(t))

    @classmethod
    def explicit(cls, epochs) -> "EpochSelector":
        return cls(mode="explicit", epoch_list=tuple(int(e) for e in epochs))

    def epochs(self, n_epochs: int) -> np.ndarray:
        """Resolve to a sorted 1-indexed epoch array; raises if empty or out of range."""
        if self.mode == "every_k":
            if self.k is None or self.k < 1:
                raise SelectorOutOfRange(f"every_k needs k >= 1, got {self.k}")
            sel = np.arange(self.k, n_epochs + 1, self.k)
        elif self.mode == "single":
            sel = np.array([self.t], dtype=np.int64)
        elif self.mode == "upto":
            sel = np.arange(1, (self.t or 0) + 1)
        elif self.mode == "explicit":
            sel = np.array(sorted(set(self.epoch_list or ())), dtype=np.int64)
        else:
            raise SelectorOutOfRange(f"unknown selector mode {self.mode!r}")
        if sel.size == 0:
            raise SelectorOutOfRange(f"selector {self.describe()} selects no epochs (T={n_epochs})")
        if sel[0] < 1 or sel[-1] > n_epochs:
            if self.mode == "single":
                raise EpochOutOfRange(f"epoch {self.t} outside [1, {n_epochs}]")
            raise SelectorOutOfRange(
                f"selector {self.describe()} selects epochs outside [1, {n_epochs}]"
            )
        return sel.astype(np.int64)

    def covers_full(self, n_epochs: int) -> bool:
        try:
            sel = self.epochs(n_epochs)
        except SelectorOutOfRange:
            return False
        return sel.size == n_epochs

    def describe(self) -> dict:
        if self.mode == "every_k":
            return {"mode": "every_k", "k": self.k}
        if self.mode == "single":
            return {"mode": "single", "t": self.t}
        if self.mode == "upto":
            return {"mode": "upto", "t": self.t}
        return {"mode": "explicit", "epochs": list(self.epoch_list or ())}

    @classmethod
    def from_description(cls, d: dict) -> "EpochSelector":
        mode = d.get("mode")
        if mode == "every_k":
            return cls.every_k(d["k"])
        if mode == "single":
            return cls.single(d["t"])
        if mode == "upto":
            return cls.upto(d["t"])
        if mode == "explicit":
            return cls.explicit(d["epochs"])
        raise ValueError(f"bad selector description {d!r}")


@dataclass
class ScoreTable:
    """Per-sample scores under one metric, with provenance.

    soft_labels (n x c) is present for metric="entropy" so purification can
    reuse the same soft labels that produced the scores.
    """

    metric: str
    selector: EpochSelector
    sample_ids: np.ndarray  # (n,) uint64
    labels: np.ndarray  # (n,) int64
    scores: np.ndarray  # (n,) float64
    soft_labels: np.ndarray | None = None  # (n, c) float64

    def __len__(self) -> int:
        return len(self.scores)


# ---------------------------------------------------------------------------
# per-sample operations


def mean_logits(log: TrajectoryLog, sample: int, sel: EpochSelector) -> np.ndarray:
    """Arithmetic mean of one sample's logit vectors over the selected epochs."""
    idx = sel.epochs(log.n_epochs) - 1
    return log.logits[idx, sample, :].astype(np.float64).mean(axis=0)


def soft_label(mean: np.ndarray) -> SoftLabel:
    """Max-shifted softmax of an averaged logit vector."""
    m = np.asarray(mean, dtype=np.float64)
    if not np.isfinite(m).all():
        raise ValueError("soft_label needs finite inputs")
    shifted = m - m.max()
    e = np.exp(shifted)
    return SoftLabel(e / e.sum())


def entropy_score(sl: SoftLabel) -> float:
    """Shannon entropy of a soft label, in bits; 0*log2(0) counts as 0.

    Clamped to the mathematically exact range [0, log2 c] to keep rounding
    from leaking outside the bound.
    """
    p = sl.probs
    h = float(-np.sum(np.where(p > 0.0, p * np.log2(np.where(p > 0.0, p, 1.0)), 0.0)))
    return min(max(h, 0.0), float(np.log2(len(p))))


def aum_score(log: TrajectoryLog, sample: int, sel: EpochSelector) -> float:
    """Mean over selected epochs of (assigned-class logit - best other logit)."""
    if log.n_classes < 2:
        raise MaxOverEmptySet("margin needs at least two classes")
    idx = sel.epochs(log.n_epochs) - 1
    z = log.logits[idx, sample, :].astype(np.float64)
    y = int(log.labels[sample])
    assigned = z[:, y]
    others = np.delete(z, y, axis=1).max(axis=1)
    return float((assigned - others).mean())


def forgetting_score(log: TrajectoryLog, sample: int) -> int:
    """Number of correct->incorrect transitions over the full trajectory.

    A sample that is never classified correctly scores T, which strictly
    exceeds any achievable transition count and so ranks hardest.
    Argmax ties resolve to the lowest class index.
    """
    z = log.logits[:, sample, :]
    correct = z.argmax(axis=1) == log.labels[sample]
    if not correct.any():
        return log.n_epochs
    return int(np.sum(correct[:-1] & ~correct[1:]))


def el2n_score(log: TrajectoryLog, sample: int, at_epoch: int) -> float:
    """L2 norm of softmax(logits) minus the one-hot assigned label at one epoch."""
    if not 1 <= at_epoch <= log.n_epochs:
        raise EpochOutOfRange(f"epoch {at_epoch} outside [1, {log.n_epochs}]")
    z = log.logits[at_epoch - 1, sample, :].astype(np.float64)
    p = soft_label(z).probs.copy()
    p[int(log.labels[sample])] -= 1.0
    return min(float(np.linalg.norm(p)), _SQRT2)


def moving_avg_loss(log: TrajectoryLog, sample: int, sel: EpochSelector) -> float:
    """Mean cross-entropy (nats) over selected epochs, via log-sum-exp."""
    idx = sel.epochs(log.n_epochs) - 1
    z = log.logits[idx, sample, :].astype(np.float64)
    zmax = z.max(axis=1)
    lse = zmax + np.log(np.exp(z - zmax[:, None]).sum(axis=1))
    return float((lse - z[:, int(log.labels[sample])]).mean())


# ---------------------------------------------------------------------------
# whole-dataset scoring


def _mean_logits_all(log: TrajectoryLog, sel: EpochSelector) -> np.ndarray:
    idx = sel.epochs(log.n_epochs) - 1
    return log.logits[idx].astype(np.float64).mean(axis=0)


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _entropy_rows(p: np.ndarray) -> np.ndarray:
    h = -np.sum(np.where(p > 0.0, p * np.log2(np.where(p > 0.0, p, 1.0)), 0.0), axis=1)
    return np.clip(h, 0.0, float(np.log2(p.shape[1])))


def score_dataset(log: TrajectoryLog, metric: str, sel: EpochSelector) -> ScoreTable:
    """Score every sample in the log under one metric.

    Deterministic and independent of evaluation order. For
    metric="entropy" the table also carries the per-sample soft labels.
    Metric/selector combinations that make no sense are rejected:
    forgetting uses the full trajectory, el2n a single epoch.
    """
    if metric not in METRICS:
        raise MetricMismatch(f"unknown metric {metric!r} (choose from {METRICS})")
    soft = None
    if metric == "entropy":
        probs = _softmax_rows(_mean_logits_all(log, sel))
        scores = _entropy_rows(probs)
        soft = probs
    elif metric == "aum":
        if log.n_classes < 2:
            raise MaxOverEmptySet("margin needs at least two classes")
        idx = sel.epochs(log.n_epochs) - 1
        z = log.logits[idx].astype(np.float64)
        rows = np.arange(log.n_samples)
        assigned = z[:, rows, log.labels]
        masked = z.copy()
        masked[:, rows, log.labels] = -np.inf
        scores = (assigned - masked.max(axis=2)).mean(axis=0)
    elif metric == "forgetting":
        if not sel.covers_full(log.n_epochs):
            raise MetricMismatch(
                "forgetting is defined over the full trajectory; use a selector "
                "covering epochs 1..T"
            )
        correct = log.logits.argmax(axis=2) == log.labels[None, :]
        trans = np.sum(correct[:-1] & ~correct[1:], axis=0).astype(np.float64)
        never = ~correct.any(axis=0)
        trans[never] = float(log.n_epochs)
        scores = trans
    elif metric == "el2n":
        if sel.mode != "single":
            raise MetricMismatch("el2n is estimated at a single epoch; use a single(t) selector")
        (epoch,) = sel.epochs(log.n_epochs)
        p = _softmax_rows(log.logits[epoch - 1].astype(np.float64))
        err = p.copy()
        err[np.arange(log.n_samples), log.labels] -= 1.0
        scores = np.minimum(np.linalg.norm(err, axis=1), _SQRT2)
    else:  # moving_avg_loss
        idx = sel.epochs(log.n_epochs) - 1
        z = log.logits[idx].astype(np.float64)
        zmax = z.max(axis=2)
        lse = zmax + np.log(np.exp(z - zmax[:, :, None]).sum(axis=2))
        scores = (lse - z[:, np.arange(log.n_samples), log.labels]).mean(axis=0)
    return ScoreTable(
        metric=metric,
        selector=sel,
        sample_ids=log.sample_ids.copy(),
        labels=log.labels.copy(),
        scores=np.asarray(scores, dtype=np.float64),
        soft_labels=soft,
    )


def ensemble_average(tables: list[ScoreTable]) -> ScoreTable:
    """Per-sample mean of scores across tables from independently trained runs.

    Alignment is by sample id, not by row position. All tables must share
    metric, selector, and the same id set. Soft labels are dropped: the
    entropy of averaged logits is not the average of entropies, so carrying
    averaged soft labels would misstate the result's provenance.
    """
    if not tables:
        raise EmptyTable("need at least one table to ensemble")
    first = tables[0]
    for t in tables[1:]:
        if t.metric != first.metric or t.selector != first.selector:
            raise MetricMismatch(
                f"cannot ensemble {t.metric}/{t.selector.describe()} with "
                f"{first.metric}/{first.selector.describe()}"
            )
        if set(t.sample_ids.tolist()) != set(first.sample_ids.tolist()):
            raise SampleSetMismatch("tables cover different sample ids")
    acc = np.zeros(len(first), dtype=np.float64)
    for t in tables:
        order = {int(sid): i for i, sid in enumerate(t.sample_ids)}
        perm = np.array([order[int(sid)] for sid in first.sample_ids], dtype=np.int64)
        acc += t.scores[perm]
    return ScoreTable(
        metric=first.metric,
        selector=first.selector,
        sample_ids=first.sample_ids.copy(),
        labels=first.labels.copy(),
        scores=acc / len(tables),
        soft_labels=None,
    )


# ---------------------------------------------------------------------------
# serialization: CSV + JSON sidecar


def sidecar_path(path) -> str:
    return str(path) + ".meta.json"


def write_scores(table: ScoreTable, path, source_log: str | None = None) -> None:
    """CSV `sample_id,label,score[,p_1..p_c]` plus a JSON metadata sidecar."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        header = ["sample_id", "label", "score"]
        c = table.soft_labels.shape[1] if table.soft_labels is not None else 0
        header += [f"p_{i + 1}" for i in range(c)]
        w.writerow(header)
        for i in range(len(table)):
            row = [int(table.sample_ids[i]), int(table.labels[i]), repr(float(table.scores[i]))]
            if c:
                row += [repr(float(v)) for v in table.soft_labels[i]]
            w.writerow(row)
    meta = {
        "metric": table.metric,
        "selector": table.selector.describe(),
        "source_log": source_log,
        "created": datetime.now(timezone.utc).isoformat(),
    }
    with open(sidecar_path(path), "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def read_scores(path) -> ScoreTable:
    """Read a score CSV (and its sidecar, when present) back into a table."""
    with open(path, "r", newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0][:3] != ["sample_id", "label", "score"]:
        raise EmptyTable(f"{path}: not a score table")
    prob_cols = len(rows[0]) - 3
    body = rows[1:]
    if not body:
        raise EmptyTable(f"{path}: no samples")
    sample_ids = np.array([int(r[0]) for r in body], dtype=np.uint64)
    labels = np.array([int(r[1]) for r in body], dtype=np.int64)
    scores = np.array([float(r[2]) for r in body], dtype=np.float64)
    soft = None
    if prob_cols:
        soft = np.array([[float(v) for v in r[3:]] for r in body], dtype=np.float64)
    metric, selector = "entropy", EpochSelector.every_k(1)
    try:
        with open(sidecar_path(path), "r", encoding="utf-8") as f:
            meta = json.load(f)
        metric = meta.get("metric", metric)
        selector = EpochSelector.from_description(meta["selector"])
    except FileNotFoundError:
        pass
    return ScoreTable(
        metric=metric,
        selector=selector,
        sample_ids=sample_ids,
        labels=labels,
        scores=scores,
        soft_labels=soft,
    )
