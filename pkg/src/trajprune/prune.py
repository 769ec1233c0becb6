"""Score-driven subset selection and dataset-manifest rewriting.

A dataset manifest is JSONL, one object per sample:
`{"sample_id": int, "label": int, "payload_ref": str}`. Applying a
purification plan filters dropped rows and rewrites relabeled rows (which
gain `"corrected": true`). Plain prune plans keep or drop rows by score
rank without touching labels.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyTable, FormatError, RateOutOfRange, UnknownSampleId
from .metrics import ScoreTable
from .purify import PurificationPlan
from .rng import SplitMix64

POLICIES = ("drop_easiest", "drop_hardest", "random", "none")


@dataclass
class Ranking:
    """Sample ids ordered by ascending score; ties by ascending id."""

    sample_ids: np.ndarray
    scores: np.ndarray


def rank_samples(table: ScoreTable) -> Ranking:
    if len(table) == 0:
        raise EmptyTable("cannot rank an empty table")
    order = np.lexsort((table.sample_ids, table.scores))
    return Ranking(sample_ids=table.sample_ids[order], scores=table.scores[order])


@dataclass
class PrunePlan:
    policy: str
    rate: float
    dropped_ids: np.ndarray
    kept_ids: np.ndarray


def make_prune_plan(
    table: ScoreTable, rate: float, policy: str = "drop_easiest", seed: int = 0
) -> PrunePlan:
    """Drop ceil(rate * n) samples chosen by the policy; keep the rest.

    drop_easiest removes the lowest-scoring samples, drop_hardest the
    highest, random a seeded uniform subset, none nothing at all.
    """
    if policy not in POLICIES:
        raise RateOutOfRange(f"unknown policy {policy!r} (choose from {POLICIES})")
    if not 0.0 <= rate <= 1.0:
        raise RateOutOfRange(f"rate must be in [0, 1], got {rate}")
    if len(table) == 0:
        raise EmptyTable("cannot prune an empty table")
    n = len(table)
    budget = 0 if policy == "none" else math.ceil(rate * n)
    if policy == "random":
        rng = SplitMix64(seed)
        picked = rng.sample_without_replacement(n, budget)
        drop_mask = np.zeros(n, dtype=bool)
        drop_mask[picked] = True
        dropped = np.sort(table.sample_ids[drop_mask])
        kept = np.sort(table.sample_ids[~drop_mask])
    else:
        ranked = rank_samples(table)
        if policy == "drop_easiest":
            dropped = np.sort(ranked.sample_ids[:budget])
        elif policy == "drop_hardest":
            dropped = np.sort(ranked.sample_ids[n - budget :] if budget else ranked.sample_ids[:0])
        else:  # none
            dropped = table.sample_ids[:0]
        drop_set = set(dropped.tolist())
        kept = np.sort(
            np.array(
                [sid for sid in table.sample_ids if int(sid) not in drop_set], dtype=np.uint64
            )
        )
    return PrunePlan(policy=policy, rate=rate, dropped_ids=dropped, kept_ids=kept)


# ---------------------------------------------------------------------------
# dataset manifests


def read_manifest(path) -> list[dict]:
    rows = []
    seen = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: bad JSON ({exc})") from exc
            for key in ("sample_id", "label", "payload_ref"):
                if key not in row:
                    raise FormatError(f"{path}:{lineno}: missing {key!r}")
            sid = int(row["sample_id"])
            if sid in seen:
                raise FormatError(f"{path}:{lineno}: duplicate sample_id {sid}")
            seen.add(sid)
            rows.append(row)
    if not rows:
        raise EmptyTable(f"{path}: empty manifest")
    return rows


def write_manifest(rows: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True))
            f.write("\n")


def apply_plan(rows: list[dict], plan: PurificationPlan) -> list[dict]:
    """Rewrite a manifest according to a purification plan.

    Every manifest row must have a verdict and vice versa; a partial
    overlap means the plan was built from a different dataset.
    """
    by_id = {int(sid): i for i, sid in enumerate(plan.sample_ids)}
    manifest_ids = {int(r["sample_id"]) for r in rows}
    missing = manifest_ids.symmetric_difference(by_id.keys())
    if missing:
        raise UnknownSampleId(
            f"plan and manifest cover different samples ({len(missing)} mismatched ids, "
            f"e.g. {sorted(missing)[:3]})"
        )
    out = []
    for row in rows:
        i = by_id[int(row["sample_id"])]
        verdict = plan.verdicts[i]
        if verdict in ("drop_outlier", "prune_easy"):
            continue
        new_row = dict(row)
        if verdict == "relabel":
            new_row["label"] = int(plan.new_labels[i])
            new_row["corrected"] = True
        out.append(new_row)
    return out


def subset_manifest(rows: list[dict], kept_ids: np.ndarray) -> list[dict]:
    """Keep only the rows whose sample_id is in kept_ids (order preserved)."""
    keep = {int(sid) for sid in kept_ids}
    manifest_ids = {int(r["sample_id"]) for r in rows}
    unknown = keep - manifest_ids
    if unknown:
        raise UnknownSampleId(
            f"{len(unknown)} kept ids not present in manifest, e.g. {sorted(unknown)[:3]}"
        )
    return [r for r in rows if int(r["sample_id"]) in keep]
