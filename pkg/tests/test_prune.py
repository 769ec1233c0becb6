"""Ranking, prune plans, and dataset manifest plumbing."""

import math

import numpy as np
import pytest

from trajprune import (
    EmptyTable,
    EpochSelector,
    FormatError,
    PurifyConfig,
    RateOutOfRange,
    ScoreTable,
    UnknownSampleId,
    apply_plan,
    make_prune_plan,
    purify,
    rank_samples,
    read_manifest,
    subset_manifest,
    write_manifest,
)


def table(scores, ids=None, labels=None):
    n = len(scores)
    return ScoreTable(
        metric="aum",
        selector=EpochSelector.every_k(1),
        sample_ids=np.asarray(ids if ids is not None else range(n), dtype=np.uint64),
        labels=np.asarray(labels if labels is not None else [0] * n, dtype=np.int64),
        scores=np.asarray(scores, dtype=np.float64),
    )


def test_rank_ascending_with_id_ties():
    t = table([3.0, 1.0, 1.0, 2.0], ids=[9, 8, 2, 5])
    r = rank_samples(t)
    assert r.sample_ids.tolist() == [2, 8, 5, 9]
    assert r.scores.tolist() == [1.0, 1.0, 2.0, 3.0]


def test_rank_rejects_empty():
    with pytest.raises(EmptyTable):
        rank_samples(table([]))


def test_drop_easiest_budget():
    t = table([0.5, 0.1, 0.9, 0.3, 0.7])
    plan = make_prune_plan(t, 0.4, "drop_easiest")
    assert plan.dropped_ids.tolist() == [1, 3]  # the two lowest scores
    assert plan.kept_ids.tolist() == [0, 2, 4]


def test_drop_hardest():
    t = table([0.5, 0.1, 0.9, 0.3, 0.7])
    plan = make_prune_plan(t, 0.2, "drop_hardest")
    assert plan.dropped_ids.tolist() == [2]


def test_none_drops_nothing():
    t = table([1.0, 2.0])
    plan = make_prune_plan(t, 0.9, "none")
    assert plan.dropped_ids.size == 0
    assert plan.kept_ids.tolist() == [0, 1]


def test_budget_is_ceil():
    for n, rate in ((7, 0.1), (10, 0.15), (4, 0.5)):
        t = table(list(range(n)))
        plan = make_prune_plan(t, rate, "drop_easiest")
        assert len(plan.dropped_ids) == math.ceil(rate * n)
        assert len(plan.kept_ids) == n - math.ceil(rate * n)


def test_random_is_seeded_and_disjoint():
    t = table(list(range(20)))
    a = make_prune_plan(t, 0.3, "random", seed=11)
    b = make_prune_plan(t, 0.3, "random", seed=11)
    c = make_prune_plan(t, 0.3, "random", seed=12)
    assert a.dropped_ids.tolist() == b.dropped_ids.tolist()
    assert a.dropped_ids.tolist() != c.dropped_ids.tolist()
    assert set(a.dropped_ids.tolist()) & set(a.kept_ids.tolist()) == set()
    assert len(a.dropped_ids) == 6


def test_rate_bounds():
    t = table([1.0])
    with pytest.raises(RateOutOfRange):
        make_prune_plan(t, -0.1)
    with pytest.raises(RateOutOfRange):
        make_prune_plan(t, 1.01)
    with pytest.raises(RateOutOfRange):
        make_prune_plan(t, 0.5, "bogus")


def test_full_rate_drops_everything():
    t = table([1.0, 2.0, 3.0])
    plan = make_prune_plan(t, 1.0, "drop_easiest")
    assert plan.kept_ids.size == 0
    assert sorted(plan.dropped_ids.tolist()) == [0, 1, 2]


# manifests


def rows_of(n, start=0):
    return [
        {"sample_id": start + i, "label": i % 3, "payload_ref": f"blob/{start + i}"}
        for i in range(n)
    ]


def test_manifest_roundtrip(tmp_path):
    p = tmp_path / "data.jsonl"
    rows = rows_of(5)
    write_manifest(rows, p)
    assert read_manifest(p) == rows


def test_manifest_rejects_duplicate_ids(tmp_path):
    p = tmp_path / "dup.jsonl"
    rows = rows_of(3)
    rows[2]["sample_id"] = rows[0]["sample_id"]
    write_manifest(rows, p)
    with pytest.raises(FormatError):
        read_manifest(p)


def test_manifest_rejects_missing_keys(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"sample_id": 1, "label": 0}\n')
    with pytest.raises(FormatError):
        read_manifest(p)


def test_subset_manifest_preserves_order():
    rows = rows_of(6)
    out = subset_manifest(rows, np.array([4, 1], dtype=np.uint64))
    assert [r["sample_id"] for r in out] == [1, 4]


def plan_for(rows, delta=0.5, prune_rate=0.0):
    n = len(rows)
    soft = np.full((n, 2), 0.5)
    soft[0] = [0.05, 0.95]
    t = ScoreTable(
        metric="entropy",
        selector=EpochSelector.every_k(1),
        sample_ids=np.array([r["sample_id"] for r in rows], dtype=np.uint64),
        labels=np.array([r["label"] % 2 for r in rows], dtype=np.int64),
        scores=soft[:, 0].copy(),
        soft_labels=soft,
    )
    return purify(t, PurifyConfig(delta=delta, prune_rate=prune_rate))


def test_apply_plan_drops_and_relabels():
    rows = rows_of(4)
    for r in rows:
        r["label"] = 0
    plan = plan_for(rows, delta=0.5)  # rows 1..3 are outliers (max prob 0.5)
    out = apply_plan(rows, plan)
    assert [r["sample_id"] for r in out] == [0]
    # sample 0 leans class 1 but carries label 0: relabeled on the way out
    assert out[0]["label"] == 1
    assert out[0].get("corrected") is True
    assert "corrected" not in rows[0]  # input rows are not mutated


def test_apply_plan_unknown_ids_both_ways():
    rows = rows_of(4)
    plan = plan_for(rows)
    with pytest.raises(UnknownSampleId):
        apply_plan(rows_of(4, start=100), plan)
    with pytest.raises(UnknownSampleId):
        apply_plan(rows_of(5), plan)  # manifest has an id the plan never saw
