"""Purification pipeline: verdict precedence, budget arithmetic, plan I/O."""

import json
import math

import numpy as np
import pytest

from trajprune import (
    EmptyTable,
    EpochSelector,
    MetricMismatch,
    MissingSoftLabels,
    PurifyConfig,
    RateOutOfRange,
    RatioOutOfRange,
    ScoreTable,
    correct_labels,
    detect_outliers,
    purify,
    read_plan,
    write_plan,
)
from trajprune.purify import summary_path


def table_from(soft, labels, ids=None, scores=None):
    soft = np.asarray(soft, dtype=np.float64)
    n = len(soft)
    if scores is None:
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(soft > 0, -soft * np.log2(soft), 0.0)
        scores = terms.sum(axis=1)
    return ScoreTable(
        metric="entropy",
        selector=EpochSelector.every_k(1),
        sample_ids=np.asarray(ids if ids is not None else range(n), dtype=np.uint64),
        labels=np.asarray(labels, dtype=np.int64),
        scores=np.asarray(scores, dtype=np.float64),
        soft_labels=soft,
    )


def test_outlier_threshold_inclusive():
    # max probs 0.50, 0.51, 0.90; the boundary value counts as an outlier
    t = table_from(
        [[0.50, 0.50], [0.49, 0.51], [0.10, 0.90]],
        [1, 1, 1],
        scores=[1.0, 0.99, 0.47],
    )
    assert detect_outliers(t, 0.50).tolist() == [True, False, False]
    assert detect_outliers(t, 0.51).tolist() == [True, True, False]
    assert detect_outliers(t, 0.0).tolist() == [False] * 3


def test_detect_outliers_rejects_bad_delta():
    t = table_from([[0.5, 0.5]], [0])
    with pytest.raises(RatioOutOfRange):
        detect_outliers(t, 1.5)


def test_correct_labels_argmax_lowest_tie():
    t = table_from([[0.5, 0.5], [0.2, 0.8]], [1, 0])
    assert correct_labels(t).tolist() == [0, 1]


def test_missing_soft_labels():
    t = table_from([[0.5, 0.5]], [0])
    t.soft_labels = None
    with pytest.raises(MissingSoftLabels):
        detect_outliers(t, 0.1)
    with pytest.raises(MissingSoftLabels):
        purify(t, PurifyConfig())


def test_purify_requires_entropy_metric():
    t = table_from([[0.5, 0.5]], [0])
    t.metric = "aum"
    with pytest.raises(MetricMismatch):
        purify(t, PurifyConfig())


def test_purify_rejects_empty():
    t = table_from(np.zeros((0, 2)), [])
    with pytest.raises(EmptyTable):
        purify(t, PurifyConfig())


def test_config_validation():
    with pytest.raises(RateOutOfRange):
        PurifyConfig(prune_rate=1.5).validate()
    with pytest.raises(RatioOutOfRange):
        PurifyConfig(delta=-0.1).validate()


def test_verdict_precedence_and_budget():
    # 0: outlier (max 0.10); 1: lowest entropy; 2: disagrees with label;
    # 3: plain keep
    soft = [
        [0.10, 0.10, 0.80],  # not an outlier at default delta? max=0.80
        [0.98, 0.01, 0.01],
        [0.10, 0.85, 0.05],
        [0.60, 0.30, 0.10],
    ]
    t = table_from(soft, [0, 0, 0, 0])
    t.soft_labels[0] = [1.0 / 3.0] * 3  # max 1/3 > 0.10: still not outlier
    cfg = PurifyConfig(delta=0.34, prune_rate=0.25)  # budget = ceil(0.25*4) = 1
    plan = purify(t, cfg)
    assert plan.budget == 1
    assert plan.verdicts[0] == "drop_outlier"
    # outlier alone fills the budget, so nothing is pruned as easy
    assert plan.counts()["prune_easy"] == 0
    assert plan.verdicts[1] == "keep"  # agrees with its label
    assert plan.verdicts[2] == "relabel"
    assert plan.new_labels[2] == 1 and plan.old_labels[2] == 0
    assert plan.verdicts[3] == "keep"


def test_prune_skips_outliers_and_breaks_ties_by_id():
    soft = [[0.05, 0.95]] * 4 + [[0.5, 0.5]]
    t = table_from(soft, [1, 1, 1, 1, 1], ids=[40, 30, 20, 10, 50])
    cfg = PurifyConfig(delta=0.0, prune_rate=0.4)  # budget 2, no outliers
    plan = purify(t, cfg)
    # four equal-entropy rows: the two lowest ids go
    assert sorted(plan.prune_ids.tolist()) == [10, 20]
    cfg2 = PurifyConfig(delta=0.5, prune_rate=0.4)
    t2 = table_from(soft, [1, 1, 1, 1, 1], ids=[40, 30, 20, 10, 50])
    t2.soft_labels[3] = [0.5, 0.5]
    t2.scores[3] = 1.0
    plan2 = purify(t2, cfg2)
    # ids 10 and 50 sit at max prob 0.5 <= delta, eating the whole budget
    assert sorted(plan2.outlier_ids.tolist()) == [10, 50]
    assert plan2.counts()["prune_easy"] == 0


def test_budget_clamps_when_outliers_exceed_it():
    soft = [[0.05, 0.95], [0.5, 0.5], [0.45, 0.55], [0.52, 0.48]]
    t = table_from(soft, [1, 1, 1, 0])
    cfg = PurifyConfig(delta=0.56, prune_rate=0.25)  # 3 outliers, budget 1
    plan = purify(t, cfg)
    assert plan.counts()["drop_outlier"] == 3
    assert plan.counts()["prune_easy"] == 0
    assert plan.counts()["keep"] == 1


def test_flags_disable_stages():
    soft = [[0.05, 0.95], [0.5, 0.5]]
    t = table_from(soft, [0, 0])
    plan = purify(t, PurifyConfig(delta=0.6, correct=False, drop_outliers=False))
    assert plan.verdicts == ["keep", "keep"]
    assert np.array_equal(plan.new_labels, plan.old_labels)


def test_surviving_partition():
    soft = [[0.05, 0.95], [0.5, 0.5], [0.3, 0.7], [0.9, 0.1], [0.8, 0.2], [0.25, 0.75]]
    t = table_from(soft, [1, 0, 1, 0, 0, 0])
    plan = purify(t, PurifyConfig(delta=0.5, prune_rate=0.34))
    counted = sum(plan.counts().values())
    assert counted == 6
    ids = set(t.sample_ids.tolist())
    survivors = set(plan.surviving_ids.tolist())
    dropped = set(plan.outlier_ids.tolist()) | set(plan.prune_ids.tolist())
    assert survivors | dropped == ids
    assert survivors & dropped == set()


def test_plan_roundtrip(tmp_path):
    soft = [[0.05, 0.95], [0.5, 0.5], [0.3, 0.7], [0.9, 0.1]]
    t = table_from(soft, [1, 0, 1, 0], ids=[7, 3, 9, 1])
    plan = purify(t, PurifyConfig(delta=0.5, prune_rate=0.25))
    p = tmp_path / "plan.csv"
    write_plan(plan, p)
    back = read_plan(p)
    assert back.verdicts == plan.verdicts
    assert np.array_equal(back.sample_ids, plan.sample_ids)
    assert np.array_equal(back.new_labels, plan.new_labels)
    assert np.array_equal(back.entropy, plan.entropy)
    assert back.budget == plan.budget
    assert back.config.delta == plan.config.delta

    summary = json.loads((tmp_path / summary_path(p).split("/")[-1]).read_text())
    assert summary["counts"] == plan.counts()
    assert summary["budget"] == plan.budget


def test_budget_is_ceil():
    for n, rate in ((7, 0.1), (10, 0.25), (3, 1.0), (5, 0.0)):
        soft = [[0.9, 0.1]] * n
        t = table_from(soft, [0] * n)
        plan = purify(t, PurifyConfig(delta=0.0, prune_rate=rate))
        assert plan.budget == math.ceil(rate * n)
        assert plan.counts()["prune_easy"] == plan.budget
