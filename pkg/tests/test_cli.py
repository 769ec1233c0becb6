"""Command-line workflows, exit codes, and reproducibility guarantees.

Most tests drive `main()` in-process for speed; one subprocess test proves
the installed console script works end to end.
"""

import json
import subprocess
import sys

import pytest

from trajprune import open_log, read_plan, read_scores
from trajprune.cli import main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def synth_prefix(tmp_path):
    prefix = tmp_path / "toy"
    assert run(
        "synth", "--classes", 3, "--per-class", 20, "--sep", 8, "--noise", 0.15,
        "--seed", 5, "--out", prefix,
    ) == 0
    return prefix


@pytest.fixture
def trained_log(synth_prefix, tmp_path):
    log = tmp_path / "run.ltrj"
    assert run(
        "train", "--data", synth_prefix, "--epochs", 6, "--batch", 16,
        "--seed", 3, "--out", log,
    ) == 0
    return log


def test_synth_writes_three_files(synth_prefix):
    assert synth_prefix.with_suffix(".features.lfea").exists()
    assert synth_prefix.with_suffix(".manifest.jsonl").exists()
    truth = json.loads(synth_prefix.with_suffix(".truth.json").read_text())
    assert len(truth["true_labels"]) == 60
    assert len(truth["flips"]) == 9  # round(0.15 * 60)


def test_train_score_purify_apply_report(trained_log, synth_prefix, tmp_path):
    log = open_log(trained_log)
    assert log.n_epochs == 6 and log.n_samples == 60

    scores = tmp_path / "scores.csv"
    assert run("score", "--log", trained_log, "--out", scores) == 0
    table = read_scores(scores)
    assert len(table) == 60 and table.metric == "entropy"

    plan_csv = tmp_path / "plan.csv"
    assert run(
        "purify", "--scores", scores, "--delta", 0.4, "--prune-rate", 0.1,
        "--out", plan_csv,
    ) == 0
    plan = read_plan(plan_csv)
    assert sum(plan.counts().values()) == 60

    cleaned = tmp_path / "clean.jsonl"
    assert run(
        "apply", "--manifest", synth_prefix.with_suffix(".manifest.jsonl"),
        "--plan", plan_csv, "--out", cleaned,
    ) == 0
    kept_rows = cleaned.read_text().strip().splitlines()
    assert len(kept_rows) == len(plan.surviving_ids)

    # report prints to stdout and exits 0 for both input kinds
    assert run("report", "--scores", scores, "--top", 3) == 0
    assert run("report", "--plan", plan_csv) == 0


def test_score_csv_identical_for_binary_and_jsonl(synth_prefix, tmp_path):
    log_b = tmp_path / "run.ltrj"
    log_j = tmp_path / "run.jsonl"
    for out, fmt in ((log_b, "binary"), (log_j, "jsonl")):
        assert run(
            "train", "--data", synth_prefix, "--epochs", 5, "--batch", 16,
            "--seed", 9, "--format", fmt, "--out", out,
        ) == 0
    s_b, s_j = tmp_path / "b.csv", tmp_path / "j.csv"
    assert run("score", "--log", log_b, "--out", s_b) == 0
    assert run("score", "--log", log_j, "--out", s_j) == 0
    assert s_b.read_bytes() == s_j.read_bytes()


def test_rerun_is_byte_identical(synth_prefix, tmp_path):
    outs = []
    for name in ("a.ltrj", "b.ltrj"):
        out = tmp_path / name
        assert run(
            "train", "--data", synth_prefix, "--epochs", 4, "--batch", 16,
            "--seed", 1, "--out", out,
        ) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_validate_log_and_features(trained_log, synth_prefix, capsys):
    assert run("validate", trained_log) == 0
    assert "epochs" in capsys.readouterr().out
    assert run("validate", synth_prefix.with_suffix(".features.lfea")) == 0
    assert "feature file" in capsys.readouterr().out


def test_run_manifest_sidecar(trained_log, tmp_path):
    scores = tmp_path / "s.csv"
    assert run("score", "--log", trained_log, "--out", scores) == 0
    manifest = json.loads((tmp_path / "s.csv.run.json").read_text())
    assert manifest["subcommand"] == "score"
    assert manifest["tool"]["name"] == "trajprune"
    assert str(trained_log) in manifest["inputs"]
    assert str(scores) in manifest["outputs"]
    assert manifest["outputs"][str(scores)].startswith("sha256:")


def test_ensemble_flag(synth_prefix, tmp_path):
    logs = []
    for seed in (1, 2):
        out = tmp_path / f"r{seed}.ltrj"
        assert run(
            "train", "--data", synth_prefix, "--epochs", 4, "--batch", 16,
            "--seed", seed, "--out", out,
        ) == 0
        logs.append(out)
    merged = tmp_path / "ens.csv"
    assert run(
        "score", "--log", logs[0], "--ensemble", logs[1], "--out", merged,
    ) == 0
    singles = []
    for i, log in enumerate(logs):
        p = tmp_path / f"s{i}.csv"
        assert run("score", "--log", log, "--out", p) == 0
        singles.append(read_scores(p).scores)
    merged_scores = read_scores(merged).scores
    assert merged_scores == pytest.approx((singles[0] + singles[1]) / 2, abs=1e-15)


def test_compare_writes_summary_csv(tmp_path):
    out = tmp_path / "grid.csv"
    assert run(
        "compare", "--classes", 3, "--per-class", 12, "--sep", 6,
        "--epochs", 4, "--batch", 12, "--seeds", 2,
        "--rates", "0.2", "--metrics", "entropy,random", "--out", out,
    ) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "rate,metric,mean_accuracy,std_accuracy"
    assert len(lines) == 3  # one row per (rate, metric)


# exit codes: 2 for usage errors, 3 for bad files


def test_exit_2_on_usage_errors(trained_log, tmp_path):
    assert run("score", "--log", trained_log, "--metric", "el2n",
               "--out", tmp_path / "x.csv") == 2  # el2n needs --at-epoch
    assert run("purify", "--out", tmp_path / "p.csv") == 2  # neither --scores nor --log
    assert run("report") == 2
    with pytest.raises(SystemExit) as e:
        run("synth", "--out")  # missing value: argparse exits itself
    assert e.value.code == 2


def test_exit_2_on_bad_values(synth_prefix, tmp_path):
    scores = tmp_path / "s.csv"
    assert run("purify", "--scores", scores, "--out", tmp_path / "p.csv") in (2, 3)
    assert run(
        "synth", "--noise", "1.4", "--out", tmp_path / "x",
    ) == 2


def test_exit_3_on_missing_or_corrupt_files(tmp_path, trained_log):
    assert run("validate", tmp_path / "no-such.ltrj") == 3
    assert run("score", "--log", tmp_path / "no-such.ltrj",
               "--out", tmp_path / "s.csv") == 3
    trunc = tmp_path / "trunc.ltrj"
    trunc.write_bytes(trained_log.read_bytes()[:50])
    assert run("validate", trunc) == 3


def test_console_script_end_to_end(tmp_path):
    prefix = tmp_path / "cli"
    cmds = [
        [sys.executable, "-m", "trajprune.cli", "synth", "--classes", "3",
         "--per-class", "10", "--seed", "2", "--out", str(prefix)],
        [sys.executable, "-m", "trajprune.cli", "train", "--data", str(prefix),
         "--epochs", "3", "--batch", "8", "--out", str(tmp_path / "run.ltrj")],
        [sys.executable, "-m", "trajprune.cli", "validate", str(tmp_path / "run.ltrj")],
    ]
    for cmd in cmds:
        proc = subprocess.run(cmd, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
