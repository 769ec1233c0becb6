"""Shared fixtures plus the acceptance summary hook.

Acceptance tests register a one-line verdict through `acceptance_record`;
the terminal summary prints one PASS/FAIL line per criterion so a log
scraper can grade the run without parsing pytest internals.
"""

import numpy as np
import pytest

from trajprune import make_log

# criterion name -> (passed, detail); populated by tests/test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def acceptance_record(name: str, passed: bool, detail: str) -> None:
    ACCEPTANCE[name] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[name]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{name}: {verdict} ({detail})")


@pytest.fixture
def tiny_log():
    """3 epochs, 4 samples, 3 classes; logits are dyadic so f32 == f64."""
    logits = [
        [[2.5, -1.25, 0.375], [-0.5, 0.75, 1.5], [4.0, 4.0, -2.0], [0.0, 0.0, 0.0]],
        [[3.0, -0.5, 0.25], [-1.0, 2.0, 1.25], [3.5, 4.5, -1.5], [0.125, -0.125, 0.0]],
        [[2.75, 0.5, -0.75], [0.25, 1.75, 0.5], [5.0, 3.0, -1.0], [-0.25, 0.25, 0.125]],
    ]
    return make_log(
        sample_ids=np.array([10, 11, 12, 13], dtype=np.uint64),
        labels=np.array([0, 1, 0, 2], dtype=np.int64),
        logits=np.array(logits, dtype=np.float32),
        run_seed=7,
    )
