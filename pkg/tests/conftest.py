"""Shared fixtures and the acceptance-criteria reporter.

Acceptance tests register one pass/fail record per criterion; the
terminal summary prints one line each so the outcome is visible even
with captured output.
"""

import numpy as np
import pytest

_ACCEPTANCE_RESULTS = []


def record_criterion(name, passed, detail=""):
    """Register an acceptance-criterion outcome; returns ``passed``."""
    _ACCEPTANCE_RESULTS.append((name, bool(passed), str(detail)))
    return bool(passed)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for name, passed, detail in _ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        line = f"  [{status}] {name}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_spd(rng, p, jitter=0.5):
    """Well-conditioned random SPD matrix."""
    a = rng.normal(size=(p, p))
    return a @ a.T + jitter * p * np.eye(p)
