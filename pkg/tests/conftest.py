import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def criterion(request):
    """Record one pass/fail line per acceptance criterion.

    Lines are echoed immediately and repeated in the terminal summary.
    """

    def report(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config.stash[ACCEPTANCE_LINES].append(line)
        reporter = request.config.pluginmanager.get_plugin("terminalreporter")
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)

    return report


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running end-to-end reproduction")
    config.stash[ACCEPTANCE_LINES] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
