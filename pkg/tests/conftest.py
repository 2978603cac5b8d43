import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import _report

    if _report.LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_report.LINES):
            terminalreporter.write_line(_report.LINES[n])
