import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mflow.canonical import canonical_workflow  # noqa: E402


@pytest.fixture
def workflow():
    return canonical_workflow


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in RESULTS:
        terminalreporter.write_line(line)
