import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent.parent / "fixtures"

# scorecard lines recorded by the acceptance tests, replayed after the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def fixtures() -> Path:
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_line("")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
