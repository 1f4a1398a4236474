from pathlib import Path

import pytest

from orclayout import _kernels

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: list[str] = []


@pytest.fixture(scope="session", autouse=True)
def _compiled_kernels():
    # pay numba compilation once, outside any timing
    _kernels.warmup()


@pytest.fixture(scope="session")
def fixtures():
    return Path(__file__).resolve().parent.parent / "fixtures"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
