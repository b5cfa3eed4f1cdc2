import shutil
import time
from pathlib import Path

import pytest

FIXTURES = Path(__file__).resolve().parent / "fixtures"
DEMO_PROJECT = FIXTURES / "demo_project"
NOTEBOOKS = FIXTURES / "notebooks"

# criterion number -> (passed, detail); filled in by test_acceptance.py
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}
SUITE_BUDGET = 60.0
_started = time.monotonic()


@pytest.fixture
def demo_project(tmp_path) -> Path:
    """A writable copy of the demo project."""
    root = tmp_path / "demo"
    shutil.copytree(DEMO_PROJECT, root)
    return root


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    elapsed = time.monotonic() - _started
    if 8 in ACCEPTANCE_RESULTS:
        passed, detail = ACCEPTANCE_RESULTS[8]
        ACCEPTANCE_RESULTS[8] = (passed and elapsed < SUITE_BUDGET, f"{detail}; suite {elapsed:.1f}s")
    terminalreporter.section("acceptance criteria")
    for number in range(1, 9):
        passed, detail = ACCEPTANCE_RESULTS.get(number, (False, "not run"))
        terminalreporter.write_line(f"AC{number}: {'PASS' if passed else 'FAIL'}  {detail}")
