from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from _corpus import load  # noqa: E402
from rangedpa.solver import default_command  # noqa: E402

# acceptance outcomes, filled in by test_acceptance and printed at the end
ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def running():
    return load("running")


@pytest.fixture(scope="session")
def running_bug():
    return load("running_bug")


requires_z3 = pytest.mark.skipif(default_command() is None, reason="no external SMT solver configured")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}  {detail}")
