import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


def _status(ok) -> str:
    return "SKIP" if ok is None else ("PASS" if ok else "FAIL")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def record():
    """Log one acceptance outcome (``ok=None`` for skipped); the summary is
    printed at session end."""

    def _record(number: int, title: str, ok, detail: str) -> None:
        _ACCEPTANCE[number] = (title, _status(ok), detail)
        print(f"[acceptance {number:>2}] {_status(ok)}  {title}: {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, status, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"{number:>2}. {status}  {title}: {detail}")
