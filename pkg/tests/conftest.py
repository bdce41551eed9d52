import shutil
from importlib import resources
from pathlib import Path

import pytest

_RESULTS = []


@pytest.fixture
def criterion():
    """Record one acceptance-criterion verdict for the end-of-run summary."""

    def record(label, passed, detail=""):
        _RESULTS.append((label, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in _RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")


@pytest.fixture
def example_study(tmp_path):
    """A fresh copy of the bundled mock study; returns the config path."""
    src = resources.files("pcekit") / "data" / "example_study"
    dst = tmp_path / "study"
    dst.mkdir()
    for item in src.iterdir():
        if item.is_file():
            shutil.copy(Path(str(item)), dst / item.name)
    return dst / "config.json"
