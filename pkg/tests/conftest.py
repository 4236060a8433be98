import sys

import pytest

from harper_tknn import validate_model

#: Models used throughout; all have every internal gap open.
PROP_A_MODELS = [(1, 0, 1, 3), (2, 1, 1, 3), (2, 1, 1, 5), (3, 1, 1, 5)]


@pytest.fixture
def hof3():
    return validate_model(1, 0, 1, 3)


@pytest.fixture
def gen213():
    return validate_model(2, 1, 1, 3)


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("HARPER_CACHE_DIR", str(tmp_path / "cache"))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda ln: int(ln.split()[1])):
            terminalreporter.write_line(line)
