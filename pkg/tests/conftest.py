import time
from importlib import resources

import pytest

SESSION_START = time.perf_counter()
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def example_file():
    """Path to the shipped two-state example problem."""
    with resources.as_file(resources.files("fracpb") / "data" / "example5.toml") as path:
        yield path


@pytest.fixture
def criterion_line():
    """Record one PASS/FAIL line; all lines are printed again in the summary."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_collection_modifyitems(config, items):
    # acceptance last, so the final criterion can time the whole session
    items.sort(key=lambda item: item.get_closest_marker("acceptance") is not None)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
