import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

SESSION = {"start": time.monotonic()}
ACCEPTANCE_LINES: list[str] = []


def pytest_sessionstart(session):
    SESSION["start"] = time.monotonic()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def pytest_collection_modifyitems(items):
    # the runtime criterion measures the whole session, so it runs last
    items.sort(key=lambda item: item.name == "test_suite_runtime")
