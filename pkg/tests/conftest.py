import sys

import pytest

from dartwin import corpus


@pytest.fixture(scope="session")
def fixtures():
    return {name: corpus.load(name) for name in (*corpus.FIXTURES, *corpus.EXTRA)}


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
