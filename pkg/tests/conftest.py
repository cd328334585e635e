import os
import sys

import pytest

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, HERE)

DATA = os.path.join(HERE, "data")
PKG_DATA = os.path.join(os.path.dirname(HERE), "src", "pib", "data")
EXAMPLE = os.path.join(PKG_DATA, "example_board.pib.json")
EXAMPLE_NOPOUR = os.path.join(PKG_DATA, "example_board_nopour.pib.json")


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


@pytest.fixture(scope="session")
def example_board():
    from pib.native import parse_native

    return parse_native(read_bytes(EXAMPLE))


@pytest.fixture(scope="session")
def example_nopour():
    from pib.native import parse_native

    return parse_native(read_bytes(EXAMPLE_NOPOUR))


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def record(request):
    """Log one acceptance line; the lines are repeated in the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def _record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        lines.append(line)
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
