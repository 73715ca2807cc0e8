import numpy as np
import pytest

from pathexp.ambiguity import RectangularFamily
from pathexp.pathspace import Lattice


@pytest.fixture
def sign2():
    return Lattice.homogeneous([-1.0, 1.0], 2)


@pytest.fixture
def sign3():
    return Lattice.homogeneous([-1.0, 1.0], 3)


@pytest.fixture
def vol_family():
    # two volatility levels on a 3-step lattice, moves +-1 and +-2
    lat = Lattice.homogeneous([-2.0, -1.0, 1.0, 2.0], 3)
    laws = np.array([[0.0, 0.5, 0.5, 0.0], [0.5, 0.0, 0.0, 0.5]])
    return RectangularFamily.constant(lat, laws)


_ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion."""
    def record(number, name, ok, detail=""):
        line = f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else "")
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
