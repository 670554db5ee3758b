import numpy as np
import pytest

from hhsrp import Instance, Solution


def make_instance(coords, service, illness=None, qualification=None, vehicles=1, capacity=2, **kw):
    """Instance with the centre at the origin prepended to ``coords``."""
    coords = [(0.0, 0.0)] + list(coords)
    n = len(coords) - 1
    illness = [0] + list(illness if illness is not None else [0] * n)
    service = [0.0] + list(service)
    if qualification is None:
        qualification = np.ones((vehicles * capacity, max(illness) + 1), dtype=bool)
    return Instance(np.array(coords, float), np.array(illness), np.array(service, float),
                    np.array(qualification, bool), vehicles, capacity, **kw)


@pytest.fixture
def ex1():
    """One patient five minutes away, ten minutes of care."""
    inst = make_instance([(3.0, 4.0)], [10.0])
    sol = Solution(1, [[0, 1, 3]], [(0, 1)], {1: 0}, set())
    return inst, sol


@pytest.fixture
def ex2():
    """Caregiver 0 is dropped at patient 1 while caregiver 1 treats patient 2."""
    inst = make_instance([(5.0, 0.0), (5.0, 3.0)], [10.0, 4.0])
    sol = Solution(2, [[0, 1, 2, 3, 5]], [(0, 1)], {1: 0, 2: 1}, {1})
    return inst, sol


_CRITERIA: list[str] = []


@pytest.fixture(scope="session")
def verdict():
    """Record one line per acceptance criterion (shown in the terminal summary)."""
    def emit(number, ok, message, kind=None):
        tag = kind or ("PASS" if ok else "FAIL")
        line = f"{tag} criterion {number}: {message}"
        _CRITERIA.append(line)
        print(line)
    return emit


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
