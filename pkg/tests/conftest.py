import pytest

from autores.orbit import default_orbit
from autores.potential import PotentialSpec


@pytest.fixture(scope="session")
def duffing():
    return PotentialSpec.duffing()


@pytest.fixture(scope="session")
def orbit2():
    return default_orbit(2)


_VERDICTS = []


@pytest.fixture
def criterion():
    """Record a PASS/FAIL line for an acceptance criterion, then assert it."""

    def check(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _VERDICTS.append((number, line))
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
