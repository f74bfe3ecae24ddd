import pytest

from twoweight.measures import Cube, MeasureSpec, generate


@pytest.fixture(scope="session")
def leb1():
    return generate(MeasureSpec("lebesgue"), 1, 10)


@pytest.fixture(scope="session")
def cantor12():
    return generate(MeasureSpec("cantor-product"), 1, 12)


@pytest.fixture
def unit():
    return Cube((0.0,), 1.0)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
