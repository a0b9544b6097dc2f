import pytest

from gwlimits.norming import natural_seed, seneta_heyde
from gwlimits.offspring import fixtures


@pytest.fixture(scope="session")
def laws():
    return fixtures()


@pytest.fixture(scope="session")
def B(laws):
    return laws["B"]


@pytest.fixture(scope="session")
def C(laws):
    return laws["C"]


@pytest.fixture(scope="session")
def G(laws):
    return laws["G"]


@pytest.fixture(scope="session")
def table_B(B):
    return seneta_heyde(B)


@pytest.fixture(scope="session")
def table_C(C):
    return seneta_heyde(C)


@pytest.fixture(scope="session")
def table_G(G):
    """G normed with the seed that makes W exponential with rate 1 - c."""
    return seneta_heyde(G, c0=natural_seed(G))


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
