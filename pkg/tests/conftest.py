import numpy as np
import pytest

from brwtrace.groups import parse_group_spec
from brwtrace.trees import parse_offspring


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def free2():
    return parse_group_spec("free:2")


@pytest.fixture
def z2():
    return parse_group_spec("abelian:2")


@pytest.fixture
def m105():
    return parse_offspring("1:0.95,2:0.05")


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
