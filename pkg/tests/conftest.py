import numpy as np
import pytest

from hope_embed.model import HighOrderModel

from helpers import random_model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def hope_model(rng):
    return random_model(rng, "hope", 4, 3, 2)


@pytest.fixture
def shope_model(rng):
    return HighOrderModel("shope", 2, rng.normal(size=(3, 4)), rng.normal(size=(2, 5)),
                          rng.normal(size=(3, 5)), rng.normal(size=5))


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
