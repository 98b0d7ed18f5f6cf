import numpy as np
import pytest

from geocert.data import synth_dataset
from geocert.model import TrainConfig, train_noise_augmented


@pytest.fixture(scope="session")
def wedge_data():
    return synth_dataset("wedge", 2, 2000, seed=0), synth_dataset("wedge", 2, 200, seed=1)


@pytest.fixture(scope="session")
def wedge_model(wedge_data):
    train, _ = wedge_data
    return train_noise_augmented(train, TrainConfig(epochs=40, seed=0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
