import numpy as np
import pytest

from cganuc.data import synth_blobs, synth_heteroscedastic, to_unit_box
from cganuc.training import TrainConfig, train


@pytest.fixture(scope="session")
def small_regression_model():
    ds = synth_heteroscedastic(200, seed=3)
    cfg = TrainConfig(epochs=5, batch_size=50, hidden=(16, 16), u=8, seed=3)
    model, _ = train(ds, cfg)
    return model


@pytest.fixture(scope="session")
def small_classifier():
    ds = synth_blobs(300, 3, seed=4)
    ds.inputs = to_unit_box(ds.inputs, -4.0, 4.0)
    cfg = TrainConfig(task="classification", epochs=20, batch_size=50, hidden=(16, 16), u=8, seed=4)
    model, _ = train(ds, cfg)
    return model, ds


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


@pytest.fixture(scope="session")
def acceptance_log(request):
    return request.config.stash[ACCEPTANCE_LINES]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
