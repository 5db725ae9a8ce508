import numpy as np
import pytest

from dahyf.hand_model import load_model
from dahyf.toy import bundled_model_path


@pytest.fixture(scope="session")
def toy_model():
    return load_model(bundled_model_path())


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
