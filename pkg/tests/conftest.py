import numpy as np
import pytest

from ensflow.compression import TruncationRule, compress
from ensflow.estimator import init_from_ensemble
from ensflow.harness.scenarios import reference_scenario
from ensflow.kernels import KernelConfig
from ensflow.regression import fit_all


@pytest.fixture(scope="session")
def scene():
    return reference_scenario()


@pytest.fixture(scope="session")
def synthetic(scene):
    """The 20-member, 169-position ensemble and its truth."""
    return scene.generate(0)


@pytest.fixture(scope="session")
def latent(synthetic, scene):
    return fit_all(synthetic[0], scene.kernel)


@pytest.fixture(scope="session")
def model(latent):
    return compress(latent, TruncationRule(rank=3))


@pytest.fixture(scope="session")
def prior(model):
    return init_from_ensemble(model)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_cfg():
    return KernelConfig(length_scale=1.0, signal_scale=1.0, jitter=1e-6)
