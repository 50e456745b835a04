import pytest

from vortexlab import core


@pytest.fixture(scope="session")
def device():
    return core.example_device()


@pytest.fixture(scope="session")
def scales(device):
    return core.derive_scales(device)
