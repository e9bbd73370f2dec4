import numpy as np
import pytest

from evmlink.link import RandomStreams, build_constellation
from evmlink.link.config import MmimoConfig
from evmlink.schemas import RunConfig


@pytest.fixture(scope="function")
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture(scope="function")
def streams():
    return RandomStreams(1234)


@pytest.fixture(scope="session")
def qam64():
    return build_constellation(64)


@pytest.fixture(scope="session")
def qpsk():
    return build_constellation(4)


@pytest.fixture(scope="function")
def out_dir(tmp_path):
    path = tmp_path / "results"
    yield path


@pytest.fixture(scope="function")
def small_mmimo_config():
    """A 2 MHz, 8 x 2 link small enough for unit tests."""
    return MmimoConfig(
        n_tx=8,
        n_users=2,
        band_hz=2e6,
        sub_band_hz=1e6,
        carriers_per_sub_band=60,
        frames=8,
        blocks=2,
    )


@pytest.fixture(scope="function")
def fit_run_config():
    return RunConfig(
        study="fit-a",
        carriers=60,
        frames=4,
        seeds=1,
        sinr_grid_db=[0.0, 5.0, 10.0],
    )
