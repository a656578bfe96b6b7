from pathlib import Path

import numpy as np
import pytest

from cdftransform.criterion import NuMeasure, make_grid
from cdftransform.samples import UnivariateSample

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = REPO_ROOT / 'data'
CONFIG_DIR = REPO_ROOT / 'configs'


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='run the slow statistical reproductions')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def hundred_points(rng):
    return UnivariateSample.from_values(rng.normal(size=100), name='hundred')


@pytest.fixture
def small_grid():
    return make_grid(NuMeasure.normal(mean=0.0, sd=1.0), 64)


@pytest.fixture
def data_dir():
    return DATA_DIR


@pytest.fixture
def config_dir():
    return CONFIG_DIR
