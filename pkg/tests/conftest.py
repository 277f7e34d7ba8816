import pytest

from pyscaling import cache
from pyscaling.config import ModelConfig
from pyscaling.model import init_params


@pytest.fixture(autouse=True)
def clear_cache():
    cache.clear()
    yield
    cache.clear()


@pytest.fixture
def small_cfg():
    return ModelConfig(n=4, vocab=11, d_emb=8, heads=2, layers=2, d_ff=32)


@pytest.fixture
def check_cfg():
    return ModelConfig(n=8, vocab=11, d_emb=8, heads=2, layers=2)


@pytest.fixture
def small_params(small_cfg):
    return init_params(small_cfg, seed=7)


@pytest.fixture
def check_params(check_cfg):
    return init_params(check_cfg, seed=3)
