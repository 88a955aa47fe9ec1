import pytest

from app.schemas.model import ModelParams


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run long regime reproductions")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long regime reproduction, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def params():
    return ModelParams(n_agents=100, h=0.1, u_m=0.5, u_s=0.3, mu=0.5)


@pytest.fixture
def unbounded_params():
    return ModelParams(n_agents=100, h=0.1, u_m=0.5, u_s=0.3, mu=0.5, bounded=False)
