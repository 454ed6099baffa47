import pytest
import structlog
from numpy.random import Generator, PCG64

from app.qtel.analytics.entropy import OptimizerSettings
from app.qtel.model.params import PhysicalParams


@pytest.fixture(autouse=True)
def _reset_logging():
    # the CLI binds structlog to a stream the test runner closes afterwards
    yield
    structlog.reset_defaults()


@pytest.fixture
def params() -> PhysicalParams:
    return PhysicalParams.reference()


@pytest.fixture
def rng() -> Generator:
    return Generator(PCG64(12345))


@pytest.fixture
def fast_optimizer() -> OptimizerSettings:
    return OptimizerSettings(restarts=2, max_iterations=1000, seed=7)
