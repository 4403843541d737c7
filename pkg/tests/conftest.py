import pytest

from fracprodi.fraclap import assemble
from fracprodi.grid import make_interval_grid


@pytest.fixture(scope="session")
def op_half_200():
    return assemble(make_interval_grid(-1.0, 1.0, 200), 0.5)


@pytest.fixture(scope="session")
def op_half_400():
    return assemble(make_interval_grid(-1.0, 1.0, 400), 0.5)
