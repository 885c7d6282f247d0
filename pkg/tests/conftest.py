import numpy as np
import pytest

from funnel.bvh import build_index
from funnel.fixtures import make_escape_room


@pytest.fixture(scope="session")
def escape_room():
    return make_escape_room()


@pytest.fixture(scope="session")
def escape_index(escape_room):
    return build_index(escape_room)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
