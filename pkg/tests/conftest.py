import numpy as np
import pytest

from ortholap import network, odmap

UNIT_DISK = odmap.Disk(0.0, 0.0, 1.0)


@pytest.fixture(scope="session")
def disk16():
    return odmap.generate_square(UNIT_DISK, 1 / 16)


@pytest.fixture(scope="session")
def disk32():
    return odmap.generate_square(UNIT_DISK, 1 / 32)


@pytest.fixture(scope="session")
def net16(disk16):
    return network.build_network(disk16)


@pytest.fixture(scope="session")
def net32(disk32):
    return network.build_network(disk32, check=False)


@pytest.fixture(scope="session")
def star():
    """Unit square at eps=0.8: one interior primal vertex with four boundary neighbors."""
    return odmap.generate_square(odmap.Rect(0, 0, 1, 1), 0.8)


@pytest.fixture(scope="session")
def rect_nu():
    """x spacings {1, 2}, y spacings {1, 1}."""
    return odmap.generate_rect_nonuniform(None, [0.0, 1.0, 3.0], [0.0, 1.0, 2.0])


@pytest.fixture(scope="session")
def rectnu_disk():
    return odmap.generate_rectnu(UNIT_DISK, 1 / 8)


def xy(p):
    p = np.atleast_2d(p)
    return p[:, 0], p[:, 1]
