import numpy as np
import pytest

from cmalab import build_domain


@pytest.fixture(scope="session")
def disc64():
    return build_domain({"shape": "disc"}, 64)


@pytest.fixture(scope="session")
def disc128():
    return build_domain({"shape": "disc"}, 128)


@pytest.fixture(scope="session")
def disc256_like():
    return build_domain({"shape": "disc"}, 192)


@pytest.fixture(scope="session")
def ball16():
    return build_domain({"shape": "ball"}, 16)


@pytest.fixture(scope="session")
def ball20():
    return build_domain({"shape": "ball"}, 20)


def radius(domain):
    return np.sqrt((domain.positions ** 2).sum(axis=-1))
