import numpy as np
import pytest

import hardylab as hl


@pytest.fixture(scope="session")
def cycle16():
    space, op = hl.cycle_laplacian(16)
    return space, op, hl.spectral_decomposition(op)


@pytest.fixture(scope="session")
def cycle64():
    space, op = hl.cycle_laplacian(64)
    return space, op, hl.spectral_decomposition(op)


@pytest.fixture(scope="session")
def schro64():
    space, op = hl.schrodinger_1d(64, V=1.0)
    return space, op, hl.spectral_decomposition(op)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
