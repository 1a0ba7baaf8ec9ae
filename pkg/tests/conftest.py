import numpy as np
import pytest

from fingap.bloch import Lame1Family
from fingap.elliptic import lattice_from_branch_points


@pytest.fixture(scope="session")
def lat_sym():
    """Lattice of the canonical one-gap curve with branch points (-1, 0, 1)."""
    return lattice_from_branch_points(-1.0, 0.0, 1.0)


@pytest.fixture(scope="session")
def family(lat_sym):
    """Canonically paired one-gap Bloch family, divisor at infinity."""
    return Lame1Family(lat_sym)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
