import numpy as np
import pytest

from spadeom.hg import GridSpec, OpticalMode, default_grid
from spadeom.limits import BeamParams
from spadeom.mechanics import MechanicalMode, RibbonGeometry, torsion_shape

W0 = 150e-6


@pytest.fixture
def beam():
    return BeamParams()


@pytest.fixture
def mode():
    return MechanicalMode()


@pytest.fixture
def u00():
    return OpticalMode(0, 0, W0)


@pytest.fixture
def grid(u00):
    return default_grid(u00)


@pytest.fixture
def large_torsion():
    """Ribbon 100 waists across: the shape is a pure tilt under the beam."""
    return torsion_shape(RibbonGeometry(100 * W0, 100 * W0))


@pytest.fixture
def device_torsion():
    return torsion_shape(RibbonGeometry(380e-6, 7e-3))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
