import warnings

import pytest

from lskit.errors import SpectralGapWarning


@pytest.fixture(autouse=True)
def quiet_spectral_gap_warnings():
    # sphere-like test meshes constantly truncate inside eigenvalue clusters;
    # tests that care about the warning assert it explicitly
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SpectralGapWarning)
        yield
