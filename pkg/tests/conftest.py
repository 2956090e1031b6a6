import pytest

from ptorsion.geometry import make_profile


@pytest.fixture(scope="session")
def profiles():
    return {kind: make_profile(kind, 2) for kind in ("euclidean", "hyperbolic", "spherical")}
