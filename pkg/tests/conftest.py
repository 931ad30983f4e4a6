import warnings

import numpy as np
import pytest

from rankgarch import ParamVector, SimSpec, normal, simulate_garch


@pytest.fixture(autouse=True)
def _quiet_runtime_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


@pytest.fixture(scope="session")
def theta_ref() -> ParamVector:
    """GARCH(1,1) reference point used throughout the simulation studies."""
    return ParamVector.garch(6.50e-6, 0.177, 0.716)


@pytest.fixture(scope="session")
def path_ref(theta_ref) -> np.ndarray:
    """One simulated n=1000 normal-innovation path at the reference point."""
    return simulate_garch(SimSpec(theta_ref, 1000, normal(), seed=42))
