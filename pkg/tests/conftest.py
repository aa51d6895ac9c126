"""Shared fixtures: the (3, 3) model solved once per session.

Ground states are cached on disk (THRESHOLD_LAB_CACHE or ~/.cache), so repeat
test runs skip the shooting solves entirely.
"""

import numpy as np
import pytest

from threshold_lab.model import derive_params
from threshold_lab.groundstate import solve_ground_state
from threshold_lab.linop import assemble, solve_eigenpair


@pytest.fixture(scope="session")
def params33():
    return derive_params(3, 3.0)


@pytest.fixture(scope="session")
def gs33(params33):
    return solve_ground_state(params33)


@pytest.fixture(scope="session")
def op33(gs33):
    return assemble(gs33)


@pytest.fixture(scope="session")
def pair33(op33):
    return solve_eigenpair(op33)


@pytest.fixture(scope="session")
def exp_p33(pair33, op33):
    from threshold_lab.profiles import build_profiles

    return build_profiles(1.0, 2, pair33, op33)


@pytest.fixture(scope="session")
def exp_m33(pair33, op33):
    from threshold_lab.profiles import build_profiles

    return build_profiles(-1.0, 2, pair33, op33)
