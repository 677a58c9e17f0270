"""Shared fixtures; the expensive grid/scattering objects are session scoped."""

import numpy as np
import pytest

from diracflow.aps import GridDynamics, TimeGrid
from diracflow.circle import (
    CircleGeometry,
    build_circle_family,
    metric_step_geometry,
    twisted_geometry,
)
from diracflow.families import constant_family
from diracflow.profiles import ConstantProfile, SmoothStepProfile


@pytest.fixture(scope="session")
def const_family():
    return constant_family(np.diag([-1.0, 1.0, 2.5]))


@pytest.fixture(scope="session")
def metric_geom():
    return metric_step_geometry(alpha=0.0, h_from=1.0, h_to=4.0)


@pytest.fixture(scope="session")
def metric_family(metric_geom):
    return build_circle_family(metric_geom, 8)


@pytest.fixture(scope="session")
def twisted_geom():
    return twisted_geometry(alpha=0.5, a_from=0.25, a_to=2.25)


@pytest.fixture(scope="session")
def twisted_family(twisted_geom):
    return build_circle_family(twisted_geom, 8)


@pytest.fixture(scope="session")
def ripple_geom():
    return CircleGeometry(
        alpha=0.5,
        c=SmoothStepProfile(1.0, 1.4),
        h=SmoothStepProfile(1.0, 2.0),
        c_ripples=((1, ConstantProfile(0.06)),),
    )


@pytest.fixture(scope="session")
def ripple_family(ripple_geom):
    return build_circle_family(ripple_geom, 6)


@pytest.fixture(scope="session")
def small_grid():
    return TimeGrid.build(t_max=48.0, n_nodes=97)


@pytest.fixture(scope="session")
def twisted_dynamics(twisted_family, small_grid):
    return GridDynamics(twisted_family, small_grid, tol=1e-9)
