import numpy as np
import pytest

from surfvort import geometry, grid as gridmod, operators


@pytest.fixture(scope="session")
def sphere_chart():
    return geometry.sphere_chart(R=1.0)


@pytest.fixture(scope="session")
def sphere_cache(sphere_chart):
    grid = gridmod.grid_for_chart(sphere_chart, 64, 128)
    return operators.GeometryCache(sphere_chart, grid)


@pytest.fixture(scope="session")
def sphere_cache_small(sphere_chart):
    grid = gridmod.grid_for_chart(sphere_chart, 32, 64)
    return operators.GeometryCache(sphere_chart, grid)


@pytest.fixture(scope="session")
def torus_chart():
    return geometry.torus_chart(r0=2.0, T=0.25)


@pytest.fixture(scope="session")
def torus_cache(torus_chart):
    grid = gridmod.grid_for_chart(torus_chart, 48, 48)
    return operators.GeometryCache(torus_chart, grid)


@pytest.fixture(scope="session")
def flat_chart():
    return geometry.flat_chart()


@pytest.fixture(scope="session")
def flat_cache(flat_chart):
    grid = gridmod.grid_for_chart(flat_chart, 32, 32)
    return operators.GeometryCache(flat_chart, grid)


@pytest.fixture(scope="session")
def scaled_flat_cache():
    chart = geometry.scaled_flat_chart(eps=0.3)
    grid = gridmod.grid_for_chart(chart, 32, 32)
    return operators.GeometryCache(chart, grid)


def sphere_xyz(grid):
    X = np.sin(grid.MU) * np.cos(grid.NU)
    Y = np.sin(grid.MU) * np.sin(grid.NU)
    Z = np.cos(grid.MU)
    return X, Y, Z
