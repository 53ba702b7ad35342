import numpy as np
import pytest

from eulermap import Grid, ScalarField, VectorField, biot_savart


@pytest.fixture
def grid32():
    return Grid(32)


@pytest.fixture
def grid64():
    return Grid(64)


def taylor_green_vorticity(grid: Grid) -> ScalarField:
    x1, x2 = grid.nodes()
    return ScalarField(grid, 2.0 * np.sin(x1) * np.sin(x2))


def taylor_green_velocity(grid: Grid) -> VectorField:
    x1, x2 = grid.nodes()
    return VectorField.from_values(
        grid, np.sin(x1) * np.cos(x2), -np.cos(x1) * np.sin(x2)
    )


def shear_velocity(grid: Grid) -> VectorField:
    x1, x2 = grid.nodes()
    return VectorField.from_values(grid, -np.sin(x2), np.zeros_like(x2))


def shear_vorticity(grid: Grid) -> ScalarField:
    x1, x2 = grid.nodes()
    return ScalarField(grid, np.cos(x2))
