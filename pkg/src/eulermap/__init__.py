"""Numerical toolkit for the 2D incompressible Euler solution map on the torus.

Spectral solver, Lagrangian flow maps / exponential map, shrinking-bump
initial-data construction, and experiments measuring how nearby initial
velocities drive apart under the time-1 solution map.
"""

from .fields import (
    Grid,
    ScalarField,
    SobolevIndex,
    VectorField,
    load_field,
    save_field,
    torus_distance,
    wrap_torus,
)
from .spectral import (
    biot_savart,
    evaluate_offgrid,
    resample,
    resample_vector,
    sobolev_norm,
    solve_poisson_zero_mean,
    spectral_derivative,
    vorticity_of,
)

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "SobolevIndex",
    "save_field",
    "load_field",
    "torus_distance",
    "wrap_torus",
    "spectral_derivative",
    "solve_poisson_zero_mean",
    "vorticity_of",
    "biot_savart",
    "sobolev_norm",
    "resample",
    "resample_vector",
    "evaluate_offgrid",
]

__version__ = "0.1.0"
