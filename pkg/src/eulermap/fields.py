"""Periodic fields on the torus [0, 2pi)^2.

The domain is discretized on an N x N uniform grid with nodes
x_j = 2*pi*j/N and integer wavenumbers xi in {-N/2+1, ..., N/2} per axis.
The spectral coefficient convention is

    fhat(xi) = (2*pi)^-2 * integral f(x) exp(-i xi.x) dx,

realized discretely as fft2(values) / N^2, so that the L2 norm equals
(2*pi)^2 * sum |fhat|^2 and H^0 coincides with L2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

TWO_PI = 2.0 * np.pi

FIELD_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Grid:
    """Uniform N x N grid on the torus, N even and >= 8."""

    n: int

    def __post_init__(self):
        n = int(self.n)
        if n < 8 or n % 2 != 0:
            raise ValueError(f"grid size must be even and >= 8, got {self.n}")
        object.__setattr__(self, "n", n)

    @property
    def spacing(self) -> float:
        return TWO_PI / self.n

    def axis_points(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid of node coordinates, 'ij' indexing (axis 0 is x1)."""
        x = self.axis_points()
        return np.meshgrid(x, x, indexing="ij")

    def node_array(self) -> np.ndarray:
        """All node positions as an (N*N, 2) array in row-major node order."""
        x1, x2 = self.nodes()
        return np.column_stack([x1.ravel(), x2.ravel()])

    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer wavenumber meshes (K1, K2) in fft2 layout."""
        k = sfft.fftfreq(self.n, 1.0 / self.n)
        return np.meshgrid(k, k, indexing="ij")

    def wavenumber_sq(self) -> np.ndarray:
        k1, k2 = self.wavenumbers()
        return k1 * k1 + k2 * k2


@dataclass(frozen=True)
class SobolevIndex:
    """Sobolev regularity index; the solution space requires k > 2."""

    k: float = 3.0

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"Sobolev index must be >= 0, got {self.k}")

    def require_solution_space(self) -> "SobolevIndex":
        if self.k <= 2:
            raise ValueError(
                f"solution space requires index > 2, got {self.k}"
            )
        return self


class ScalarField:
    """Real periodic scalar field with lazily computed spectrum.

    Fields are immutable: the value array is locked after construction and
    the spectral representation is cached on first use.
    """

    __slots__ = ("grid", "values", "_hat")

    def __init__(self, grid: Grid, values: np.ndarray):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.shape != (grid.n, grid.n):
            raise ValueError(
                f"values shape {values.shape} does not match grid {grid.n}"
            )
        self.grid = grid
        self.values = values
        self.values.setflags(write=False)
        self._hat = None

    @classmethod
    def from_hat(cls, grid: Grid, hat: np.ndarray) -> "ScalarField":
        """Build a field from normalized spectral coefficients fhat.

        The given coefficients become the cached spectrum, so spectral
        pipelines stay exact (no round trip through physical values).
        """
        values = sfft.ifft2(hat * grid.n**2).real
        f = cls(grid, values)
        h = np.array(hat, dtype=complex, copy=True)
        h.setflags(write=False)
        f._hat = h
        return f

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField":
        x1, x2 = grid.nodes()
        return cls(grid, fn(x1, x2))

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros((grid.n, grid.n)))

    @property
    def hat(self) -> np.ndarray:
        """Normalized spectral coefficients, fft2 layout (read-only)."""
        if self._hat is None:
            h = sfft.fft2(self.values) / self.grid.n**2
            h.setflags(write=False)
            self._hat = h
        return self._hat

    def mean(self) -> float:
        return float(self.values.mean())

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())

    def __add__(self, other: "ScalarField") -> "ScalarField":
        self._check_same_grid(other)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        self._check_same_grid(other)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "ScalarField":
        return ScalarField(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.grid, -self.values)

    def _check_same_grid(self, other):
        if other.grid.n != self.grid.n:
            raise ValueError("fields live on different grids")


class VectorField:
    """Pair of scalar components on a shared grid."""

    __slots__ = ("u1", "u2")

    def __init__(self, u1: ScalarField, u2: ScalarField):
        if u1.grid.n != u2.grid.n:
            raise ValueError("vector components live on different grids")
        self.u1 = u1
        self.u2 = u2

    @property
    def grid(self) -> Grid:
        return self.u1.grid

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(ScalarField.zeros(grid), ScalarField.zeros(grid))

    @classmethod
    def from_values(cls, grid: Grid, v1: np.ndarray, v2: np.ndarray) -> "VectorField":
        return cls(ScalarField(grid, v1), ScalarField(grid, v2))

    @property
    def components(self) -> tuple[ScalarField, ScalarField]:
        return (self.u1, self.u2)

    def max_abs(self) -> float:
        return float(np.hypot(self.u1.values, self.u2.values).max())

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, c: float) -> "VectorField":
        return VectorField(self.u1 * c, self.u2 * c)

    __rmul__ = __mul__

    def __neg__(self) -> "VectorField":
        return VectorField(-self.u1, -self.u2)


def wrap_torus(points: np.ndarray) -> np.ndarray:
    """Reduce positions modulo 2*pi into [0, 2*pi)."""
    return np.mod(points, TWO_PI)


def torus_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean distance on the torus (minimum over period shifts)."""
    d = np.abs(np.asarray(a) - np.asarray(b))
    d = np.minimum(d, TWO_PI - d)
    return np.sqrt((d * d).sum(axis=-1))


# ---------------------------------------------------------------------------
# Field file format: one-line JSON header followed by raw little-endian
# float64 row-major node values; vector fields store two consecutive arrays.
# ---------------------------------------------------------------------------


def save_field(path, field) -> None:
    if isinstance(field, ScalarField):
        kind, arrays = "scalar", [field.values]
        n = field.grid.n
    elif isinstance(field, VectorField):
        kind, arrays = "vector", [field.u1.values, field.u2.values]
        n = field.grid.n
    else:
        raise TypeError(f"cannot save object of type {type(field).__name__}")
    header = {"type": kind, "n": n, "version": FIELD_FORMAT_VERSION}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("utf-8"))
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_field(path):
    """Load a ScalarField or VectorField saved by save_field."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}: malformed field header") from exc
        if header.get("version") != FIELD_FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported version {header.get('version')}")
        n = int(header["n"])
        grid = Grid(n)
        count = 1 if header["type"] == "scalar" else 2
        raw = fh.read(count * n * n * 8)
        if len(raw) != count * n * n * 8:
            raise ValueError(f"{path}: truncated field payload")
        data = np.frombuffer(raw, dtype="<f8").reshape(count, n, n)
    if header["type"] == "scalar":
        return ScalarField(grid, data[0])
    if header["type"] == "vector":
        return VectorField.from_values(grid, data[0], data[1])
    raise ValueError(f"{path}: unknown field type {header['type']!r}")
