"""Uniform truncated-domain discretisation of [-L, L]^2.

The lattice with ``nodes`` points per axis and spacing h = 2L / (nodes - 1) is
shifted by (h/2, h/2); the unknowns live at the ``nodes - 1`` shifted points
-L + (i + 1/2) h that fall inside the square.  The grid is symmetric about the
origin and no unknown ever sits on a lattice vertex, in particular not on the
origin.  Dirichlet data lives on the faces x = +-L, y = +-L and enters the
five-point stencil through mirrored ghost values ``2 g - u``.

Arrays are indexed ``values[iy, ix]`` (rows are y).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy import fft

from .metric import ConformalFactor
from .vortices import VortexConfiguration

FloatArray = NDArray[np.float64]

WORKERS_ENV = "CSVORTEX_WORKERS"


class GridError(ValueError):
    """Invalid grid or a grid that conflicts with the vortex configuration."""


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise GridError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
        if value >= 1:
            return value
    return os.cpu_count() or 1


@dataclass(frozen=True)
class Grid:
    half_width: float = 16.0
    nodes: int = 513

    def __post_init__(self) -> None:
        if not (math.isfinite(self.half_width) and self.half_width > 0.0):
            raise GridError("half_width must be finite and > 0")
        if int(self.nodes) != self.nodes or self.nodes < 33 or self.nodes % 2 == 0:
            raise GridError("nodes must be an odd integer >= 33")
        object.__setattr__(self, "nodes", int(self.nodes))

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.nodes - 1)

    @property
    def size(self) -> int:
        """Unknowns per axis."""
        return self.nodes - 1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.size, self.size)

    @cached_property
    def coords(self) -> FloatArray:
        h = self.spacing
        return -self.half_width + (np.arange(self.size) + 0.5) * h

    @cached_property
    def mesh(self) -> tuple[FloatArray, FloatArray]:
        return tuple(np.meshgrid(self.coords, self.coords))  # type: ignore[return-value]

    def check_vortices(self, vc: VortexConfiguration) -> None:
        """Vortices must be strictly inside and never on a node."""
        L = self.half_width
        h = self.spacing
        for p in vc.points:
            if not (abs(p.x) < L and abs(p.y) < L):
                raise GridError(f"vortex at ({p.x}, {p.y}) is outside the domain [-{L}, {L}]^2")
            ix = np.abs(self.coords - p.x).min()
            iy = np.abs(self.coords - p.y).min()
            if math.hypot(ix, iy) < 1e-9 * h:
                raise GridError(f"vortex at ({p.x}, {p.y}) coincides with a grid node")

    def zeros(self) -> ScalarGrid:
        return ScalarGrid(self, np.zeros(self.shape))

    def sample(self, f: Callable[[FloatArray, FloatArray], FloatArray]) -> ScalarGrid:
        X, Y = self.mesh
        return ScalarGrid(self, np.asarray(f(X, Y), dtype=float))

    @cached_property
    def dirichlet_eigenvalues(self) -> FloatArray:
        """Eigenvalues of -laplacian0 (homogeneous faces) in DST-II ordering."""
        h = self.spacing
        k = np.arange(1, self.size + 1)
        lam = 4.0 / h**2 * np.sin(np.pi * k / (2 * self.size)) ** 2
        return lam[:, None] + lam[None, :]


@dataclass(frozen=True)
class FaceValues:
    """Dirichlet data on the four faces, each sampled at the face midpoints."""

    west: FloatArray
    east: FloatArray
    south: FloatArray
    north: FloatArray

    @classmethod
    def zeros(cls, grid: Grid) -> FaceValues:
        z = np.zeros(grid.size)
        return cls(z, z, z, z)

    @classmethod
    def from_function(cls, grid: Grid, f: Callable[[FloatArray, FloatArray], FloatArray]) -> FaceValues:
        c = grid.coords
        L = grid.half_width
        return cls(
            west=np.asarray(f(np.full_like(c, -L), c), dtype=float),
            east=np.asarray(f(np.full_like(c, L), c), dtype=float),
            south=np.asarray(f(c, np.full_like(c, -L)), dtype=float),
            north=np.asarray(f(c, np.full_like(c, L)), dtype=float),
        )


@dataclass
class ScalarGrid:
    grid: Grid
    values: FloatArray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GridError(f"values have shape {self.values.shape}, expected {self.grid.shape}")
        if not np.isfinite(self.values).all():
            raise GridError("grid values must be finite")

    def like(self, values: FloatArray) -> ScalarGrid:
        return ScalarGrid(self.grid, values)

    def to_csv(self, path: str | Path) -> None:
        X, Y = self.grid.mesh
        table = np.column_stack([X.ravel(), Y.ravel(), self.values.ravel()])
        np.savetxt(path, table, fmt="%.17g", delimiter=",", header="x,y,value", comments="")

    @classmethod
    def from_csv(cls, path: str | Path, grid: Grid) -> ScalarGrid:
        table = np.loadtxt(path, delimiter=",", skiprows=1)
        return cls(grid, table[:, 2].reshape(grid.shape))


def _pad_with_ghosts(u: FloatArray, faces: FaceValues | None) -> FloatArray:
    m = u.shape[0]
    p = np.empty((m + 2, m + 2))
    p[1:-1, 1:-1] = u
    if faces is None:
        p[1:-1, 0] = -u[:, 0]
        p[1:-1, -1] = -u[:, -1]
        p[0, 1:-1] = -u[0, :]
        p[-1, 1:-1] = -u[-1, :]
    else:
        p[1:-1, 0] = 2.0 * faces.west - u[:, 0]
        p[1:-1, -1] = 2.0 * faces.east - u[:, -1]
        p[0, 1:-1] = 2.0 * faces.south - u[0, :]
        p[-1, 1:-1] = 2.0 * faces.north - u[-1, :]
    return p


def laplacian_array(u: FloatArray, h: float, faces: FaceValues | None = None) -> FloatArray:
    p = _pad_with_ghosts(u, faces)
    return (p[1:-1, :-2] + p[1:-1, 2:] + p[:-2, 1:-1] + p[2:, 1:-1] - 4.0 * u) / (h * h)


def laplacian0(f: ScalarGrid, boundary: FaceValues | None = None) -> ScalarGrid:
    """Five-point flat Laplacian with Dirichlet data on the faces (default 0)."""
    return f.like(laplacian_array(f.values, f.grid.spacing, boundary))


def gradient0(f: ScalarGrid) -> tuple[ScalarGrid, ScalarGrid]:
    """Central differences inside, second-order one-sided on the outer ring."""
    gy, gx = np.gradient(f.values, f.grid.spacing, edge_order=2)
    return f.like(gx), f.like(gy)


def integrate_metric(
    f: ScalarGrid, cf: ConformalFactor, workers: int | None = None
) -> float:
    """Midpoint rule for the integral of f dV = f b dz over the square.

    The products are formed in row blocks (optionally threaded); the reduction
    is a single exactly rounded ``math.fsum`` so the result does not depend on
    the partitioning.
    """
    grid = f.grid
    X, Y = grid.mesh
    workers = workers or 1
    blocks = np.array_split(np.arange(grid.size), max(1, min(workers, grid.size)))

    def product(rows: NDArray[np.int64]) -> FloatArray:
        return f.values[rows] * cf(X[rows], Y[rows])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(product, blocks))
    else:
        parts = [product(rows) for rows in blocks]
    return math.fsum(np.concatenate([p.ravel() for p in parts])) * grid.spacing**2


def solve_shifted_poisson(
    rhs: FloatArray, grid: Grid, shift: float, workers: int | None = None
) -> FloatArray:
    """Solve (-laplacian0 + shift) x = rhs with homogeneous faces via DST-II."""
    coeffs = fft.dstn(rhs, type=2, workers=workers)
    coeffs /= grid.dirichlet_eigenvalues + shift
    return fft.idstn(coeffs, type=2, workers=workers)
