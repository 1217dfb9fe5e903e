"""Finite-difference discretization of ``P(h) = (h D_x)^2 + V`` on a box.

The second derivative uses the fourth-order five-point stencil
``(-1, 16, -30, 16, -1) / (12 dx^2)`` with Dirichlet ends imposed by odd
reflection, which keeps the matrix symmetric and the scheme fourth order up
to the wall.  Outgoing behaviour at the two Euclidean ends is modelled by a
polynomial complex absorbing potential ``-i Gamma``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import geometry
from .kernels import KU, BandedLU, band_matvec, band_to_dense

MAX_POINTS = 5_000_000


class NearSingularError(ArithmeticError):
    def __init__(self, z, min_pivot, scale):
        super().__init__(
            f"M - z I is numerically singular at z = {z!r} "
            f"(min pivot {min_pivot:.3e}, matrix scale {scale:.3e})")
        self.z = z


@dataclass(frozen=True)
class Grid:
    """Uniform interior nodes ``x_j = xmin + j dx``, ``j = 1..n``."""

    xmin: float
    xmax: float
    n: int

    def __post_init__(self):
        if not self.xmin < self.xmax:
            raise ValueError("xmin must be below xmax")
        if self.n < 16:
            raise ValueError(f"need at least 16 interior points, got {self.n}")

    @property
    def dx(self) -> float:
        return (self.xmax - self.xmin) / (self.n + 1)

    @cached_property
    def x(self) -> np.ndarray:
        return self.xmin + self.dx * np.arange(1, self.n + 1)

    def contains_trapped_sets(self) -> bool:
        return self.xmin < 0.0 < 1.0 < self.xmax


@dataclass(frozen=True)
class CapProfile:
    layer_width: float = 3.0
    strength: float = 1.0
    power: int = 4

    def __post_init__(self):
        if self.layer_width <= 0 or self.strength <= 0:
            raise ValueError("cap layer_width and strength must be positive")
        if int(self.power) != self.power or self.power < 2:
            raise ValueError("cap power must be an integer >= 2")

    def check_fits(self, grid: Grid):
        room = min(-grid.xmin, grid.xmax - 1.0) / 2.0
        if not self.layer_width < room:
            raise ValueError(
                f"absorbing layer of width {self.layer_width} reaches into the "
                f"trapping region; need width < {room}")

    def gamma(self, x, xmin: float, xmax: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        depth = np.maximum(xmin + self.layer_width - x, 0.0)
        depth = np.maximum(depth, x - (xmax - self.layer_width))
        return self.strength * (depth / self.layer_width) ** self.power


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Assembled band matrix ``M`` plus the data it was built from.

    ``bands`` is the compact ``(5, n)`` storage with ``M[i, j] = bands[2+i-j, j]``.
    """

    grid: Grid
    h: float
    bands: np.ndarray
    potential: np.ndarray
    gamma: np.ndarray
    cap_enabled: bool
    cap: CapProfile | None = None
    scale: float = 1.0  # overall factor (k^2 for mode operators)
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.grid.n

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return band_matvec(self.bands, np.asarray(v, dtype=np.complex128))

    def to_dense(self) -> np.ndarray:
        return band_to_dense(self.bands)


def build_grid(profile: geometry.SurfaceProfile, h: float, ppw: int = 10,
               xmin: float = -12.0, xmax: float = 13.0) -> Grid:
    """Smallest grid with ``dx <= 2 pi h / ppw`` on ``[xmin, xmax]``."""
    if h <= 0:
        raise ValueError("h must be positive")
    if ppw < 8:
        raise ValueError("need at least 8 points per wavelength")
    if not xmin < 0.0 < 1.0 < xmax:
        raise ValueError("domain must contain both trapped sets x = 0 and x = 1")
    dx_max = 2.0 * math.pi * h / ppw
    n = max(16, math.ceil((xmax - xmin) / dx_max - 1e-12) - 1)
    if n > MAX_POINTS:
        raise ValueError(
            f"grid would need {n} points (> {MAX_POINTS}); use a larger h or a "
            f"smaller domain")
    return Grid(xmin, xmax, n)


def laplacian_bands(grid: Grid) -> np.ndarray:
    """Compact bands of ``-D4`` (the positive discrete Laplacian)."""
    n = grid.n
    c = 1.0 / (12.0 * grid.dx**2)
    b = np.zeros((5, n))
    b[KU] = 30.0 * c
    b[KU - 1, 1:] = -16.0 * c
    b[KU + 1, :-1] = -16.0 * c
    b[KU - 2, 2:] = c
    b[KU + 2, :-2] = c
    # odd reflection u_{-1} = -u_1 folds the outer stencil tap into the diagonal
    b[KU, 0] = b[KU, -1] = 29.0 * c
    return b


def assemble_operator(profile: geometry.SurfaceProfile, h: float, grid: Grid,
                      cap: CapProfile | None = None, potential=None) -> DiscreteOperator:
    """``-h^2 D4 + diag(V) - i diag(Gamma)``.

    ``potential`` overrides ``V`` (callable of ``x`` or an array of samples);
    it exists for model problems such as the free resolvent.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    x = grid.x
    if potential is None:
        inv_a2, v1 = geometry.potential_parts(profile, x)
        V = inv_a2 + h * h * v1
    elif callable(potential):
        V = np.asarray(potential(x), dtype=float) * np.ones_like(x)
    else:
        V = np.asarray(potential, dtype=float)
    if cap is not None:
        cap.check_fits(grid)
        gamma = cap.gamma(x, grid.xmin, grid.xmax)
    else:
        gamma = np.zeros_like(x)
    bands = (h * h) * laplacian_bands(grid).astype(np.complex128)
    bands[KU] += V - 1j * gamma
    return DiscreteOperator(grid=grid, h=h, bands=bands, potential=V, gamma=gamma,
                            cap_enabled=cap is not None, cap=cap)


class ShiftedSolver:
    """Factorization of ``M - z I`` reused for forward and adjoint solves."""

    def __init__(self, op: DiscreteOperator, z: complex):
        shifted = op.bands.copy()
        shifted[KU] -= z
        self.z = z
        self.lu = BandedLU(shifted)
        if self.lu.singular:
            raise NearSingularError(z, self.lu.min_pivot, self.lu.scale)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.lu.solve(rhs)

    def solve_adjoint(self, rhs: np.ndarray) -> np.ndarray:
        return self.lu.solve(rhs, adjoint=True)


def solve_shifted(op: DiscreteOperator, z: complex, rhs: np.ndarray,
                  adjoint: bool = False) -> np.ndarray:
    rhs = np.asarray(rhs)
    if rhs.shape != (op.n,):
        raise ValueError(f"rhs must have length {op.n}")
    solver = ShiftedSolver(op, z)
    return solver.solve_adjoint(rhs) if adjoint else solver.solve(rhs)
