"""Hermite-Gauss transverse modes sampled on uniform grids.

Modes are normalized so that the continuum overlap of a mode with itself is
one, which makes field values carry units of 1/m.  All overlaps are taken
with the 2D trapezoid rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

MAX_ORDER = 10
# grid half-extent (in waists, measured from the mode center) below which a
# sampled mode is flagged as truncated
TRUNCATION_WAISTS = 2.0


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectangular grid on the transverse plane (meters)."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int = 257
    ny: int = 257

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError(f"empty grid window: {self}")
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"grid needs at least 2 nodes per axis, got {self.nx}x{self.ny}")

    @classmethod
    def centered(cls, center=(0.0, 0.0), half_width=1.0, n=257) -> "GridSpec":
        cx, cy = center
        return cls(cx - half_width, cx + half_width, cy - half_width, cy + half_width, n, n)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / (self.ny - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays of shape (ny, nx)."""
        return np.meshgrid(self.x, self.y, indexing="xy")

    def refined(self) -> "GridSpec":
        """Grid with the spacing halved; every old node is kept."""
        return GridSpec(self.x_min, self.x_max, self.y_min, self.y_max,
                        2 * self.nx - 1, 2 * self.ny - 1)

    def weights(self) -> np.ndarray:
        """Trapezoid weights, shape (ny, nx)."""
        wx = np.full(self.nx, self.dx)
        wx[[0, -1]] *= 0.5
        wy = np.full(self.ny, self.dy)
        wy[[0, -1]] *= 0.5
        return wy[:, None] * wx[None, :]


def default_grid(mode: "OpticalMode", window: float = 4.0, n: int = 257) -> GridSpec:
    """Square grid of +-`window` waists around the mode center."""
    return GridSpec.centered(mode.center, window * mode.waist, n)


@dataclass(frozen=True)
class OpticalMode:
    """Hermite-Gauss mode u_mn with waist, lateral center and in-plane rotation.

    The rotation turns the mode's own x axis by `rotation` radians about its
    center, so that HG10 rotated by phi equals cos(phi) u10 + sin(phi) u01.
    """

    m: int = 0
    n: int = 0
    waist: float = 150e-6
    center: tuple[float, float] = (0.0, 0.0)
    rotation: float = 0.0

    def __post_init__(self):
        if self.m < 0 or self.n < 0 or self.m + self.n > MAX_ORDER:
            raise ValueError(f"HG indices must satisfy 0 <= m+n <= {MAX_ORDER}, got ({self.m}, {self.n})")
        if not self.waist > 0:
            raise ValueError(f"waist must be positive, got {self.waist}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "rotation", _wrap_angle(float(self.rotation)))

    @property
    def order(self) -> int:
        return self.m + self.n

    def shifted(self, dx: float, dy: float) -> "OpticalMode":
        return OpticalMode(self.m, self.n, self.waist,
                           (self.center[0] + dx, self.center[1] + dy), self.rotation)


def _wrap_angle(a: float) -> float:
    """Map an angle onto (-pi, pi]."""
    a = math.remainder(a, 2 * math.pi)
    return math.pi if a == -math.pi else a


def hermite(n: int, t):
    """Physicists' Hermite polynomial H_n(t) by upward recurrence."""
    t = np.asarray(t, dtype=float)
    h_prev = np.ones_like(t)
    if n == 0:
        return h_prev
    h = 2.0 * t
    for k in range(1, n):
        h_prev, h = h, 2.0 * t * h - 2.0 * k * h_prev
    return h


def hg_1d(n: int, u, waist: float):
    """Normalized 1D Hermite-Gauss function of order n (units m^-1/2)."""
    norm = (2.0 / math.pi) ** 0.25 / math.sqrt(2.0**n * math.factorial(n) * waist)
    u = np.asarray(u, dtype=float)
    return norm * hermite(n, math.sqrt(2.0) * u / waist) * np.exp(-(u / waist) ** 2)


def local_coords(mode: OpticalMode, x, y):
    """Coordinates in the mode frame: subtract the center, then rotate."""
    dx = np.asarray(x, dtype=float) - mode.center[0]
    dy = np.asarray(y, dtype=float) - mode.center[1]
    c, s = math.cos(mode.rotation), math.sin(mode.rotation)
    return c * dx + s * dy, -s * dx + c * dy


def eval_hg(mode: OpticalMode, x, y):
    """Value of the normalized mode at (x, y); broadcasts over arrays."""
    xr, yr = local_coords(mode, x, y)
    val = hg_1d(mode.m, xr, mode.waist) * hg_1d(mode.n, yr, mode.waist)
    if np.ndim(val) == 0:
        return complex(val)
    return val.astype(complex)


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex amplitude sampled on a grid; `values` has shape (ny, nx)."""

    grid: GridSpec
    values: np.ndarray
    flags: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.grid.ny, self.grid.nx):
            if vals.size != self.grid.nx * self.grid.ny:
                raise ValueError(f"field has {vals.size} samples, grid needs {self.grid.nx * self.grid.ny}")
            vals = vals.reshape(self.grid.ny, self.grid.nx)
        if not np.all(np.isfinite(vals)):
            raise ValueError("field contains non-finite samples")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "flags", frozenset(self.flags))

    @property
    def truncated(self) -> bool:
        return "truncated" in self.flags

    def norm(self) -> float:
        return math.sqrt(max(inner_product(self, self).real, 0.0))

    def __add__(self, other: "ComplexField") -> "ComplexField":
        _check_same_grid(self, other)
        return ComplexField(self.grid, self.values + other.values, self.flags | other.flags)

    def __sub__(self, other: "ComplexField") -> "ComplexField":
        _check_same_grid(self, other)
        return ComplexField(self.grid, self.values - other.values, self.flags | other.flags)

    def scaled(self, factor) -> "ComplexField":
        return ComplexField(self.grid, factor * self.values, self.flags)


def truncation_flags(mode: OpticalMode, grid: GridSpec) -> frozenset:
    cx, cy = mode.center
    margin = min(cx - grid.x_min, grid.x_max - cx, cy - grid.y_min, grid.y_max - cy)
    return frozenset({"truncated"}) if margin < TRUNCATION_WAISTS * mode.waist else frozenset()


def sample_mode(mode: OpticalMode, grid: GridSpec) -> ComplexField:
    """Sample a mode on every grid node, flagging windows that clip it."""
    X, Y = grid.mesh()
    return ComplexField(grid, eval_hg(mode, X, Y), truncation_flags(mode, grid))


def _check_same_grid(f: ComplexField, g: ComplexField):
    if f.grid != g.grid:
        raise ValueError(f"fields live on different grids: {f.grid} vs {g.grid}")


def trapezoid_2d(values: np.ndarray, grid: GridSpec) -> complex:
    return complex(np.sum(grid.weights() * values))


def inner_product(f: ComplexField, g: ComplexField) -> complex:
    """<f|g> = integral of conj(f) g dx dy (trapezoid rule)."""
    _check_same_grid(f, g)
    return trapezoid_2d(np.conj(f.values) * g.values, f.grid)


def integrate_with_estimate(integrand: Callable, grid: GridSpec) -> tuple[complex, float]:
    """Integrate `integrand(X, Y)` on `grid` and on the once-refined grid.

    Returns the refined value and |refined - coarse| as the convergence
    estimate, floored at a few ulps of the integrand scale.
    """
    X, Y = grid.mesh()
    coarse_vals = integrand(X, Y)
    coarse = trapezoid_2d(coarse_vals, grid)
    fine_grid = grid.refined()
    X, Y = fine_grid.mesh()
    fine_vals = integrand(X, Y)
    fine = trapezoid_2d(fine_vals, fine_grid)
    scale = float(np.sum(fine_grid.weights() * np.abs(fine_vals)))
    return fine, max(abs(fine - coarse), 16 * np.finfo(float).eps * scale)
