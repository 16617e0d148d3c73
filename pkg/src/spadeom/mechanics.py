"""Mechanical modeshapes of a ribbon resonator and its mode parameters.

The ribbon is centered on the origin with the torsion axis along x = 0 and
the long axis spanning y in [-L/2, L/2].  Outside the ribbon (or outside the
sampled window of a gridded shape) the modeshape is zero: light there does
not see the moving surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import ModeshapeParseError
from .hg import GridSpec

# gridded shapes with fewer nodes than this along either axis get a warning flag
COARSE_NODES = 16

KINDS = ("torsion", "flexural", "gridded")


@dataclass(frozen=True)
class RibbonGeometry:
    width: float = 380e-6
    length: float = 7e-3
    thickness: float = 75e-9

    def __post_init__(self):
        if not (self.width > 0 and self.length > 0):
            raise ValueError(f"ribbon width and length must be positive: {self}")


@dataclass(frozen=True, eq=False)
class ModeShape:
    """Dimensionless modeshape phi(x, y), normalized to max |phi| = 1.

    Use `torsion_shape`, `flexural_shape` or `gridded_shape` to build one.
    """

    kind: str
    geometry: RibbonGeometry | None = None
    grid: GridSpec | None = None
    samples: np.ndarray | None = None
    flags: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown modeshape kind {self.kind!r}")
        if self.kind == "gridded":
            if self.grid is None or self.samples is None:
                raise ValueError("gridded shape needs a grid and samples")
            vals = np.asarray(self.samples, dtype=float).reshape(self.grid.ny, self.grid.nx)
            object.__setattr__(self, "samples", vals)
            object.__setattr__(self, "_interp", RegularGridInterpolator(
                (self.grid.y, self.grid.x), vals, method="linear", bounds_error=False, fill_value=0.0))
        elif self.geometry is None:
            raise ValueError(f"{self.kind} shape needs a ribbon geometry")

    def __call__(self, x, y):
        return eval_shape(self, x, y)

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """Support of the shape as (x_min, x_max, y_min, y_max)."""
        if self.kind == "gridded":
            g = self.grid
            return g.x_min, g.x_max, g.y_min, g.y_max
        hw, hl = self.geometry.width / 2, self.geometry.length / 2
        return -hw, hw, -hl, hl


def torsion_shape(geometry: RibbonGeometry = RibbonGeometry()) -> ModeShape:
    """Fundamental torsion mode (2x/w_r) cos(pi y / L)."""
    return ModeShape("torsion", geometry)


def flexural_shape(geometry: RibbonGeometry = RibbonGeometry()) -> ModeShape:
    """Fundamental flexural mode cos(pi y / L)."""
    return ModeShape("flexural", geometry)


def gridded_shape(grid: GridSpec, samples, geometry: RibbonGeometry | None = None) -> ModeShape:
    """Wrap sampled modeshape values (shape (ny, nx)) and normalize to max |phi| = 1."""
    vals = np.asarray(samples, dtype=float)
    if vals.size != grid.nx * grid.ny:
        raise ValueError(f"expected {grid.nx * grid.ny} samples, got {vals.size}")
    if not np.all(np.isfinite(vals)):
        raise ValueError("modeshape samples must be finite")
    peak = np.max(np.abs(vals))
    if peak == 0:
        raise ValueError("modeshape is identically zero; cannot normalize")
    flags = set()
    if grid.nx < COARSE_NODES or grid.ny < COARSE_NODES:
        flags.add("coarse-grid")
    return ModeShape("gridded", geometry, grid, vals.reshape(grid.ny, grid.nx) / peak, frozenset(flags))


def sample_shape(shape: ModeShape, grid: GridSpec) -> ModeShape:
    """Gridded copy of any shape, sampled at the nodes of `grid`."""
    X, Y = grid.mesh()
    return gridded_shape(grid, eval_shape(shape, X, Y), shape.geometry)


def _inside(shape: ModeShape, x, y):
    x0, x1, y0, y1 = shape.extent
    return (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)


def eval_shape(shape: ModeShape, x, y):
    """phi(x, y); zero outside the ribbon or sampled window."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if shape.kind == "gridded":
        pts = np.stack(np.broadcast_arrays(y, x), axis=-1)
        out = shape._interp(pts)
    else:
        g = shape.geometry
        cos_y = np.cos(math.pi * y / g.length)
        if shape.kind == "torsion":
            out = (2.0 * x / g.width) * cos_y
        else:
            out = cos_y * np.ones_like(x)
        out = np.where(_inside(shape, x, y), out, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def grad_shape(shape: ModeShape, x, y):
    """(d phi/dx, d phi/dy) in 1/m.

    Analytic for torsion and flexural shapes; for gridded shapes a central
    difference of the bilinear interpolant with a one-cell step.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if shape.kind == "gridded":
        hx, hy = shape.grid.dx, shape.grid.dy
        gx = (eval_shape(shape, x + hx, y) - eval_shape(shape, x - hx, y)) / (2 * hx)
        gy = (eval_shape(shape, x, y + hy) - eval_shape(shape, x, y - hy)) / (2 * hy)
        return gx, gy
    g = shape.geometry
    k = math.pi / g.length
    inside = _inside(shape, x, y)
    if shape.kind == "torsion":
        gx = (2.0 / g.width) * np.cos(k * y) * np.ones_like(x)
        gy = -(2.0 * x / g.width) * k * np.sin(k * y)
    else:
        gx = np.zeros(np.broadcast(x, y).shape)
        gy = -k * np.sin(k * y) * np.ones_like(x)
    gx, gy = np.where(inside, gx, 0.0), np.where(inside, gy, 0.0)
    if gx.ndim == 0:
        return float(gx), float(gy)
    return gx, gy


@dataclass(frozen=True)
class MechanicalMode:
    """A mechanical resonance: shape plus frequency, Q, moment of inertia and bath temperature."""

    shape: ModeShape | None = None
    frequency: float = 52.5e3
    q: float = 65e6
    inertia: float = 2.8e-18
    temperature: float = 295.0

    def __post_init__(self):
        for name in ("frequency", "q", "inertia", "temperature"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def omega(self) -> float:
        return 2 * math.pi * self.frequency

    @property
    def linewidth(self) -> float:
        """Energy decay rate omega_m / Q in rad/s."""
        return self.omega / self.q

    @property
    def linewidth_hz(self) -> float:
        return self.linewidth / (2 * math.pi)


def load_grid_shape(path) -> ModeShape:
    """Read a gridded modeshape file.

    Format: line 1 ``nx ny``; line 2 ``x_min x_max y_min y_max`` in meters;
    then nx*ny values, rows of constant y with x varying fastest.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    numbered = [(i + 1, ln.split()) for i, ln in enumerate(lines) if ln.strip()]
    if len(numbered) < 2:
        raise ModeshapeParseError(path, len(lines) + 1, "missing header lines")

    lineno, toks = numbered[0]
    try:
        nx, ny = (int(t) for t in toks)
    except ValueError:
        raise ModeshapeParseError(path, lineno, f"expected 'nx ny', got {' '.join(toks)!r}") from None
    if nx < 2 or ny < 2:
        raise ModeshapeParseError(path, lineno, f"need at least 2 nodes per axis, got {nx}x{ny}")

    lineno, toks = numbered[1]
    try:
        x_min, x_max, y_min, y_max = (float(t) for t in toks)
    except ValueError:
        raise ModeshapeParseError(path, lineno, "expected 'x_min x_max y_min y_max'") from None
    try:
        grid = GridSpec(x_min, x_max, y_min, y_max, nx, ny)
    except ValueError as exc:
        raise ModeshapeParseError(path, lineno, str(exc)) from None

    values = []
    for lineno, toks in numbered[2:]:
        for t in toks:
            try:
                v = float(t)
            except ValueError:
                raise ModeshapeParseError(path, lineno, f"not a number: {t!r}") from None
            if not math.isfinite(v):
                raise ModeshapeParseError(path, lineno, f"non-finite value {t!r}")
            values.append(v)
        if len(values) > nx * ny:
            raise ModeshapeParseError(path, lineno, f"more than nx*ny = {nx * ny} values")
    if len(values) != nx * ny:
        last = numbered[-1][0]
        raise ModeshapeParseError(path, last, f"expected {nx * ny} values, found {len(values)}")
    try:
        return gridded_shape(grid, np.array(values).reshape(ny, nx))
    except ValueError as exc:
        raise ModeshapeParseError(path, numbered[2][0] if len(numbered) > 2 else lineno, str(exc)) from None


def save_grid_shape(path, shape: ModeShape) -> None:
    """Write a gridded shape in the format read by `load_grid_shape`."""
    if shape.kind != "gridded":
        raise ValueError("only gridded shapes can be saved; use sample_shape first")
    g = shape.grid
    with open(path, "w") as fh:
        fh.write(f"{g.nx} {g.ny}\n")
        fh.write(f"{g.x_min!r} {g.x_max!r} {g.y_min!r} {g.y_max!r}\n")
        for row in shape.samples:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
