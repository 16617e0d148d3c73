"""Optomechanical overlap integrals and the reflected field of a vibrating surface.

A surface displaced by z(x, y) = z0 * phi(x, y) imprints the phase
exp(2ikz) on the incident mode.  To first order the reflected field is the
incident mode plus a parallel part (beta_par) and one orthogonal scattered
mode (beta_perp).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .csvio import write_columns
from .hg import (ComplexField, GridSpec, OpticalMode, default_grid, eval_hg, inner_product,
                 integrate_with_estimate, sample_mode, truncation_flags)
from .mechanics import ModeShape, eval_shape, grad_shape

# |2 k z0| * max|phi| above which the first-order expansion is flagged
LINEAR_PHASE_LIMIT = 0.1


@dataclass(frozen=True)
class CouplingResult:
    beta_parallel: float
    beta_perp: float
    beta_sq: float
    convergence: float
    flags: frozenset = field(default_factory=frozenset)

    @property
    def scattered_fraction(self) -> float:
        """Share of beta^2 carried by the parallel and chosen orthogonal mode."""
        return (self.beta_parallel**2 + self.beta_perp**2) / self.beta_sq


def couplings(u_in: OpticalMode, u_perp: OpticalMode | None, shape: ModeShape,
              grid: GridSpec | None = None) -> CouplingResult:
    """beta_par = <phi u_in|u_in>, beta_perp = <phi u_in|u_perp>, beta^2 = <u_in phi|u_in phi>.

    With ``u_perp=None`` the orthogonal mode is the normalized Gram-Schmidt
    remainder of phi*u_in, so beta_perp = sqrt(beta^2 - beta_par^2).
    The convergence estimate is the largest change under one grid refinement.
    """
    grid = grid or default_grid(u_in)

    def weighted_in(X, Y):
        return eval_shape(shape, X, Y) * eval_hg(u_in, X, Y)

    b_par, e1 = integrate_with_estimate(lambda X, Y: np.conj(weighted_in(X, Y)) * eval_hg(u_in, X, Y), grid)
    b_sq, e2 = integrate_with_estimate(lambda X, Y: np.abs(weighted_in(X, Y)) ** 2, grid)
    if u_perp is None:
        b_perp = math.sqrt(max(b_sq.real - b_par.real**2, 0.0))
        e3 = e1 + e2
    else:
        b_perp, e3 = integrate_with_estimate(
            lambda X, Y: np.conj(weighted_in(X, Y)) * eval_hg(u_perp, X, Y), grid)
        b_perp = b_perp.real
    return CouplingResult(b_par.real, float(b_perp), b_sq.real, max(e1, e2, e3), truncation_flags(u_in, grid))


@dataclass(frozen=True)
class ScatteringState:
    """Incident mode on a surface vibrating as z0 * phi with optical wavenumber k."""

    incident: OpticalMode
    shape: ModeShape
    z0: float
    k: float

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"wavenumber must be positive, got {self.k}")

    @property
    def peak_phase(self) -> float:
        # shapes are normalized to max|phi| = 1
        return abs(2 * self.k * self.z0)

    @property
    def linear(self) -> bool:
        return self.peak_phase <= LINEAR_PHASE_LIMIT


def orthogonal_mode(u_in: ComplexField, phi: np.ndarray) -> tuple[ComplexField, float, float]:
    """Gram-Schmidt u_perp of phi*u_in against u_in; returns (u_perp, beta_par, beta_perp)."""
    weighted = ComplexField(u_in.grid, phi * u_in.values)
    b_par = inner_product(weighted, u_in).real
    rest = weighted - u_in.scaled(b_par)
    b_perp = rest.norm()
    if b_perp == 0:
        raise ValueError("modeshape does not scatter out of the incident mode")
    return rest.scaled(1.0 / b_perp), b_par, b_perp


def reflected_field(state: ScatteringState, grid: GridSpec | None = None, linearize: bool = False,
                    u_perp: OpticalMode | None = None) -> ComplexField:
    """Field reflected from the displaced surface.

    Exact: u_in * exp(2ik z0 phi).  Linearized: u_in + 2ik z0 (beta_par u_in
    + beta_perp u_perp), with u_perp either the supplied mode (e.g. HG10 for
    a torsion mode) or the Gram-Schmidt orthogonal mode.
    """
    grid = grid or default_grid(state.incident)
    X, Y = grid.mesh()
    u_in = sample_mode(state.incident, grid)
    phi = eval_shape(state.shape, X, Y)
    flags = set(u_in.flags)
    if not state.linear:
        flags.add("nonlinear")
    if not linearize:
        values = u_in.values * np.exp(2j * state.k * state.z0 * phi)
        return ComplexField(grid, values, frozenset(flags))

    if u_perp is None:
        perp, b_par, b_perp = orthogonal_mode(u_in, phi)
    else:
        perp = sample_mode(u_perp, grid)
        weighted = ComplexField(grid, phi * u_in.values)
        b_par = inner_product(weighted, u_in).real
        b_perp = inner_product(weighted, perp).real
    values = u_in.values + 2j * state.k * state.z0 * (b_par * u_in.values + b_perp * perp.values)
    return ComplexField(grid, values, frozenset(flags))


@dataclass(frozen=True, eq=False)
class CouplingScan:
    """Couplings of a beam translated along the torsion axis, with the small-spot proxies."""

    y0: np.ndarray
    beta10: np.ndarray
    beta01: np.ndarray
    dphidx: np.ndarray
    dphidy: np.ndarray
    outside: np.ndarray
    flags: frozenset = field(default_factory=frozenset)

    def to_csv(self, path) -> None:
        write_columns(path, {"y0_m": self.y0, "beta10": self.beta10, "beta01": self.beta01,
                             "dphidx": self.dphidx, "dphidy": self.dphidy})


def coupling_scan(u_in: OpticalMode, shape: ModeShape, y0, grid: GridSpec | None = None) -> CouplingScan:
    """beta10(y0) and beta01(y0) for the beam centered at (x_c, y0) on the ribbon.

    `grid`, if given, is taken relative to the beam center and moved with it.
    For a small spot, beta10 ~ (w0/2) dphi/dx and beta01 ~ (w0/2) dphi/dy at
    the beam center; those derivatives are returned for comparison.
    """
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    x_c = u_in.center[0]
    rel = grid or GridSpec.centered((0.0, 0.0), 4 * u_in.waist, 257)
    x_min, x_max, y_min, y_max = shape.extent
    flags = set()
    if u_in.waist > min(x_max - x_min, y_max - y_min) / 10:
        flags.add("spot-not-small")

    b10, b01, gx, gy = (np.zeros_like(y0) for _ in range(4))
    outside = (y0 < y_min) | (y0 > y_max) | (x_c < x_min) | (x_c > x_max)
    if outside.any():
        flags.add("outside-ribbon")
    for i, yc in enumerate(y0):
        if outside[i]:
            continue
        g = GridSpec(rel.x_min + x_c, rel.x_max + x_c, rel.y_min + yc, rel.y_max + yc, rel.nx, rel.ny)
        X, Y = g.mesh()
        beam = OpticalMode(0, 0, u_in.waist, (x_c, yc), u_in.rotation)
        weighted = eval_shape(shape, X, Y) * eval_hg(beam, X, Y).real
        w = g.weights()
        b10[i] = np.sum(w * weighted * eval_hg(OpticalMode(1, 0, u_in.waist, (x_c, yc)), X, Y).real)
        b01[i] = np.sum(w * weighted * eval_hg(OpticalMode(0, 1, u_in.waist, (x_c, yc)), X, Y).real)
        gx[i], gy[i] = grad_shape(shape, x_c, yc)
    return CouplingScan(y0, b10, b01, gx, gy, outside, frozenset(flags))
