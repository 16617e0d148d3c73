"""Receiver misalignment: efficiency penalties of a shifted/rotated mode sorter.

The sorter sits in the far field of the sample, so a receiver mode shifted
by s in the receiver plane (waist w) corresponds, back on the sample
(waist w0), to the same Hermite-Gauss mode tilted by the phase
exp(i k_s . r) with k_s = 2 s / (w w0), times the Gouy factor i^(m+n).
Overlaps are then taken on the sample plane, where the reflected field is
known exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hg import ComplexField, GridSpec, OpticalMode, default_grid, eval_hg, inner_product, sample_mode
from .limits import BeamParams, imprecision_angle, imprecision_displacement
from .mechanics import ModeShape, eval_shape
from .overlap import orthogonal_mode

# dimensionless probe phase 2 k dz for numeric slopes
PROBE_PHASE = 1e-4


@dataclass(frozen=True)
class MisalignConfig:
    """Receiver shift x_s along direction phi_x, rotation phi, receiver waist w.

    eta_d lumps mode mismatch and detector efficiency; eta00/eta10 are the
    channel loss parameters of the coupling-efficiency model.
    """

    x_s: float = 0.0
    w: float = 300e-6
    phi: float = 0.0
    phi_x: float = math.pi / 4
    eta_d: float = 1.0
    eta00: float = 0.5
    eta10: float = 0.67

    def __post_init__(self):
        if not self.w > 0:
            raise ValueError(f"receiver waist must be positive, got {self.w}")
        if self.x_s < 0:
            raise ValueError(f"shift x_s must be non-negative, got {self.x_s}")
        for name in ("eta_d", "eta00", "eta10"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")

    @property
    def shift(self) -> tuple[float, float]:
        return self.x_s * math.cos(self.phi_x), self.x_s * math.sin(self.phi_x)


@dataclass(frozen=True)
class EfficiencyResult:
    eta: float
    imprecision: float
    method: str
    flags: frozenset = field(default_factory=frozenset)
    eta_overlap: float | None = None


def efficiency_closed_form(cfg: MisalignConfig, beam: BeamParams) -> EfficiencyResult:
    """Misaligned-receiver efficiency of an HG10 readout of a pure tilt."""
    cos_phi = math.cos(cfg.phi)
    if abs(cos_phi) < 1e-15:
        raise ValueError("receiver rotated by 90 degrees: the HG10 port sees no tilt signal")
    s = cfg.x_s**2 / cfg.w**2
    denom = 1 - 0.5 * s * (1 + math.cos(cfg.phi - 2 * cfg.phi_x) / cos_phi)
    if abs(denom) < 1e-15:
        return EfficiencyResult(0.0, math.inf, "closed-form", frozenset({"singular"}))
    eta = cfg.eta_d * cos_phi**2 * math.exp(-s) * denom**2
    return EfficiencyResult(eta, imprecision_angle(beam) / eta, "closed-form")


def coupling_efficiency(cfg: MisalignConfig, x):
    """Power coupling into the HG00 and HG10 ports versus transverse offset x."""
    x = np.asarray(x, dtype=float)
    r2 = (x / cfg.w) ** 2
    eta00 = cfg.eta00 * np.exp(-r2)
    eta10 = cfg.eta10 * r2 * np.exp(-r2) * math.cos(cfg.phi_x) ** 2
    return eta00, eta10


def detection_modes(cfg: MisalignConfig, waist: float | None = None) -> tuple[OpticalMode, OpticalMode]:
    """Receiver HG00 and first-order modes in the receiver plane.

    The first-order mode is HG10 rotated by phi, i.e. cos(phi) u10 + sin(phi) u01;
    both are centered on the shifted receiver axis.
    """
    w = cfg.w if waist is None else waist
    center = cfg.shift
    return OpticalMode(0, 0, w, center), OpticalMode(1, 0, w, center, cfg.phi)


def sample_plane_mode(det: OpticalMode, u_in: OpticalMode, grid: GridSpec) -> ComplexField:
    """Receiver-plane mode `det` mapped back onto the sample plane of `u_in`."""
    X, Y = grid.mesh()
    cx, cy = u_in.center
    kx, ky = (2 * c / (det.waist * u_in.waist) for c in det.center)
    local = OpticalMode(det.m, det.n, u_in.waist, u_in.center, det.rotation)
    values = (1j ** det.order) * eval_hg(local, X, Y) * np.exp(1j * (kx * (X - cx) + ky * (Y - cy)))
    return ComplexField(grid, values)


def _reflected(u_in: ComplexField, phi: np.ndarray, k: float, z: float) -> ComplexField:
    return ComplexField(u_in.grid, u_in.values * np.exp(2j * k * z * phi))


def detected_imprecision(det: ComplexField, u_in: ComplexField, phi: np.ndarray, k: float,
                         flux: float) -> tuple[float, frozenset]:
    """Shot-noise displacement imprecision (m^2/Hz) of direct detection of `det`.

    N_det(z) = flux |<det|u_ref(z)>|^2 is sampled at z = -h, 0, h.  A bright
    port uses 2 N_det / (dN_det/dz)^2; a dark port (N_det(0) ~ 0), where the
    signal is quadratic, uses 1 / (d^2 N_det/dz^2), its small-z limit.
    """
    h = PROBE_PHASE / (2 * k)
    n_minus, n_0, n_plus = (flux * abs(inner_product(det, _reflected(u_in, phi, k, z))) ** 2
                            for z in (-h, 0.0, h))
    if n_0 <= 1e-9 * max(n_plus, n_minus):
        curvature = (n_plus - 2 * n_0 + n_minus) / h**2
        if curvature <= 0:
            return math.inf, frozenset({"no-signal"})
        return 1.0 / curvature, frozenset({"dark-port"})
    slope = (n_plus - n_minus) / (2 * h)
    if abs(slope) * h <= 1e-12 * n_0:
        return math.inf, frozenset({"no-linear-signal"})
    return 2 * n_0 / slope**2, frozenset()


def _setup(beam: BeamParams, shape: ModeShape, grid: GridSpec | None):
    u_in_mode = OpticalMode(0, 0, beam.waist)
    grid = grid or default_grid(u_in_mode)
    u_in = sample_mode(u_in_mode, grid)
    X, Y = grid.mesh()
    return u_in_mode, grid, u_in, eval_shape(shape, X, Y)


def _ribbon_width(shape: ModeShape, ribbon_width: float | None) -> float:
    if ribbon_width is not None:
        return ribbon_width
    if shape.geometry is None:
        raise ValueError("gridded shape without geometry: pass ribbon_width")
    return shape.geometry.width


def efficiency_numeric(cfg: MisalignConfig, beam: BeamParams, shape: ModeShape,
                       grid: GridSpec | None = None, detection: OpticalMode | None = None,
                       ribbon_width: float | None = None) -> EfficiencyResult:
    """Efficiency of the misaligned first-order port from the reflected field itself.

    eta is the ratio of the ideal imprecision 1/(8 N k^2 beta_perp^2) to that
    of direct detection of the receiver mode (times eta_d); `imprecision` is
    the detected imprecision converted to angle with theta = 2 z0 / w_r.
    `eta_overlap` is the overlap estimate eta_d |<u_det|u_perp>|^2.
    `detection` overrides the receiver-plane mode.
    """
    u_in_mode, grid, u_in, phi = _setup(beam, shape, grid)
    det_mode = detection if detection is not None else detection_modes(cfg)[1]
    det = sample_plane_mode(det_mode, u_in_mode, grid)
    k, flux = beam.wavenumber, beam.photon_flux

    u_perp, _, b_perp = orthogonal_mode(u_in, phi)
    s_ideal = imprecision_displacement(flux, k, b_perp)
    s_det, flags = detected_imprecision(det, u_in, phi, k, cfg.eta_d * flux)
    flags = flags | u_in.flags
    eta = s_ideal / s_det if math.isfinite(s_det) else 0.0
    w_r = _ribbon_width(shape, ribbon_width)
    eta_overlap = cfg.eta_d * abs(inner_product(det, u_perp)) ** 2
    return EfficiencyResult(eta, (2 / w_r) ** 2 * s_det, "numeric", flags, eta_overlap)


def hg00_imprecision(cfg: MisalignConfig, beam: BeamParams, shape: ModeShape,
                     w_r: float | None = None, grid: GridSpec | None = None) -> tuple[float, frozenset]:
    """Angular imprecision (rad^2/Hz) when reading the tilt out of the shifted HG00 port.

    Returns (imprecision, flags); an aligned receiver gives no linear signal
    in this port, reported as inf with the flag 'no-linear-signal'.
    """
    u_in_mode, grid, u_in, phi = _setup(beam, shape, grid)
    det = sample_plane_mode(detection_modes(cfg)[0], u_in_mode, grid)
    s_det, flags = detected_imprecision(det, u_in, phi, beam.wavenumber, cfg.eta_d * beam.photon_flux)
    w_r = _ribbon_width(shape, w_r)
    return (2 / w_r) ** 2 * s_det, flags | u_in.flags


def misalignment_sweep(cfg: MisalignConfig, beam: BeamParams, shape: ModeShape, x_s,
                       grid: GridSpec | None = None) -> dict:
    """Closed-form and numeric efficiencies plus both port imprecisions over x_s."""
    rows = {k: [] for k in ("x_s_m", "eta_closed", "eta_numeric", "S_imp_rad2_per_Hz",
                            "S_imp_numeric_rad2_per_Hz", "S_imp00_rad2_per_Hz")}
    for xs in np.asarray(x_s, dtype=float):
        c = MisalignConfig(float(xs), cfg.w, cfg.phi, cfg.phi_x, cfg.eta_d, cfg.eta00, cfg.eta10)
        closed = efficiency_closed_form(c, beam)
        numeric = efficiency_numeric(c, beam, shape, grid)
        s00, _ = hg00_imprecision(c, beam, shape, grid=grid)
        rows["x_s_m"].append(float(xs))
        rows["eta_closed"].append(closed.eta)
        rows["eta_numeric"].append(numeric.eta)
        rows["S_imp_rad2_per_Hz"].append(closed.imprecision)
        rows["S_imp_numeric_rad2_per_Hz"].append(numeric.imprecision)
        rows["S_imp00_rad2_per_Hz"].append(s00)
    return {k: np.array(v) for k, v in rows.items()}
