"""Closed-form quantum limits of the mode-sorted optical lever.

All spectral densities are single-sided, in (quantity)^2/Hz.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from .mechanics import MechanicalMode

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.054571817e-34
    h: float = 6.62607015e-34
    c: float = 2.99792458e8
    k_b: float = 1.380649e-23


CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class BeamParams:
    """Probe beam: wavelength (m), waist on the sample (m), reflected power (W)."""

    wavelength: float = 1550e-9
    waist: float = 150e-6
    power: float = 2.5e-3

    def __post_init__(self):
        for name in ("wavelength", "waist", "power"):
            if not getattr(self, name) > 0:
                raise ValueError(f"beam {name} must be positive, got {getattr(self, name)}")

    @property
    def photon_flux(self) -> float:
        return self.power * self.wavelength / (CONSTANTS.h * CONSTANTS.c)

    @property
    def wavenumber(self) -> float:
        return 2 * math.pi / self.wavelength

    @property
    def diffraction_angle(self) -> float:
        return self.wavelength / (math.pi * self.waist)


def imprecision_displacement(n_flux: float, k: float, beta_perp: float) -> float:
    """Shot-noise displacement imprecision 1/(8 N k^2 beta_perp^2) in m^2/Hz."""
    if beta_perp == 0:
        raise ValueError("beta_perp = 0: the sorted port carries no displacement signal")
    if not (n_flux > 0 and k > 0):
        raise ValueError("photon flux and wavenumber must be positive")
    return 1.0 / (8 * n_flux * k**2 * beta_perp**2)


def backaction_force(n_flux: float, k: float, beta_sq: float) -> float:
    """Radiation-pressure shot-noise force 8 hbar^2 N k^2 beta^2 in N^2/Hz."""
    return 8 * CONSTANTS.hbar**2 * n_flux * k**2 * beta_sq


def imprecision_angle(beam: BeamParams) -> float:
    """Angular imprecision of an ideal HG10 readout, theta_D^2/(8N), in rad^2/Hz."""
    return beam.diffraction_angle**2 / (8 * beam.photon_flux)


def backaction_torque(beam: BeamParams) -> float:
    """Torque backaction 8 hbar^2 N / theta_D^2 (N^2 m^2/Hz).

    This is (w_r/2)^2 times the force backaction with beta = w0/w_r, and it
    saturates imprecision_angle * backaction_torque = hbar^2.
    """
    return 8 * CONSTANTS.hbar**2 * beam.photon_flux / beam.diffraction_angle**2


def zero_point_psd(mode: MechanicalMode) -> float:
    """Resonant zero-point angle spectrum hbar Q / (2 I omega^2) in rad^2/Hz."""
    return CONSTANTS.hbar * mode.q / (2 * mode.inertia * mode.omega**2)


def zero_point_psd_resonant(mode: MechanicalMode) -> float:
    """The alternative 4 hbar Q / (I omega^2) form, eight times `zero_point_psd`.

    Published budgets for this device quote a zero-point level near this value
    (9e-20 rad^2/Hz) rather than the hbar Q/(2 I omega^2) expression.
    """
    return 4 * CONSTANTS.hbar * mode.q / (mode.inertia * mode.omega**2)


def zero_point_from_imprecision(s_imp: float, n_imp: float) -> float:
    """Zero-point level implied by a quoted imprecision and its phonon equivalent."""
    return s_imp / (2 * n_imp)


def thermal_occupation(mode: MechanicalMode) -> float:
    return CONSTANTS.k_b * mode.temperature / (CONSTANTS.hbar * mode.omega)


@dataclass(frozen=True)
class PhononBudget:
    n_imp: float
    n_ba: float
    n_th: float
    n_m: float
    s_zp: float
    eta: float


@dataclass(frozen=True)
class CoolingLimit:
    n_final: float
    lower_bound: float


def cooling_limit(budget: PhononBudget, eta: float | None = None) -> CoolingLimit:
    """Final occupation under ideal derivative feedback and its efficiency-only bound.

    n_m = 2 sqrt(n_imp (n_ba + n_th)) - 1/2  >=  (1/sqrt(eta) - 1)/2
    """
    eta = budget.eta if eta is None else eta
    if not 0 < eta <= 1:
        raise ValueError(f"efficiency must lie in (0, 1], got {eta}")
    n_final = 2 * math.sqrt(budget.n_imp * (budget.n_ba + budget.n_th)) - 0.5
    return CoolingLimit(n_final, 0.5 * (1 / math.sqrt(eta) - 1))


def phonon_budget(s_imp: float, s_zp: float, eta: float, mode: MechanicalMode) -> PhononBudget:
    """Phonon-equivalent imprecision, backaction and bath occupation."""
    if not 0 < eta <= 1:
        raise ValueError(f"efficiency must lie in (0, 1], got {eta}")
    if not (s_imp > 0 and s_zp > 0):
        raise ValueError("imprecision and zero-point levels must be positive")
    n_imp = s_imp / (2 * s_zp)
    n_ba = 1 / (16 * n_imp * eta)
    n_th = thermal_occupation(mode)
    n_m = 2 * math.sqrt(n_imp * (n_ba + n_th)) - 0.5
    return PhononBudget(n_imp, n_ba, n_th, n_m, s_zp, eta)


def limits_report(beam: BeamParams, mode: MechanicalMode, s_imp: float, eta: float,
                  s_zp: float | None = None) -> dict:
    """Every closed-form limit for one configuration, as a flat dict."""
    zp_written = zero_point_psd(mode)
    zp_resonant = zero_point_psd_resonant(mode)
    if s_zp is None:
        s_zp = zp_written
    log.info("zero-point level: hbar Q/(2 I w^2) = %.3g rad^2/Hz, 4 hbar Q/(I w^2) = %.3g rad^2/Hz, "
             "quoted device value 9e-20 rad^2/Hz; using %.3g", zp_written, zp_resonant, s_zp)
    peak = 4 * CONSTANTS.k_b * mode.temperature * mode.q / (mode.inertia * mode.omega**3)
    # the peak is often printed as 4 k_B T Q / (I omega), which has units of 1/s
    peak_as_printed = peak * mode.omega**2
    log.info("thermal peak 4 k_B T Q/(I w^3) = %.4g rad^2/Hz; the form 4 k_B T Q/(I w) "
             "evaluates to %.4g 1/s and is not a spectral density", peak, peak_as_printed)
    budget = phonon_budget(s_imp, s_zp, eta, mode)
    cool = cooling_limit(budget)
    return {
        "theta_d_rad": beam.diffraction_angle,
        "photon_flux_per_s": beam.photon_flux,
        "wavenumber_rad_per_m": beam.wavenumber,
        "s_imp_ql_rad2_per_hz": imprecision_angle(beam),
        "s_tau_ba_n2m2_per_hz": backaction_torque(beam),
        "s_zp_as_written_rad2_per_hz": zp_written,
        "s_zp_resonant_rad2_per_hz": zp_resonant,
        "s_zp_used_rad2_per_hz": s_zp,
        "s_imp_rad2_per_hz": s_imp,
        "eta": eta,
        "n_imp": budget.n_imp,
        "n_ba": budget.n_ba,
        "n_th": budget.n_th,
        "n_m": cool.n_final,
        "n_m_bound": cool.lower_bound,
        "s_th_peak_rad2_per_hz": peak,
        "s_th_peak_as_printed_per_s": peak_as_printed,
    }
