"""Model and synthetic noise spectra, ringdowns and shot-noise series.

Periodograms are synthesized bin by bin in the frequency domain: an
n_avg-averaged periodogram bin is the model value times a chi-squared
variate with 2*n_avg degrees of freedom divided by 2*n_avg.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import erf

from .csvio import read_columns, write_columns
from .limits import CONSTANTS
from .mechanics import MechanicalMode

UNITS = ("V^2/Hz", "rad^2/Hz", "m^2/Hz")


def thermal_peak(mode: MechanicalMode) -> float:
    """Resonant thermal angle PSD 4 k_B T Q / (I omega^3) in rad^2/Hz."""
    return 4 * CONSTANTS.k_b * mode.temperature * mode.q / (mode.inertia * mode.omega**3)


def thermal_variance(mode: MechanicalMode) -> float:
    """Equipartition variance k_B T / (I omega^2) in rad^2."""
    return CONSTANTS.k_b * mode.temperature / (mode.inertia * mode.omega**2)


def thermal_psd(mode: MechanicalMode, f):
    """Narrowband Lorentzian thermal PSD at frequency f (Hz)."""
    detuning = 2 * math.pi * (np.asarray(f, dtype=float) - mode.frequency)
    return thermal_peak(mode) / (1 + 4 * detuning**2 / mode.linewidth**2)


@dataclass(frozen=True)
class ModeTerm:
    """A mechanical mode and the factor converting its angle PSD into the readout."""

    mode: MechanicalMode
    weight: float = 1.0


@dataclass(frozen=True)
class NoiseModel:
    modes: tuple = ()
    imprecision: float = 0.0
    detector: float = 0.0
    gain: float = 1.0

    def __post_init__(self):
        if not self.gain > 0:
            raise ValueError(f"transduction gain must be positive, got {self.gain}")
        if self.imprecision < 0 or self.detector < 0:
            raise ValueError("noise floors must be non-negative")
        terms = tuple(t if isinstance(t, ModeTerm) else ModeTerm(t) for t in self.modes)
        object.__setattr__(self, "modes", terms)


@dataclass(frozen=True, eq=False)
class SpectrumRecord:
    """Single-sided PSD on a strictly increasing frequency grid."""

    freq: np.ndarray
    psd: np.ndarray
    units: str = "V^2/Hz"
    n_avg: int = 1

    def __post_init__(self):
        f = np.asarray(self.freq, dtype=float)
        p = np.asarray(self.psd, dtype=float)
        if f.shape != p.shape or f.ndim != 1:
            raise ValueError("frequency grid and PSD must be 1D arrays of equal length")
        if f.size > 1 and not np.all(np.diff(f) > 0):
            raise ValueError("frequency grid must be strictly increasing")
        if np.any(p < 0):
            raise ValueError("PSD values must be non-negative")
        if self.units not in UNITS:
            raise ValueError(f"unknown units {self.units!r}; expected one of {UNITS}")
        if self.n_avg < 1:
            raise ValueError("averaging count must be >= 1")
        object.__setattr__(self, "freq", f)
        object.__setattr__(self, "psd", p)

    def scaled(self, factor: float) -> "SpectrumRecord":
        return SpectrumRecord(self.freq, self.psd * factor, self.units, self.n_avg)

    def to_csv(self, path) -> None:
        write_columns(path, {"freq_hz": self.freq, "psd": self.psd},
                      comments=[f"units={self.units} n_avg={self.n_avg}"])

    @classmethod
    def from_csv(cls, path) -> "SpectrumRecord":
        cols, comments = read_columns(path, required=("freq_hz", "psd"))
        meta = {}
        for c in comments:
            for tok in c.split():
                key, _, val = tok.partition("=")
                meta[key] = val
        return cls(cols["freq_hz"], cols["psd"], meta.get("units", "V^2/Hz"), int(meta.get("n_avg", 1)))


def model_psd(model: NoiseModel, freq) -> SpectrumRecord:
    """g * (sum of weighted thermal peaks + imprecision) + detector floor, per bin."""
    freq = np.asarray(freq, dtype=float)
    motion = np.zeros_like(freq)
    for term in model.modes:
        motion += term.weight * thermal_psd(term.mode, freq)
    return SpectrumRecord(freq, model.gain * (motion + model.imprecision) + model.detector, "V^2/Hz")


def synth_periodogram(model: NoiseModel, freq, n_avg: int, seed: int) -> SpectrumRecord:
    """Model spectrum with the bin statistics of an n_avg-fold averaged periodogram."""
    if n_avg < 1:
        raise ValueError("n_avg must be >= 1")
    expected = model_psd(model, freq)
    rng = np.random.default_rng(seed)
    # chi2(2n)/(2n) is Gamma(shape=n, scale=1/n)
    factors = rng.gamma(shape=n_avg, scale=1.0 / n_avg, size=expected.psd.shape)
    return SpectrumRecord(expected.freq, expected.psd * factors, expected.units, n_avg)


def detector_record(level: float, freq, n_avg: int, seed: int) -> SpectrumRecord:
    """Synthetic blocked-beam detector spectrum with a flat expected level."""
    return synth_periodogram(NoiseModel(detector=level), freq, n_avg, seed)


def peak_grid(mode: MechanicalMode, span: float, n_bins: int) -> np.ndarray:
    """Uniform grid of n_bins over f_m +- span/2 (Hz)."""
    return np.linspace(mode.frequency - span / 2, mode.frequency + span / 2, n_bins)


@dataclass(frozen=True, eq=False)
class RingdownRecord:
    t: np.ndarray
    amplitude: np.ndarray
    noise_floor: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        a = np.asarray(self.amplitude, dtype=float)
        if t.shape != a.shape or t.ndim != 1:
            raise ValueError("time and amplitude must be 1D arrays of equal length")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("time samples must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "amplitude", a)

    def to_csv(self, path) -> None:
        write_columns(path, {"t_s": self.t, "amplitude": self.amplitude},
                      comments=[f"noise_floor={self.noise_floor!r}"])

    @classmethod
    def from_csv(cls, path) -> "RingdownRecord":
        cols, comments = read_columns(path, required=("t_s", "amplitude"))
        floor = 0.0
        for c in comments:
            if c.startswith("noise_floor="):
                floor = float(c.split("=", 1)[1])
        return cls(cols["t_s"], cols["amplitude"], floor)


def amplitude_decay_time(mode: MechanicalMode) -> float:
    """Amplitude (not energy) decay time 2 Q / omega_m."""
    return 2 * mode.q / mode.omega


def synth_ringdown(mode: MechanicalMode, duration: float, dt: float, amplitude: float = 1.0,
                   noise_floor: float = 0.0, seed: int = 0) -> RingdownRecord:
    """Envelope A0 exp(-t/tau) seen through additive Gaussian quadrature noise.

    The noise has the standard deviation per quadrature that makes the mean
    envelope of noise alone equal `noise_floor`.
    """
    if not dt > 0 or not duration > dt:
        raise ValueError("need dt > 0 and duration > dt")
    t = np.arange(0.0, duration + 0.5 * dt, dt)
    envelope = amplitude * np.exp(-t / amplitude_decay_time(mode))
    if noise_floor > 0:
        rng = np.random.default_rng(seed)
        sigma = noise_floor / math.sqrt(math.pi / 2)
        i_q = rng.normal(0.0, sigma, size=(2, t.size))
        envelope = np.hypot(envelope + i_q[0], i_q[1])
    return RingdownRecord(t, envelope, noise_floor)


def shot_scaling_series(powers: Sequence[float], slope: float, intercept: float = 0.0,
                        scatter: float = 0.0, seed: int = 0) -> dict:
    """Raw noise floor S_V = slope * P + intercept with optional fractional scatter."""
    p = np.asarray(powers, dtype=float)
    if np.any(p < 0):
        raise ValueError("optical powers must be non-negative")
    s_v = slope * p + intercept
    if scatter > 0:
        s_v = s_v * (1 + scatter * np.random.default_rng(seed).standard_normal(p.size))
    return {"power_w": p, "s_v_v2_per_hz": s_v}


def knife_edge_profile(positions, waist: float, edge: float, power: float, baseline: float = 0.0,
                       noise: float = 0.0, direction: int = 1, seed: int = 0) -> dict:
    """Reflected power as an edge of a mirror is scanned across a Gaussian spot.

    `noise` is the standard deviation relative to `power`.
    """
    x = np.asarray(positions, dtype=float)
    y = 0.5 * power * (1 + direction * erf(math.sqrt(2) * (x - edge) / waist)) + baseline
    if noise > 0:
        y = y + noise * power * np.random.default_rng(seed).standard_normal(x.size)
    return {"position_m": x, "power_w": y}
