"""Calibration and parameter-extraction fits.

All nonlinear fits minimize a sum of squared residuals with the
Nelder-Mead simplex on scaled parameters, restarted from the best point
until the restart no longer improves the objective.  Uncertainties come
from a residual bootstrap with one child seed per resample.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize
from scipy.special import erf
from scipy.stats import spearmanr

from .errors import FitError, NegativeImprecisionError
from .limits import BeamParams, imprecision_angle
from .mechanics import MechanicalMode
from .overlap import CouplingScan
from .spectra import RingdownRecord, SpectrumRecord, thermal_peak

log = logging.getLogger(__name__)

XATOL = 1e-9
MAX_EVALS = 10_000
N_BOOT = 200


@dataclass
class FitReport:
    params: dict
    uncertainties: dict
    iterations: int
    converged: bool
    residual_norm: float
    flags: frozenset = field(default_factory=frozenset)
    extra: dict = field(default_factory=dict)

    def lines(self, prefix: str = "") -> list[str]:
        out = [f"{prefix}{k} = {float(v)!r}" for k, v in self.params.items()]
        out += [f"{prefix}{k}_sigma = {float(v)!r}" for k, v in self.uncertainties.items()]
        out += [f"{prefix}iterations = {self.iterations}",
                f"{prefix}converged = {str(self.converged).lower()}",
                f"{prefix}residual_norm = {self.residual_norm!r}",
                f"{prefix}flags = {','.join(sorted(self.flags)) or 'none'}"]
        return out


def simplex_minimize(objective: Callable, x0, max_evals: int = MAX_EVALS, xatol: float = XATOL,
                     restarts: int = 3):
    """Nelder-Mead in scaled coordinates; returns (x, fun, n_evals, converged)."""
    x = np.asarray(x0, dtype=float)
    f0 = float(objective(x))
    scale = f0 if np.isfinite(f0) and f0 > 0 else 1.0

    def scaled(u):
        v = objective(u) / scale
        return v if np.isfinite(v) else 1e300

    best_f, n_evals, converged = f0 / scale, 1, False
    for _ in range(restarts + 1):
        budget = max_evals - n_evals
        if budget <= 0:
            break
        res = minimize(scaled, x, method="Nelder-Mead",
                       options={"xatol": xatol, "fatol": 1e-15, "maxfev": budget})
        n_evals += res.nfev
        converged = bool(res.status == 0)
        improved = res.fun < best_f * (1 - 1e-12) or res.fun < best_f - 1e-300
        if res.fun <= best_f:
            x, best_f = res.x, res.fun
        if not improved:
            break
    return x, best_f * scale, n_evals, converged


def _bootstrap_seeds(seed: int, n: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


# ---------------------------------------------------------------- spectra

@dataclass
class CalibrationResult:
    gain: float
    center_frequency: float
    linewidth: float
    thermal_peak: float
    calibrated_floor: float
    imprecision: float
    eta: float
    uncertainties: dict
    residual_norm: float
    report: FitReport

    def calibrated(self, raw: SpectrumRecord) -> SpectrumRecord:
        """Raw V^2/Hz spectrum converted to rad^2/Hz."""
        return SpectrumRecord(raw.freq, raw.psd / self.gain, "rad^2/Hz", raw.n_avg)

    def write_calibrated_csv(self, raw: SpectrumRecord, path) -> None:
        from .csvio import write_columns
        cal = self.calibrated(raw)
        write_columns(path, {"freq_hz": cal.freq, "psd_rad2_per_hz": cal.psd})

    def report_lines(self) -> list[str]:
        out = [f"gain_v2_per_rad2 = {self.gain!r}",
               f"center_frequency_hz = {self.center_frequency!r}",
               f"linewidth_hz = {self.linewidth!r}",
               f"thermal_peak_rad2_per_hz = {self.thermal_peak!r}",
               f"calibrated_floor_rad2_per_hz = {self.calibrated_floor!r}",
               f"s_imp_rad2_per_hz = {self.imprecision!r}",
               f"eta = {self.eta!r}",
               f"residual_norm = {self.residual_norm!r}"]
        out += [f"{k}_sigma = {v!r}" for k, v in self.uncertainties.items()]
        out += [f"fit_iterations = {self.report.iterations}",
                f"fit_flags = {','.join(sorted(self.report.flags)) or 'none'}"]
        return out


def lorentzian(f, amplitude, center, linewidth_hz, floor):
    """amplitude / (1 + 4 (f - center)^2 / linewidth_hz^2) + floor."""
    return amplitude / (1 + 4 * (np.asarray(f) - center) ** 2 / linewidth_hz**2) + floor


def wing_mask(freq, f_m: float, linewidth_hz: float, inner: float = 2.0, outer: float | None = None):
    """Bins in the thermal wings: |f - f_m| between max(inner*linewidth, 2 bins) and outer*linewidth.

    `outer=None` keeps every bin beyond the inner exclusion.
    """
    freq = np.asarray(freq, dtype=float)
    df = np.median(np.diff(freq)) if freq.size > 1 else 0.0
    d = np.abs(freq - f_m)
    keep = d > max(inner * linewidth_hz, 2 * df)
    if outer is not None:
        keep &= d <= outer * linewidth_hz
    return keep


def _spectrum_fit(f, d, p0, free_linewidth: bool, irls_passes: int = 4, weights=None):
    """Relative-residual Lorentzian fit; p0 = (A, f_c, linewidth_hz, B).

    Each pass minimizes sum(((d - m) / w)^2) with w the model of the previous
    pass, which removes the bias a data-weighted fit has on chi-squared bins.
    """
    A0, fc0, lw0, B0 = p0
    df = np.median(np.diff(f)) if f.size > 1 else 1.0

    def unpack(u):
        A = A0 * math.exp(u[0])
        fc = fc0 + u[1] * df
        B = B0 * math.exp(u[2])
        lw = lw0 * math.exp(u[3]) if free_linewidth else lw0
        return A, fc, lw, B

    u = np.zeros(4 if free_linewidth else 3)
    w = lorentzian(f, *p0) if weights is None else weights
    n_evals, converged, fun = 0, False, math.inf
    for _ in range(irls_passes):
        def obj(v, w=w):
            if np.any(np.abs(v[[0, 2]]) > 700):
                return math.inf
            return float(np.mean(((d - lorentzian(f, *unpack(v))) / w) ** 2))
        u, fun, n, converged = simplex_minimize(obj, u)
        n_evals += n
        w_new = lorentzian(f, *unpack(u))
        if weights is not None or np.allclose(w_new, w, rtol=1e-9, atol=0):
            break
        w = w_new
    return unpack(u), fun, n_evals, converged


def calibrate_spectrum(raw: SpectrumRecord, detector: SpectrumRecord, mode: MechanicalMode,
                       beam: BeamParams, inner: float = 2.0, outer: float | None = None,
                       fit_linewidth: bool = False, n_boot: int = N_BOOT, seed: int = 0) -> CalibrationResult:
    """Thermal-wing calibration of a raw photocurrent spectrum.

    Fits A / (1 + 4 (f - f_c)^2 / Gamma^2) + B to the wing bins, then sets
    the gain g = A / S_peak from the known thermal peak of `mode`, the
    imprecision (B - mean detector) / g and the efficiency against the
    ideal HG10 readout.  With resolution bins much wider than the mechanical
    linewidth only A*Gamma^2 shows in the wings, so Gamma is held at the
    mode's linewidth unless `fit_linewidth` is set.

    Parameters
    ----------
    raw, detector : SpectrumRecord
        V^2/Hz spectra on the same grid; `detector` is taken with the beam blocked.
    inner, outer : float
        Wing window in linewidths from f_m; `outer=None` uses the whole record.
    n_boot : int
        Residual-bootstrap resamples for the uncertainties (0 disables them).

    Raises
    ------
    FitError
        The simplex did not converge; `.report` holds the best point.
    NegativeImprecisionError
        The fitted floor lies below the mean detector floor.
    """
    if raw.freq.shape != detector.freq.shape or not np.allclose(raw.freq, detector.freq, rtol=1e-12, atol=0):
        raise ValueError("raw and detector spectra must share a frequency grid")
    lw_hz = mode.linewidth_hz
    mask = wing_mask(raw.freq, mode.frequency, lw_hz, inner, outer)
    if mask.sum() < 8:
        raise ValueError(f"only {mask.sum()} bins in the wing window; widen the span or the window")
    f, d = raw.freq[mask], raw.psd[mask]
    det_mean = float(np.mean(detector.psd))

    # highest bin wins; np.argmax takes the first, i.e. lowest-frequency, tie
    fc0 = float(raw.freq[np.argmax(raw.psd)])
    if abs(fc0 - mode.frequency) > 10 * max(lw_hz, np.median(np.diff(raw.freq))):
        fc0 = mode.frequency
    n_dec = max(1, f.size // 10)
    order = np.argsort(np.abs(f - fc0))
    B0 = float(np.mean(d[order[-n_dec:]]))
    near = order[:n_dec]
    shape = 1 + 4 * (f[near] - fc0) ** 2 / lw_hz**2
    A0 = float(np.median(np.maximum(d[near] - B0, 0.0) * shape))
    if not (A0 > 0 and B0 > 0):
        raise FitError("no thermal wing above the floor in the fit window")
    p0 = (A0, fc0, lw_hz, B0)

    (A, fc, lw, B), fun, n_evals, converged = _spectrum_fit(f, d, p0, fit_linewidth)
    resid = float(math.sqrt(fun * f.size))
    params = {"amplitude_v2_per_hz": A, "center_hz": fc, "linewidth_hz": lw, "floor_v2_per_hz": B}
    flags = set() if fit_linewidth else {"linewidth-pinned"}
    params = {k: float(v) for k, v in params.items()}
    report = FitReport(params, {}, n_evals, converged, resid, frozenset(flags))
    if not converged:
        raise FitError("wing fit did not converge", report)

    s_peak = thermal_peak(mode)
    gain = A / s_peak
    s_imp = (B - det_mean) / gain
    if s_imp < 0:
        raise NegativeImprecisionError(
            f"fitted floor {B:.4g} V^2/Hz lies below the detector floor {det_mean:.4g} V^2/Hz", report)

    sig = {}
    if n_boot > 0:
        model = lorentzian(f, A, fc, lw, B)
        rel = d / model - 1
        samples = []
        for rng in _bootstrap_seeds(seed, n_boot):
            d_b = model * (1 + rng.choice(rel, rel.size))
            det_b = float(np.mean(rng.choice(detector.psd, detector.psd.size)))
            (Ab, fcb, lwb, Bb), _, _, _ = _spectrum_fit(f, d_b, (A, fc, lw, B), fit_linewidth, weights=model)
            gb = Ab / s_peak
            samples.append((gb, fcb, lwb, (Bb - det_b) / gb))
        sd = np.std(np.array(samples), axis=0, ddof=1)
        sig = {"gain_v2_per_rad2": float(sd[0]), "center_frequency_hz": float(sd[1]),
               "s_imp_rad2_per_hz": float(sd[3])}
        if fit_linewidth:
            sig["linewidth_hz"] = float(sd[2])
        report.uncertainties = dict(sig)

    eta = imprecision_angle(beam) / s_imp if s_imp > 0 else math.inf
    return CalibrationResult(float(gain), float(fc), float(lw), s_peak, B / gain, s_imp, eta, sig, resid, report)


# ---------------------------------------------------------------- shot noise

def _weighted_lstsq(A, y, w):
    coef, *_ = np.linalg.lstsq(A * w[:, None], y * w, rcond=None)
    r = (A @ coef - y) * w
    return coef, float(r @ r)


def fit_shot_scaling(power, s_v, criterion: float = 1.0) -> FitReport:
    """Linear fit S_V = a P + b with a shot-noise verdict.

    The series is called shot-consistent when the residual sum of squares of
    the linear model is below `criterion` times that of the classical
    intensity-noise alternative S_V = c P^2 + b.  Residuals are relative
    (weights 1/S_V) when every S_V is positive.
    """
    p = np.asarray(power, dtype=float)
    s = np.asarray(s_v, dtype=float)
    if p.shape != s.shape or np.unique(p).size < 3:
        raise ValueError("shot-scaling fit needs at least 3 distinct powers")
    w = 1 / s if np.all(s > 0) else np.ones_like(s)
    ones = np.ones_like(p)
    lin_A = np.column_stack([p, ones])
    (a, b), rss_lin = _weighted_lstsq(lin_A, s, w)
    _, rss_quad = _weighted_lstsq(np.column_stack([p**2, ones]), s, w)

    dof = p.size - 2
    sig = {}
    if dof > 0:
        cov = rss_lin / dof * np.linalg.inv((lin_A * w[:, None]).T @ (lin_A * w[:, None]))
        sig = {"slope": float(math.sqrt(cov[0, 0])), "intercept": float(math.sqrt(cov[1, 1]))}
    consistent = rss_lin <= criterion * rss_quad
    flags = frozenset() if consistent else frozenset({"not-shot-consistent"})
    return FitReport({"slope": float(a), "intercept": float(b)}, sig, 1, True, math.sqrt(rss_lin), flags,
                     {"shot_consistent": bool(consistent), "rss_linear": rss_lin, "rss_quadratic": rss_quad})


# ---------------------------------------------------------------- knife edge

def knife_edge_model(x, x0, w0, p0, baseline, s):
    return 0.5 * p0 * (1 + s * erf(math.sqrt(2) * (np.asarray(x) - x0) / w0)) + baseline


def _crossing(x, y, level):
    """First linear-interpolated position where y crosses `level` (y sorted along x)."""
    above = y >= level
    idx = np.nonzero(above[1:] != above[:-1])[0]
    if idx.size == 0:
        return float(x[np.argmin(np.abs(y - level))])
    i = idx[0]
    if y[i + 1] == y[i]:
        return float(x[i])
    return float(x[i] + (level - y[i]) * (x[i + 1] - x[i]) / (y[i + 1] - y[i]))


def fit_knife_edge(position, power, n_boot: int = N_BOOT, seed: int = 0) -> FitReport:
    """Error-function fit of a reflective knife-edge scan.

    Initialization: decile means give the baseline and plateau, the
    half-rise crossing gives x0 and the 10-90 % distance / 1.2816 gives w0.
    A fitted w0 below the smallest sample spacing is flagged
    'below-resolution' (a step-like profile).
    """
    order = np.argsort(position)
    x = np.asarray(position, dtype=float)[order]
    y = np.asarray(power, dtype=float)[order]
    if x.size < 6:
        raise ValueError("knife-edge fit needs at least 6 points")
    rho = spearmanr(x, y).statistic
    if not np.isfinite(rho) or abs(rho) < 0.5:
        raise FitError(f"profile is not monotone-dominant (rank correlation {rho:.3g}); no edge to fit")
    s = 1 if rho > 0 else -1

    n_dec = max(1, x.size // 10)
    lo_end, hi_end = float(np.mean(y[:n_dec])), float(np.mean(y[-n_dec:]))
    base0, top0 = min(lo_end, hi_end), max(lo_end, hi_end)
    amp0 = top0 - base0
    x0_0 = _crossing(x, y, base0 + 0.5 * amp0)
    width = abs(_crossing(x, y, base0 + 0.9 * amp0) - _crossing(x, y, base0 + 0.1 * amp0))
    spacing = float(np.min(np.diff(x)))
    w0_0 = width / 1.2816 if width > 0 else 2 * spacing

    def unpack(u):
        return x0_0 + u[0] * w0_0, w0_0 * math.exp(u[1]), amp0 * (1 + u[2]), base0 + amp0 * u[3]

    def fit(yy, u0):
        def obj(u):
            if abs(u[1]) > 700:
                return math.inf
            return float(np.sum((yy - knife_edge_model(x, *unpack(u), s)) ** 2))
        return simplex_minimize(obj, u0)

    u, fun, n_evals, converged = fit(y, np.zeros(4))
    x0, w0, p0, baseline = unpack(u)
    flags = set()
    if w0 < spacing:
        flags.add("below-resolution")
    params = {"w0_m": w0, "x0_m": x0, "amplitude_w": p0, "baseline_w": baseline}
    report = FitReport(params, {}, n_evals, converged, math.sqrt(fun), frozenset(flags), {"direction": s})
    if not converged and "below-resolution" not in flags:
        raise FitError("knife-edge fit did not converge", report)

    if n_boot > 0:
        model = knife_edge_model(x, *unpack(u), s)
        resid = y - model
        samples = [unpack(fit(model + rng.choice(resid, resid.size), u)[0]) for rng in _bootstrap_seeds(seed, n_boot)]
        sd = np.std(np.array(samples), axis=0, ddof=1)
        report.uncertainties = dict(zip(params, map(float, sd)))
    return report


# ---------------------------------------------------------------- ringdown

def fit_ringdown(record: RingdownRecord, f_m: float, sigma=None, n_boot: int = N_BOOT,
                 seed: int = 0) -> FitReport:
    """Fit A0 exp(-t/tau) + floor to an amplitude ringdown; Q = pi f_m tau.

    `sigma` optionally gives per-sample standard deviations for weighting.
    A record whose amplitude drops by less than 3 dB is flagged
    'short-record'; a relative Q uncertainty above 10 % is flagged
    'poorly-constrained'.

    Raises
    ------
    FitError
        No decay is detectable above the scatter of the record.
    """
    t, a = record.t, record.amplitude
    if t.size < 4:
        raise ValueError("ringdown fit needs at least 4 samples")
    w = np.ones_like(a) if sigma is None else 1 / np.broadcast_to(np.asarray(sigma, dtype=float), a.shape)
    n_dec = max(2, t.size // 10)
    head, tail = float(np.mean(a[:n_dec])), float(np.mean(a[-n_dec:]))
    scatter = float(np.std(np.diff(a)) / math.sqrt(2))
    if not head - tail > 3 * scatter / math.sqrt(n_dec):
        raise FitError("no decay detectable above the record's scatter")

    floor0 = record.noise_floor if record.noise_floor > 0 else 0.0
    amp0 = max(float(a[0]) - floor0, head - floor0)
    keep = a - floor0 > 0.05 * amp0
    if keep.sum() < 3:
        raise FitError("too few samples above the noise floor to estimate a decay")
    slope = np.polyfit(t[keep] - t[0], np.log(a[keep] - floor0), 1)[0]
    if not slope < 0:
        raise FitError("no decay detectable above the record's scatter")
    tau0 = -1 / slope
    t_ref = t[0]

    def unpack(u):
        return amp0 * (1 + u[0]), tau0 * math.exp(u[1]), amp0 * u[2]

    def model(p):
        A, tau, floor = p
        return A * np.exp(-(t - t_ref) / tau) + floor

    def fit(aa, u0):
        def obj(u):
            if abs(u[1]) > 700:
                return math.inf
            return float(np.sum(((aa - model(unpack(u))) * w) ** 2))
        return simplex_minimize(obj, u0)

    u, fun, n_evals, converged = fit(a, np.zeros(3))
    A, tau, floor = unpack(u)
    q = math.pi * f_m * tau
    flags = set()
    if head / max(tail, 1e-300) < 10 ** (3 / 20):
        flags.add("short-record")
    params = {"q": q, "tau_s": tau, "amplitude": A, "floor": floor}
    report = FitReport(params, {}, n_evals, converged, math.sqrt(fun), frozenset(flags),
                       {"t_start_s": float(t_ref)})
    if not converged:
        raise FitError("ringdown fit did not converge", report)

    if n_boot > 0:
        best = model((A, tau, floor))
        resid = a - best
        taus = []
        for rng in _bootstrap_seeds(seed, n_boot):
            taus.append(unpack(fit(best + rng.choice(resid, resid.size), u)[0])[1])
        sd_tau = float(np.std(taus, ddof=1))
        report.uncertainties = {"tau_s": sd_tau, "q": math.pi * f_m * sd_tau}
        if sd_tau / tau > 0.1:
            flags.add("poorly-constrained")
            report.flags = frozenset(flags)
    return report


# ---------------------------------------------------------------- coupling model

def coupling_model(x, w, phi_x, eta00, eta10):
    r2 = (np.asarray(x, dtype=float) / w) ** 2
    return eta00 * np.exp(-r2), eta10 * r2 * np.exp(-r2) * math.cos(phi_x) ** 2


def fit_coupling_model(x, eta00, eta10, phi_x: float | None = None, n_boot: int = N_BOOT,
                       seed: int = 0) -> FitReport:
    """Joint least-squares fit of the HG00 and HG10 coupling curves sharing w.

    phi_x and eta10 enter only through eta10 cos^2(phi_x), so the data fix
    that product (reported as 'eta10_cos2') but not the two separately; the
    fit starts from phi_x = 0 and the pair is flagged 'phi_x-eta10-degenerate'.
    Passing `phi_x` holds it fixed and makes the fit well posed.
    """
    x = np.asarray(x, dtype=float)
    e00 = np.asarray(eta00, dtype=float)
    e10 = np.asarray(eta10, dtype=float)
    if x.size < 5 or np.unique(x).size < 5:
        raise ValueError("coupling fit needs at least 5 distinct positions")

    # w from the HG00 decay, eta10 cos^2 from the HG10 peak value (peak = product / e)
    pos = e00 > 0
    if pos.sum() >= 2:
        slope, icpt = np.polyfit(x[pos] ** 2, np.log(e00[pos]), 1)
        w0 = math.sqrt(-1 / slope) if slope < 0 else float(np.ptp(x))
        e00_0 = math.exp(icpt)
    else:
        w0, e00_0 = float(np.ptp(x)) / 2, float(np.max(e00))
    prod0 = max(float(np.max(e10)) * math.e, 0.0)
    flags = set()
    if np.max(np.abs(x)) < w0:
        flags.add("peak-not-covered")
        log.warning("coupling data do not extend beyond the HG10 peak; w is ill-conditioned")
    if np.all(e10 == 0):
        flags.add("eta10-null")
    if phi_x is None:
        flags.add("phi_x-eta10-degenerate")
    phi_fixed = phi_x
    phi_start = 0.0 if phi_x is None else phi_x
    e10_0 = prod0 / max(math.cos(phi_start) ** 2, 1e-12)
    scale = max(e00_0, e10_0, 1e-3)

    def unpack(u):
        phi = phi_fixed if phi_fixed is not None else phi_start + u[3]
        return w0 * math.exp(u[0]), phi, e00_0 + scale * u[1], e10_0 + scale * u[2]

    def fit(y00, y10, u0):
        def obj(u):
            if abs(u[0]) > 700:
                return math.inf
            m00, m10 = coupling_model(x, *unpack(u))
            return float(np.sum((y00 - m00) ** 2) + np.sum((y10 - m10) ** 2))
        return simplex_minimize(obj, u0)

    n_par = 3 if phi_fixed is not None else 4
    u, fun, n_evals, converged = fit(e00, e10, np.zeros(n_par))
    w, phi, a00, a10 = unpack(u)
    phi = math.remainder(phi, math.pi)
    phi = abs(phi)
    params = {"w_m": w, "phi_x_rad": phi, "eta00": a00, "eta10": a10,
              "eta10_cos2": a10 * math.cos(phi) ** 2}
    report = FitReport(params, {}, n_evals, converged, math.sqrt(fun), frozenset(flags))
    if not converged:
        raise FitError("coupling-model fit did not converge", report)

    if n_boot > 0:
        m00, m10 = coupling_model(x, w, phi, a00, a10)
        r00, r10 = e00 - m00, e10 - m10
        samples = []
        for rng in _bootstrap_seeds(seed, n_boot):
            idx = rng.integers(0, x.size, x.size)
            ub = fit(m00 + r00[idx], m10 + r10[idx], u)[0]
            wb, pb, b00, b10 = unpack(ub)
            samples.append((wb, abs(math.remainder(pb, math.pi)), b00, b10, b10 * math.cos(pb) ** 2))
        sd = np.std(np.array(samples), axis=0, ddof=1)
        report.uncertainties = dict(zip(params, map(float, sd)))
    return report


def area_scan_model(phi_rotation: float, scan: CouplingScan) -> dict:
    """Peak area of a mode seen through a receiver rotated by phi, along the scan.

    The rotated first-order port projects the scattered field onto
    cos(phi) u10 + sin(phi) u01, so the area follows
    (cos(phi) beta10 + sin(phi) beta01)^2, normalized to its maximum.
    """
    c, s = math.cos(phi_rotation), math.sin(phi_rotation)
    area = (c * scan.beta10 + s * scan.beta01) ** 2
    peak = float(np.max(area)) if area.size else 0.0
    rel = area / peak if peak > 0 else np.zeros_like(area)
    return {"y0_m": np.asarray(scan.y0), "area": area, "area_relative": rel}
