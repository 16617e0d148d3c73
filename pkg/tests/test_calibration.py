import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spadeom import calibration as cal
from spadeom.calibration import (area_scan_model, calibrate_spectrum, fit_coupling_model, fit_knife_edge,
                                 fit_ringdown, fit_shot_scaling, simplex_minimize)
from spadeom.errors import FitError, NegativeImprecisionError
from spadeom.limits import BeamParams, imprecision_angle
from spadeom.mechanics import MechanicalMode, RibbonGeometry, flexural_shape, torsion_shape
from spadeom.misalignment import MisalignConfig, coupling_efficiency
from spadeom.overlap import CouplingScan, coupling_scan
from spadeom.hg import OpticalMode
from spadeom.spectra import (NoiseModel, RingdownRecord, SpectrumRecord, detector_record, knife_edge_profile,
                             peak_grid, shot_scaling_series, synth_periodogram, synth_ringdown)

G, S_IMP, DET = 1e6, 5e-22, 1e-16


def synth_pair(mode, seed, g=G, s_imp=S_IMP, det=DET, n_avg=200, span=2000.0, bins=2001):
    f = peak_grid(mode, span, bins)
    raw = synth_periodogram(NoiseModel((mode,), s_imp, det, g), f, n_avg, seed)
    return raw, detector_record(det, f, n_avg, seed + 1_000_003)


def test_round_trip_fixed_seed(mode, beam):
    raw, det = synth_pair(mode, 42)
    r = calibrate_spectrum(raw, det, mode, beam, n_boot=50, seed=1)
    assert r.gain == pytest.approx(G, rel=0.02)
    assert r.imprecision == pytest.approx(S_IMP, rel=0.02)
    assert r.eta == pytest.approx(0.136, rel=0.05)
    assert r.eta == pytest.approx(imprecision_angle(beam) / r.imprecision, rel=1e-12)
    assert r.linewidth == pytest.approx(mode.linewidth_hz)
    assert 0 < r.uncertainties["s_imp_rad2_per_hz"] < 0.05 * S_IMP
    assert abs(r.gain - G) < 4 * r.uncertainties["gain_v2_per_rad2"]
    assert "linewidth-pinned" in r.report.flags


def test_deterministic(mode, beam):
    raw, det = synth_pair(mode, 5)
    a = calibrate_spectrum(raw, det, mode, beam, n_boot=5, seed=3)
    b = calibrate_spectrum(raw, det, mode, beam, n_boot=5, seed=3)
    assert a.report_lines() == b.report_lines()


def test_voltage_scale_invariance(mode, beam):
    raw, det = synth_pair(mode, 11)
    a = calibrate_spectrum(raw, det, mode, beam, n_boot=0)
    b = calibrate_spectrum(raw.scaled(4.0), det.scaled(4.0), mode, beam, n_boot=0)
    assert b.gain == pytest.approx(4 * a.gain, rel=1e-6)
    assert b.imprecision == pytest.approx(a.imprecision, rel=1e-6)
    assert b.eta == pytest.approx(a.eta, rel=1e-6)
    assert b.center_frequency == pytest.approx(a.center_frequency, abs=1e-6)


def test_zero_detector_floor(mode, beam):
    raw, det = synth_pair(mode, 2, det=0.0)
    r = calibrate_spectrum(raw, det, mode, beam, n_boot=0)
    assert r.imprecision == r.report.params["floor_v2_per_hz"] / r.gain


def test_floor_below_detector_is_an_error(mode, beam):
    raw, _ = synth_pair(mode, 3)
    loud = SpectrumRecord(raw.freq, np.full(raw.freq.size, 2e-15))
    with pytest.raises(NegativeImprecisionError) as info:
        calibrate_spectrum(raw, loud, mode, beam, n_boot=0)
    assert info.value.report is not None


def test_non_convergence_carries_report(mode, beam, monkeypatch):
    raw, det = synth_pair(mode, 3)
    real = cal.simplex_minimize
    monkeypatch.setattr(cal, "simplex_minimize", lambda obj, x0: real(obj, x0, max_evals=8))
    with pytest.raises(FitError) as info:
        calibrate_spectrum(raw, det, mode, beam, n_boot=0)
    assert not info.value.report.converged
    assert "amplitude_v2_per_hz" in info.value.report.params


def test_grid_mismatch(mode, beam):
    raw, det = synth_pair(mode, 3)
    other = SpectrumRecord(det.freq + 0.5, det.psd)
    with pytest.raises(ValueError, match="frequency grid"):
        calibrate_spectrum(raw, other, mode, beam)


def test_free_linewidth_on_resolved_peak(beam):
    mode = MechanicalMode(frequency=52.5e3, q=1e4)
    raw, det = synth_pair(mode, 9, g=1e6, s_imp=1e-18, det=1e-13, span=400.0, bins=4001)
    # a resolved peak needs the shoulders in the window to separate amplitude from width
    r = calibrate_spectrum(raw, det, mode, beam, inner=0.5, fit_linewidth=True, n_boot=0)
    assert r.linewidth == pytest.approx(mode.linewidth_hz, rel=0.05)
    assert r.gain == pytest.approx(1e6, rel=0.05)
    assert "linewidth-pinned" not in r.report.flags


def test_csv_and_report(tmp_path, mode, beam):
    raw, det = synth_pair(mode, 4)
    r = calibrate_spectrum(raw, det, mode, beam, n_boot=0)
    r.write_calibrated_csv(raw, tmp_path / "cal.csv")
    assert (tmp_path / "cal.csv").read_text().splitlines()[0] == "freq_hz,psd_rad2_per_hz"
    keys = {line.split(" = ")[0] for line in r.report_lines()}
    assert {"gain_v2_per_rad2", "s_imp_rad2_per_hz", "eta", "linewidth_hz"} <= keys


@settings(max_examples=100, deadline=None, derandomize=True)
@given(log_g=st.floats(4, 8), s_imp=st.floats(1e-22, 2e-21), f_m=st.floats(30e3, 80e3),
       log_q=st.floats(6, 8), det_frac=st.floats(0, 0.5), n_avg=st.integers(100, 400), seed=st.integers(0, 2**31))
def test_round_trip_over_valid_ranges(log_g, s_imp, f_m, log_q, det_frac, n_avg, seed):
    beam = BeamParams()
    mode = MechanicalMode(frequency=f_m, q=10**log_q)
    g = 10**log_g
    raw, det = synth_pair(mode, seed, g=g, s_imp=s_imp, det=det_frac * g * s_imp, n_avg=n_avg)
    r = calibrate_spectrum(raw, det, mode, beam, n_boot=0)
    assert r.gain == pytest.approx(g, rel=0.05)
    assert r.imprecision == pytest.approx(s_imp, rel=0.05)


def test_simplex_reports_non_convergence():
    x, f, n, ok = simplex_minimize(lambda u: float(np.sum((u - 3) ** 2)), np.zeros(3), max_evals=10)
    assert not ok and n <= 10
    x, f, n, ok = simplex_minimize(lambda u: float(np.sum((u - 3) ** 2)), np.zeros(3))
    assert ok and np.allclose(x, 3, atol=1e-8)


# ---- shot scaling

def test_shot_noiseless_exact():
    p = np.linspace(1e-4, 2.5e-3, 8)
    s = shot_scaling_series(p, 4e-13, 1e-16)
    r = fit_shot_scaling(s["power_w"], s["s_v_v2_per_hz"])
    assert r.params["slope"] == pytest.approx(4e-13, rel=1e-10)
    assert r.params["intercept"] == pytest.approx(1e-16, rel=1e-10)
    assert r.residual_norm < 1e-12
    assert r.extra["shot_consistent"]


def test_shot_with_scatter():
    p = np.geomspace(2.5e-4, 2.5e-3, 10)
    s = shot_scaling_series(p, 4e-13, 1e-16, scatter=0.02, seed=8)
    r = fit_shot_scaling(s["power_w"], s["s_v_v2_per_hz"])
    assert r.params["slope"] == pytest.approx(4e-13, rel=0.03)
    assert r.extra["shot_consistent"]


def test_shot_rejects_quadratic_and_short_series():
    p = np.linspace(1e-4, 1e-3, 8)
    r = fit_shot_scaling(p, 3.0 * p**2 + 1e-10)
    assert not r.extra["shot_consistent"]
    assert "not-shot-consistent" in r.flags
    with pytest.raises(ValueError):
        fit_shot_scaling([1e-3, 2e-3], [1.0, 2.0])
    with pytest.raises(ValueError):
        fit_shot_scaling([1e-3, 1e-3, 2e-3], [1.0, 1.0, 2.0])


# ---- knife edge

X = np.linspace(-600e-6, 600e-6, 61)


def test_knife_recovers_waist_with_noise():
    k = knife_edge_profile(X, 150e-6, 20e-6, 1e-3, 1e-5, noise=0.01, seed=3)
    r = fit_knife_edge(k["position_m"], k["power_w"], n_boot=20)
    assert r.params["w0_m"] == pytest.approx(150e-6, rel=0.02)
    assert r.params["x0_m"] == pytest.approx(20e-6, abs=5e-6)
    assert r.uncertainties["w0_m"] > 0


def test_knife_direction_flip_and_translation():
    up = knife_edge_profile(X, 150e-6, 20e-6, 1e-3, 1e-5)
    down = knife_edge_profile(X, 150e-6, 20e-6, 1e-3, 1e-5, direction=-1)
    a = fit_knife_edge(up["position_m"], up["power_w"], n_boot=0)
    b = fit_knife_edge(down["position_m"], down["power_w"], n_boot=0)
    assert (a.extra["direction"], b.extra["direction"]) == (1, -1)
    assert b.params["w0_m"] == pytest.approx(a.params["w0_m"], rel=1e-6)
    c = fit_knife_edge(up["position_m"] + 2.5e-3, up["power_w"], n_boot=0)
    assert c.params["w0_m"] == pytest.approx(a.params["w0_m"], rel=1e-6)
    assert c.params["x0_m"] - a.params["x0_m"] == pytest.approx(2.5e-3, rel=1e-6)


def test_knife_step_flagged():
    r = fit_knife_edge(X, np.where(X > 1e-6, 1e-3, 0.0), n_boot=0)
    assert "below-resolution" in r.flags
    assert r.params["w0_m"] < np.min(np.diff(X))


def test_knife_errors():
    with pytest.raises(FitError, match="monotone"):
        fit_knife_edge(X, np.sin(X / 50e-6))
    with pytest.raises(ValueError):
        fit_knife_edge(X[:5], X[:5])


# ---- ringdown

def test_ringdown_noiseless_q(mode):
    rec = synth_ringdown(mode, 2000.0, 2.0)
    r = fit_ringdown(rec, mode.frequency, n_boot=0)
    assert r.params["q"] == pytest.approx(65e6, rel=1e-3)


def test_ringdown_translation_invariant(mode):
    rec = synth_ringdown(mode, 1000.0, 5.0, 1.0, 0.01, seed=2)
    a = fit_ringdown(rec, mode.frequency, n_boot=0)
    b = fit_ringdown(RingdownRecord(rec.t + 1234.5, rec.amplitude, rec.noise_floor), mode.frequency, n_boot=0)
    assert b.params["q"] == pytest.approx(a.params["q"], rel=1e-6)


def test_ringdown_weighted(mode):
    rec = synth_ringdown(mode, 1500.0, 5.0, 1.0, 0.01, seed=4)
    r = fit_ringdown(rec, mode.frequency, sigma=0.01, n_boot=0)
    assert r.params["q"] == pytest.approx(65e6, rel=0.02)


def test_ringdown_short_record_flagged(mode):
    rec = synth_ringdown(mode, 39.0, 1.0, 1.0, 0.05, seed=1)
    r = fit_ringdown(rec, mode.frequency, n_boot=50)
    assert {"short-record", "poorly-constrained"} <= r.flags
    assert r.uncertainties["q"] > 0.1 * r.params["q"]


def test_ringdown_constant_record_is_an_error(mode):
    with pytest.raises(FitError, match="no decay"):
        fit_ringdown(RingdownRecord(np.arange(50.0), np.ones(50)), mode.frequency)


# ---- channel coupling model

XC = np.linspace(-900e-6, 900e-6, 37)
PAPER = MisalignConfig(w=300e-6, phi_x=math.pi / 4, eta00=0.5, eta10=0.67)


def noisy_coupling(seed, noise=0.03):
    e00, e10 = coupling_efficiency(PAPER, XC)
    rng = np.random.default_rng(seed)
    return e00 * (1 + noise * rng.standard_normal(XC.size)), e10 * (1 + noise * rng.standard_normal(XC.size))


def test_coupling_noiseless_residual():
    r = fit_coupling_model(XC, *coupling_efficiency(PAPER, XC), n_boot=0)
    assert r.residual_norm < 1e-10
    assert "phi_x-eta10-degenerate" in r.flags


def test_coupling_identifiable_combinations_with_noise():
    r = fit_coupling_model(XC, *noisy_coupling(5), n_boot=30)
    assert r.params["w_m"] == pytest.approx(300e-6, rel=0.1)
    assert r.params["eta00"] == pytest.approx(0.5, rel=0.1)
    assert r.params["eta10_cos2"] == pytest.approx(0.67 * 0.5, rel=0.1)
    assert r.uncertainties["w_m"] > 0


def test_coupling_with_known_direction():
    r = fit_coupling_model(XC, *noisy_coupling(6), phi_x=math.pi / 4, n_boot=0)
    assert r.params["eta10"] == pytest.approx(0.67, rel=0.1)
    assert r.params["phi_x_rad"] == pytest.approx(math.pi / 4)
    assert "phi_x-eta10-degenerate" not in r.flags


def test_coupling_null_hg10_flagged():
    e00, _ = coupling_efficiency(PAPER, XC)
    r = fit_coupling_model(XC, e00, np.zeros_like(XC), n_boot=0)
    assert "eta10-null" in r.flags
    assert abs(r.params["eta10_cos2"]) < 1e-8


def test_coupling_preconditions(caplog):
    with pytest.raises(ValueError):
        fit_coupling_model(XC[:4], XC[:4], XC[:4])
    near = np.linspace(-100e-6, 100e-6, 9)
    r = fit_coupling_model(near, *coupling_efficiency(PAPER, near), n_boot=0)
    assert "peak-not-covered" in r.flags


# ---- peak-area model

def test_area_model_pure_ports():
    geom = RibbonGeometry(380e-6, 7e-3)
    y0 = np.linspace(-geom.length / 2, geom.length / 2, 15)
    u = OpticalMode(0, 0, 38e-6)
    torsion = coupling_scan(u, torsion_shape(geom), y0)
    flex = coupling_scan(u, flexural_shape(geom), y0)
    a0 = area_scan_model(0.0, torsion)
    assert np.allclose(a0["area"], torsion.beta10**2)
    assert a0["area_relative"].max() == 1.0
    assert np.argmax(a0["area_relative"]) == 7
    assert a0["area_relative"][0] < 1e-3 and a0["area_relative"][-1] < 1e-3
    a90 = area_scan_model(math.pi / 2, flex)
    assert np.allclose(a90["area"], flex.beta01**2, atol=1e-30)
    assert area_scan_model(0.0, flex)["area"].max() < 1e-12
    blank = CouplingScan(y0, np.zeros(15), np.zeros(15), np.zeros(15), np.zeros(15), np.zeros(15, bool))
    assert np.all(area_scan_model(0.3, blank)["area_relative"] == 0)
