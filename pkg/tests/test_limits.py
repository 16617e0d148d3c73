import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spadeom.limits import (CONSTANTS, BeamParams, PhononBudget, backaction_force, backaction_torque, cooling_limit,
                            imprecision_angle, imprecision_displacement, limits_report, phonon_budget,
                            thermal_occupation, zero_point_from_imprecision, zero_point_psd, zero_point_psd_resonant)
from spadeom.mechanics import MechanicalMode

K1550 = 2 * math.pi / 1550e-9


def test_imprecision_displacement_value():
    # 1 / (8 * 2e16 * k^2) evaluates to 3.80e-31 m^2/Hz
    val = imprecision_displacement(2e16, K1550, 1.0)
    assert val == pytest.approx(1 / (8 * 2e16 * K1550**2), rel=1e-15)
    assert val == pytest.approx(3.80e-31, rel=2e-3)
    assert imprecision_displacement(4e16, K1550, 1.0) == pytest.approx(val / 2, rel=1e-15)


def test_zero_beta_perp_is_an_error():
    with pytest.raises(ValueError, match="no displacement signal"):
        imprecision_displacement(2e16, K1550, 0.0)


def test_backaction_zero_coupling():
    assert backaction_force(2e16, K1550, 0.0) == 0.0


@settings(max_examples=200, deadline=None)
@given(n=st.floats(1e10, 1e22), k=st.floats(1e5, 1e8), b=st.floats(1e-4, 1.0))
def test_heisenberg_product(n, k, b):
    prod = imprecision_displacement(n, k, b) * backaction_force(n, k, b**2)
    assert prod == pytest.approx(CONSTANTS.hbar**2, rel=1e-12)


def test_torsion_conversion_reproduces_angle_limit(beam):
    w_r = 100 * beam.waist
    s_z = imprecision_displacement(beam.photon_flux, beam.wavenumber, beam.waist / w_r)
    assert (2 / w_r) ** 2 * s_z == pytest.approx(imprecision_angle(beam), rel=1e-12)


def test_torque_backaction_consistent_with_force(beam):
    w_r = 100 * beam.waist
    s_f = backaction_force(beam.photon_flux, beam.wavenumber, (beam.waist / w_r) ** 2)
    assert backaction_torque(beam) == pytest.approx((w_r / 2) ** 2 * s_f, rel=1e-12)
    assert backaction_torque(beam) * imprecision_angle(beam) == pytest.approx(CONSTANTS.hbar**2, rel=1e-12)


def test_beam_quantities(beam):
    assert beam.diffraction_angle == pytest.approx(3.29e-3, rel=2e-3)
    assert beam.photon_flux == pytest.approx(1.95e16, rel=2e-3)
    assert imprecision_angle(beam) == pytest.approx(6.93e-23, rel=2e-3)
    assert imprecision_angle(BeamParams(power=5e-3)) == pytest.approx(imprecision_angle(beam) / 2, rel=1e-12)
    assert imprecision_angle(BeamParams(waist=75e-6)) == pytest.approx(4 * imprecision_angle(beam), rel=1e-12)
    with pytest.raises(ValueError):
        BeamParams(waist=0.0)


@settings(max_examples=50, deadline=None)
@given(c=st.floats(0.2, 5.0))
def test_angle_limit_scale_invariance(c):
    base = BeamParams()
    scaled = BeamParams(base.wavelength * c, base.waist * c, base.power / c)
    assert imprecision_angle(scaled) == pytest.approx(imprecision_angle(base), rel=1e-12)


def test_zero_point_conventions(mode):
    assert zero_point_psd(mode) == pytest.approx(1.1e-20, rel=0.05)
    assert zero_point_psd_resonant(mode) == pytest.approx(9e-20, rel=0.01)
    assert zero_point_psd_resonant(mode) == pytest.approx(8 * zero_point_psd(mode), rel=1e-12)
    heavy = MechanicalMode(inertia=2 * mode.inertia)
    assert zero_point_psd(heavy) == pytest.approx(zero_point_psd(mode) / 2, rel=1e-12)
    assert zero_point_from_imprecision(5e-22, 0.003) == pytest.approx(8.33e-20, rel=1e-3)


def test_phonon_budget_paper_numbers(mode):
    b = phonon_budget(5e-22, 9e-20, 0.14, mode)
    assert b.n_imp == pytest.approx(0.0028, rel=0.01)
    assert b.n_ba == pytest.approx(160, rel=0.01)
    assert b.n_th == pytest.approx(1.2e8, rel=0.03)
    assert 16 * b.n_imp * b.n_ba * b.eta == pytest.approx(1.0, rel=1e-14)


def test_phonon_budget_identity_case(mode):
    b = phonon_budget(2 * (1 / 16) * 1e-20, 1e-20, 1.0, mode)
    assert b.n_imp == pytest.approx(1 / 16)
    assert b.n_ba == pytest.approx(1.0)


def test_phonon_budget_rejects_bad_eta(mode):
    with pytest.raises(ValueError):
        phonon_budget(5e-22, 9e-20, 0.0, mode)


def test_cooling_limits():
    b = PhononBudget(0.003, 150, 1.2e8, 0, 9e-20, 0.14)
    c = cooling_limit(b)
    assert c.n_final == pytest.approx(1200, rel=0.05)
    assert c.lower_bound == pytest.approx(0.84, abs=0.005)
    assert cooling_limit(b, eta=1.0).lower_bound == 0.0


@settings(max_examples=100, deadline=None)
@given(s_imp=st.floats(1e-25, 1e-18), eta=st.floats(1e-3, 1.0), temp=st.floats(1e-3, 400))
def test_cooling_above_bound(s_imp, eta, temp):
    mode = MechanicalMode(temperature=temp)
    c = cooling_limit(phonon_budget(s_imp, 9e-20, eta, mode))
    assert c.n_final >= c.lower_bound - 1e-9


def test_report_keys(beam, mode):
    rep = limits_report(beam, mode, 5e-22, 0.14, 9e-20)
    assert rep["n_m"] == pytest.approx(1140, rel=0.01)
    assert rep["s_th_peak_rad2_per_hz"] == pytest.approx(1.054e-11, rel=1e-3)
    assert rep["s_zp_used_rad2_per_hz"] == 9e-20
    assert thermal_occupation(mode) == pytest.approx(rep["n_th"])
