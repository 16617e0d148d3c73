import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spadeom.hg import (ComplexField, GridSpec, OpticalMode, default_grid, eval_hg, hermite, inner_product,
                        integrate_with_estimate, sample_mode)

W0 = 150e-6


def test_hermite_low_orders():
    t = np.linspace(-2, 2, 9)
    assert np.allclose(hermite(0, t), 1)
    assert np.allclose(hermite(2, t), 4 * t**2 - 2)
    assert np.allclose(hermite(3, t), 8 * t**3 - 12 * t)


def test_hg00_peak_value():
    val = eval_hg(OpticalMode(0, 0, W0), 0.0, 0.0)
    assert val.real == pytest.approx(math.sqrt(2 / (math.pi * W0**2)), rel=1e-12)
    assert val.real == pytest.approx(5.319e3, rel=1e-3)


def test_hg10_odd_and_linear_relation():
    u10, u00 = OpticalMode(1, 0, W0), OpticalMode(0, 0, W0)
    assert eval_hg(u10, 0.0, 37e-6) == 0
    assert eval_hg(u10, W0 / 2, 0.0) == pytest.approx(eval_hg(u00, W0 / 2, 0.0), rel=1e-12)


def test_mode_validation():
    with pytest.raises(ValueError):
        OpticalMode(6, 5, W0)
    with pytest.raises(ValueError):
        OpticalMode(0, 0, 0.0)
    assert OpticalMode(rotation=3 * math.pi).rotation == pytest.approx(math.pi)
    assert OpticalMode(rotation=-math.pi).rotation == pytest.approx(math.pi)


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(1, 0, 0, 1)
    with pytest.raises(ValueError):
        GridSpec(0, 1, 0, 1, nx=1)


def test_normalization_and_orthonormality():
    grid = default_grid(OpticalMode(0, 0, W0))
    idx = [(m, n) for m in range(4) for n in range(4) if m + n <= 3]
    fields = {mn: sample_mode(OpticalMode(*mn, W0), grid) for mn in idx}
    for a, b in itertools.product(idx, repeat=2):
        ip = inner_product(fields[a], fields[b])
        if a == b:
            assert abs(ip - 1) < 1e-6
        else:
            assert abs(ip) < 1e-6


def test_orthogonal_pair_to_1e8():
    grid = default_grid(OpticalMode(0, 0, W0))
    ip = inner_product(sample_mode(OpticalMode(1, 0, W0), grid), sample_mode(OpticalMode(0, 0, W0), grid))
    assert abs(ip) < 1e-8


def test_truncation_flag():
    narrow = GridSpec.centered((0, 0), W0, 65)
    assert sample_mode(OpticalMode(0, 0, W0), narrow).truncated
    assert not sample_mode(OpticalMode(0, 0, W0), default_grid(OpticalMode(0, 0, W0))).truncated


def test_rotation_quarter_turn_maps_01_to_10():
    grid = default_grid(OpticalMode(0, 0, W0), n=65)
    rotated = sample_mode(OpticalMode(0, 1, W0, rotation=math.pi / 2), grid)
    u10 = sample_mode(OpticalMode(1, 0, W0), grid)
    assert np.allclose(np.abs(rotated.values), np.abs(u10.values), atol=1e-9 * np.abs(u10.values).max())


def test_rotated_hg10_is_superposition():
    phi = 0.4
    grid = default_grid(OpticalMode(0, 0, W0), n=65)
    X, Y = grid.mesh()
    rot = eval_hg(OpticalMode(1, 0, W0, rotation=phi), X, Y)
    mix = math.cos(phi) * eval_hg(OpticalMode(1, 0, W0), X, Y) + math.sin(phi) * eval_hg(OpticalMode(0, 1, W0), X, Y)
    assert np.allclose(rot, mix, atol=1e-9 * np.abs(mix).max())


def test_mismatched_grid_is_an_error():
    g1 = default_grid(OpticalMode(0, 0, W0), n=33)
    g2 = default_grid(OpticalMode(0, 0, W0), n=35)
    with pytest.raises(ValueError, match="different grids"):
        inner_product(sample_mode(OpticalMode(), g1), sample_mode(OpticalMode(), g2))


def test_complex_field_rejects_bad_input():
    g = GridSpec.centered((0, 0), 1.0, 3)
    with pytest.raises(ValueError):
        ComplexField(g, np.zeros(8))
    with pytest.raises(ValueError):
        ComplexField(g, np.full(9, np.nan))


def test_refinement_within_convergence_estimate():
    mode = OpticalMode(2, 1, W0, (10e-6, -20e-6))
    coarse = GridSpec.centered((0, 0), 4 * W0, 65)
    val, est = integrate_with_estimate(lambda X, Y: np.abs(eval_hg(mode, X, Y)) ** 2, coarse)
    ref, _ = integrate_with_estimate(lambda X, Y: np.abs(eval_hg(mode, X, Y)) ** 2, coarse.refined())
    assert abs(ref - val) < 10 * est


@settings(max_examples=25, deadline=None)
@given(phi=st.floats(-math.pi, math.pi), m=st.integers(0, 2), n=st.integers(0, 2))
def test_norm_invariant_under_rotation(phi, m, n):
    grid = default_grid(OpticalMode(0, 0, W0), window=5.0, n=129)
    base = sample_mode(OpticalMode(m, n, W0), grid).norm()
    rotated = sample_mode(OpticalMode(m, n, W0, rotation=phi), grid).norm()
    assert abs(base - rotated) < 1e-8
