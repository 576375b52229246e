import math
import warnings

import numpy as np
import pytest

from polaronqd.errors import RangeError, UnsupportedParams, ValidityWarning
from polaronqd.spectra import (EMISSION_GAMMA, Spectrum, SystemParams, absorption,
                               bath_transform, check_validity, default_grid, emission,
                               polaron_spectrum)
from polaronqd.spectral_density import PhononModel

NULL = PhononModel.ohmic_exp(0.0)


def lorentz_pair(grid, g, gamma):
    half = gamma / 2
    return sum(half / ((grid - c) ** 2 + half * half) for c in (g, -g))


@pytest.mark.parametrize("g, gamma", [(0.05, 0.01), (0.2, 0.001), (0.01, 0.05)])
def test_jaynes_cummings_limit(g, gamma):
    grid = np.linspace(-4 * g, 4 * g, 1601)
    s = absorption(NULL, SystemParams(g=g, gamma_c=gamma), grid)
    ref = lorentz_pair(grid, g, gamma)
    # raw values are in the 2 pi sum-rule normalization
    assert np.max(np.abs(s.raw_values - ref) / ref) < 1e-6


def test_sum_rule_independent_of_g(bulk_transform):
    grid = np.union1d(np.linspace(-5, 60, 65001), np.linspace(-0.2, 0.2, 40001))
    areas = []
    for g in (0.0, 0.02, 0.05):
        s = absorption(PhononModel.superohmic_bulk(2.0), SystemParams(g=g, gamma_c=1e-3, T=0.1), grid,
                       transforms=bulk_transform)
        areas.append(s.integral())
    assert areas[0] == pytest.approx(2 * math.pi, rel=1e-3)
    assert max(areas) - min(areas) < 1e-6


def test_polaron_zpl_weight(bulk, bulk_transform):
    grid = np.union1d(np.linspace(-5, 60, 65001), np.linspace(-0.2, 0.2, 40001))
    s = polaron_spectrum(bulk, 0.1, grid, 1e-3, transforms=bulk_transform)
    zpl = np.abs(grid) < 0.03
    frac = np.trapezoid(s.raw_values[zpl], grid[zpl]) / s.integral()
    assert frac == pytest.approx(s.metadata["zpl_weight"], rel=0.02)
    assert s.metadata["zpl_weight"] == pytest.approx(bulk_transform.source.mean_b ** 2)


def test_small_g_approaches_polaron_spectrum(bulk, bulk_transform):
    grid = np.linspace(-3, 6, 3001)
    a = absorption(bulk, SystemParams(g=1e-6, gamma_c=1e-3, T=0.1), grid, transforms=bulk_transform)
    p = polaron_spectrum(bulk, 0.1, grid, 1e-3, transforms=bulk_transform)
    assert np.max(np.abs(a.values - p.values)) < 1e-4


def test_weak_bath_approaches_jaynes_cummings():
    grid = np.linspace(-0.2, 0.2, 801)
    p = SystemParams(g=0.05, gamma_c=0.01)
    weak = absorption(PhononModel.superohmic_bulk(1e-7), p, grid)
    bare = absorption(NULL, p, grid)
    assert np.max(np.abs(weak.values - bare.values)) < 1e-5


@pytest.mark.parametrize("model, params", [
    (PhononModel.superohmic_bulk(2.0), SystemParams(g=0.05, T=0.1)),
    (PhononModel.ohmic_exp(0.5), SystemParams(g=0.05, gamma_c=1e-3)),
    (PhononModel.confined(1, 3.0, 0.06), SystemParams(g=3e-3, gamma_c=1e-4, T=0.05)),
    (PhononModel.delta_mode(1.0), SystemParams(g=0.01, gamma_c=1e-3, T=0.2)),
])
def test_non_negative(model, params):
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        s = absorption(model, params)
    assert s.values.min() >= 0 and s.values.max() == 1.0


def test_default_grid_has_inset(bulk):
    grid = default_grid(bulk, SystemParams(g=0.05, T=0.1))
    assert np.all(np.diff(grid) > 0)
    inner = grid[np.abs(grid) < 0.05]
    assert np.diff(inner).max() < 1e-4


def test_fig1_doublet_asymmetry(bulk):
    params = SystemParams(g=0.05, T=0.1)
    grid = np.linspace(-0.05, 0.05, 20001)
    y = absorption(bulk, params, grid).values
    lower = y[grid < 0].max()
    upper = y[grid > 0].max()
    # the narrower lower-frequency peak is also taller
    assert lower > upper


def test_emission_gamma_regularization_insensitive(bulk):
    params = SystemParams(g=0.05, T=0.1)
    grid = np.linspace(-0.1, 0.1, 2001)
    a = emission(bulk, params, grid)
    b = emission(bulk, params, grid, transforms=bath_transform(bulk, 0.1, 10 * EMISSION_GAMMA),
                 gamma_eff=10 * EMISSION_GAMMA)
    assert np.max(np.abs(a.values - b.values)) < 1e-3


def test_emission_thermal_weights(bulk):
    # the lower polariton dominates emission at low temperature
    grid = np.linspace(-0.1, 0.1, 4001)
    y = emission(bulk, SystemParams(g=0.05, T=0.01), grid).values
    assert y[grid < 0].max() > 10 * y[grid > 0].max()


def test_null_bath_emission_lines():
    grid = np.linspace(-0.1, 0.1, 2001)
    s = emission(NULL, SystemParams(g=0.05, T=0.05), grid)
    lo = s.raw_values[np.argmin(np.abs(grid + 0.05))]
    hi = s.raw_values[np.argmin(np.abs(grid - 0.05))]
    assert hi / lo == pytest.approx(math.exp(-2 * 0.05 / 0.05), rel=1e-4)


def test_emission_requires_gamma_zero(bulk):
    with pytest.raises(UnsupportedParams):
        emission(bulk, SystemParams(g=0.05, gamma_c=1e-3, T=0.1))


@pytest.mark.parametrize("params", [
    SystemParams(g=0.05, gamma_c=1e-3, detuning=0.01),
    SystemParams(g=0.05, gamma_c=1e-3, gamma_qd=2e-3),
])
def test_unsupported_params(bulk, params):
    with pytest.raises(UnsupportedParams):
        absorption(bulk, params, np.linspace(-0.1, 0.1, 11))


def test_polaron_needs_width(bulk):
    with pytest.raises(UnsupportedParams):
        polaron_spectrum(bulk, 0.1, gamma=0.0)


def test_invalid_params():
    with pytest.raises(ValueError):
        SystemParams(g=-1.0)
    with pytest.raises(ValueError):
        SystemParams(T=-0.1)


def test_validity_warning():
    m = PhononModel.confined(1, 3.0, 0.06)
    with pytest.warns(ValidityWarning):
        assert not check_validity(m, SystemParams(g=0.02))
    assert check_validity(m, SystemParams(g=3e-3))


def test_grid_beyond_resolution(bulk, bulk_transform):
    with pytest.raises(RangeError):
        absorption(bulk, SystemParams(g=0.05, gamma_c=1e-3, T=0.1), np.array([0.0, 1e4]),
                   transforms=bulk_transform)


def test_transform_gamma_mismatch(bulk, bulk_transform):
    with pytest.raises(ValueError):
        absorption(bulk, SystemParams(g=0.05, gamma_c=0.02, T=0.1), np.linspace(-1, 1, 5),
                   transforms=bulk_transform)


def test_determinism(bulk):
    grid = np.linspace(-0.2, 0.2, 401)
    p = SystemParams(g=0.05, gamma_c=1e-3, T=0.1)
    assert absorption(bulk, p, grid).to_csv() == absorption(bulk, p, grid).to_csv()


def test_csv_round_trip(tmp_path, bulk, bulk_transform):
    grid = np.linspace(-0.2, 0.2, 101)
    s = absorption(bulk, SystemParams(g=0.05, gamma_c=1e-3, T=0.1), grid, transforms=bulk_transform)
    path = tmp_path / "a.csv"
    s.to_csv(path)
    back = Spectrum.from_csv(path)
    assert np.array_equal(back.grid, s.grid) and np.array_equal(back.values, s.values)
    assert back.kind == s.kind and back.scale == s.scale
    assert back.params_fingerprint == s.params_fingerprint
    assert s.sidecar()["kind"] == "absorption"


def test_fingerprint_tracks_params(bulk):
    grid = np.linspace(-0.1, 0.1, 11)
    a = absorption(NULL, SystemParams(g=0.05, gamma_c=0.01), grid)
    b = absorption(NULL, SystemParams(g=0.06, gamma_c=0.01), grid)
    assert a.params_fingerprint != b.params_fingerprint


def test_peaks_window():
    grid = np.linspace(-0.2, 0.2, 801)
    s = absorption(NULL, SystemParams(g=0.05, gamma_c=0.01), grid)
    assert np.allclose(np.sort(grid[s.peaks()]), [-0.05, 0.05])
    assert len(s.peaks(window=0.01)) == 0
