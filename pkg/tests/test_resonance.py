import math

import numpy as np
import pytest

from polaronqd.errors import NoRootInInterval
from polaronqd.half_fourier import combined_pm
from polaronqd.resonance import (ROOT_TOL, VRS, ResonanceReport, classify_vrs, find_poles,
                                 pole_approximation)
from polaronqd.spectra import SystemParams, bath_transform
from polaronqd.spectral_density import PhononModel


@pytest.fixture(scope="module")
def fig1_report(bulk):
    params = SystemParams(g=0.05, T=0.1)
    ht = bath_transform(bulk, 0.1, 0.0)
    return pole_approximation(bulk, params, ht), ht


def test_uncoupled_bath():
    r = pole_approximation(PhononModel.ohmic_exp(0.0), SystemParams(g=0.05, gamma_c=0.01))
    assert r.omega_tilde_plus == pytest.approx(0.05, abs=1e-10)
    assert r.omega_tilde_minus == pytest.approx(-0.05, abs=1e-10)
    assert r.gamma_tilde_plus == pytest.approx(0.01) and r.gamma_tilde_minus == pytest.approx(0.01)
    assert r.compound_strength == pytest.approx(1.0, rel=1e-9)
    assert r.vrs is VRS.UNDERDAMPED


def test_fig1_poles(fig1_report):
    r, ht = fig1_report
    assert r.splitting == pytest.approx(r.splitting_estimate, rel=0.01)
    assert r.compound_strength == pytest.approx(r.compound_strength_estimate, rel=0.01)
    assert r.gamma_tilde_minus < r.gamma_tilde_plus
    assert r.vrs is VRS.UNDERDAMPED and r.guaranteed_unique and not r.multiple_roots


def test_roots_solve_pole_condition(fig1_report):
    r, ht = fig1_report
    g, gt = 0.05, 0.05 * ht.source.mean_b
    for eta, w in ((1.0, r.omega_tilde_plus), (-1.0, r.omega_tilde_minus)):
        gp, _ = combined_pm(ht, eta, [w], gt)
        residual = w - eta * gt - g * g * gp[0]
        assert abs(residual) < 10 * ROOT_TOL


def test_width_formula(fig1_report):
    r, ht = fig1_report
    gt = 0.05 * ht.source.mean_b
    _, gpp = combined_pm(ht, 1.0, [r.omega_tilde_plus], gt)
    assert r.gamma_tilde_plus == pytest.approx(2 * 0.05**2 * gpp[0], rel=1e-12)


def test_lower_branch_width_vanishes_at_zero_temperature(bulk, bulk_transform_t0):
    r = pole_approximation(bulk, SystemParams(g=0.05, T=0.0), bulk_transform_t0)
    assert abs(r.gamma_tilde_minus) < 1e-8
    assert r.gamma_tilde_plus > 1e-5


def test_ohmic_lineshape_classification():
    m = PhononModel.ohmic_exp(0.5)
    r = pole_approximation(m, SystemParams(g=0.05, gamma_c=1e-4))
    assert r.width_method == "lineshape" and r.dip_contrast < 0.5
    assert r.vrs is VRS.UNDERDAMPED
    assert r.compound_strength_estimate == 0.0


def test_strong_ohmic_overdamped():
    m = PhononModel.ohmic_exp(2.5)
    r = pole_approximation(m, SystemParams(g=0.05, gamma_c=1e-4))
    assert r.vrs is VRS.OVERDAMPED
    with pytest.raises(NoRootInInterval):
        find_poles(m, SystemParams(g=0.05, gamma_c=1e-4), strict=True)


def test_superohmic_persists_at_temperature():
    m = PhononModel.confined(3, 3.0, 0.06)
    r = pole_approximation(m, SystemParams(g=3e-3, gamma_c=1e-4, T=0.05))
    assert r.vrs is VRS.UNDERDAMPED


def test_pole_search_needs_coupling(bulk, bulk_transform):
    with pytest.raises(ValueError):
        find_poles(bulk, SystemParams(g=0.0, gamma_c=1e-3, T=0.1), bulk_transform)


def _report(width_p, width_m, split=1.0):
    return ResonanceReport(split / 2, -split / 2, width_p, width_m, 1.0, 1.0, 1.0, splitting=split)


@pytest.mark.parametrize("wp, wm, expected", [
    (0.1, 0.2, VRS.UNDERDAMPED),
    (0.1, 1.0, VRS.MARGINAL),
    (3.0, 0.1, VRS.OVERDAMPED),
])
def test_classification_thresholds(wp, wm, expected):
    assert classify_vrs(_report(wp, wm)) is expected


def test_missing_pole_is_overdamped():
    r = ResonanceReport(None, -0.1, None, 0.01, None, 1.0, None)
    assert classify_vrs(r) is VRS.OVERDAMPED


def test_report_serializes(fig1_report):
    d = fig1_report[0].as_dict()
    assert d["vrs"] == "Underdamped"
    assert d["thresholds"] == {"underdamped_below": 0.5, "overdamped_above": 2.0}
    assert math.isfinite(d["splitting"])
