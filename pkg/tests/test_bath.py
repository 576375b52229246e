import math

import numpy as np
import pytest
from scipy import integrate

from polaronqd.bath import (DECAY_THRESHOLD, default_t_max, default_time_step, propagator_Q)
from polaronqd.errors import GridError, RangeError
from polaronqd.oracle import DiscreteBath, operator_green
from polaronqd.spectral_density import PhononModel, coth_half


def _q_reference(model, T, t):
    """Q(t) = int J/w^2 [coth (1 - cos wt) + i sin wt] by adaptive quadrature."""
    f_re = lambda w: model.h(w) * coth_half(w, T) * (1 - math.cos(w * t))
    f_im = lambda w: model.h(w) * math.sin(w * t)
    pts = [0.0, 0.5, 1.0, 2.0, 5.0, 20.0, 200.0]
    re = sum(integrate.quad(f_re, a, b, limit=500, epsabs=1e-12)[0] for a, b in zip(pts, pts[1:]))
    im = sum(integrate.quad(f_im, a, b, limit=500, epsabs=1e-12)[0] for a, b in zip(pts, pts[1:]))
    # beyond the last point: coth = 1 and Fourier-weighted quadrature to infinity
    L, h = pts[-1], lambda w: model.h(w)
    if t > 0:
        re += integrate.quad(h, L, np.inf)[0]
        re -= integrate.quad(h, L, np.inf, weight="cos", wvar=t)[0]
        im += integrate.quad(h, L, np.inf, weight="sin", wvar=t)[0]
    return re + 1j * im


@pytest.mark.parametrize("T", [0.0, 0.1])
def test_q_matches_quadrature(bulk, T):
    t = np.array([0.0, 0.4, 2.0, 9.0])
    corr = propagator_Q(bulk, T, time_grid=np.linspace(0.0, 9.0, 3601))
    idx = [0, 160, 800, 3600]
    for i, ti in zip(idx, t):
        assert corr.q_values[i] == pytest.approx(_q_reference(bulk, T, ti), abs=1e-6)


def test_green_at_zero(bulk):
    corr = propagator_Q(bulk, 0.1)
    S, b = corr.scalars.huang_rhys, corr.mean_b
    assert abs(corr.q_values[0]) < 1e-9
    assert corr.gg_values[0] == pytest.approx(b * b * (math.cosh(S) - 1))
    assert corr.gu_values[0] == pytest.approx(b * b * math.sinh(S))


def test_ohmic_green_functions_coincide():
    corr = propagator_Q(PhononModel.ohmic_exp(1.0), 0.05)
    assert corr.mean_b == 0.0
    assert np.max(np.abs(corr.gg_values - corr.gu_values)) < 1e-12
    assert corr.gg_values[0] == pytest.approx(0.5)


def test_three_mode_operator_oracle():
    bath = DiscreteBath((0.7, 1.0, 1.6), (0.3, 0.4, 0.35), fock_cutoff=12)
    T = 0.3
    t = np.linspace(0.0, 25.0, 401)
    corr = propagator_Q(bath, T, time_grid=t)
    gg, gu, b = operator_green(bath, T, t)
    assert b == pytest.approx(corr.mean_b, rel=1e-9)
    assert np.max(np.abs(gg - corr.gg_values)) < 1e-6
    assert np.max(np.abs(gu - corr.gu_values)) < 1e-6


def test_delta_mode_is_periodic():
    m = PhononModel.delta_mode(1.0)
    period = 2 * math.pi
    t = np.linspace(0.0, 2 * period, 801)
    corr = propagator_Q(m, 0.2, time_grid=t)
    assert np.allclose(corr.gu_values[:400], corr.gu_values[400:800], atol=1e-12)


def test_default_grid_is_trimmed():
    m = PhononModel.ohmic_exp(1.0)
    corr = propagator_Q(m, 0.5)
    assert corr.t_max < 0.1 * default_t_max(m)
    tail = np.abs(corr.gu_values[-20:]).max() / abs(corr.gu_values[0])
    assert tail < 10 * DECAY_THRESHOLD
    full = propagator_Q(m, 0.5, trim=False)
    assert full.t_max == pytest.approx(default_t_max(m), rel=1e-3)


def test_power_law_tail_is_not_trimmed(bulk):
    # G ~ t^-2 stays above the trim threshold up to the horizon
    assert propagator_Q(bulk, 0.1).t_max == pytest.approx(default_t_max(bulk), rel=1e-3)


def test_narrow_mode_horizon():
    assert default_t_max(PhononModel.confined(1, 3.0, 0.06)) > 1000
    assert default_t_max(PhononModel.superohmic_bulk(2.0)) == 1000


def test_step_resolves_mode():
    m = PhononModel.confined(1, 3.0, 0.06)
    assert default_time_step(m) * m.cutoff < 2 * math.pi / 16
    n3 = PhononModel.confined(3, 3.0, 0.06)
    assert default_time_step(n3) < default_time_step(m)


def test_interpolation(bulk):
    corr = propagator_Q(bulk, 0.1, time_grid=np.linspace(0.0, 10.0, 4001))
    fine = propagator_Q(bulk, 0.1, time_grid=np.linspace(0.0, 10.0, 8001))
    t = np.array([0.1234, 3.3, 7.77])
    assert np.allclose(corr.green_u(t), fine.green_u(t), atol=1e-8)
    with pytest.raises(RangeError):
        corr.green_g([11.0])


@pytest.mark.parametrize("grid", [[0.0, 1.0, 2.0], [0.1, 0.2, 0.3, 0.4], [0.0, 0.2, 0.1, 0.3, 0.4]])
def test_bad_grids(bulk, grid):
    with pytest.raises(GridError):
        propagator_Q(bulk, 0.1, time_grid=grid)


def test_negative_temperature(bulk):
    with pytest.raises(ValueError):
        propagator_Q(bulk, -1.0)


def test_csv(tmp_path, bulk):
    corr = propagator_Q(bulk, 0.1, time_grid=np.linspace(0, 1, 11))
    path = tmp_path / "q.csv"
    corr.to_csv(path)
    rows = path.read_text().splitlines()
    assert rows[0].startswith("t,re_Q") and len(rows) == 12
