import math

import numpy as np
import pytest

from polaronqd.bath import propagator_Q
from polaronqd.errors import DimensionOverflow, DomainError, NonConvergence
from polaronqd.oracle import DiscreteBath, exact_absorption, exact_lines, time_domain_spectrum
from polaronqd.oracle.master import PolaronMasterEquation
from polaronqd.spectra import SystemParams, absorption, absorption_terms, bath_transform, polaron_spectrum
from polaronqd.spectral_density import PhononModel

NULL = PhononModel.ohmic_exp(0.0)


# -- exact diagonalization ---------------------------------------------------

def test_uncoupled_cavity_gives_poisson_progression():
    S = 1.0
    freqs, weights = exact_lines(DiscreteBath.single_mode(1.0, S, 14), SystemParams(g=0.0, gamma_c=1e-3))
    for m in range(4):
        near = np.abs(freqs - m) < 0.01
        assert weights[near].sum() == pytest.approx(math.exp(-S) * S**m / math.factorial(m), rel=1e-4)


def test_weak_phonons_give_rabi_doublet():
    bath = DiscreteBath.single_mode(1.0, 1e-4, 4)
    freqs, weights = exact_lines(bath, SystemParams(g=0.05, gamma_c=1e-3))
    main = weights > 0.1
    assert np.allclose(np.sort(freqs[main]), [-0.05, 0.05], atol=1e-5)
    assert np.allclose(weights[main], 0.5, atol=1e-3)


def test_truncation_converges():
    params = SystemParams(g=0.01, gamma_c=1e-3)
    tops = []
    for cutoff in (10, 12, 14):
        f, w = exact_lines(DiscreteBath.single_mode(1.0, 1.0, cutoff), params)
        keep = np.abs(f) < 0.05
        tops.append(np.sort(f[keep]))
    assert np.max(np.abs(tops[1] - tops[0])) < 1e-4
    assert np.max(np.abs(tops[2] - tops[1])) < 1e-4


def test_thermal_lines_sum_to_one():
    bath = DiscreteBath((0.8, 1.3), (0.3, 0.4), fock_cutoff=10)
    _, weights = exact_lines(bath, SystemParams(g=0.02, gamma_c=1e-3, T=0.3))
    assert weights.sum() == pytest.approx(1.0, abs=1e-6)


def test_exact_absorption_needs_width():
    bath = DiscreteBath.single_mode()
    with pytest.raises(DomainError):
        exact_absorption(bath, SystemParams(g=0.01), [0.0])
    s = exact_absorption(bath, SystemParams(g=0.01, gamma_c=1e-3), np.linspace(-0.05, 0.05, 11))
    assert s.kind == "oracle_absorption" and s.values.max() == 1.0


def test_dimension_overflow():
    with pytest.raises(DimensionOverflow):
        exact_lines(DiscreteBath((1.0, 1.1, 1.2, 1.3), (0.1,) * 4, 12), SystemParams(g=0.01))


@pytest.mark.parametrize("kwargs", [
    dict(mode_freqs=(), couplings=()),
    dict(mode_freqs=(1.0,), couplings=(0.1, 0.2)),
    dict(mode_freqs=(-1.0,), couplings=(0.1,)),
    dict(mode_freqs=(1.0,), couplings=(0.1,), fock_cutoff=0),
])
def test_bad_discrete_bath(kwargs):
    with pytest.raises(DomainError):
        DiscreteBath(**kwargs)


# -- master equation ---------------------------------------------------------

def test_master_null_bath_is_jaynes_cummings():
    params = SystemParams(g=0.05, gamma_c=0.01)
    w = np.linspace(-0.1, 0.1, 9)
    td = time_domain_spectrum(NULL, params, w, t_final=6000)
    assert np.max(np.abs(td.raw_values / absorption(NULL, params, w).raw_values - 1)) < 1e-6


def test_master_uncoupled_cavity_is_polaron_spectrum():
    m = PhononModel.ohmic_exp(0.5)
    w = np.linspace(-0.3, 0.3, 7)
    td = time_domain_spectrum(m, SystemParams(g=0.0, gamma_c=0.05, T=0.2), w)
    ref = polaron_spectrum(m, 0.2, w, 0.05)
    assert np.max(np.abs(td.raw_values / ref.raw_values - 1)) < 1e-5


def test_master_matches_frequency_domain():
    m = PhononModel.ohmic_exp(0.5)
    params = SystemParams(g=0.02, gamma_c=0.05, T=0.2)
    w = np.linspace(-0.3, 0.3, 7)
    ref = absorption_terms(bath_transform(m, 0.2, 0.05), w, 0.02, 0.05).sum(axis=0)
    nonlocal_ = time_domain_spectrum(m, params, w)
    local = time_domain_spectrum(m, params, w, variant="local")
    assert np.max(np.abs(nonlocal_.raw_values / ref - 1)) < 1e-4
    # the time-local variant drops memory and is only close
    assert np.max(np.abs(local.raw_values / ref - 1)) < 0.05


def test_master_invariants():
    m = PhononModel.ohmic_exp(0.5)
    params = SystemParams(g=0.02, gamma_c=0.05, T=0.2)
    state = PolaronMasterEquation(propagator_Q(m, 0.2), params, 0.0).integrate(300)
    zeroth = state.block(0)
    assert np.allclose(np.trace(zeroth, axis1=1, axis2=2), 1.0, atol=1e-12)
    second = state.block(2)[-1]
    assert np.max(np.abs(second - second.conj().T)) < 1e-12


def test_master_short_run_does_not_converge():
    m = PhononModel.ohmic_exp(0.5)
    with pytest.raises(NonConvergence):
        time_domain_spectrum(m, SystemParams(g=0.02, gamma_c=0.05, T=0.2), [0.0], t_final=20)


def test_master_rejects_bad_setup():
    corr = propagator_Q(NULL, 0.0)
    with pytest.raises(ValueError):
        PolaronMasterEquation(corr, SystemParams(g=0.01, gamma_c=0.01), 0.0, variant="markov")
    with pytest.raises(DomainError):
        PolaronMasterEquation(corr, SystemParams(g=0.01, gamma_c=0.01, detuning=0.1), 0.0)
