"""Exact diagonalization of the dot-cavity-phonon Hamiltonian with a few modes.

H = (w_eg) s_ee + w_c a'a + g (s_+ a + a' s_-) + sum_k w_k b_k'b_k
    + s_ee sum_k lambda_k (b_k + b_k')

with w_c = 0 and w_eg = Delta (cavity resonant with the zero-phonon line).
The probe couples to the dot dipole, so a weak probe only reaches the
one-excitation manifold {|e,0>, |g,1>} x phonons.  Starting from the product
of the dot ground state and a thermal phonon state,

    A(w) = sum_n p_n sum_j |<j|e,0,n>|^2 (gamma/2) / ((w - E_j + E_n)^2 + gamma^2/4)
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy import linalg

from ..errors import DimensionOverflow, DomainError
from ..spectra import Spectrum, SystemParams, fingerprint

__all__ = ["DiscreteBath", "exact_absorption", "exact_lines", "operator_green", "MAX_DIM"]

#: largest dimension 3 * prod(cutoff + 1) accepted
MAX_DIM = 15000


@dataclass(frozen=True)
class DiscreteBath:
    """A handful of undamped phonon modes in a truncated Fock space."""

    mode_freqs: tuple
    couplings: tuple
    fock_cutoff: int = 12

    def __post_init__(self):
        freqs = tuple(float(w) for w in self.mode_freqs)
        lams = tuple(float(c) for c in self.couplings)
        if len(freqs) != len(lams) or not freqs:
            raise DomainError("mode_freqs and couplings must be non-empty and of equal length")
        if any(w <= 0 for w in freqs):
            raise DomainError("mode frequencies must be > 0")
        if self.fock_cutoff < 1:
            raise DomainError("fock_cutoff must be >= 1")
        object.__setattr__(self, "mode_freqs", freqs)
        object.__setattr__(self, "couplings", lams)

    @classmethod
    def single_mode(cls, omega=1.0, huang_rhys=1.0, fock_cutoff=12):
        return cls((omega,), (omega * math.sqrt(huang_rhys),), fock_cutoff)

    @property
    def delta(self) -> float:
        return sum(lam * lam / w for w, lam in zip(self.mode_freqs, self.couplings))

    def huang_rhys(self, T=0.0) -> float:
        total = 0.0
        for w, lam in zip(self.mode_freqs, self.couplings):
            coth = 1.0 if T == 0 else 1.0 / math.tanh(w / (2 * T))
            total += (lam / w) ** 2 * coth
        return total

    def with_cutoff(self, cutoff) -> "DiscreteBath":
        return DiscreteBath(self.mode_freqs, self.couplings, cutoff)

    @property
    def phonon_dim(self) -> int:
        return (self.fock_cutoff + 1) ** len(self.mode_freqs)

    def check_dimension(self):
        dim = 3 * self.phonon_dim
        if dim > MAX_DIM:
            raise DimensionOverflow(f"dimension {dim} exceeds {MAX_DIM}")
        return dim


def _ladder(n):
    return np.diag(np.sqrt(np.arange(1, n)), 1)


def _embed(op, k, dims):
    eyes = [np.eye(d) for d in dims]
    eyes[k] = op
    return reduce(np.kron, eyes)


def _thermal(w, T, n):
    if T == 0:
        p = np.zeros(n)
        p[0] = 1.0
        return p
    p = np.exp(-w * np.arange(n) / T)
    return p / p.sum()


def exact_lines(bath: DiscreteBath, params: SystemParams, weight_floor=1e-14):
    """(transition energies, weights) of the dot absorption at gamma -> 0."""
    bath.check_dimension()
    n = bath.fock_cutoff + 1
    dims = [n] * len(bath.mode_freqs)
    D = bath.phonon_dim
    num = np.diag(np.arange(n, dtype=float))
    a = _ladder(n)
    h_ph = np.zeros((D, D))
    x_sum = np.zeros((D, D))
    for k, (w, lam) in enumerate(zip(bath.mode_freqs, bath.couplings)):
        h_ph += w * _embed(num, k, dims)
        x_sum += lam * _embed(a + a.T, k, dims)
    eye = np.eye(D)
    # one-excitation manifold, basis order (|e,0>, |g,1>) x phonons
    h1 = np.block([
        [h_ph + bath.delta * eye + x_sum, params.g * eye],
        [params.g * eye, h_ph],
    ])
    energies, vecs = linalg.eigh(h1)
    # thermal phonon states are Fock product states with energies n.w
    e_ground = np.diag(h_ph)
    probs = reduce(np.kron, [_thermal(w, params.T, n) for w in bath.mode_freqs])
    keep = np.nonzero(probs > weight_floor)[0]
    overlap = np.abs(vecs[keep, :]) ** 2  # <e,0,n|j>
    freqs = (energies[None, :] - e_ground[keep, None]).ravel()
    weights = (probs[keep, None] * overlap).ravel()
    mask = weights > weight_floor
    return freqs[mask], weights[mask]


def exact_absorption(bath: DiscreteBath, params: SystemParams, grid) -> Spectrum:
    """Absorption of the truncated model, lines broadened by gamma (HWHM gamma/2)."""
    gamma = params.gamma
    if gamma <= 0:
        raise DomainError("exact absorption needs gamma > 0 to broaden its lines")
    grid = np.asarray(grid, dtype=float)
    freqs, weights = exact_lines(bath, params)
    raw = np.zeros(grid.size)
    half = 0.5 * gamma
    for start in range(0, freqs.size, 256):
        f = freqs[start:start + 256]
        w = weights[start:start + 256]
        raw += (w[None, :] * half / ((grid[:, None] - f[None, :]) ** 2 + half * half)).sum(axis=1)
    # the Lorentzian area is pi per unit weight; match the 2 pi sum rule of the spectra module
    raw *= 2.0
    scale = float(raw.max()) or 1.0
    meta = {
        "model": {"kind": "discrete", "mode_freqs": list(bath.mode_freqs),
                  "couplings": list(bath.couplings), "fock_cutoff": bath.fock_cutoff},
        "params": params.as_dict(),
        "oracle": "exact_diagonalization",
    }
    return Spectrum(grid, raw / scale, "oracle_absorption", fingerprint(bath, params, "oracle_absorption"), scale, meta)


def operator_green(bath: DiscreteBath, T, times, extra_levels=30):
    """G_g(t), G_u(t) from <xi(t) xi(0)> in the truncated Fock space.

    B_+- = exp(+-sum_k (lambda_k/w_k)(b_k - b_k')), xi_g = (B_+ + B_- - 2<B>)/2,
    xi_u = (B_+ - B_-)/2i.  The displacements are built in a larger space and
    truncated so that the cut does not distort the retained block.
    """
    bath.check_dimension()
    n = bath.fock_cutoff + 1
    big = n + extra_levels
    a_big = _ladder(big)
    plus, minus, probs, energies = [], [], [], []
    for w, lam in zip(bath.mode_freqs, bath.couplings):
        alpha = lam / w
        gen = alpha * (a_big - a_big.T)
        plus.append(linalg.expm(gen)[:n, :n])
        minus.append(linalg.expm(-gen)[:n, :n])
        probs.append(_thermal(w, T, n))
        energies.append(w * np.arange(n))
    b_plus = reduce(np.kron, plus)
    b_minus = reduce(np.kron, minus)
    p = reduce(np.kron, probs)
    e = reduce(lambda x, y: np.add.outer(x, y).ravel(), energies)
    mean_b = float(np.real(np.sum(p * np.diag(b_plus))))
    eye = np.eye(b_plus.shape[0])
    xi_g = 0.5 * (b_plus + b_minus - 2 * mean_b * eye)
    xi_u = (b_plus - b_minus) / 2j
    times = np.asarray(times, dtype=float)
    # <xi(t) xi> = sum_mn p_m xi_mn xi_nm exp(i (E_m - E_n) t)
    de = e[:, None] - e[None, :]
    out = []
    for xi in (xi_g, xi_u):
        wgt = p[:, None] * xi * xi.T
        keep = np.abs(wgt) > 1e-18
        wv, dv = wgt[keep], de[keep]
        vals = np.array([np.sum(wv * np.exp(1j * dv * t)) for t in times])
        out.append(vals)
    return out[0], out[1], mean_b
