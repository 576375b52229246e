"""Filon-type quadrature of cubic-spline data against complex exponentials.

The sampled function is replaced by its cubic spline interpolant on a
uniform grid, and each segment is integrated against exp(i z x) exactly.
For frequencies on a uniform grid the sum over segments is a chirp-z
transform, which makes all frequencies together cost O((N + K) log(N + K)).
"""
from __future__ import annotations

import numpy as np
from scipy import fft as sfft
from scipy.interpolate import CubicSpline

_SERIES_RADIUS = 1.0
_SERIES_TERMS = 26


def spline_coefficients(y, h):
    """Local power-basis coefficients, shape (..., 4, N): c[..., m, j] multiplies s**m on segment j."""
    y = np.asarray(y)
    x = h * np.arange(y.shape[-1])
    cs = CubicSpline(x, y, axis=-1, bc_type="not-a-knot")
    # cs.c has shape (4, N, *batch); move batch axes to the front
    c = np.moveaxis(cs.c[::-1], (0, 1), (-2, -1))
    return np.ascontiguousarray(c)


def unit_moments(u):
    """E_m(u) = int_0^1 x**m exp(u x) dx for m = 0..3, complex u of any shape."""
    u = np.asarray(u, dtype=complex)
    out = np.empty((4,) + u.shape, dtype=complex)
    small = np.abs(u) < _SERIES_RADIUS
    if np.any(small):
        us = u[small]
        fact = 1.0
        terms = np.zeros((4, us.size), dtype=complex)
        power = np.ones_like(us)
        for k in range(_SERIES_TERMS):
            for m in range(4):
                terms[m] += power / (fact * (m + k + 1))
            power = power * us
            fact *= k + 1
        out[:, small] = terms
    big = ~small
    if np.any(big):
        ub = u[big]
        eu = np.exp(ub)
        e = (eu - 1.0) / ub
        out[0, big] = e
        for m in range(1, 4):
            e = (eu - m * e) / ub
            out[m, big] = e
    return out


def segment_moments(z, h):
    """M_m(z) = int_0^h s**m exp(i z s) ds, shape (4, ...)."""
    z = np.asarray(z, dtype=complex)
    E = unit_moments(1j * z * h)
    scale = np.array([h ** (m + 1) for m in range(4)]).reshape((4,) + (1,) * z.ndim)
    return E * scale


def chirp_sum(x, h, k0, dk, K):
    """X[k] = sum_j x[..., j] exp(i (k0 + k dk) j h), k = 0..K-1 (Bluestein).

    ``x`` may carry leading batch axes.
    """
    x = np.asarray(x, dtype=complex)
    N = x.shape[-1]
    theta = dk * h
    L = sfft.next_fast_len(N + K - 1)
    n = np.arange(max(N, K), dtype=np.int64)
    nsq = (n * n).astype(float)
    chirp = np.exp(0.5j * theta * nsq)
    j = np.arange(N)
    a = x * np.exp(1j * k0 * h * j) * chirp[:N]
    # b[m] = exp(-i theta m^2 / 2) for m in -(N-1)..(K-1)
    b = np.zeros(L, dtype=complex)
    b[:K] = np.conj(chirp[:K])
    if N > 1:
        b[L - N + 1:] = np.conj(chirp[1:N][::-1])
    fa = sfft.fft(a, L, axis=-1)
    fb = sfft.fft(b)
    conv = sfft.ifft(fa * fb, axis=-1)[..., :K]
    return conv * chirp[:K]


def filon_uniform(coeffs, h, k0, dk, K, damping=0.0, x0=0.0):
    """int_{x0}^{x0 + N h} S(x) exp(i w x) exp(-damping (x - x0)) dx on w = k0 + k dk.

    ``coeffs`` are the (4, N) local spline coefficients from
    :func:`spline_coefficients` (batch axes allowed in front).
    """
    coeffs = np.asarray(coeffs)
    N = coeffs.shape[-1]
    w = k0 + dk * np.arange(K)
    z = w + 1j * damping
    M = segment_moments(z, h)  # (4, K)
    decay = np.exp(-damping * h * np.arange(N))
    total = 0.0
    for m in range(4):
        total = total + M[m] * chirp_sum(coeffs[..., m, :] * decay, h, k0, dk, K)
    return total * np.exp(1j * w * x0)


def filon_points(coeffs, h, z, x0=0.0, chunk=256):
    """Same integral as :func:`filon_uniform` at arbitrary complex z (damping in Im z)."""
    coeffs = np.asarray(coeffs)
    N = coeffs.shape[-1]
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.empty(coeffs.shape[:-2] + z.shape, dtype=complex)
    xj = h * np.arange(N)
    for start in range(0, z.size, chunk):
        zz = z[start:start + chunk]
        phase = np.exp(1j * np.outer(xj, zz))  # (N, k)
        M = segment_moments(zz, h)  # (4, k)
        acc = 0.0
        for m in range(4):
            acc = acc + M[m] * (coeffs[..., m, :] @ phase)
        out[..., start:start + chunk] = acc * np.exp(1j * zz * x0)
    return out
