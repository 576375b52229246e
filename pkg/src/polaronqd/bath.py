"""Phonon propagator Q(t) and the polaron Green's functions G_g(t), G_u(t).

    Q(t) = int_0^inf dw J(w)/w^2 [(1 - cos wt) coth(w/2T) + i sin wt]

With C(t) = exp(-Q(t)) and b = <B>:

    G_g(t) = (C + b^4/C)/2 - b^2 = b^2 (cosh phi - 1)
    G_u(t) = (C - b^4/C)/2       = b^2 sinh phi,        phi = S - Q

and both reduce to C/2 when b = 0.  The phi form is used whenever S is
finite; it stays accurate when C(t) approaches b^2 at long times.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline

from . import _filon
from .errors import GridError, RangeError
from .spectral_density import BathScalars, Kind, PhononModel, bath_scalars, coth_half

__all__ = ["BathCorrelation", "propagator_Q", "green_g", "green_u", "default_time_step", "default_t_max"]

DEFAULT_T_MAX = 1000.0
DECAY_THRESHOLD = 1e-8
# t_max >= RINGING_DECAYS / linewidth for confined modes
RINGING_DECAYS = 80.0
_MAX_OMEGA_NODES = 1 << 18
_TAIL_FACTOR = 20.0


@dataclass(frozen=True, eq=False)
class BathCorrelation:
    """Samples of Q(t), G_g(t) and G_u(t) on a time grid starting at 0."""

    time_grid: np.ndarray
    q_values: np.ndarray
    scalars: BathScalars
    model_ref: dict
    gg_values: np.ndarray = field(repr=False)
    gu_values: np.ndarray = field(repr=False)
    uniform: bool = True
    # delta/discrete baths: (frequencies, couplings) for analytic transforms
    modes: tuple | None = field(default=None, repr=False)

    @property
    def dt(self) -> float:
        return float(self.time_grid[1] - self.time_grid[0])

    @property
    def t_max(self) -> float:
        return float(self.time_grid[-1])

    @property
    def mean_b(self) -> float:
        return self.scalars.mean_b

    @property
    def is_null(self) -> bool:
        return not np.any(self.gg_values) and not np.any(self.gu_values)

    def values(self, which):
        if which == "g":
            return self.gg_values
        if which == "u":
            return self.gu_values
        raise ValueError(f"which must be 'g' or 'u', got {which!r}")

    def _interp(self, which, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.t_max * (1 + 1e-12)):
            raise RangeError(f"t outside [0, {self.t_max}]")
        key = "_spline_" + which
        spl = self.__dict__.get(key)
        if spl is None:
            spl = CubicSpline(self.time_grid, self.values(which))
            object.__setattr__(self, key, spl)
        return spl(t)

    def green_g(self, t):
        return self._interp("g", t)

    def green_u(self, t):
        return self._interp("u", t)

    def truncated(self, t_max):
        """Copy restricted to t <= t_max."""
        n = int(np.searchsorted(self.time_grid, t_max * (1 + 1e-12), side="right"))
        n = max(n, 4)
        return BathCorrelation(
            self.time_grid[:n].copy(), self.q_values[:n].copy(), self.scalars, self.model_ref,
            self.gg_values[:n].copy(), self.gu_values[:n].copy(), self.uniform, self.modes,
        )

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "re_Q", "im_Q", "re_Gg", "im_Gg", "re_Gu", "im_Gu"])
            for row in zip(self.time_grid, self.q_values, self.gg_values, self.gu_values):
                t, q, gg, gu = row
                writer.writerow([
                    repr(float(t)), repr(q.real), repr(q.imag),
                    repr(gg.real), repr(gg.imag), repr(gu.real), repr(gu.imag),
                ])


def green_g(corr: BathCorrelation, t):
    return corr.green_g(t)


def green_u(corr: BathCorrelation, t):
    return corr.green_u(t)


# ---------------------------------------------------------------------------
# time grid


def default_time_step(model) -> float:
    """32 samples per period of the fastest resolved bath frequency.

    The spline error near t = 0 shows up in the transform as a
    frequency-independent offset; at this step it is below 1e-9 for smooth
    G.  For n = 3 densities J ~ 1/omega at high frequency, so G(t) has a
    t^2 log t cusp at t = 0, the offset goes as dt^3, and the step is refined
    a further 4x.
    """
    wb = getattr(model, "omega_b", None)
    if wb is None:  # discrete bath
        w_max = max(10.0 * min(model.mode_freqs), max(model.mode_freqs))
    else:
        w_max = 10.0 * wb
        if isinstance(model, PhononModel) and model.is_confined:
            w_max = max(w_max, model.cutoff)
    step = 2.0 * math.pi / w_max / 32.0
    if isinstance(model, PhononModel) and model.is_confined and model.n == 3:
        step /= 4.0
    return step


def default_t_max(model) -> float:
    """1000/omega_b, longer for narrow confined modes.

    The mode's ringing decays as exp(-linewidth t / 2); the power-law tail
    is fitted on the last quarter of the grid, which must start after the
    ringing has fallen ~1e-13 below G(0).
    """
    if hasattr(model, "mode_freqs"):
        return DEFAULT_T_MAX
    horizon = DEFAULT_T_MAX / model.omega_b
    if model.is_confined and model.linewidth:
        horizon = max(horizon, RINGING_DECAYS / model.linewidth)
    return horizon


def _check_grid(time_grid):
    t = np.asarray(time_grid, dtype=float)
    if t.ndim != 1 or t.size < 4:
        raise GridError("time grid needs at least 4 points")
    if t[0] != 0.0:
        raise GridError("time grid must start at t = 0")
    steps = np.diff(t)
    if np.any(steps <= 0):
        raise GridError("time grid must be strictly increasing")
    uniform = bool(np.allclose(steps, steps[0], rtol=1e-9, atol=0))
    return t, uniform


# ---------------------------------------------------------------------------
# propagator


def propagator_Q(model, T, time_grid=None, *, t_max=None, dt=None, trim=True) -> BathCorrelation:
    """Sample Q(t) and the polaron Green's functions.

    Parameters
    ----------
    model : PhononModel or discrete bath
        Any object with ``mode_freqs`` and ``couplings`` sequences is treated
        as a sum of undamped modes (analytic path).
    T : float
        Temperature.
    time_grid : array, optional
        Explicit grid starting at 0.  By default a uniform grid with
        :func:`default_time_step` up to ``t_max`` (1000/omega_b), trimmed at
        the first time beyond which |G| stays below 1e-8 |G(0)|.
    """
    if T < 0:
        raise ValueError(f"temperature must be >= 0, got {T}")
    discrete = hasattr(model, "mode_freqs")
    if time_grid is None:
        step = dt if dt is not None else default_time_step(model)
        wb = 1.0 if discrete else model.omega_b
        horizon = t_max if t_max is not None else default_t_max(model)
        n = int(math.ceil(horizon / step)) + 1
        t = step * np.arange(n)
        uniform = True
    else:
        t, uniform = _check_grid(time_grid)
        trim = False

    if discrete:
        freqs = np.asarray(model.mode_freqs, dtype=float)
        lams = np.asarray(model.couplings, dtype=float)
        scalars, q, phi = _modes_q(freqs, lams, T, t)
        modes = (freqs, lams)
        ref = {"kind": "discrete", "mode_freqs": freqs.tolist(), "couplings": lams.tolist()}
    elif model.is_null:
        scalars = bath_scalars(model, T)
        q = np.zeros(t.size, dtype=complex)
        phi = np.zeros(t.size, dtype=complex)
        modes = None
        ref = model.describe()
    elif model.kind is Kind.DELTA:
        lam = math.sqrt(model.delta * model.omega_b)
        freqs, lams = np.array([model.omega_b]), np.array([lam])
        scalars, q, phi = _modes_q(freqs, lams, T, t)
        scalars = BathScalars(model.delta, scalars.huang_rhys, scalars.mean_b, T)
        modes = (freqs, lams)
        ref = model.describe()
    else:
        scalars = bath_scalars(model, T)
        q, phi = _continuum_q(model, T, t, uniform, scalars)
        modes = None
        ref = model.describe()

    b = scalars.mean_b
    if scalars.divergent or b == 0.0:
        c_half = 0.5 * np.exp(-q)
        gg, gu = c_half, c_half.copy()
    else:
        gg = b * b * (np.cosh(phi) - 1.0)
        gu = b * b * np.sinh(phi)
    ref = dict(ref, temperature=T)
    corr = BathCorrelation(t, q, scalars, ref, gg, gu, uniform, modes)
    if trim and modes is None and not corr.is_null:
        cut = _decay_time(t, gg, gu)
        if cut is not None:
            corr = corr.truncated(cut)
    return corr


def _decay_time(t, gg, gu):
    """First time after which both |G| stay below DECAY_THRESHOLD * |G(0)|."""
    cut = 0.0
    for g in (gg, gu):
        ref = abs(g[0])
        if ref == 0.0:
            continue
        above = np.nonzero(np.abs(g) >= DECAY_THRESHOLD * ref)[0]
        if above.size == 0:
            continue
        last = above[-1]
        if last >= t.size - 1:
            return None
        cut = max(cut, t[last + 1])
    # a few extra samples so the tail fit sees the decayed regime
    return min(cut * 1.1 + 10 * (t[1] - t[0]), t[-1])


def _modes_q(freqs, lams, T, t):
    s_k = (lams / freqs) ** 2
    coth = coth_half(freqs, T)
    S = float(np.sum(s_k * coth))
    wt = np.outer(t, freqs)
    phi = (np.cos(wt) * coth - 1j * np.sin(wt)) @ s_k
    q = S - phi
    delta = float(np.sum(lams**2 / freqs))
    return BathScalars(delta, S, math.exp(-0.5 * S), T), q, phi


def _omega_step(model, T):
    scales = [model.omega_b]
    if model.is_confined:
        scales.append(0.5 * model.linewidth)
    if T > 0:
        scales.append(T)
    step = min(scales) / 400.0
    edge = model.band_edge
    if edge / step > _MAX_OMEGA_NODES:
        step = edge / _MAX_OMEGA_NODES
    return edge / math.ceil(edge / step)


def _expint(k, x):
    """E_k(i x) for real x >= 0 and k >= 2, via upward recurrence from E_1."""
    x = np.asarray(x, dtype=float)
    z = 1j * x
    out = np.empty(x.shape, dtype=complex)
    zero = x == 0
    nz = ~zero
    zz = z[nz]
    e = special.exp1(zz)
    ez = np.exp(-zz)
    for m in range(1, k):
        e = (ez - zz * e) / m
    out[nz] = e
    out[zero] = 1.0 / (k - 1)
    return out


def _band_transform(coeffs, dw, w0, t, uniform):
    """int over one uniform omega band of spline(w) exp(-i w t)."""
    if uniform:
        dt = t[1] - t[0]
        return _filon.filon_uniform(coeffs, dw, 0.0, -dt, t.size, x0=w0)
    return _filon.filon_points(coeffs, dw, -t, x0=w0)


def _continuum_q(model: PhononModel, T, t, uniform, scalars):
    """Q(t) and phi(t) = S - Q(t) (phi is None for ohmic densities)."""
    edge = model.band_edge
    dw = _omega_step(model, T)
    w = dw * np.arange(int(round(edge / dw)) + 1)
    wpos = w[1:]
    h = model.h(wpos)
    f1 = h * coth_half(wpos, T)

    ohmic = model.is_ohmic
    if ohmic:
        a, a1 = model.ohmic_coefficients()
        s = model.omega_b
        if T > 0:
            A2, A1 = 2.0 * T * a, 2.0 * T * (a1 + a / s)
        else:
            A2, A1 = 0.0, a
        ew = np.exp(-wpos / s)
        r1 = f1 - ew * (A2 / wpos**2 + A1 / wpos)
        r2 = h - a * ew / wpos
    else:
        r1, r2 = f1, h
    if ohmic:
        # omega = 0 by quadratic extrapolation from the first three nodes
        r1_0 = 3 * r1[0] - 3 * r1[1] + r1[2]
        r2_0 = 3 * r2[0] - 3 * r2[1] + r2[2]
    else:
        # exact limits; an extrapolated h(0) != 0 would leak a spurious 1/t tail into phi
        lw = model.linewidth
        slope = model.prefactor / (model.omega_b**2 + 0.25 * lw * lw) if model.n == 3 else 0.0
        r1_0, r2_0 = 2.0 * T * slope, 0.0
    r1 = np.concatenate([[r1_0], r1])
    r2 = np.concatenate([[r2_0], r2])

    coeffs = _filon.spline_coefficients(np.stack([r1, r2]), dw)
    I = _band_transform(coeffs, dw, 0.0, t, uniform)
    I1, I2 = I[0], I[1]

    # confined kinds: coarse second band out to TAIL_FACTOR * edge, then a
    # two-term power-law asymptote (the ohmic-exp tail beyond 40 wb is e^-40)
    if model.is_confined:
        far = _TAIL_FACTOR * edge
        dw2 = edge / 100.0
        w2 = edge + dw2 * np.arange(int(round((far - edge) / dw2)) + 1)
        h2 = model.h(w2)
        band2 = np.stack([h2 * coth_half(w2, T), h2])
        c2 = _filon.spline_coefficients(band2, dw2)
        I2b = _band_transform(c2, dw2, edge, t, uniform)
        k = model.high_freq_exponent()
        # h ~ C w^-k (1 + D/w) fitted at far and 2*far
        hf1, hf2 = model.h(far) * far**k, model.h(2 * far) * (2 * far) ** k
        D = (hf1 - hf2) / (1.0 / far - 0.5 / far)
        C = hf1 - D / far
        tail = C * far ** (1 - k) * _expint(k, far * t) + C * D * far**-k * _expint(k + 1, far * t)
        I1 = I1 + I2b[0] + tail
        I2 = I2 + I2b[1] + tail

    if not ohmic:
        phi = I1.real + 1j * I2.imag
        return scalars.huang_rhys - phi, phi

    R1 = I1[0].real if t[0] == 0 else _static(coeffs[0], dw)
    re_q = R1 - I1.real
    im_q = -I2.imag
    tau = model.omega_b * t
    log_term = 0.5 * np.log1p(tau * tau)
    re_q = re_q + A2 / model.omega_b * (tau * np.arctan(tau) - log_term) + A1 * log_term
    im_q = im_q + a * np.arctan(tau)
    return re_q + 1j * im_q, None


def _static(coeffs, dw):
    M = _filon.segment_moments(np.zeros(1), dw)[:, 0].real
    return float(sum(M[m] * coeffs[m].sum() for m in range(4)))


