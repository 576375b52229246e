"""One-sided Fourier transforms of the polaron Green's functions.

    F_m(w) = int_0^inf dt exp(i (w + i gamma/2) t) G_m(t),   m in {g, u}

The dissipative part is G''_m = Re F_m and the reactive part G'_m = Im F_m.

Continuum baths: G_m is replaced by its cubic spline on the uniform time
grid and integrated exactly against the exponential (Filon); the part beyond
t_max uses the known long-time form A t^-p exp(-(kappa - i nu) t) with the
amplitude matched to the last sample.  Undamped mode baths (delta mode,
discrete modes): G_m is a finite sum of exponentials and the transform is a
sum of simple poles.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import _filon
from .bath import BathCorrelation
from .errors import AccuracyWarning, RangeError, UnsupportedParams
from .spectral_density import PhononModel, coth_half

__all__ = ["TailModel", "HalfTransform", "transform_at", "combined_pm", "sideband_lines"]

_TAIL_WARN = 1e-4
_LINE_CUTOFF = 1e-18
_TAIL_TERMS = 4
_CHIRP_MIN = 32
_EXPINT_SPLIT = 2.0


@dataclass(frozen=True)
class TailModel:
    """G(t) ~ exp(-(kappa - i nu) t) * sum_j amplitudes[j] (t/t0)^-(power + j) for t >= t0."""

    amplitudes: tuple
    power: float
    kappa: float
    nu: float
    t0: float
    fitted: bool = False

    def integral(self, z):
        """int_{t0}^inf exp(i z t) G_tail(t) dt."""
        z = np.asarray(z, dtype=complex)
        x = (self.kappa - 1j * self.nu - 1j * z) * self.t0
        # (t/t0)^-q exp(-s t) integrates to t0 E_q(s t0)
        out = np.zeros(z.shape, dtype=complex)
        for j, amp in enumerate(self.amplitudes):
            if amp != 0:
                out += amp * self.t0 * _expint_general(self.power + j, x)
        return out


def _expint_general(p, x):
    """E_p(x) = int_1^inf exp(-x u) u^-p du for complex x with Re x >= 0."""
    x = np.asarray(x, dtype=complex)
    out = np.empty(x.shape, dtype=complex)
    zero = x == 0
    if np.any(zero):
        out[zero] = 1.0 / (p - 1.0) if p > 1 else np.inf
    small = (np.abs(x) < _EXPINT_SPLIT) & ~zero
    if np.any(small):
        out[small] = _expint_small(p, x[small])
    large = np.abs(x) >= _EXPINT_SPLIT
    if np.any(large):
        out[large] = _expint_cf(p, x[large])
    return out


def _expint_small(p, x):
    if float(p).is_integer() and p >= 1:
        # upward recurrence from E_1 is stable for |x| < m
        e = special.exp1(x)
        ex = np.exp(-x)
        for m in range(1, int(p)):
            e = (ex - x * e) / m
        return e
    # E_p(x) = Gamma(1-p) x^(p-1) - sum_k (-x)^k / (k! (k + 1 - p))
    total = np.zeros(x.shape, dtype=complex)
    term = np.ones(x.shape, dtype=complex)
    for k in range(60):
        if k:
            term = term * (-x) / k
        total += term / (k + 1.0 - p)
    return special.gamma(1.0 - p) * x ** (p - 1.0) - total


def _expint_cf(p, x, max_iter=5000, eps=1e-16):
    """Continued fraction (modified Lentz), valid for Re x >= 0, |x| not small."""
    tiny = 1e-300
    b = x + p
    c = np.full(x.shape, 1.0 / tiny, dtype=complex)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, max_iter):
        an = -i * (p - 1.0 + i)
        b = b + 2.0
        d_new = 1.0 / (an * d + b)
        c_new = b + an / c
        delta = c_new * d_new
        d = np.where(active, d_new, d)
        c = np.where(active, c_new, c)
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) > eps
        if not active.any():
            break
    return h * np.exp(-x)


def _tail_exponents(model, T, which, b):
    """(power, kappa) of the long-time decay of G_which, from the small-omega form of J."""
    if model.is_ohmic:
        a, a1 = model.ohmic_coefficients()
        if T == 0:
            return a, 0.0
        return 2.0 * T * a1, math.pi * a * T
    # n >= 3: G_u ~ b^2 phi, G_g ~ b^2 phi^2 / 2 with phi ~ t^-(n-1)
    p = float(model.n - 1)
    return (p if which == "u" else 2 * p), 0.0


def _fit_tail(t, g):
    """Single complex exponential fitted on the last decade of samples."""
    n = t.size
    i0 = max(n - max(n // 10, 8), 0)
    tt, gg = t[i0:], g[i0:]
    mask = np.abs(gg) > 0
    if mask.sum() < 4:
        return TailModel((0j,), 0.0, 0.0, 0.0, float(t[-1]), fitted=True)
    logg = np.log(gg[mask])
    phase = np.unwrap(logg.imag)
    slope_re = np.polyfit(tt[mask], logg.real, 1)[0]
    slope_im = np.polyfit(tt[mask], phase, 1)[0]
    kappa = max(-slope_re, 0.0)
    nu = slope_im
    t0 = float(t[-1])
    amp = g[-1] / math.exp(-kappa * t0) / np.exp(1j * nu * t0)
    return TailModel((complex(amp),), 0.0, kappa, nu, t0, fitted=True)


def _power_tail(t, g, power, kappa, terms=_TAIL_TERMS):
    """Asymptotic series exp(-kappa t) sum_j A_j (t/t0)^-(power+j), least squares on the last quarter."""
    t0 = float(t[-1])
    i0 = (3 * t.size) // 4
    stride = max(1, (t.size - i0) // 4000)
    tt = t[i0::stride]
    gg = g[i0::stride]
    if tt[-1] != t0:
        tt, gg = np.append(tt, t0), np.append(gg, g[-1])
    x = tt / t0
    basis = np.stack([np.exp(-kappa * tt) * x ** -(power + j) for j in range(terms)], axis=1)
    amps = np.linalg.lstsq(basis.astype(complex), gg, rcond=None)[0]
    return TailModel(tuple(complex(a) for a in amps), float(power), float(kappa), 0.0, t0)


@dataclass(eq=False)
class HalfTransform:
    """Evaluator of F_g, F_u at w + i gamma/2 for one bath correlation."""

    source: BathCorrelation
    gamma_shift: float = 0.0
    model: PhononModel | None = None
    cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.gamma_shift < 0:
            raise ValueError("gamma_shift must be >= 0")
        src = self.source
        self._lines = None
        self._coeffs = {}
        self._tails = {}
        if src.modes is not None:
            self._lines = sideband_lines(src)
            return
        if not src.uniform:
            raise UnsupportedParams("half transform needs a uniform time grid")
        T = src.scalars.temperature
        b = src.scalars.mean_b
        for which in ("g", "u"):
            g = src.values(which)
            self._coeffs[which] = _filon.spline_coefficients(g, src.dt)
            if self.model is not None and not self.model.is_null:
                p, kappa = _tail_exponents(self.model, T, which, b)
                self._tails[which] = _power_tail(src.time_grid, g, p, kappa)
            else:
                self._tails[which] = _fit_tail(src.time_grid, g)

    @property
    def omega_limit(self) -> float:
        """Largest |w| resolved by the time grid."""
        if self._lines is not None:
            return math.inf
        return math.pi / self.source.dt

    # ------------------------------------------------------------------
    def transform(self, which, omega):
        """Complex F_which(omega + i gamma/2) for an array of real omega."""
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        if which not in ("g", "u"):
            raise ValueError(f"which must be 'g' or 'u', got {which!r}")
        if np.any(np.abs(omega) > self.omega_limit):
            raise RangeError(f"|omega| exceeds the resolvable limit pi/dt = {self.omega_limit:.4g}")
        key = (which, omega.size, omega.tobytes())
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        if self._lines is not None:
            out = self._line_transform(which, omega)
        elif self.source.is_null:
            out = np.zeros(omega.shape, dtype=complex)
        else:
            out = self._filon_transform(which, omega)
        out.setflags(write=False)
        self.cache[key] = out
        return out

    def _filon_transform(self, which, omega):
        h = self.source.dt
        half = 0.5 * self.gamma_shift
        c = self._coeffs[which]
        body = np.empty(omega.shape, dtype=complex)
        groups, rest = _progressions(omega)
        for idx, start, step, offsets in groups:
            vals = _filon.filon_uniform(c, h, start, step, int(offsets[-1]) + 1, damping=half)
            body[idx] = vals[offsets]
        if rest.size:
            body[rest] = _filon.filon_points(c, h, omega[rest] + 1j * half)
        tail = self._tails[which].integral(omega + 1j * half)
        if self._tails[which].fitted:
            ratio = np.abs(tail) / np.maximum(np.abs(body + tail), 1e-300)
            if np.any(ratio > _TAIL_WARN):
                warnings.warn(
                    f"tail beyond t_max contributes up to {ratio.max():.2e} of the transform",
                    AccuracyWarning,
                    stacklevel=3,
                )
        return body + tail

    def _line_transform(self, which, omega):
        if self.gamma_shift <= 0:
            raise UnsupportedParams(
                "undamped-mode baths have line spectra; a gamma shift > 0 is required"
            )
        freqs, weights = self._lines[which]
        z = omega + 0.5j * self.gamma_shift
        # int_0^inf exp(i z t) exp(-i W t) dt = i / (z - W)
        out = np.zeros(omega.shape, dtype=complex)
        for start in range(0, freqs.size, 512):
            f = freqs[start:start + 512]
            w = weights[start:start + 512]
            out += (1j * w[None, :] / (z[:, None] - f[None, :])).sum(axis=1)
        return out

    def lines(self, which):
        """(frequencies, weights) of the line spectrum; undamped-mode baths only."""
        if self._lines is None:
            raise UnsupportedParams("line spectrum exists only for undamped-mode baths")
        return self._lines[which]

    def tail_model(self, which):
        return self._tails.get(which)


def _progressions(omega):
    """Split points into arithmetic progressions, each evaluated by one chirp transform.

    Returns (groups, rest).  A group is (indices, start, step, offsets): the
    points omega[indices] equal start + offsets * step.  Unions of uniform
    grids (a coarse band plus a fine inset) are peeled apart one lattice at a
    time; what is left over goes to pointwise quadrature.
    """
    pending = np.argsort(omega, kind="stable")
    groups = []
    while pending.size >= _CHIRP_MIN:
        x = omega[pending]
        d = np.diff(x)
        pos = d > 0
        if not np.any(pos):
            break
        # most frequent spacing, binned at 1e-6 relative
        bins = np.round(np.log(d[pos]) * 1e6).astype(np.int64)
        vals, counts = np.unique(bins, return_counts=True)
        mode = vals[np.argmax(counts)]
        step = float(np.median(d[pos][bins == mode]))
        anchor = x[np.nonzero(pos)[0][np.argmax(bins == mode)]]
        k = np.round((x - anchor) / step)
        on = np.abs(x - (anchor + k * step)) <= 1e-9 * np.maximum(np.abs(x), step)
        taken = np.zeros(x.size, dtype=bool)
        ks = k[on]
        where = np.nonzero(on)[0]
        # clusters of lattice points without large holes
        cuts = np.nonzero(np.diff(ks) > 8)[0] + 1
        for part in np.split(np.arange(ks.size), cuts):
            if part.size < _CHIRP_MIN:
                continue
            lo, hi = ks[part[0]], ks[part[-1]]
            if hi - lo + 1 > 4 * part.size:
                continue
            sel = where[part]
            groups.append((pending[sel], anchor + lo * step, step, (ks[part] - lo).astype(np.int64)))
            taken[sel] = True
        if not taken.any():
            break
        pending = pending[~taken]
    return groups, pending


def sideband_lines(corr: BathCorrelation):
    """Exact exponential-sum form of G_g, G_u for a bath of undamped modes.

    Each mode k contributes exp(phi_k(t)) = sum_m P_m exp(-i m w_k t) with
    P_m = ((n+1)/n)^{m/2} I_m(2 s sqrt(n(n+1))) exp(...) at T > 0 and the
    Poisson weights s^m/m! at T = 0.
    """
    freqs, lams = corr.modes
    T = corr.scalars.temperature
    b2 = corr.scalars.mean_b ** 2
    # running list of (frequency, weight, parity)
    lines = {(0.0, 0): 1.0}
    for wk, lk in zip(freqs, lams):
        s = (lk / wk) ** 2
        m_vals, p_vals = _mode_weights(s, wk, T)
        new = {}
        for (f, par), w in lines.items():
            for m, p in zip(m_vals, p_vals):
                key = (round(f + m * wk, 12), (par + m) % 2)
                new[key] = new.get(key, 0.0) + w * p
        lines = {k: v for k, v in new.items() if abs(v) > _LINE_CUTOFF}
    # C/b^2 = sum w e^{-i f t};  b^4/C / b^2 = sum (-1)^parity w e^{-i f t}
    out = {}
    keys = sorted(lines)
    f_all = np.array([k[0] for k in keys])
    w_all = np.array([lines[k] for k in keys])
    par = np.array([k[1] for k in keys])
    even = par == 0
    fg, wg = f_all[even], b2 * w_all[even]
    zero = np.isclose(fg, 0.0, atol=1e-12)
    wg = wg - b2 * zero  # the -b^2 constant of G_g
    keep = np.abs(wg) > _LINE_CUTOFF * max(b2, 1e-300)
    out["g"] = (fg[keep], wg[keep])
    out["u"] = (f_all[~even], b2 * w_all[~even])
    return out


def _mode_weights(s, wk, T, tol=1e-17):
    """Fourier weights of exp(s [coth cos(wt) - i sin(wt)]) over multiples of wk (excluding e^-S)."""
    if s == 0:
        return np.array([0]), np.array([1.0])
    if T == 0:
        ms, ps = [], []
        p = 1.0
        m = 0
        while True:
            ms.append(m)
            ps.append(p)
            m += 1
            p *= s / m
            if p < tol and m > s:
                break
        return np.array(ms), np.array(ps)
    nbar = 1.0 / math.expm1(wk / T)
    x = 2.0 * s * math.sqrt(nbar * (nbar + 1.0))
    ms = []
    ps = []
    # exp(s coth) normalization is absorbed into b^2 = exp(-s coth); I_m scaled form
    scale = math.exp(x - s * float(coth_half(wk, T)))
    m = 0
    while True:
        for mm in ((m,) if m == 0 else (m, -m)):
            val = special.ive(abs(mm), x) * scale * ((nbar + 1.0) / nbar) ** (mm / 2.0)
            ms.append(mm)
            ps.append(val)
        if m > x and special.ive(m, x) * scale * ((nbar + 1) / nbar) ** (m / 2.0) < tol:
            break
        m += 1
    # weights above are relative to b^2 = exp(-s coth): undo the scale factor's exp(-s coth)
    ps = np.array(ps) * math.exp(s * float(coth_half(wk, T)))
    return np.array(ms), ps


def transform_at(ht: HalfTransform, which, omega):
    """(G'(omega), G''(omega)): reactive and dissipative parts at omega + i gamma/2."""
    F = ht.transform(which, omega)
    return F.imag, F.real


def combined_pm(ht: HalfTransform, eta, omega, g_tilde):
    """(G'_eta, G''_eta) with G_+- = G_g(dw_+-) + G_u(dw_-+), dw_+- = omega -+ g_tilde."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    sign = _eta_sign(eta)
    F = ht.transform("g", omega - sign * g_tilde) + ht.transform("u", omega + sign * g_tilde)
    return F.imag, F.real


def _eta_sign(eta):
    if eta in ("+", 1, +1.0):
        return 1.0
    if eta in ("-", -1, -1.0):
        return -1.0
    raise ValueError(f"eta must be '+' or '-', got {eta!r}")
