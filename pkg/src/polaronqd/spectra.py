"""Absorption and emission spectra of a quantum dot in a cavity with phonons.

Frequencies are measured from the cavity frequency, which on resonance is
the zero-phonon line.  With g~ = g<B>, dw_+- = w -+ g~ and the combined
transforms G_+- from :mod:`polaronqd.half_fourier`:

absorption, summed over eta = +-
    { G''_eta [w^2 + (gamma/2) g^2 G''_eta + gamma^2/4] + (gamma/2) [eta <B> + g G'_eta]^2 }
    / { [dw_eta - g^2 G'_eta]^2 + [gamma/2 + g^2 G''_eta]^2 }

emission (gamma = 0), summed over eta
    2 w^2 [G''_g(-dw_eta) f(eta) + G''_u(-dw_-eta) f(-eta)]
    / { [dw_eta - g^2 G'_eta]^2 + g^4 G''_eta^2 },   f(eta) = 1/(1 + exp(2 eta g~/T))

The frequency-dependent level shifts that the emission formula also
contains are set to zero.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from . import __version__
from .bath import propagator_Q
from .errors import RangeError, UnsupportedParams, ValidityWarning
from .half_fourier import HalfTransform, combined_pm
from .spectral_density import PhononModel

__all__ = [
    "SystemParams",
    "Spectrum",
    "bath_transform",
    "default_grid",
    "absorption",
    "emission",
    "polaron_spectrum",
    "check_validity",
]

EMISSION_GAMMA = 1e-6
VALIDITY_RATIO = 0.3
KINDS = ("absorption", "emission", "polaron_absorption")


@dataclass(frozen=True)
class SystemParams:
    """Cavity, dot and probe parameters (weak-probe linear response).

    ``gamma_qd`` defaults to ``gamma_c``; the spectra formulas require the
    two loss rates to be equal.
    """

    g: float = 0.05
    gamma_c: float = 0.0
    gamma_qd: float | None = None
    detuning: float = 0.0
    T: float = 0.0

    def __post_init__(self):
        if self.gamma_qd is None:
            object.__setattr__(self, "gamma_qd", self.gamma_c)
        if self.g < 0:
            raise ValueError(f"g must be >= 0, got {self.g}")
        if self.gamma_c < 0 or self.gamma_qd < 0:
            raise ValueError("loss rates must be >= 0")
        if self.T < 0:
            raise ValueError(f"temperature must be >= 0, got {self.T}")

    @property
    def gamma(self) -> float:
        if not math.isclose(self.gamma_c, self.gamma_qd, rel_tol=1e-12, abs_tol=0.0):
            raise UnsupportedParams(
                f"gamma_c = {self.gamma_c} and gamma_qd = {self.gamma_qd} must be equal"
            )
        return self.gamma_c

    def with_(self, **changes) -> "SystemParams":
        values = asdict(self)
        values.update(changes)
        return SystemParams(**values)

    def as_dict(self) -> dict:
        return asdict(self)


def _model_dict(model) -> dict:
    if isinstance(model, PhononModel):
        return model.describe()
    return {
        "kind": "discrete",
        "mode_freqs": [float(w) for w in model.mode_freqs],
        "couplings": [float(c) for c in model.couplings],
    }


def fingerprint(model, params: SystemParams, kind: str) -> str:
    blob = json.dumps(
        {"model": _model_dict(model), "params": params.as_dict(), "kind": kind},
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class Spectrum:
    """A spectrum normalized to unit maximum; ``scale`` restores the raw values."""

    grid: np.ndarray
    values: np.ndarray
    kind: str
    params_fingerprint: str
    scale: float = 1.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS and not self.kind.startswith("oracle_"):
            raise ValueError(f"unknown spectrum kind {self.kind!r}")
        if self.grid.shape != self.values.shape:
            raise ValueError("grid and values must have the same shape")

    @property
    def raw_values(self) -> np.ndarray:
        return self.values * self.scale

    def integral(self, raw=True) -> float:
        y = self.raw_values if raw else self.values
        return float(np.trapezoid(y, self.grid))

    def peaks(self, window=None):
        """Grid indices of local maxima (optionally restricted to |w| <= window)."""
        y = self.values
        idx = np.nonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]))[0] + 1
        if window is not None:
            idx = idx[np.abs(self.grid[idx]) <= window]
        return idx

    def to_csv(self, path=None) -> str:
        """CSV with '#' metadata lines and header ``omega,intensity,kind``."""
        buf = io.StringIO()
        meta = {"fingerprint": self.params_fingerprint, "scale": self.scale, **self.metadata}
        for key in sorted(meta):
            buf.write(f"# {key}: {json.dumps(meta[key], sort_keys=True)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["omega", "intensity", "kind"])
        for w, v in zip(self.grid, self.values):
            writer.writerow([f"{w:.17g}", f"{v:.17g}", self.kind])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "Spectrum":
        meta = {}
        rows = []
        with open(path, newline="") as fh:
            lines = fh.read().splitlines()
        body = []
        for line in lines:
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = json.loads(value)
            else:
                body.append(line)
        reader = csv.reader(body)
        header = next(reader)
        if header != ["omega", "intensity", "kind"]:
            raise ValueError(f"unexpected CSV header {header}")
        kind = None
        for w, v, k in reader:
            rows.append((float(w), float(v)))
            kind = k
        data = np.array(rows, dtype=float).reshape(-1, 2)
        fp = meta.pop("fingerprint", "")
        scale = float(meta.pop("scale", 1.0))
        return cls(data[:, 0], data[:, 1], kind or "absorption", fp, scale, meta)

    def sidecar(self) -> dict:
        return {
            "kind": self.kind,
            "fingerprint": self.params_fingerprint,
            "scale": self.scale,
            "points": int(self.grid.size),
            "omega_min": float(self.grid[0]),
            "omega_max": float(self.grid[-1]),
            "code_version": __version__,
            **self.metadata,
        }


# ---------------------------------------------------------------------------
# shared pieces


def bath_transform(model, T, gamma, **grid_options) -> HalfTransform:
    """Bath correlation and its half transform at shift gamma/2.

    The grid is not trimmed by default: a t^-p tail that is already below
    1e-8 |G(0)| still carries ~|G(t0)| t0 of weight near omega = 0, and the
    damped mode oscillation left at the trim point spoils the tail fit.
    """
    grid_options.setdefault("trim", False)
    corr = propagator_Q(model, T, **grid_options)
    return HalfTransform(corr, gamma, model=model if isinstance(model, PhononModel) else None)


def default_grid(model, params: SystemParams, points=4001, inset_points=2001) -> np.ndarray:
    """Uniform band grid plus a refined window of +-3 g~ around the ZPL."""
    delta = model.delta if isinstance(model, PhononModel) else float(
        np.sum(np.asarray(model.couplings) ** 2 / np.asarray(model.mode_freqs))
    )
    half = 1.5 * max(delta, 3.0)
    grid = np.linspace(-half, half, points)
    if params.g > 0 and inset_points:
        b = _mean_b(model, params.T)
        width = 3.0 * (params.g * b if b > 0 else params.g)
        grid = np.union1d(grid, np.linspace(-width, width, inset_points))
    return grid


def _mean_b(model, T):
    if isinstance(model, PhononModel):
        from .spectral_density import mean_b

        return mean_b(model, T)
    lam = np.asarray(model.couplings, float)
    w = np.asarray(model.mode_freqs, float)
    from .spectral_density import coth_half

    return math.exp(-0.5 * float(np.sum((lam / w) ** 2 * coth_half(w, T))))


def check_validity(model, params: SystemParams) -> bool:
    """Warn (and return False) when g > 0.3 delta_ph."""
    if not isinstance(model, PhononModel) or model.is_null:
        return True
    limit = VALIDITY_RATIO * model.delta_ph
    if params.g > limit:
        warnings.warn(
            f"g = {params.g} exceeds {VALIDITY_RATIO} * delta_ph = {limit:.4g}; "
            "the weak-coupling treatment of the cavity is not justified",
            ValidityWarning,
            stacklevel=3,
        )
        return False
    return True


def _prepare(model, params, grid, gamma, transforms):
    if params.detuning != 0:
        raise UnsupportedParams("only the resonant case (detuning = 0) is implemented")
    grid = default_grid(model, params) if grid is None else np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("frequency grid must be strictly increasing")
    ht = transforms if transforms is not None else bath_transform(model, params.T, gamma)
    if not math.isclose(ht.gamma_shift, gamma, rel_tol=1e-12, abs_tol=1e-300):
        raise ValueError(f"transform built for gamma = {ht.gamma_shift}, need {gamma}")
    reach = np.max(np.abs(grid)) + params.g
    if reach > ht.omega_limit:
        raise RangeError(f"grid reaches |w| = {reach:.4g} beyond pi/dt = {ht.omega_limit:.4g}")
    return grid, ht


def _finish(grid, raw, kind, model, params, extra):
    if not np.all(np.isfinite(raw)):
        raise FloatingPointError(f"non-finite {kind} values")
    # tiny negative values are quadrature noise of a non-negative quantity
    floor = -1e-9 * np.max(np.abs(raw)) if raw.size else 0.0
    if np.any(raw < floor):
        warnings.warn(f"{kind}: negative intensity {raw.min():.3e} clipped", RuntimeWarning, stacklevel=3)
    raw = np.clip(raw, 0.0, None)
    peak = float(raw.max())
    scale = peak if peak > 0 else 1.0
    meta = {"model": _model_dict(model), "params": params.as_dict(), **extra}
    return Spectrum(grid, raw / scale, kind, fingerprint(model, params, kind), scale, meta)


# ---------------------------------------------------------------------------
# spectra


def absorption_terms(ht: HalfTransform, grid, g, gamma):
    """Raw absorption per branch, shape (2, len(grid)) for eta = +, -."""
    b = ht.source.mean_b
    gt = g * b
    out = np.empty((2, grid.size))
    for i, eta in enumerate((1.0, -1.0)):
        gp, gpp = combined_pm(ht, eta, grid, gt)
        dw = grid - eta * gt
        num = gpp * (grid**2 + 0.5 * gamma * g * g * gpp + 0.25 * gamma**2)
        num = num + 0.5 * gamma * (eta * b + g * gp) ** 2
        den = (dw - g * g * gp) ** 2 + (0.5 * gamma + g * g * gpp) ** 2
        with np.errstate(invalid="ignore"):
            out[i] = _singular_limit(num / den, g, gp, gpp)
    return out


def _singular_limit(values, g, *parts):
    """Where G'' diverges (ohmic bath, w = 0, gamma = 0) the term falls off as 1/G''."""
    bad = ~np.logical_and.reduce([np.isfinite(p) for p in parts])
    if np.any(bad) and g > 0:
        values = np.where(bad, 0.0, values)
    return values


def absorption(model, params: SystemParams, grid=None, *, transforms=None) -> Spectrum:
    """Linear absorption of the weak probe, normalized to unit maximum."""
    check_validity(model, params)
    gamma = params.gamma
    grid, ht = _prepare(model, params, grid, gamma, transforms)
    raw = absorption_terms(ht, grid, params.g, gamma).sum(axis=0)
    return _finish(grid, raw, "absorption", model, params, {"gamma": gamma})


def polaron_spectrum(model, T, grid=None, gamma=1e-3, *, transforms=None) -> Spectrum:
    """Independent-boson absorption (g = 0); the ZPL is a Lorentzian of HWHM gamma/2."""
    if gamma <= 0:
        raise UnsupportedParams("the polaron spectrum needs gamma > 0 to resolve the ZPL")
    params = SystemParams(g=0.0, gamma_c=gamma, T=T)
    grid, ht = _prepare(model, params, grid, gamma, transforms)
    raw = absorption_terms(ht, grid, 0.0, gamma).sum(axis=0)
    b = ht.source.mean_b
    return _finish(grid, raw, "polaron_absorption", model, params,
                   {"gamma": gamma, "zpl_weight": b * b})


def _fermi(eta, g_tilde, T):
    """1 / (1 + exp(2 eta g~ / T)) including the T = 0 limit."""
    if T == 0:
        if g_tilde == 0:
            return 0.5
        return 0.0 if eta > 0 else 1.0
    return float(special.expit(-2.0 * eta * g_tilde / T))


def emission(model, params: SystemParams, grid=None, *, transforms=None,
             gamma_eff=EMISSION_GAMMA) -> Spectrum:
    """Emission from the thermalized excited manifold (gamma = 0 only)."""
    if params.gamma != 0:
        raise UnsupportedParams("emission is defined for gamma = 0 only")
    check_validity(model, params)
    if isinstance(model, PhononModel) and model.is_null:
        return _null_emission(model, params, grid)
    grid, ht = _prepare(model, params, grid, gamma_eff, transforms)
    g, T = params.g, params.T
    b = ht.source.mean_b
    gt = g * b
    raw = np.zeros(grid.size)
    for eta in (1.0, -1.0):
        gp, gpp = combined_pm(ht, eta, grid, gt)
        dw_eta = grid - eta * gt
        dw_other = grid + eta * gt
        fg = ht.transform("g", -dw_eta).real
        fu = ht.transform("u", -dw_other).real
        num = fg * _fermi(eta, gt, T) + fu * _fermi(-eta, gt, T)
        den = (dw_eta - g * g * gp) ** 2 + (g * g * gpp) ** 2
        with np.errstate(invalid="ignore"):
            raw += _singular_limit(2.0 * grid**2 * num / den, g, gp, gpp, fg, fu)
    return _finish(grid, raw, "emission", model, params, {"gamma_eff": gamma_eff})


def _null_emission(model, params, grid):
    """Uncoupled-bath limit: polariton lines at +-g with thermal weights.

    Both G'' vanish, so the formula is 0/0; its limit for a vanishing
    one-phonon bath gives lines at w = +-g weighted 1/(1 + exp(+-2g/T)).
    The lines are drawn as Lorentzians with HWHM twice the finest grid step.
    """
    grid = default_grid(model, params) if grid is None else np.asarray(grid, dtype=float)
    g, T = params.g, params.T
    hw = 2.0 * float(np.min(np.diff(grid)))
    raw = np.zeros(grid.size)
    for center, eta in ((g, 1.0), (-g, -1.0)):
        weight = _fermi(eta, g, T)
        raw += weight * (hw / math.pi) / ((grid - center) ** 2 + hw * hw)
    return _finish(grid, raw, "emission", model, params,
                   {"gamma_eff": 0.0, "line_hwhm": hw, "analytic_limit": "uncoupled bath"})
