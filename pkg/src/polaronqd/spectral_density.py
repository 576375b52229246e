"""Phonon spectral densities J(omega) and the scalar functionals built from them.

Units: hbar = k_B = 1.  Frequencies, energies and temperatures are given in
the same unit as ``omega_b`` (normally 1).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
from scipy import integrate

from .errors import DistributionalDensity, DomainError, QuadratureFailure

__all__ = [
    "DIVERGENT",
    "Kind",
    "PhononModel",
    "BathScalars",
    "eval_J",
    "polaron_shift",
    "huang_rhys",
    "mean_b",
    "bath_scalars",
    "coth_half",
]

#: Value returned by :func:`huang_rhys` for ohmic (n = 1) densities.
DIVERGENT = math.inf

_QUAD_EPSABS = 1e-13
_QUAD_EPSREL = 1e-11


class Kind(str, Enum):
    OHMIC_EXP = "ohmic_exp"
    SUPEROHMIC_BULK = "superohmic_bulk"
    CONFINED = "confined"
    DELTA = "delta"


@dataclass(frozen=True)
class PhononModel:
    """A normalized phonon spectral density.

    The multiplicative constant of every continuum density is fixed so that
    ``int_0^inf J(w)/w dw == delta``.  ``delta == 0`` is accepted and
    represents the uncoupled bath (J identically zero).

    ``cutoff`` is the reservoir ultraviolet scale omega_*.  The confined-mode
    density is the large-omega_* form, so omega_* does not truncate J; it sets
    the band edge where numerical integration hands over to the analytic
    high-frequency asymptote, and the time resolution of correlation grids.
    """

    kind: Kind
    delta: float
    n: int = 1
    omega_b: float = 1.0
    linewidth: float | None = None
    cutoff: float = 20.0
    _norm: float = field(init=False, repr=False, compare=False, default=0.0)

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.delta < 0 or not math.isfinite(self.delta):
            raise DomainError(f"delta must be finite and >= 0, got {self.delta}")
        if self.omega_b <= 0:
            raise DomainError(f"omega_b must be > 0, got {self.omega_b}")
        if kind is Kind.OHMIC_EXP:
            object.__setattr__(self, "n", 1)
            object.__setattr__(self, "linewidth", None)
        elif kind is Kind.SUPEROHMIC_BULK:
            object.__setattr__(self, "n", 3)
            object.__setattr__(self, "linewidth", 2.0 * self.omega_b)
        elif kind is Kind.CONFINED:
            if self.n not in (1, 3):
                raise DomainError(f"confined mode requires n in {{1, 3}}, got {self.n}")
            if self.linewidth is None or self.linewidth <= 0:
                raise DomainError("confined mode requires linewidth > 0")
            if self.linewidth > 0.5 * self.omega_b:
                warnings.warn(
                    f"linewidth {self.linewidth} > 0.5*omega_b: the confined-mode "
                    "form assumes a weakly broadened mode",
                    stacklevel=3,
                )
        else:
            object.__setattr__(self, "linewidth", None)
        if kind in (Kind.CONFINED, Kind.SUPEROHMIC_BULK) and self.cutoff <= self.omega_b:
            raise DomainError(f"cutoff must exceed omega_b, got {self.cutoff}")
        if kind is not Kind.DELTA and self.delta > 0:
            object.__setattr__(self, "_norm", self.delta / self._shape_moment())

    # -- constructors -----------------------------------------------------
    @classmethod
    def ohmic_exp(cls, delta, omega_b=1.0):
        return cls(Kind.OHMIC_EXP, delta, n=1, omega_b=omega_b)

    @classmethod
    def superohmic_bulk(cls, delta, omega_b=1.0, cutoff=20.0):
        return cls(Kind.SUPEROHMIC_BULK, delta, n=3, omega_b=omega_b, cutoff=cutoff)

    @classmethod
    def confined(cls, n, delta, linewidth, omega_b=1.0, cutoff=20.0):
        return cls(Kind.CONFINED, delta, n=n, omega_b=omega_b, linewidth=linewidth, cutoff=cutoff)

    @classmethod
    def delta_mode(cls, delta, omega_b=1.0):
        return cls(Kind.DELTA, delta, n=0, omega_b=omega_b)

    # -- basic properties -------------------------------------------------
    @property
    def is_null(self) -> bool:
        return self.delta == 0.0

    @property
    def is_confined(self) -> bool:
        return self.kind in (Kind.CONFINED, Kind.SUPEROHMIC_BULK)

    @property
    def is_ohmic(self) -> bool:
        return self.kind is not Kind.DELTA and self.n == 1

    @property
    def delta_ph(self) -> float:
        """Smallest characteristic frequency of J (validity scale for g)."""
        if self.is_confined:
            return float(self.linewidth)
        return self.omega_b

    @property
    def band_edge(self) -> float:
        """Upper edge of the numerically integrated band."""
        if self.kind is Kind.OHMIC_EXP:
            # exp(-w/wb) < 1e-17 beyond
            return 40.0 * self.omega_b
        if self.kind is Kind.DELTA:
            return self.omega_b
        return float(self.cutoff)

    @property
    def breakpoints(self) -> list[float]:
        if not self.is_confined:
            return []
        wb, lw = self.omega_b, self.linewidth
        pts = [wb - 20 * lw, wb - 4 * lw, wb - lw, wb, wb + lw, wb + 4 * lw, wb + 20 * lw]
        return sorted(p for p in pts if 0.0 < p < self.band_edge)

    def describe(self) -> dict:
        out = {"kind": self.kind.value, "delta": self.delta, "n": self.n, "omega_b": self.omega_b}
        if self.is_confined:
            out.update(linewidth=self.linewidth, cutoff=self.cutoff)
        return out

    # -- the density ------------------------------------------------------
    def _shape(self, w):
        """J(w) up to normalization (continuum kinds)."""
        w = np.asarray(w, dtype=float)
        wb = self.omega_b
        if self.kind is Kind.OHMIC_EXP:
            return w * np.exp(-w / wb)
        lw = self.linewidth
        return w**self.n / ((w / wb + 1.0) ** 2 * ((w - wb) ** 2 + 0.25 * lw * lw))

    def _shape_moment(self):
        if self.kind is Kind.OHMIC_EXP:
            return self.omega_b
        return _integrate_positive(lambda w: self._shape(w) / w, self)

    @property
    def prefactor(self) -> float:
        """Normalization constant multiplying the shape function."""
        return self._norm

    def J(self, omega):
        if self.kind is Kind.DELTA and not self.is_null:
            raise DistributionalDensity("delta-mode J(omega) is a distribution; use analytic paths")
        omega = np.asarray(omega, dtype=float)
        if np.any(omega < 0):
            raise DomainError("J(omega) is defined for omega >= 0")
        if self.is_null:
            return np.zeros_like(omega)
        return self._norm * self._shape(omega)

    def h(self, omega):
        """J(omega)/omega**2 for omega > 0."""
        omega = np.asarray(omega, dtype=float)
        if self.is_null:
            return np.zeros_like(omega)
        wb = self.omega_b
        if self.kind is Kind.OHMIC_EXP:
            return self._norm * np.exp(-omega / wb) / omega
        if self.kind is Kind.DELTA:
            raise DistributionalDensity("delta-mode J(omega) is a distribution; use analytic paths")
        lw = self.linewidth
        return self._norm * omega ** (self.n - 2) / (
            (omega / wb + 1.0) ** 2 * ((omega - wb) ** 2 + 0.25 * lw * lw)
        )

    def ohmic_coefficients(self) -> tuple[float, float]:
        """(a, a1) with omega * J/omega**2 = a + a1*omega + O(omega**2); n = 1 only."""
        if not self.is_ohmic:
            raise DomainError("ohmic coefficients exist only for n = 1")
        c, wb = self._norm, self.omega_b
        if self.kind is Kind.OHMIC_EXP:
            return c, -c / wb
        q = wb * wb + 0.25 * self.linewidth**2
        # d/dw [(w/wb+1)^-2 ((w-wb)^2+lw^2/4)^-1] at 0
        return c / q, c * (-2.0 / (wb * q) + 2.0 * wb / q**2)

    def high_freq_exponent(self) -> int:
        """k such that J/omega**2 ~ C omega**-k for omega >> omega_b (confined kinds)."""
        return 6 - self.n


def _integrate_positive(f, model, upper=math.inf):
    """Integral of f over [0, upper) split at the model's structure points."""
    edge = min(model.band_edge, upper)
    pts = [0.0] + [p for p in model.breakpoints if p < edge] + [edge]
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        total += _quad(f, a, b)
    if upper > edge:
        total += _quad(f, edge, upper)
    return total


def _quad(f, a, b):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, epsabs=_QUAD_EPSABS, epsrel=_QUAD_EPSREL, limit=400)
        except integrate.IntegrationWarning as exc:
            raise QuadratureFailure(f"quadrature on [{a}, {b}] did not converge: {exc}") from exc
    if not math.isfinite(val):
        raise QuadratureFailure(f"non-finite integral on [{a}, {b}]")
    return val


def coth_half(omega, T):
    """coth(omega / 2T) for omega > 0, with the T = 0 limit equal to 1.

    Uses the Laurent series for small arguments, where the direct
    evaluation loses digits.
    """
    omega = np.asarray(omega, dtype=float)
    if T == 0:
        return np.ones_like(omega)
    x = omega / (2.0 * T)
    small = np.abs(omega) < 1e-3 * max(T, 1.0)
    xs = np.where(small, x, 1.0)
    series = 1.0 / xs + xs / 3.0 - xs**3 / 45.0
    with np.errstate(over="ignore"):
        direct = 1.0 / np.tanh(np.where(small, 1.0, x))
    return np.where(small, series, direct)


def eval_J(model: PhononModel, omega):
    """Normalized spectral density J(omega)."""
    return model.J(omega)


def polaron_shift(model: PhononModel) -> float:
    """int_0^inf J(w)/w dw, computed independently of the stored normalization."""
    if model.is_null:
        return 0.0
    if model.kind is Kind.DELTA:
        return model.delta
    return _integrate_positive(lambda w: model.J(w) / w, model)


def huang_rhys(model: PhononModel, T: float) -> float:
    """Huang-Rhys factor S(T); ``DIVERGENT`` for ohmic densities."""
    if T < 0:
        raise DomainError(f"temperature must be >= 0, got {T}")
    if model.is_null:
        return 0.0
    if model.kind is Kind.DELTA:
        return model.delta / model.omega_b * float(coth_half(model.omega_b, T))
    if model.is_ohmic:
        return DIVERGENT
    return _integrate_positive(lambda w: model.h(w) * coth_half(w, T), model)


def mean_b(model: PhononModel, T: float) -> float:
    """Thermal mean of the displacement operator, exp(-S/2)."""
    return math.exp(-0.5 * huang_rhys(model, T))


@dataclass(frozen=True)
class BathScalars:
    delta: float
    huang_rhys: float
    mean_b: float
    temperature: float

    @property
    def divergent(self) -> bool:
        return math.isinf(self.huang_rhys)

    def as_dict(self) -> dict:
        return {
            "delta": self.delta,
            "huang_rhys": "DIVERGENT" if self.divergent else self.huang_rhys,
            "mean_b": self.mean_b,
            "mean_b_squared": self.mean_b**2,
            "temperature": self.temperature,
        }


def bath_scalars(model: PhononModel, T: float) -> BathScalars:
    S = huang_rhys(model, T)
    return BathScalars(delta=model.delta, huang_rhys=S, mean_b=math.exp(-0.5 * S), temperature=T)
