"""Polariton poles, pole (Lorentzian) approximation and VRS classification.

The poles solve  dw_eta - g^2 G'_eta(w) = 0  on (-g, g).  With <B> > 0
each branch is a Lorentzian of full width gamma + 2 g^2 G''_eta at its pole.
With <B> = 0 (ohmic baths) G varies on the scale of the splitting itself
and the peak widths are measured on the absorption lineshape instead.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np
from scipy import optimize

from .errors import NoRootInInterval
from .half_fourier import HalfTransform, combined_pm
from .spectra import SystemParams, absorption_terms, bath_transform
from .spectral_density import Kind, PhononModel

__all__ = [
    "VRS",
    "ResonanceReport",
    "find_poles",
    "pole_approximation",
    "classify_vrs",
    "UNDERDAMPED_RATIO",
    "OVERDAMPED_RATIO",
]

UNDERDAMPED_RATIO = 0.5
OVERDAMPED_RATIO = 2.0
SCAN_NODES = 64
ROOT_TOL = 1e-10


class VRS(str, Enum):
    UNDERDAMPED = "Underdamped"
    OVERDAMPED = "Overdamped"
    MARGINAL = "Marginal"


@dataclass
class ResonanceReport:
    omega_tilde_plus: float | None
    omega_tilde_minus: float | None
    gamma_tilde_plus: float | None
    gamma_tilde_minus: float | None
    strength_plus: float | None
    strength_minus: float | None
    compound_strength: float | None
    vrs: VRS | None = None
    splitting: float | None = None
    splitting_estimate: float = 0.0
    compound_strength_estimate: float = 0.0
    width_method: str = "pole"
    guaranteed_unique: bool = True
    all_roots: dict = field(default_factory=dict)
    multiple_roots: bool = False
    dip_contrast: float | None = None
    thresholds: tuple = (UNDERDAMPED_RATIO, OVERDAMPED_RATIO)

    @property
    def has_both_poles(self) -> bool:
        return self.omega_tilde_plus is not None and self.omega_tilde_minus is not None

    def as_dict(self) -> dict:
        out = asdict(self)
        out["vrs"] = self.vrs.value if self.vrs is not None else None
        out["thresholds"] = {"underdamped_below": self.thresholds[0], "overdamped_above": self.thresholds[1]}
        return out


def _root_function(ht: HalfTransform, eta, g, g_tilde, reactive=True):
    def f(w):
        w = np.atleast_1d(np.asarray(w, dtype=float))
        val = w - eta * g_tilde
        if reactive:
            gp, _ = combined_pm(ht, eta, w, g_tilde)
            val = val - g * g * gp
        return val

    return f


def _roots_of(f, lo, hi, nodes=SCAN_NODES):
    """Sign-change scan over ``nodes`` uniform points of [lo, hi], then Brent refinement."""
    x = np.linspace(lo, hi, nodes)
    y = f(x)
    roots = [float(x[i]) for i in np.nonzero(y == 0.0)[0]]
    for i in range(x.size - 1):
        if y[i] == 0.0 or y[i + 1] == 0.0 or np.sign(y[i]) == np.sign(y[i + 1]):
            continue
        r = optimize.brentq(lambda w: float(f(w)[0]), x[i], x[i + 1],
                            xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        # a sign change across a singularity of G' is not a root
        if abs(float(f(r)[0])) < ROOT_TOL:
            roots.append(float(r))
    return sorted(roots)


def _rising(f, r, scale):
    h = 1e-6 * scale
    y = f([r - h, r + h])
    return y[1] > y[0]


def find_poles(model, params: SystemParams, transforms: HalfTransform | None = None,
               *, strict=False, reactive=True):
    """(omega_tilde_plus, omega_tilde_minus); a missing root is None.

    Returns a third element, the dict of all roots per branch, which has
    more than one entry per branch when f is not monotone.
    """
    ht = transforms if transforms is not None else bath_transform(model, params.T, params.gamma)
    g = params.g
    if g <= 0:
        raise ValueError("pole search needs g > 0")
    b = ht.source.mean_b
    gt = g * b
    found = {}
    chosen = {}
    for eta, name in ((1.0, "+"), (-1.0, "-")):
        f = _root_function(ht, eta, g, gt, reactive)
        roots = _roots_of(f, -g, g)
        found[name] = roots
        # resonances are the upward crossings; the outermost one is the polariton
        signed = [r for r in roots if eta * r > 0 and _rising(f, r, g)]
        if signed:
            chosen[name] = max(signed, key=lambda r: eta * r)
        else:
            chosen[name] = None
            msg = f"no root of the {name} branch with the expected sign in (-g, g)"
            if strict:
                raise NoRootInInterval(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return chosen["+"], chosen["-"], found


def _guaranteed(model) -> bool:
    if isinstance(model, PhononModel):
        return model.kind is Kind.DELTA or model.is_null or not model.is_ohmic
    return True


def _branch_strength(ht, eta, w, g, gt, gamma):
    """Area of the Lorentzian approximating branch eta near its pole w."""
    gp, gpp = combined_pm(ht, eta, [w], gt)
    gp, gpp = float(gp[0]), float(gpp[0])
    step = max(1e-7 * g, 1e-12)
    dgp = combined_pm(ht, eta, [w + step, w - step], gt)[0]
    z = abs(1.0 - g * g * (dgp[0] - dgp[1]) / (2 * step))
    b = ht.source.mean_b
    half = 0.5 * gamma + g * g * gpp
    if gamma == 0:
        # numerator / half-width -> w^2 / g^2 when both vanish together
        ratio = w * w / (g * g)
    else:
        num = gpp * (w * w + 0.5 * gamma * g * g * gpp + 0.25 * gamma**2) + 0.5 * gamma * (eta * b + g * gp) ** 2
        ratio = num / half
    return math.pi * ratio / z, gamma + 2.0 * g * g * gpp


def _lineshape_contrast(ht, params, wp, wm, points=4000):
    """Depth of the absorption minimum between the two polariton peaks.

    Returns min(A between peaks) / min(peak heights), or None when one side
    has no separate maximum.  A branch narrower than the grid step is a line
    of unbounded height.
    """
    g, gamma = params.g, params.gamma
    # an even point count keeps w = 0, where G'' of an ohmic bath diverges, off the grid
    grid = np.linspace(-2.0 * g, 2.0 * g, points)
    step = grid[1] - grid[0]
    a = absorption_terms(ht, grid, g, gamma).sum(axis=0)
    heights, spots = [], []
    for center, eta in ((wp, 1.0), (wm, -1.0)):
        _, gpp = combined_pm(ht, eta, [center], g * ht.source.mean_b)
        if gamma + 2 * g * g * float(gpp[0]) < 2 * step:
            heights.append(math.inf)
            spots.append(center)
            continue
        side = np.nonzero(eta * grid > 0)[0]
        i = side[int(np.argmax(a[side]))]
        if i in (0, grid.size - 1) or abs(grid[i]) < 1.5 * step:
            return None  # monotone on this side: no separate maximum
        heights.append(float(a[i]))
        spots.append(float(grid[i]))
    between = (grid > min(spots)) & (grid < max(spots))
    if not between.any():
        return None
    return float(a[between].min()) / min(heights)


def pole_approximation(model, params: SystemParams, transforms: HalfTransform | None = None,
                       *, reactive=True) -> ResonanceReport:
    """Pole positions, widths and oscillator strengths, classified."""
    gamma = params.gamma
    ht = transforms if transforms is not None else bath_transform(model, params.T, gamma)
    g = params.g
    b = ht.source.mean_b
    gt = g * b
    S = ht.source.scalars.huang_rhys
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        wp, wm, roots = find_poles(model, params, ht, reactive=reactive)
    report = ResonanceReport(
        wp, wm, None, None, None, None, None,
        splitting_estimate=2.0 * g * b,
        compound_strength_estimate=math.exp(-S) if math.isfinite(S) else 0.0,
        guaranteed_unique=_guaranteed(model),
        all_roots=roots,
        multiple_roots=any(len(r) > 1 for r in roots.values()),
    )
    strengths = {}
    for eta, w in ((1.0, wp), (-1.0, wm)):
        if w is not None:
            strengths[eta] = _branch_strength(ht, eta, w, g, gt, gamma)
    if 1.0 in strengths:
        report.strength_plus, report.gamma_tilde_plus = strengths[1.0]
    if -1.0 in strengths:
        report.strength_minus, report.gamma_tilde_minus = strengths[-1.0]
    if report.has_both_poles:
        report.splitting = wp - wm
        total = 2.0 * math.pi  # integrated absorption, independent of g
        report.compound_strength = (report.strength_plus + report.strength_minus) / total
        if b == 0:
            report.width_method = "lineshape"
            report.dip_contrast = _lineshape_contrast(ht, params, wp, wm)
    report.vrs = classify_vrs(report)
    return report


def classify_vrs(report: ResonanceReport) -> VRS:
    """Underdamped if both widths < 0.5 splitting, Overdamped if > 2 splitting or a pole is missing.

    Reports built from the lineshape (<B> = 0) are classified by the dip
    between the peaks: Underdamped below half the smaller peak, Marginal
    above, Overdamped when there is no second maximum.
    """
    if not report.has_both_poles or report.splitting is None or report.splitting <= 0:
        return VRS.OVERDAMPED
    if report.width_method == "lineshape":
        if report.dip_contrast is None:
            return VRS.OVERDAMPED
        return VRS.UNDERDAMPED if report.dip_contrast < UNDERDAMPED_RATIO else VRS.MARGINAL
    width = max(report.gamma_tilde_plus, report.gamma_tilde_minus)
    if width < UNDERDAMPED_RATIO * report.splitting:
        return VRS.UNDERDAMPED
    if width > OVERDAMPED_RATIO * report.splitting:
        return VRS.OVERDAMPED
    return VRS.MARGINAL
