"""Time-domain integration of the polaron-frame master equation.

Three states, |0> (ground, no photon), |1> (one cavity photon) and
|2> (exciton), in the frame rotating at the probe frequency w:

    H = w s00 + <B> X_g - i (gamma/2)(s11 + s22)
    X_g = g (s21 + s12) + W (s20 + s02)
    X_u = i [g (s12 - s21) + W (s02 - s20)]
    drho/dt = -i (H rho - rho H^+)
              - int_0^t dtau sum_m {G_m(tau) [X_m, U X_m rho(t - tau) U^+] + h.c.}

with U(tau) = exp(-i H tau).  Every quantity is expanded to second order in
the probe amplitude W, which turns rho into three 3x3 blocks.  The absorption
is the stationary rate -d rho00/dt of the W^2 block.

The memory integral uses product integration: rho(t - tau) is linear between
coarse steps while G(tau) U(tau) is integrated with Simpson's rule on the
fine grid of the bath correlation.  The local part is propagated exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..bath import BathCorrelation, propagator_Q
from ..errors import DomainError, NonConvergence
from ..spectra import Spectrum, SystemParams, _model_dict, fingerprint

__all__ = ["KernelState", "PolaronMasterEquation", "time_domain_spectrum", "VARIANTS"]

VARIANTS = ("nonlocal", "local")
ORDERS = 3
_DIM = 9
_CHUNK = 2048
_NODES = 4


def _unit(i, j):
    m = np.zeros((3, 3), dtype=complex)
    m[i, j] = 1.0
    return m


def _sop(a, b):
    """Matrix of rho -> a rho b on row-major vec(rho); broadcasts over leading axes."""
    a, b = np.broadcast_arrays(a, b)
    return np.einsum("...ik,...lj->...ijkl", a, b).reshape(a.shape[:-2] + (_DIM, _DIM))


def _dagger(m):
    return np.conj(np.swapaxes(m, -1, -2))


@dataclass
class KernelState:
    """Trajectory of the three order blocks on the coarse time grid."""

    times: np.ndarray
    rho: np.ndarray  # (steps, ORDERS, 3, 3)
    omega: float
    variant: str

    def block(self, order):
        return self.rho[:, order]

    def absorption_rate(self, window=0.2, rtol=2e-3, atol=1e-10):
        """-d rho00/dt of the second-order block, from two trailing windows."""
        y = self.rho[:, 2, 0, 0].real
        t = self.times
        n = t.size
        w = max(int(window * n), 8)
        if 2 * w > n:
            raise NonConvergence("trajectory too short for the rate fit")
        late = -np.polyfit(t[n - w:], y[n - w:], 1)[0]
        early = -np.polyfit(t[n - 2 * w:n - w], y[n - 2 * w:n - w], 1)[0]
        if abs(late - early) > rtol * abs(late) + atol:
            raise NonConvergence(
                f"w = {self.omega:.6g}: rate not stationary ({early:.6e} then {late:.6e})"
            )
        return float(late)


class PolaronMasterEquation:
    """Second-order-in-probe integrator for one probe frequency."""

    def __init__(self, corr: BathCorrelation, params: SystemParams, omega, *,
                 coarse_dt=None, memory_time=None, variant="nonlocal"):
        if variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if not corr.uniform:
            raise DomainError("the master-equation oracle needs a uniform time grid")
        if params.detuning != 0:
            raise DomainError("the master-equation oracle is set up for zero detuning")
        self.corr = corr
        self.params = params
        self.omega = float(omega)
        self.variant = variant
        g, gamma, b = params.g, params.gamma, corr.mean_b
        h = corr.dt
        if coarse_dt is None:
            coarse_dt = min(0.5, 0.25 / (abs(self.omega) + 2 * g + gamma))
        sub = max(2, 2 * int(round(coarse_dt / h / 2)))
        self.sub = sub
        self.step = sub * h
        span = corr.t_max if memory_time is None else min(memory_time, corr.t_max)
        self.memory_steps = max(1, int((corr.time_grid.size - 1) // sub))
        self.memory_steps = min(self.memory_steps, max(1, int(span / self.step)))
        if corr.is_null:
            self.memory_steps = 0

        s = _unit
        self.h0 = self.omega * s(0, 0) + b * g * (s(2, 1) + s(1, 2)) - 0.5j * gamma * (s(1, 1) + s(2, 2))
        self.v = b * (s(2, 0) + s(0, 2))
        self.x = {
            "g": (g * (s(2, 1) + s(1, 2)), s(2, 0) + s(0, 2)),
            "u": (1j * g * (s(1, 2) - s(2, 1)), 1j * (s(0, 2) - s(2, 0))),
        }
        # Van Loan: the first block row of exp(-i M tau) holds the W-expansion of U(tau)
        m = np.zeros((3 * ORDERS, 3 * ORDERS), dtype=complex)
        for k in range(ORDERS):
            m[3 * k:3 * k + 3, 3 * k:3 * k + 3] = self.h0
            if k + 1 < ORDERS:
                m[3 * k:3 * k + 3, 3 * k + 3:3 * k + 6] = self.v
        self._vanloan = m

    # -- propagators -----------------------------------------------------

    def _expm(self, tau):
        return linalg.expm(-1j * self._vanloan * tau)

    def _kernel(self, u):
        """Superoperators multiplying G_g, G_g*, G_u, G_u* in the kernel.

        Shape (4, 3, P, 9, 9): coefficient, order difference k, tau.
        """
        ud = _dagger(u)
        out = np.zeros((4, ORDERS, u.shape[0], _DIM, _DIM), dtype=complex)
        for m, (x0, x1) in enumerate(self.x.values()):
            xs = (x0, x1)
            for a in range(2):
                for c in range(2):
                    xa, xc = xs[a], xs[c]
                    for bb in range(ORDERS):
                        for d in range(ORDERS - a - bb - c):
                            k = a + bb + c + d
                            ub, ubd = u[:, bb], ud[:, bb]
                            uo, uod = u[:, d], ud[:, d]
                            out[2 * m, k] += _sop(xa @ ub @ xc, uod) - _sop(ub @ xc, uod @ xa)
                            out[2 * m + 1, k] += _sop(uo, xc @ ubd @ xa) - _sop(xa @ uo, xc @ ubd)
        return out

    def _backward(self, u):
        """Order blocks of rho -> U^-1 rho U^-+, shape (3, P, 9, 9)."""
        w0 = np.linalg.inv(u[:, 0])
        w1 = -w0 @ u[:, 1] @ w0
        w2 = -w0 @ (u[:, 1] @ w1 + u[:, 2] @ w0)
        ws = (w0, w1, w2)
        out = np.zeros((ORDERS, u.shape[0], _DIM, _DIM), dtype=complex)
        for i in range(ORDERS):
            for l in range(ORDERS - i):
                out[i + l] += _sop(ws[i], _dagger(ws[l]))
        return out

    # -- weights ---------------------------------------------------------

    def weights(self):
        """Per coarse interval j: (A_j, B_j) hat-function weights, each (3, M, 9, 9).

        G(tau) is integrated on its own fine grid with Simpson's rule; the
        smooth system superoperators are cubic between four nodes per
        coarse interval.  The local variant returns the plain interval
        integrals of the kernel composed with backward evolution as A and
        zeros as B.
        """
        msteps, sub, h = self.memory_steps, self.sub, self.corr.dt
        a_w = np.zeros((ORDERS, msteps, _DIM, _DIM), dtype=complex)
        b_w = np.zeros_like(a_w)
        if msteps == 0:
            return a_w, b_w
        simpson = np.ones(sub + 1)
        simpson[1:-1:2] = 4.0
        simpson[2:-1:2] = 2.0
        simpson *= h / 3.0
        frac = np.arange(sub + 1) / sub
        nodes = np.linspace(0.0, 1.0, _NODES)
        lagrange = np.ones((sub + 1, _NODES))
        for q in range(_NODES):
            for r in range(_NODES):
                if r != q:
                    lagrange[:, q] *= (frac - nodes[r]) / (nodes[q] - nodes[r])
        hats = np.stack([1.0 - frac, frac], axis=1)
        basis = simpson[:, None, None] * lagrange[:, :, None] * hats[:, None, :]
        if self.variant == "local":
            basis = basis.sum(axis=2, keepdims=True)
        gg, gu = self.corr.gg_values, self.corr.gu_values
        coeffs = (gg, np.conj(gg), gu, np.conj(gu))
        per_chunk = max(1, _CHUNK // _NODES)
        for j0 in range(0, msteps, per_chunk):
            js = np.arange(j0, min(msteps, j0 + per_chunk))
            idx = js[:, None] * sub + np.arange(sub + 1)[None, :]
            # moments[c, j, q, hat]
            moments = np.stack([np.einsum("jk,kqh->jqh", c[idx], basis) for c in coeffs])
            taus = ((js[:, None] + nodes[None, :]) * self.step).ravel()
            e = np.stack([self._expm(t)[:3] for t in taus])
            u = np.stack([e[:, :, 3 * b:3 * b + 3] for b in range(ORDERS)], axis=1)
            kern = self._kernel(u)
            if self.variant == "local":
                back = self._backward(u)
                comp = np.zeros_like(kern)
                for k in range(ORDERS):
                    for p in range(k + 1):
                        comp[:, k] += kern[:, p] @ back[k - p]
                kern = comp
            kern = kern.reshape(4, ORDERS, js.size, _NODES, _DIM, _DIM)
            a_w[:, js] = np.einsum("cjq,cojqab->ojab", moments[..., 0], kern)
            if self.variant != "local":
                b_w[:, js] = np.einsum("cjq,cojqab->ojab", moments[..., 1], kern)
        return a_w, b_w

    # -- stepping --------------------------------------------------------

    def _local_generator(self):
        eye = np.eye(3)
        l0 = -1j * (_sop(self.h0, eye) - _sop(eye, _dagger(self.h0)))
        lv = -1j * (_sop(self.v, eye) - _sop(eye, self.v))
        full = np.zeros((ORDERS * _DIM, ORDERS * _DIM), dtype=complex)
        for n in range(ORDERS):
            full[n * _DIM:(n + 1) * _DIM, n * _DIM:(n + 1) * _DIM] = l0
            if n:
                full[n * _DIM:(n + 1) * _DIM, (n - 1) * _DIM:n * _DIM] = lv
        return full

    @staticmethod
    def _full(blocks):
        """Block-lower-triangular Toeplitz matrix from the three order-difference blocks."""
        full = np.zeros((ORDERS * _DIM, ORDERS * _DIM), dtype=complex)
        for n in range(ORDERS):
            for e in range(n + 1):
                full[n * _DIM:(n + 1) * _DIM, e * _DIM:(e + 1) * _DIM] = blocks[n - e]
        return full

    def integrate(self, t_final, initial="absorption") -> KernelState:
        if initial == "absorption":
            rho0 = _unit(0, 0)
        elif initial == "emission":
            rho0 = _unit(2, 2)
        else:
            rho0 = np.asarray(initial, dtype=complex)
        steps = int(math.ceil(t_final / self.step))
        dt = self.step
        prop = linalg.expm(self._local_generator() * dt)
        eye = np.eye(ORDERS * _DIM)
        a_w, b_w = self.weights()
        msteps = self.memory_steps
        y = np.zeros((steps + 1, ORDERS * _DIM), dtype=complex)
        y[0, :_DIM] = rho0.reshape(-1)

        if self.variant == "local":
            cum = np.zeros((msteps + 1, ORDERS, _DIM, _DIM), dtype=complex)
            if msteps:
                cum[1:] = np.cumsum(np.moveaxis(a_w, 1, 0), axis=0)
            d_full = [self._full(cum[min(n, msteps)]) for n in range(min(steps, msteps) + 1)]
            for n in range(steps):
                dn = d_full[min(n, msteps)]
                dn1 = d_full[min(n + 1, msteps)]
                rhs = prop @ (y[n] - 0.5 * dt * (dn @ y[n]))
                y[n + 1] = np.linalg.solve(eye + 0.5 * dt * dn1, rhs)
        else:
            a_full = np.stack([self._full(a_w[:, j]) for j in range(msteps)]) if msteps else np.zeros((0, 27, 27))
            b_full = np.stack([self._full(b_w[:, j]) for j in range(msteps)]) if msteps else np.zeros((0, 27, 27))
            # coefficient of y_{m-k}, k = 1..msteps
            ctot = np.zeros((msteps, ORDERS * _DIM, ORDERS * _DIM), dtype=complex)
            if msteps:
                ctot[:] = b_full
                ctot[:-1] += a_full[1:]
            cmat = np.transpose(ctot, (1, 0, 2)).reshape(ORDERS * _DIM, -1)
            a0 = a_full[0] if msteps else np.zeros((27, 27))
            lhs = linalg.lu_factor(eye + 0.5 * dt * a0)

            def history(m):
                kmax = min(m, msteps)
                if kmax == 0:
                    return np.zeros(ORDERS * _DIM, dtype=complex)
                past = y[m - kmax:m][::-1].reshape(-1)
                out = cmat[:, :kmax * ORDERS * _DIM] @ past
                if m < msteps:
                    # the oldest sample only carries the B weight of its interval
                    out -= a_full[m] @ y[0]
                return out

            r = -(a0 @ y[0])
            for n in range(steps):
                hist = history(n + 1)
                rhs = prop @ (y[n] + 0.5 * dt * r) - 0.5 * dt * hist
                y[n + 1] = linalg.lu_solve(lhs, rhs)
                r = -(a0 @ y[n + 1] + hist)
        times = dt * np.arange(steps + 1)
        return KernelState(times, y.reshape(steps + 1, ORDERS, 3, 3), self.omega, self.variant)


def _default_t_final(params: SystemParams):
    gamma = params.gamma
    if gamma > 0:
        return float(min(max(20.0 / gamma, 400.0), 6000.0))
    return 2000.0


def time_domain_spectrum(model, params: SystemParams, probe_freq_grid, *, variant="nonlocal",
                         t_final=None, coarse_dt=None, memory_time=None, corr=None,
                         rtol=2e-3) -> Spectrum:
    """Absorption rate at each probe frequency from direct time integration.

    Raises NonConvergence when the rate has not become stationary by t_final.
    The raw values are -d rho00/dt per unit probe amplitude squared.
    """
    grid = np.asarray(probe_freq_grid, dtype=float)
    if corr is None:
        corr = propagator_Q(model, params.T)
    t_final = _default_t_final(params) if t_final is None else t_final
    raw = np.empty(grid.size)
    for i, w in enumerate(grid):
        me = PolaronMasterEquation(corr, params, w, coarse_dt=coarse_dt,
                                   memory_time=memory_time, variant=variant)
        raw[i] = me.integrate(t_final).absorption_rate(rtol=rtol)
    peak = float(np.max(np.abs(raw))) or 1.0
    meta = {"model": _model_dict(model), "params": params.as_dict(), "oracle": "master_equation",
            "variant": variant, "t_final": t_final}
    kind = "oracle_absorption"
    return Spectrum(grid, raw / peak, kind, fingerprint(model, params, kind), peak, meta)
