"""Brute-force reference evaluations for a-posteriori certification.

Every optimizing norm in this toolkit is a heuristic maximization; these
oracles recompute the same quantities by dense enumeration (time grids,
frequency grids, right-half-plane rectangles, sampled inputs) so results
can be certified independently of the search path.  Each oracle returns
(value, uncertainty) where the uncertainty is a conservative grid-gap
estimate obtained by comparing against a half-resolution pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import OversizeError, PreconditionError
from .norms import _tail_horizon  # shared decay-envelope horizon
from .statespace import StateSpace

__all__ = [
    "OracleReport",
    "m0_time_grid",
    "hinf_frequency_grid",
    "kreiss_halfplane_grid",
    "peak_gain_grid",
    "l2_to_peak_sampled",
    "certification_interval",
]

#: systems above this order are refused (dense oracles only)
MAX_ORACLE_ORDER = 12


@dataclass
class OracleReport:
    value: float
    uncertainty: float
    argmax: dict
    grid: dict

    def interval(self):
        return (self.value - self.uncertainty, self.value + self.uncertainty)


def _check_size(sys: StateSpace):
    if sys.n > MAX_ORACLE_ORDER:
        raise OversizeError(
            f"oracle supports n <= {MAX_ORACLE_ORDER}, got {sys.n}")


class _ModalChannel:
    """Residue form G(s) = sum_k R_k / (s - lam_k) for batched evaluation."""

    def __init__(self, sys: StateSpace):
        self.sys = sys
        w, V = np.linalg.eig(sys.A)
        self.ok = np.linalg.cond(V) < 1e8
        self.lam = w
        if self.ok:
            left = sys.C @ V                        # m x n
            right = np.linalg.solve(V, sys.B)       # n x p
            # residues R_k = left[:, k] right[k, :]
            self.res = np.einsum("ik,kj->kij", left, right)

    def sigma_impulse(self, ts: np.ndarray) -> np.ndarray:
        """sigma_max(C e^{At} B) on a time grid."""
        sys = self.sys
        if self.ok:
            E = np.exp(np.outer(ts, self.lam))          # N x n
            M = np.real(np.tensordot(E, self.res, axes=(1, 0)))  # N x m x p
            return np.linalg.svd(M, compute_uv=False)[..., 0]
        out = np.empty(len(ts))
        for k, t in enumerate(ts):
            M = sys.C @ scipy.linalg.expm(sys.A * t) @ sys.B
            out[k] = np.linalg.svd(M, compute_uv=False)[0]
        return out

    def sigma_transfer(self, ss: np.ndarray) -> np.ndarray:
        """sigma_max(C (sI - A)^{-1} B + D) on a batch of complex points."""
        sys = self.sys
        if self.ok:
            W = 1.0 / (ss[:, None] - self.lam[None, :])      # N x n
            G = np.tensordot(W, self.res, axes=(1, 0))       # N x m x p
            if np.any(sys.D):
                G = G + sys.D[None, :, :]
            return np.linalg.svd(G, compute_uv=False)[..., 0]
        eye = np.eye(sys.n)
        out = np.empty(len(ss))
        for k, s in enumerate(ss):
            G = sys.C @ np.linalg.solve(s * eye - sys.A, sys.B) + sys.D
            out[k] = np.linalg.svd(G, compute_uv=False)[0]
        return out


def m0_time_grid(sys: StateSpace, n_grid: int = 200000) -> OracleReport:
    """Dense time-grid maximum of sigma_max(C e^{At} B)."""
    _check_size(sys)
    sys.require_stable("M0 oracle")
    horizon = _tail_horizon(sys.A, 1e-12)
    ts = np.linspace(0.0, horizon, n_grid)
    vals = _ModalChannel(sys).sigma_impulse(ts)
    coarse = np.max(vals[::2])
    value = float(np.max(vals))
    t_star = float(ts[int(np.argmax(vals))])
    unc = 3.0 * abs(value - float(coarse)) + 1e-9 * max(1.0, value)
    return OracleReport(value=value, uncertainty=unc, argmax={"t": t_star},
                        grid={"n": n_grid, "horizon": horizon})


def _frequency_span(sys: StateSpace):
    lam = np.linalg.eigvals(sys.A)
    mags = np.abs(lam)
    lo = max(float(mags.min()) * 1e-4, 1e-9)
    hi = max(float(mags.max()) * 1e4, 10.0)
    return lo, hi


def hinf_frequency_grid(sys: StateSpace, n_grid: int = 100000) -> OracleReport:
    """Dense log-frequency grid maximum of sigma_max(G(j omega))."""
    _check_size(sys)
    sys.require_stable("H-infinity oracle")
    lo, hi = _frequency_span(sys)
    omegas = np.concatenate([[0.0], np.geomspace(lo, hi, n_grid - 1)])
    vals = _ModalChannel(sys).sigma_transfer(1j * omegas)
    value = float(np.max(vals))
    w_star = float(omegas[int(np.argmax(vals))])
    coarse = float(np.max(vals[::2]))
    sigma_d = float(np.linalg.svd(sys.D, compute_uv=False)[0]) if sys.D.size \
        else 0.0
    if sigma_d > value:
        value, w_star = sigma_d, math.inf
    unc = 3.0 * abs(value - coarse) + 1e-9 * max(1.0, value)
    return OracleReport(value=value, uncertainty=unc, argmax={"omega": w_star},
                        grid={"n": n_grid, "span": (lo, hi)})


def kreiss_halfplane_grid(sys: StateSpace, n_x: int = 400,
                          n_omega: int = 2000) -> OracleReport:
    """Dense rectangle in {Re s > 0} for sup Re(s) sigma_max(C(sI-A)^{-1}B).

    Large Re(s) is covered by the sigma_max(CB) limit, large frequencies by
    resolvent decay, so a finite rectangle plus the limit value suffices.
    """
    _check_size(sys)
    sys.require_stable("Kreiss oracle")
    if np.any(sys.D):
        raise PreconditionError("Kreiss oracle needs a strictly proper system")
    lam = np.linalg.eigvals(sys.A)
    alpha = float(np.max(lam.real))
    x_lo = max(1e-6, abs(alpha) * 1e-4)
    x_hi = 1e4 * max(1.0, float(np.abs(lam).max()))
    xs = np.geomspace(x_lo, x_hi, n_x)
    w_hi = 1e2 * max(1.0, float(np.abs(lam.imag).max()) + 1.0)
    omegas = np.concatenate([[0.0], np.geomspace(w_hi * 1e-6, w_hi,
                                                 n_omega - 1)])
    channel = _ModalChannel(sys)
    value = float(np.linalg.svd(sys.C @ sys.B, compute_uv=False)[0])
    arg = {"x": math.inf, "omega": 0.0}
    coarse = value
    for i, x in enumerate(xs):
        vals = x * channel.sigma_transfer(x + 1j * omegas)
        k = int(np.argmax(vals))
        if vals[k] > value:
            value = float(vals[k])
            arg = {"x": float(x), "omega": float(omegas[k])}
        if i % 2 == 0:
            coarse = max(coarse, float(np.max(vals[::2])))
    unc = 3.0 * abs(value - coarse) + 1e-9 * max(1.0, value)
    return OracleReport(value=float(value), uncertainty=unc, argmax=arg,
                        grid={"n_x": n_x, "n_omega": n_omega})


def peak_gain_grid(sys: StateSpace, n_grid: int = 200000) -> OracleReport:
    """Trapezoid integration of |impulse response| entries on a dense grid."""
    _check_size(sys)
    sys.require_stable("peak-gain oracle")
    horizon = _tail_horizon(sys.A, 1e-12)
    ts = np.linspace(0.0, horizon, n_grid)
    w, V = np.linalg.eig(sys.A)
    left = sys.C @ V
    right = np.linalg.solve(V, sys.B)
    rows = np.zeros(sys.m)
    rows_c = np.zeros(sys.m)
    E = np.exp(np.outer(ts, w))
    for i in range(sys.m):
        for j in range(sys.p):
            g = np.real(E @ (left[i, :] * right[:, j]))
            rows[i] += np.trapezoid(np.abs(g), ts)
            rows_c[i] += np.trapezoid(np.abs(g[::2]), ts[::2])
    rows += np.abs(sys.D).sum(axis=1)
    rows_c += np.abs(sys.D).sum(axis=1)
    value = float(rows.max())
    unc = 3.0 * abs(value - float(rows_c.max())) + 1e-9 * max(1.0, value)
    return OracleReport(value=value, uncertainty=unc,
                        argmax={"row": int(np.argmax(rows))},
                        grid={"n": n_grid, "horizon": horizon})


def l2_to_peak_sampled(sys: StateSpace, n_samples: int = 24,
                       seed: int = 0) -> OracleReport:
    """Sampled-input estimate of max over unit-energy w of peak |z(t)|^2.

    Inputs are matched filters B^T e^{A^T (T - t)} C^T v for random output
    directions v (the worst input family), each normalized to unit energy
    and applied over a long window; the peak response energy approaches
    lambda_max(C Q C^T) from below.
    """
    _check_size(sys)
    sys.require_stable("L2-to-peak oracle")
    if np.any(sys.D):
        raise PreconditionError("L2-to-peak oracle needs D = 0")
    rng = np.random.default_rng(seed)
    alpha = abs(float(np.max(np.linalg.eigvals(sys.A).real)))
    T = 40.0 / alpha
    n_t = 4000
    ts = np.linspace(0.0, T, n_t)
    dt = ts[1] - ts[0]
    EA = [scipy.linalg.expm(sys.A * (T - t)) for t in ts]
    best = 0.0
    for _ in range(n_samples):
        v = rng.standard_normal(sys.m)
        v /= np.linalg.norm(v)
        u = np.array([(sys.B.T @ E.T @ sys.C.T @ v) for E in EA])
        energy = np.trapezoid(np.sum(u * u, axis=1), ts)
        if energy <= 0:
            continue
        u /= math.sqrt(energy)
        # z(T) = int_0^T C e^{A (T - t)} B u(t) dt
        z = np.zeros(sys.m)
        for k, E in enumerate(EA):
            wgt = dt if 0 < k < n_t - 1 else dt / 2.0
            z += wgt * (sys.C @ E @ sys.B @ u[k])
        best = max(best, float(z @ z))
    return OracleReport(value=best, uncertainty=0.05 * best + 1e-12,
                        argmax={"horizon": T},
                        grid={"n_samples": n_samples, "n_t": n_t})


def certification_interval(report: OracleReport):
    """(lower, upper) bracket for a NormReport certification field."""
    lo, hi = report.interval()
    return (max(lo, 0.0), hi)
