"""System norms assessing transient behavior of stable LTI systems.

Implements the H-infinity norm (Hamiltonian bisection with midpoint
acceleration), the Kreiss system norm through its parametric H-infinity
representation, the worst-case transient peak M0, entry-wise and
sign-pattern Kreiss variants, the peak-gain (L-infinity induced) norm,
Hankel singular values and the L2-to-peak norm, together with the
sigma_max(CB) lower bound and its attainment test.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from .errors import (
    ConsistencyError,
    EnumerationError,
    NumericalError,
    PreconditionError,
)
from .linalg import solve_lyapunov, spectral_abscissa, svd_triple
from .parallel import ordered_map
from .statespace import StateSpace

__all__ = [
    "NormReport",
    "KreissOptions",
    "M0Options",
    "HankelData",
    "AttainmentCheck",
    "hinf_norm",
    "kreiss_norm",
    "kreiss_matrix",
    "kreiss_family_matrix",
    "transient_peak_m0",
    "cb_lower_bound",
    "attainment_check",
    "entrywise_kreiss",
    "sign_pattern_kreiss",
    "peak_gain",
    "hankel_singular_values",
    "l2_to_peak",
]


@dataclass
class NormReport:
    """Norm value plus where it is attained.

    maximizer keys depend on the norm: "omega" (frequency), "t" (time),
    "eta" (resolvent family parameter), "channel", "sign_pattern", "row".
    certification, when present, is an oracle (lower, upper) pair that must
    bracket value.  evaluations counts inner norm/decomposition calls.
    """

    value: float
    maximizer: dict
    certification: tuple | None = None
    evaluations: int = 0

    def as_dict(self) -> dict:
        out = {"value": self.value, "maximizer": self.maximizer,
               "evaluations": self.evaluations}
        if self.certification is not None:
            out["certification"] = {"lower": self.certification[0],
                                    "upper": self.certification[1]}
        return out


@dataclass
class KreissOptions:
    """Tuning for the outer eta maximization of the Kreiss norm."""

    grid_points: int = 200
    eta_cap: float = 2.0 - 1e-6
    hinf_tol: float = 1e-8
    refine_xtol: float = 1e-7
    max_local_maxima: int = 8
    active_rtol: float = 1e-6
    threads: int = 1


@dataclass
class M0Options:
    """Tuning for the transient-peak time search."""

    samples: int = 1200
    tail_eps: float = 1e-12
    refine_xtol_rel: float = 1e-9


@dataclass
class HankelData:
    W_c: np.ndarray
    W_o: np.ndarray
    sigma: np.ndarray


@dataclass
class AttainmentCheck:
    """Necessary condition for K(G) = sigma_max(CB)."""

    sigma_cb: float
    Y_sym_max: float
    necessary_ok: bool


# ---------------------------------------------------------------------------
# H-infinity norm
# ---------------------------------------------------------------------------

def _gain_at(sys: StateSpace, omega: float) -> float:
    G = sys.transfer(1j * omega)
    return float(np.linalg.svd(G, compute_uv=False)[0]) if G.size else 0.0


def _hamiltonian(sys: StateSpace, gamma: float) -> np.ndarray:
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    p, m = sys.p, sys.m
    R = gamma * gamma * np.eye(p) - D.T @ D
    Rinv = np.linalg.inv(R)
    BR = B @ Rinv
    H11 = A + BR @ D.T @ C
    H12 = BR @ B.T
    H21 = -C.T @ (np.eye(m) + D @ Rinv @ D.T) @ C
    return np.block([[H11, H12], [H21, -H11.T]])


def _probe_frequencies(sys: StateSpace) -> np.ndarray:
    lam = np.linalg.eigvals(sys.A)
    mags = np.abs(lam)
    base = [0.0]
    base.extend(float(abs(v)) for v in lam.imag if abs(v) > 0)
    base.extend(float(v) for v in mags if v > 0)
    lo = max(min(mags) * 1e-3, 1e-8) if mags.size else 1e-4
    hi = max(mags.max() * 1e3, 1.0) if mags.size else 1e4
    base.extend(np.geomspace(lo, hi, 25))
    return np.unique(np.asarray(base))


def hinf_norm(sys: StateSpace, tol: float = 1e-8) -> NormReport:
    """H-infinity norm by imaginary-eigenvalue tests on the Hamiltonian.

    Bisection is accelerated with the standard midpoint update: whenever the
    test level gamma*(1+2*tol) still has imaginary Hamiltonian eigenvalues,
    the gain is re-evaluated at the midpoints of the detected crossing
    frequencies.  The returned value is an attained lower bound within
    relative tol of the true norm; the attaining frequency is reported.
    """
    if tol <= 0:
        raise PreconditionError("tol must be positive")
    sys.require_stable("H-infinity norm")
    evals = 0
    sigma_d = float(np.linalg.svd(sys.D, compute_uv=False)[0]) if sys.D.size else 0.0
    if sys.n == 0 or not np.any(sys.B) or not np.any(sys.C):
        return NormReport(sigma_d, {"omega": math.inf if sigma_d > 0 else 0.0},
                          evaluations=1)

    best = sigma_d
    omega_best = math.inf if sigma_d > 0 else 0.0
    for w in _probe_frequencies(sys):
        g = _gain_at(sys, w)
        evals += 1
        if g > best:
            best, omega_best = g, float(w)
    if best <= 0.0:
        return NormReport(0.0, {"omega": 0.0}, evaluations=evals)

    step = max(tol / 2.0, 1e-12)
    for it in range(200):
        gamma = best * (1.0 + 2.0 * step)
        H = _hamiltonian(sys, gamma)
        w = np.linalg.eigvals(H)
        evals += 1
        scale = 1.0 + np.abs(w).max()
        crossings = np.sort(w.imag[(np.abs(w.real) <= 1e-9 * scale) & (w.imag > 0)])
        if crossings.size == 0:
            return NormReport(float(best), {"omega": float(omega_best)},
                              evaluations=evals)
        candidates = list(crossings)
        candidates.extend(0.5 * (crossings[:-1] + crossings[1:]))
        improved = False
        for wc in candidates:
            g = _gain_at(sys, float(wc))
            evals += 1
            if g > best * (1.0 + 1e-14):
                if g > best:
                    best, omega_best = g, float(wc)
                improved = True
        if not improved:
            # crossings no longer raise the level: gamma already brackets
            return NormReport(float(best), {"omega": float(omega_best)},
                              evaluations=evals)
        if it >= 30:
            # near-singular peaks: widen the bracket so the loop terminates;
            # the value stays an attained gain at a known frequency
            step *= 2.0
    raise NumericalError("H-infinity iteration failed to converge")


# ---------------------------------------------------------------------------
# Kreiss system norm
# ---------------------------------------------------------------------------

def kreiss_family_matrix(A: np.ndarray, eta: float) -> np.ndarray:
    """Shifted/scaled member (eta/(2-eta)) A - I of the resolvent family."""
    c = eta / (2.0 - eta)
    return c * A - np.eye(A.shape[0])


def _golden_max(f, a: float, b: float, xtol: float, max_iter: int = 60):
    """Golden-section maximization; f returns (value, payload)."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, p1 = f(x1)
    f2, p2 = f(x2)
    evals = 2
    while b - a > xtol and evals < max_iter:
        if f1 >= f2:
            b = x2
            x2, f2, p2 = x1, f1, p1
            x1 = b - invphi * (b - a)
            f1, p1 = f(x1)
        else:
            a = x1
            x1, f1, p1 = x2, f2, p2
            x2 = a + invphi * (b - a)
            f2, p2 = f(x2)
        evals += 1
    if f1 >= f2:
        return x1, f1, p1, evals
    return x2, f2, p2, evals


def _strictly_proper_channel(sys: StateSpace, what: str) -> None:
    if np.any(sys.D):
        raise PreconditionError(f"{what} requires a strictly proper system (D = 0)")


def _eta_grid(n_points: int, cap: float) -> np.ndarray:
    u = np.linspace(0.0, 1.0, n_points)
    eta = 1.0 - np.cos(math.pi * u)
    eta = np.clip(eta, 0.0, cap)
    return np.unique(eta)


def kreiss_norm(sys: StateSpace, opts: KreissOptions | None = None) -> NormReport:
    """Kreiss system norm sup_{Re s > 0} Re(s) sigma_max(C (sI-A)^{-1} B).

    Computed as the maximum over eta in [0, 2) of the H-infinity norm of
    (eta/(2-eta) A - I, B, C): a coarse endpoint-clustered grid locates the
    local maxima, each of which is refined by golden section.  The
    maximizer records the active eta, the inner peak frequency and every
    near-active grid point.
    """
    opts = opts or KreissOptions()
    _strictly_proper_channel(sys, "Kreiss norm")
    sys.require_stable("Kreiss norm")
    sigma_cb = cb_lower_bound(sys)
    evals = 0

    def value_at(eta: float):
        fam = StateSpace(kreiss_family_matrix(sys.A, eta), sys.B, sys.C)
        rep = hinf_norm(fam, tol=opts.hinf_tol)
        return rep.value, rep.maximizer["omega"]

    grid = _eta_grid(opts.grid_points, opts.eta_cap)
    results = ordered_map(value_at, grid, threads=opts.threads)
    vals = np.array([r[0] for r in results])
    omegas = [r[1] for r in results]
    evals += len(grid)

    order = np.argsort(vals)[::-1]
    local_max = []
    for i in range(len(grid)):
        left_ok = i == 0 or vals[i] >= vals[i - 1]
        right_ok = i == len(grid) - 1 or vals[i] >= vals[i + 1]
        if left_ok and right_ok:
            local_max.append(i)
    local_max.sort(key=lambda i: -vals[i])
    local_max = local_max[: opts.max_local_maxima]

    best_val = float(vals[order[0]])
    best_eta = float(grid[order[0]])
    best_omega = float(omegas[order[0]])
    refined = []
    for i in local_max:
        a = grid[i - 1] if i > 0 else grid[0]
        b = grid[i + 1] if i < len(grid) - 1 else grid[-1]
        if b - a <= opts.refine_xtol:
            refined.append((float(grid[i]), float(vals[i]), float(omegas[i])))
            continue
        eta_r, val_r, om_r, used = _golden_max(value_at, float(a), float(b),
                                               xtol=opts.refine_xtol)
        evals += used
        refined.append((eta_r, val_r, om_r))
        if val_r > best_val:
            best_val, best_eta, best_omega = val_r, eta_r, om_r

    actives = [
        {"eta": e, "value": v, "omega": om}
        for e, v, om in sorted(
            set(refined) | {(float(grid[i]), float(vals[i]), float(omegas[i]))
                            for i in local_max},
            key=lambda t: t[0])
        if v >= (1.0 - opts.active_rtol) * best_val
    ]

    tol_floor = 10 * opts.hinf_tol * max(1.0, sigma_cb) + 1e-12
    if best_val < sigma_cb - tol_floor:
        raise ConsistencyError(
            f"Kreiss value {best_val:.6g} fell below the sigma_max(CB) lower "
            f"bound {sigma_cb:.6g}")
    best_val = max(best_val, sigma_cb)
    return NormReport(best_val,
                      {"eta": best_eta, "omega": best_omega, "actives": actives},
                      evaluations=evals)


def kreiss_matrix(A, opts: KreissOptions | None = None) -> NormReport:
    """Kreiss constant of a matrix: the system norm with B = C = I."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    eye = np.eye(A.shape[0])
    return kreiss_norm(StateSpace(A, eye, eye), opts)


# ---------------------------------------------------------------------------
# Worst-case transient peak M0
# ---------------------------------------------------------------------------

class _ImpulseChannel:
    """Evaluates C e^{At} B, channel entries and exact segment integrals.

    Uses the eigendecomposition fast path when A is comfortably
    diagonalizable and falls back to expm otherwise.
    """

    def __init__(self, sys: StateSpace):
        self.sys = sys
        A = sys.A
        self.n = A.shape[0]
        w, V = np.linalg.eig(A)
        self.diagonalizable = (np.linalg.cond(V) < 1e8)
        if self.diagonalizable:
            self.lam = w
            self.left = sys.C @ V                      # m x n
            self.right = np.linalg.solve(V, sys.B)     # n x p
        self.Ainv = np.linalg.inv(A) if self.n else None

    def matrix_at(self, t: float) -> np.ndarray:
        if self.diagonalizable:
            return np.real(self.left @ (np.exp(self.lam * t)[:, None] * self.right))
        return self.sys.C @ scipy.linalg.expm(self.sys.A * t) @ self.sys.B

    def sigma_at(self, t: float) -> float:
        M = self.matrix_at(t)
        return float(np.linalg.svd(M, compute_uv=False)[0]) if M.size else 0.0

    def entry_residues(self, i: int, j: int) -> np.ndarray:
        return self.left[i, :] * self.right[:, j]

    def entry_at(self, i: int, j: int, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        r = self.entry_residues(i, j)
        return np.real(np.exp(np.outer(t, self.lam)) @ r)

    def entry_integral(self, i: int, j: int, t1: float, t2) -> float:
        """Exact integral of c_i e^{At} b_j over [t1, t2]; t2 = inf allowed."""
        if self.diagonalizable:
            r = self.entry_residues(i, j)
            hi = 0.0 if np.isinf(t2) else np.exp(self.lam * t2)
            lo = np.exp(self.lam * t1)
            return float(np.real(np.sum(r * (hi - lo) / self.lam)))
        E1 = scipy.linalg.expm(self.sys.A * t1)
        E2 = (np.zeros_like(E1) if np.isinf(t2)
              else scipy.linalg.expm(self.sys.A * t2))
        M = self.Ainv @ (E2 - E1)
        return float((self.sys.C[i:i + 1, :] @ M @ self.sys.B[:, j:j + 1])[0, 0])


def _decay_envelope(A: np.ndarray):
    """t -> bound on ||e^{At}||_2 from the Schur form: e^{at} sum (nu t)^k/k!."""
    alpha = spectral_abscissa(A)
    T, _ = scipy.linalg.schur(A.astype(complex), output="complex")
    N = np.triu(T, 1)
    nu = float(np.linalg.norm(N, 2))
    n = A.shape[0]

    def env(t: float) -> float:
        s, term = 1.0, 1.0
        for k in range(1, n):
            term *= nu * t / k
            s += term
        return math.exp(alpha * t) * s

    return env, alpha


def _tail_horizon(A: np.ndarray, tail_eps: float) -> float:
    env, alpha = _decay_envelope(A)
    if alpha >= 0:
        raise PreconditionError("horizon needs a Hurwitz matrix")
    t = 1.0 / abs(alpha)
    for _ in range(200):
        if env(t) <= tail_eps:
            break
        t *= 1.6
    return t


def transient_peak_m0(sys: StateSpace, opts: M0Options | None = None) -> NormReport:
    """Worst-case transient peak M0(G) = sup_{t>=0} sigma_max(C e^{At} B).

    The horizon is chosen from a Schur-based decay envelope so that the
    remaining tail cannot exceed the sampled maximum; grid maxima are then
    sharpened by golden section.  Ties report the smallest t.
    """
    opts = opts or M0Options()
    _strictly_proper_channel(sys, "transient peak")
    sys.require_stable("transient peak")
    ch = _ImpulseChannel(sys)
    horizon = _tail_horizon(sys.A, opts.tail_eps)
    half = max(opts.samples // 2, 8)
    grid = np.unique(np.concatenate([
        [0.0],
        np.geomspace(horizon * 1e-6, horizon, half),
        np.linspace(0.0, horizon, half),
    ]))
    vals = np.array([ch.sigma_at(t) for t in grid])
    evals = len(grid)

    def at(t: float):
        return ch.sigma_at(t), None

    best_val = float(vals.max())
    best_t = float(grid[int(np.argmax(vals))])
    for i in range(len(grid)):
        left_ok = i == 0 or vals[i] >= vals[i - 1]
        right_ok = i == len(grid) - 1 or vals[i] >= vals[i + 1]
        if not (left_ok and right_ok) or vals[i] < 0.5 * best_val:
            continue
        a = grid[max(i - 1, 0)]
        b = grid[min(i + 1, len(grid) - 1)]
        if b - a <= 0:
            continue
        t_r, v_r, _, used = _golden_max(at, float(a), float(b),
                                        xtol=opts.refine_xtol_rel * horizon)
        evals += used
        if v_r > best_val * (1 + 1e-12) or (
                abs(v_r - best_val) <= 1e-9 * best_val and t_r < best_t):
            best_val, best_t = v_r, t_r
    return NormReport(float(best_val), {"t": float(best_t)}, evaluations=evals)


# ---------------------------------------------------------------------------
# Lower bound and attainment
# ---------------------------------------------------------------------------

def cb_lower_bound(sys: StateSpace) -> float:
    """sigma_max(CB), a lower bound for both the Kreiss norm and M0."""
    CB = sys.C @ sys.B
    return float(np.linalg.svd(CB, compute_uv=False)[0]) if CB.size else 0.0


def attainment_check(sys: StateSpace, tol: float | None = None) -> AttainmentCheck:
    """Necessary condition lambda_max(Y + Y^T) <= 0 for K(G) = sigma_max(CB).

    Y = Q^T (C A B B^T C^T) Q with Q an orthonormal basis of the maximal
    eigenspace of C B B^T C^T.
    """
    CB = sys.C @ sys.B
    triple = svd_triple(CB)
    if triple.sigma_max <= 0.0:
        raise PreconditionError("attainment check requires sigma_max(CB) > 0")
    Q = triple.Q
    Y = Q.T @ (sys.C @ sys.A @ sys.B) @ CB.T @ Q
    y_sym_max = float(np.max(scipy.linalg.eigvalsh(Y + Y.T)))
    if tol is None:
        tol = 1e-8 * (1.0 + abs(y_sym_max))
    return AttainmentCheck(sigma_cb=float(triple.sigma_max),
                           Y_sym_max=y_sym_max,
                           necessary_ok=bool(y_sym_max <= tol))


# ---------------------------------------------------------------------------
# Entry-wise and sign-pattern variants
# ---------------------------------------------------------------------------

def entrywise_kreiss(sys: StateSpace,
                     opts: KreissOptions | None = None) -> NormReport:
    """max over scalar channels (i, k) of the SISO Kreiss norm of (A, b_k, c_i)."""
    _strictly_proper_channel(sys, "entry-wise Kreiss norm")
    sys.require_stable("entry-wise Kreiss norm")
    best = None
    evals = 0
    for i in range(sys.m):
        for k in range(sys.p):
            sub = StateSpace(sys.A, sys.B[:, k:k + 1], sys.C[i:i + 1, :])
            rep = kreiss_norm(sub, opts)
            evals += rep.evaluations
            if best is None or rep.value > best[0]:
                best = (rep.value, (i, k), rep.maximizer)
    value, channel, inner = best
    maximizer = {"channel": list(channel), "eta": inner["eta"],
                 "omega": inner["omega"]}
    return NormReport(float(value), maximizer, evaluations=evals)


def sign_pattern_kreiss(sys: StateSpace,
                        opts: KreissOptions | None = None,
                        max_inputs: int = 16) -> NormReport:
    """max over sign vectors r in {-1,1}^p of the Kreiss norm of (A, B r, C)."""
    _strictly_proper_channel(sys, "sign-pattern Kreiss norm")
    sys.require_stable("sign-pattern Kreiss norm")
    if sys.p > max_inputs:
        raise EnumerationError(
            f"{sys.p} inputs exceed the enumeration bound {max_inputs}")
    best = None
    evals = 0
    # sigma_max is sign-symmetric, so fix the first sign to +1
    for tail in itertools.product((1.0, -1.0), repeat=sys.p - 1):
        r = np.array((1.0,) + tail)
        sub = StateSpace(sys.A, (sys.B @ r).reshape(-1, 1), sys.C)
        rep = kreiss_norm(sub, opts)
        evals += rep.evaluations
        if best is None or rep.value > best[0]:
            best = (rep.value, r, rep.maximizer)
    value, r, inner = best
    maximizer = {"sign_pattern": [int(v) for v in r], "eta": inner["eta"],
                 "omega": inner["omega"]}
    return NormReport(float(value), maximizer, evaluations=evals)


# ---------------------------------------------------------------------------
# Peak-gain norm
# ---------------------------------------------------------------------------

def _abs_impulse_integral(ch: _ImpulseChannel, i: int, j: int,
                          horizon: float, grid: np.ndarray) -> float:
    """integral over [0, inf) of |c_i e^{At} b_j| via exact segment integrals."""
    if ch.diagonalizable:
        vals = ch.entry_at(i, j, grid)
    else:
        vals = np.array([ch.matrix_at(t)[i, j] for t in grid])
    scale = np.abs(vals).max()
    if scale == 0.0:
        return 0.0

    def g(t: float) -> float:
        if ch.diagonalizable:
            return float(ch.entry_at(i, j, np.array([t]))[0])
        return float(ch.matrix_at(t)[i, j])

    zeros = []
    for k in range(len(grid) - 1):
        a, b = vals[k], vals[k + 1]
        if a == 0.0:
            zeros.append(grid[k])
        elif a * b < 0.0:
            zeros.append(brentq(g, grid[k], grid[k + 1], xtol=1e-14 * horizon,
                                rtol=1e-15))
    knots = np.concatenate([[0.0], np.asarray(zeros, dtype=float), [horizon]])
    knots = np.unique(knots)
    total = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        total += abs(ch.entry_integral(i, j, float(a), float(b)))
    total += abs(ch.entry_integral(i, j, float(horizon), math.inf))
    return total


def peak_gain(sys: StateSpace, tol: float = 1e-8) -> NormReport:
    """Peak-to-peak norm: max_i sum_j ||g_ij||_L1 + row sums of |D|.

    Impulse-response entries are integrated exactly between their sign
    changes (resolvent antiderivative) with an exponential tail bound
    choosing the horizon; sign changes are located on an
    oscillation-resolving grid and polished by bisection.
    """
    sys.require_stable("peak-gain norm")
    if sys.n == 0:
        value = float(np.abs(sys.D).sum(axis=1).max())
        return NormReport(value, {"row": 0}, evaluations=1)
    ch = _ImpulseChannel(sys)
    horizon = _tail_horizon(sys.A, min(tol, 1e-10))
    lam = np.linalg.eigvals(sys.A)
    omega_max = float(np.abs(lam.imag).max())
    n_grid = int(max(2000, min(200000, 16 * math.ceil(horizon * omega_max / math.pi)
                               if omega_max > 0 else 0)))
    if not ch.diagonalizable:
        n_grid = min(n_grid, 4000)
    grid = np.linspace(0.0, horizon, n_grid)
    evals = 0
    row_sums = np.zeros(sys.m)
    for i in range(sys.m):
        for j in range(sys.p):
            row_sums[i] += _abs_impulse_integral(ch, i, j, horizon, grid)
            evals += n_grid
    row_sums += np.abs(sys.D).sum(axis=1)
    row = int(np.argmax(row_sums))
    return NormReport(float(row_sums[row]), {"row": row}, evaluations=evals)


# ---------------------------------------------------------------------------
# Gramian-based norms
# ---------------------------------------------------------------------------

def hankel_singular_values(sys: StateSpace) -> HankelData:
    """Hankel singular values: sqrt of eigenvalues of W_c W_o."""
    sys.require_stable("Hankel singular values")
    W_c = solve_lyapunov(sys.A, sys.B @ sys.B.T)
    W_o = solve_lyapunov(sys.A.T, sys.C.T @ sys.C)
    ev = np.linalg.eigvals(W_c @ W_o).real
    ev = np.clip(ev, 0.0, None)
    sigma = np.sqrt(np.sort(ev)[::-1])
    return HankelData(W_c=W_c, W_o=W_o, sigma=sigma)


def l2_to_peak(sys: StateSpace) -> float:
    """lambda_max(C Q C^T) with A Q + Q A^T + B B^T = 0 (finite-energy to peak)."""
    if np.any(sys.D):
        raise PreconditionError("L2-to-peak norm is defined for D = 0 only")
    sys.require_stable("L2-to-peak norm")
    Q = solve_lyapunov(sys.A, sys.B @ sys.B.T)
    return float(np.max(scipy.linalg.eigvalsh(sys.C @ Q @ sys.C.T)))
