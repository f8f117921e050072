"""Dense LMI feasibility and the quadratic-constraint stability machinery.

The engine minimizes the maximum (scaled, margin-shifted) top eigenvalue of
a family of affine symmetric blocks by a proximal spectral bundle method:
cutting planes come from top-eigenvector subgradients, the prox step solves
a small simplex-constrained dual QP, and serious/null steps adapt the prox
parameter.  On top of it sit the structured Lyapunov analysis for lossless
nonlinearities, state-feedback synthesis, output-feedback existence via the
projection lemma, and controller reconstruction from a completed Lyapunov
matrix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionError, PreconditionError
from .linalg import spectral_abscissa
from .loop import ControllerRealization, assemble_closed_loop
from .statespace import StateSpace
from .subgrad import lambda_max_subgradient

__all__ = [
    "LmiBlock",
    "LmiProblem",
    "BundleOptions",
    "FeasibilityResult",
    "QcCertificate",
    "sdp_feasibility",
    "lossless_check",
    "qc_analysis",
    "qc_analysis_closed_loop",
    "sf_synthesis",
    "of_existence",
    "reconstruct_controller",
    "null_space_basis",
]


# ---------------------------------------------------------------------------
# Problem containers
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class LmiBlock:
    """One affine symmetric block F0 + sum_i y_i F_i.

    Feasibility requires lambda_max <= -margin; non-strict blocks use a
    small negative margin so that boundary solutions are accepted.
    """

    F0: np.ndarray
    coeffs: list
    margin: float
    name: str = ""

    def value(self, y: np.ndarray) -> np.ndarray:
        S = self.F0.copy()
        for yi, Fi in zip(y, self.coeffs):
            if yi != 0.0 and Fi is not None:
                S = S + yi * Fi
        return S


@dataclass(eq=False)
class LmiProblem:
    blocks: list
    n_vars: int
    var_names: list = field(default_factory=list)

    def __post_init__(self):
        for blk in self.blocks:
            blk.F0 = _sym(blk.F0)
            if len(blk.coeffs) != self.n_vars:
                raise DimensionError("coefficient count must match variables")
            blk.coeffs = [None if F is None else _sym(F) for F in blk.coeffs]

    def dimension(self) -> int:
        return sum(b.F0.shape[0] for b in self.blocks)

    def to_json(self) -> str:
        payload = {
            "n_vars": self.n_vars,
            "var_names": list(self.var_names),
            "blocks": [
                {
                    "name": b.name,
                    "margin": b.margin,
                    "F0": b.F0.tolist(),
                    "coeffs": [None if F is None else F.tolist()
                               for F in b.coeffs],
                }
                for b in self.blocks
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LmiProblem":
        payload = json.loads(text)
        blocks = [
            LmiBlock(
                F0=np.asarray(b["F0"], dtype=float),
                coeffs=[None if F is None else np.asarray(F, dtype=float)
                        for F in b["coeffs"]],
                margin=float(b["margin"]),
                name=b.get("name", ""),
            )
            for b in payload["blocks"]
        ]
        return cls(blocks=blocks, n_vars=int(payload["n_vars"]),
                   var_names=list(payload.get("var_names", [])))


def _sym(M) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise DimensionError("LMI blocks must be square")
    if not np.allclose(M, M.T, atol=1e-10 * (1.0 + np.abs(M).max())):
        raise DimensionError("LMI blocks must be symmetric")
    return 0.5 * (M + M.T)


def strict_margin(F0) -> float:
    """Default strictness margin 1e-7 of the constant-block scale."""
    return 1e-7 * max(1.0, float(np.linalg.norm(np.atleast_2d(F0), 2)))


# ---------------------------------------------------------------------------
# Spectral bundle engine
# ---------------------------------------------------------------------------

@dataclass
class BundleOptions:
    max_iter: int = 4000
    rounds: int = 4
    bundle_size: int = 40
    prox_t: float = 1.0
    t_min: float = 1e-9
    t_max: float = 1e7
    serious_frac: float = 0.1
    stat_tol: float = 1e-10
    interior_push: float = 0.02
    box_limit: float = 1e8
    cuts_per_eval: int = 3


@dataclass
class FeasibilityResult:
    status: str                 # "feasible" | "infeasible" | "indeterminate"
    y: np.ndarray
    margin: float               # max over blocks of lambda_max(S_b(y))
    block_values: dict
    iterations: int

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(v) + 1)
    cond = u - css / idx > 0
    rho = idx[cond][-1]
    tau = css[rho - 1] / rho
    return np.clip(v - tau, 0.0, None)


def _solve_prox_dual(cuts_c, cuts_g, center, t):
    """max over the simplex of sum l_j (c_j + g_j.center) - t/2 |G l|^2.

    Solved by FISTA with restart; the bundle stays small so this dominates
    nothing.
    """
    b = cuts_c + cuts_g @ center
    gram = cuts_g @ cuts_g.T
    J = len(b)
    lam = np.full(J, 1.0 / J)
    lip = t * max(np.linalg.norm(gram, 2), 1e-300) + 1e-300
    z = lam.copy()
    theta_m = 1.0
    for _ in range(2000):
        grad = t * (gram @ z) - b
        new = _project_simplex(z - grad / lip)
        theta_p = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta_m ** 2))
        z = new + ((theta_m - 1.0) / theta_p) * (new - lam)
        if (new - lam) @ grad > 0:  # restart on non-monotone step
            z = new
            theta_p = 1.0
        moved = np.max(np.abs(new - lam))
        lam = new
        theta_m = theta_p
        if moved < 1e-14:
            break
    return lam


class _MaxEigObjective:
    """f(y) = max over blocks of (lambda_max(S_b(y)) + margin_b)/scale_b."""

    def __init__(self, problem: LmiProblem):
        self.problem = problem
        self.scales = [max(1.0, float(np.linalg.norm(b.F0, 2)))
                       for b in problem.blocks]

    def __call__(self, y):
        worst = -math.inf
        cuts = []
        raw = {}
        for blk, scale in zip(self.problem.blocks, self.scales):
            S = blk.value(y)
            val, V = lambda_max_subgradient(S)
            raw[blk.name or f"block{len(raw)}"] = val
            shifted = (val + blk.margin) / scale
            for col in range(min(V.shape[1], 3)):
                v = V[:, col]
                g = np.array([
                    0.0 if F is None else float(v @ F @ v)
                    for F in blk.coeffs]) / scale
                lam_v = float(v @ S @ v)
                cuts.append(((lam_v + blk.margin) / scale, g))
            worst = max(worst, shifted)
        return worst, cuts, raw


def _gradient_scales(problem: LmiProblem, block_scales) -> np.ndarray:
    """Per-variable gradient magnitudes max_b ||F_{b,i}|| / scale_b."""
    s = np.zeros(problem.n_vars)
    for blk, bs in zip(problem.blocks, block_scales):
        for i, F in enumerate(blk.coeffs):
            if F is not None:
                s[i] = max(s[i], float(np.linalg.norm(F, 2)) / bs)
    s[s == 0.0] = 1.0
    return s


def _bundle_round(obj, y_start, mags, opts: BundleOptions, max_iter: int):
    """One proximal bundle run in magnitude-normalized variables u = y/mags.

    Returns (status, y_best, f_best, raw_best, iterations); status
    "infeasible" here only means the round reached model stationarity at a
    positive value.
    """
    def obj_u(u):
        worst, cuts, raw = obj(u * mags)
        cuts = [(c, g * mags) for c, g in cuts]
        return worst, cuts, raw

    center = np.asarray(y_start, dtype=float) / mags
    f_center, cuts, raw_center = obj_u(center)
    best_u, best_f, best_raw = center.copy(), f_center, raw_center
    cuts_c = np.array([c - g @ center for c, g in cuts])
    cuts_g = np.array([g for _, g in cuts])
    t = opts.prox_t
    status = "indeterminate"
    it = 0
    stall = 0
    for it in range(1, max_iter + 1):
        if best_f <= -opts.interior_push:
            status = "feasible"
            break
        lam = _solve_prox_dual(cuts_c, cuts_g, center, t)
        step = -t * (lam @ cuts_g)
        u_new = np.clip(center + step, -opts.box_limit, opts.box_limit)
        model_val = float(np.max(cuts_c + cuts_g @ u_new))
        delta = f_center - model_val
        if delta <= opts.stat_tol * max(1.0, abs(f_center)):
            stall += 1
            if stall >= 6:
                status = "feasible" if best_f <= 0 else "infeasible"
                break
            t = min(t * 25.0, opts.t_max * 1e3)
            continue
        stall = 0
        f_new, new_cuts, raw_new = obj_u(u_new)
        if f_new < best_f:
            best_u, best_f, best_raw = u_new.copy(), f_new, raw_new
        # aggregate cut keeps convergence after pruning
        agg_c = float(lam @ cuts_c)
        agg_g = lam @ cuts_g
        add_c = [agg_c] + [c - g @ u_new for c, g in new_cuts[:opts.cuts_per_eval]]
        add_g = [agg_g] + [g for _, g in new_cuts[:opts.cuts_per_eval]]
        cuts_c = np.concatenate([cuts_c, add_c])
        cuts_g = np.vstack([cuts_g, add_g])
        if len(cuts_c) > opts.bundle_size:
            keep = len(cuts_c) - opts.bundle_size
            cuts_c = cuts_c[keep:]
            cuts_g = cuts_g[keep:]
        if f_new <= f_center - opts.serious_frac * delta:
            center, f_center = u_new, f_new
            t = min(t * 1.4, opts.t_max)
        else:
            t = max(t * 0.55, opts.t_min)
    else:
        status = "feasible" if best_f <= 0 else "indeterminate"
    if status == "indeterminate" and best_f <= 0:
        status = "feasible"
    return status, best_u * mags, best_f, best_raw, it


def sdp_feasibility(problem: LmiProblem, y0=None,
                    opts: BundleOptions | None = None) -> FeasibilityResult:
    """Decide feasibility of {y : every block has lambda_max <= -margin}.

    Runs the proximal spectral bundle in magnitude-normalized variables,
    rescaling between rounds to the magnitudes the iterates actually
    reached (long ill-scaled valleys are walked in O(1) steps after one
    round).  Feasible when the worst shifted block value drops below zero;
    infeasible when a round is model-stationary at a positive value without
    having moved; indeterminate at the iteration cap.
    """
    opts = opts or BundleOptions()
    n = problem.n_vars
    if problem.dimension() > 200:
        raise PreconditionError("LMI engine is limited to small dense problems")
    obj = _MaxEigObjective(problem)
    if n == 0:
        worst, _, raw = obj(np.zeros(0))
        status = "feasible" if worst <= 0 else "infeasible"
        return FeasibilityResult(status, np.zeros(0), max(raw.values()),
                                 raw, 0)

    grad_scales = _gradient_scales(problem, obj.scales)
    y_cur = np.zeros(n) if y0 is None else np.asarray(y0, dtype=float).copy()
    mags = np.maximum(1.0 / grad_scales, np.abs(y_cur))
    per_round = max(200, opts.max_iter // max(opts.rounds, 1))
    total_it = 0
    status, y_best, f_best, raw_best = "indeterminate", y_cur, np.inf, {}
    for rnd in range(opts.rounds):
        status, y_r, f_r, raw_r, it = _bundle_round(obj, y_cur, mags, opts,
                                                    per_round)
        total_it += it
        if f_r < f_best:
            y_best, f_best, raw_best = y_r, f_r, raw_r
        if status == "feasible":
            break
        moved = float(np.max(np.abs(y_r - y_cur) / (1.0 + np.abs(y_cur))))
        y_cur = y_r
        if status == "infeasible" and moved < 1e-2:
            break
        if status == "infeasible":
            status = "indeterminate"
        mags = np.maximum(mags, 2.0 * np.abs(y_cur))
    margin = max(raw_best.values()) if raw_best else np.inf
    return FeasibilityResult(status=status, y=y_best, margin=float(margin),
                             block_values=raw_best, iterations=total_it)


# ---------------------------------------------------------------------------
# Structured Lyapunov (QC) analysis
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class QcCertificate:
    """Certificate for A_cl^T X_cl + X_cl A_cl + eps X_cl < 0 with the
    partition X_cl = [[X, 0, X13], [0, I, 0], [X13^T, 0, X33]]."""

    X_cl: np.ndarray | None
    epsilon: float
    status: str
    margin: float
    partition: tuple

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


def _sym_basis(d):
    """Symmetric basis matrices for a d x d block."""
    out = []
    for i in range(d):
        for j in range(i, d):
            E = np.zeros((d, d))
            E[i, j] = E[j, i] = 1.0
            out.append(E)
    return out


def _qc_variables(partition):
    """Embedding matrices for the free entries of the structured X_cl."""
    d1, d2, d3 = partition
    dim = d1 + d2 + d3
    mats = []
    names = []
    for E in _sym_basis(d1):
        M = np.zeros((dim, dim))
        M[:d1, :d1] = E
        mats.append(M)
        names.append("X")
    for i in range(d1):
        for j in range(d3):
            M = np.zeros((dim, dim))
            M[i, d1 + d2 + j] = M[d1 + d2 + j, i] = 1.0
            mats.append(M)
            names.append("X13")
    for E in _sym_basis(d3):
        M = np.zeros((dim, dim))
        M[d1 + d2:, d1 + d2:] = E
        mats.append(M)
        names.append("X33")
    const = np.zeros((dim, dim))
    const[d1:d1 + d2, d1:d1 + d2] = np.eye(d2)
    return const, mats, names


def qc_problem(A_cl: np.ndarray, partition, epsilon: float) -> LmiProblem:
    """LMI problem for the reduced structured Lyapunov inequality."""
    A_cl = np.atleast_2d(np.asarray(A_cl, dtype=float))
    d1, d2, d3 = partition
    if d1 + d2 + d3 != A_cl.shape[0]:
        raise DimensionError("partition does not match A_cl")
    const, mats, names = _qc_variables(partition)

    def lyap(M):
        return A_cl.T @ M + M @ A_cl + epsilon * M

    blk_stab = LmiBlock(F0=lyap(const), coeffs=[lyap(M) for M in mats],
                        margin=strict_margin(lyap(const)), name="lyapunov")
    blk_pd = LmiBlock(F0=-const, coeffs=[-M for M in mats],
                      margin=1e-8, name="positivity")
    return LmiProblem(blocks=[blk_stab, blk_pd], n_vars=len(mats),
                      var_names=names)


def _qc_assemble_X(partition, y):
    const, mats, _ = _qc_variables(partition)
    X = const.copy()
    for yi, M in zip(y, mats):
        X += yi * M
    return X


def _qc_warm_start(A_cl, partition, epsilon):
    """Project the unstructured Lyapunov solution onto the X_cl structure.

    Solves (A_cl + eps/2 I)^T P + P (A_cl + eps/2 I) = -I, rescales so the
    pinned middle block has unit trace average, and keeps only the
    structured entries.  For lossless channels this usually lands inside
    the feasible set already; it always fixes the variable magnitudes.
    """
    d1, d2, d3 = partition
    y0 = []
    for i in range(d1):
        for j in range(i, d1):
            y0.append(1.0 if i == j else 0.0)
    y0.extend([0.0] * (d1 * d3))
    for i in range(d3):
        for j in range(i, d3):
            y0.append(1.0 if i == j else 0.0)
    y0 = np.asarray(y0)
    if spectral_abscissa(A_cl) >= -0.5 * epsilon:
        return y0
    dim = A_cl.shape[0]
    shifted = A_cl + 0.5 * epsilon * np.eye(dim)
    try:
        P = scipy.linalg.solve_continuous_lyapunov(shifted.T, -np.eye(dim))
    except scipy.linalg.LinAlgError:
        return y0
    P = 0.5 * (P + P.T)
    mid = P[d1:d1 + d2, d1:d1 + d2]
    trace = float(np.trace(mid))
    if trace <= 0:
        return y0
    P = P * (d2 / trace)
    vals = []
    for i in range(d1):
        for j in range(i, d1):
            vals.append(P[i, j])
    for i in range(d1):
        for j in range(d3):
            vals.append(P[i, d1 + d2 + j])
    for i in range(d3):
        for j in range(i, d3):
            vals.append(P[d1 + d2 + i, d1 + d2 + j])
    return np.asarray(vals)


def qc_analysis(A_cl, partition, epsilon: float = 1e-3,
                opts: BundleOptions | None = None) -> QcCertificate:
    """Global-stability certificate for a lossless nonlinearity channel.

    partition = (n - n_phi, n_phi, n_K) orders the states as (states not
    driven by the nonlinearity | driven states | controller states); the
    middle Lyapunov block is pinned to the identity.
    """
    A_cl = np.atleast_2d(np.asarray(A_cl, dtype=float))
    problem = qc_problem(A_cl, partition, epsilon)
    y0 = _qc_warm_start(A_cl, partition, epsilon)
    res = sdp_feasibility(problem, y0=y0, opts=opts)
    if not res.feasible:
        return QcCertificate(X_cl=None, epsilon=epsilon, status=res.status,
                             margin=res.margin, partition=tuple(partition))
    X_cl = _qc_assemble_X(partition, res.y)
    A_cl = np.atleast_2d(np.asarray(A_cl, dtype=float))
    resid = A_cl.T @ X_cl + X_cl @ A_cl + epsilon * X_cl
    margin = float(np.max(scipy.linalg.eigvalsh(resid)))
    return QcCertificate(X_cl=X_cl, epsilon=epsilon, status="feasible",
                         margin=margin, partition=tuple(partition))


def qc_analysis_closed_loop(model, controller: ControllerRealization,
                            epsilon: float = 1e-3,
                            opts: BundleOptions | None = None) -> QcCertificate:
    """qc_analysis for a benchmark model closed with a controller.

    The model supplies (A, B_u, C_y, B_w, n_phi); states are permuted so
    that the nonlinearity-driven block sits in the middle of the partition.
    """
    plant = StateSpace(model.A, model.B_u, model.C_y)
    cl = assemble_closed_loop(plant, controller, B_w=model.B_w)
    perm = _losslessness_permutation(model.B_w, cl.n_K)
    A_p = cl.A_cl[np.ix_(perm, perm)]
    n = model.A.shape[0]
    partition = (n - model.n_phi, model.n_phi, cl.n_K)
    return qc_analysis(A_p, partition, epsilon=epsilon, opts=opts)


def _losslessness_permutation(B_w, n_K):
    """State order (undriven | driven-by-w | controller)."""
    B_w = np.atleast_2d(np.asarray(B_w, dtype=float))
    n = B_w.shape[0]
    driven = [i for i in range(n) if np.any(B_w[i, :])]
    undriven = [i for i in range(n) if i not in driven]
    return undriven + driven + [n + k for k in range(n_K)]


def lossless_check(model, samples: int = 100000, seed: int = 0,
                   radius: float = 100.0):
    """max over random states of |x^T B_w phi(x)|, raw and relative.

    Sampling is falsification-only: a zero maximum is evidence of the
    lossless identity, not a proof.
    """
    rng = np.random.default_rng(seed)
    n = model.A.shape[0]
    max_abs = 0.0
    max_rel = 0.0
    for _ in range(samples):
        x = rng.uniform(-radius, radius, size=n)
        w = model.phi(x)
        inner = float(x @ model.B_w @ w)
        denom = float(np.linalg.norm(x) * np.linalg.norm(model.B_w @ w)) + 1e-300
        max_abs = max(max_abs, abs(inner))
        max_rel = max(max_rel, abs(inner) / denom)
    return max_abs, max_rel


# ---------------------------------------------------------------------------
# State-feedback synthesis (lossless channel)
# ---------------------------------------------------------------------------

def _diagY_embed(n, d1):
    """Variable embedding for diag(Y, I_{n-d1}) with Y symmetric d1 x d1."""
    mats = []
    for E in _sym_basis(d1):
        M = np.zeros((n, n))
        M[:d1, :d1] = E
        mats.append(M)
    const = np.zeros((n, n))
    const[d1:, d1:] = np.eye(n - d1)
    return const, mats


def sf_synthesis(A, B, n_phi: int, epsilon: float = 1e-3,
                 opts: BundleOptions | None = None):
    """State-feedback gain certifying the structured Lyapunov inequality.

    Solves A Ytil + B W + (.)^T < -eps Ytil over Ytil = diag(Y, I_{n_phi}),
    Y > 0 and W, then returns K = W Ytil^{-1} together with (Y, W).  The
    returned gain is re-verified through qc_analysis on A + B K.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n = A.shape[0]
    p = B.shape[1]
    d1 = n - n_phi
    if d1 < 0:
        raise DimensionError("n_phi exceeds the state dimension")
    constY, matsY = _diagY_embed(n, d1)
    n_y = len(matsY)
    n_w = p * n
    n_vars = n_y + n_w

    def wmat(idx):
        W = np.zeros((p, n))
        W[idx // n, idx % n] = 1.0
        return W

    F0 = A @ constY + constY @ A.T + epsilon * constY
    coeffs = []
    for M in matsY:
        coeffs.append(A @ M + M @ A.T + epsilon * M)
    for k in range(n_w):
        BW = B @ wmat(k)
        coeffs.append(BW + BW.T)
    blk_main = LmiBlock(F0=_sym(F0), coeffs=coeffs,
                        margin=strict_margin(F0), name="sf")
    blk_pd = LmiBlock(F0=-constY, coeffs=[-M for M in matsY] + [None] * n_w,
                      margin=1e-8, name="Y_pd")
    problem = LmiProblem(blocks=[blk_main, blk_pd], n_vars=n_vars)
    y0 = np.zeros(n_vars)
    at = 0
    for i in range(d1):
        for j in range(i, d1):
            y0[at] = 1.0 if i == j else 0.0
            at += 1
    res = sdp_feasibility(problem, y0=y0, opts=opts)
    if not res.feasible:
        return None, res
    Ytil = constY.copy()
    for yi, M in zip(res.y[:n_y], matsY):
        Ytil += yi * M
    W = res.y[n_y:].reshape(p, n)
    K = W @ np.linalg.inv(Ytil)
    return K, res


# ---------------------------------------------------------------------------
# Output-feedback existence and reconstruction
# ---------------------------------------------------------------------------

def null_space_basis(M, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of the null space of M via SVD."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0 or not np.any(M):
        return np.eye(M.shape[1])
    U, s, Vh = np.linalg.svd(M)
    rank = int(np.sum(s > rtol * s[0]))
    return Vh[rank:, :].T


@dataclass(eq=False)
class OfExistence:
    X: np.ndarray
    Y: np.ndarray
    max_order: int
    status: str

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


def of_existence(A, B, C, n_phi: int, epsilon: float = 1e-3,
                 opts: BundleOptions | None = None) -> OfExistence:
    """Projection-lemma solvability of the structured output-feedback LMIs.

    Returns symmetric (X, Y) blocks of size n - n_phi satisfying the two
    null-space-projected inequalities and the coupling [[X, I], [I, Y]] >= 0;
    max_order = rank(I - Y X) bounds the certifiable controller order.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = A.shape[0]
    d1 = n - n_phi
    if d1 < 0:
        raise DimensionError("n_phi exceeds the state dimension")
    N_C = null_space_basis(C)
    N_B = null_space_basis(B.T)
    constX, matsX = _diagY_embed(n, d1)
    n_each = len(matsX)
    n_vars = 2 * n_each

    blocks = []

    def add_projected(N, transpose, offset, name):
        if N.shape[1] == 0:
            return
        if transpose:
            base = A.T @ constX + constX @ A + epsilon * constX
            cf = [A.T @ M + M @ A + epsilon * M for M in matsX]
        else:
            base = A @ constX + constX @ A.T + epsilon * constX
            cf = [A @ M + M @ A.T + epsilon * M for M in matsX]
        F0 = N.T @ base @ N
        coeffs = [None] * n_vars
        for k, Mc in enumerate(cf):
            coeffs[offset + k] = N.T @ Mc @ N
        blocks.append(LmiBlock(F0=_sym(F0), coeffs=coeffs,
                               margin=strict_margin(F0), name=name))

    add_projected(N_C, True, 0, "proj_X")
    add_projected(N_B, False, n_each, "proj_Y")

    if d1 > 0:
        dim = 2 * d1
        F0 = np.zeros((dim, dim))
        F0[:d1, d1:] = np.eye(d1)
        F0[d1:, :d1] = np.eye(d1)
        coeffs = [None] * n_vars
        for k, E in enumerate(_sym_basis(d1)):
            MX = np.zeros((dim, dim))
            MX[:d1, :d1] = E
            MY = np.zeros((dim, dim))
            MY[d1:, d1:] = E
            coeffs[k] = -MX
            coeffs[n_each + k] = -MY
        blocks.append(LmiBlock(F0=-F0, coeffs=coeffs, margin=-1e-9,
                               name="coupling"))

    problem = LmiProblem(blocks=blocks, n_vars=n_vars)
    y0 = np.zeros(n_vars)
    at = 0
    for i in range(d1):
        for j in range(i, d1):
            val = 2.0 if i == j else 0.0
            y0[at] = val
            y0[n_each + at] = val
            at += 1
    res = sdp_feasibility(problem, y0=y0, opts=opts)

    def unpackXY(y, offset):
        M = np.zeros((d1, d1))
        at = offset
        for i in range(d1):
            for j in range(i, d1):
                M[i, j] = M[j, i] = y[at]
                at += 1
        return M

    X = unpackXY(res.y, 0)
    Y = unpackXY(res.y, n_each)
    if d1 == 0:
        max_order = 0
    else:
        s = np.linalg.svd(np.eye(d1) - Y @ X, compute_uv=False)
        max_order = int(np.sum(s > 1e-7 * max(1.0, s[0])))
    return OfExistence(X=X, Y=Y, max_order=max_order, status=res.status)


def _theta_hat_matrices(A, B, C, n_K):
    """A_cl = Ahat + Bhat Theta Chat for Theta = [[A_K, B_K], [C_K, D_K]]."""
    n = A.shape[0]
    p = B.shape[1]
    m = C.shape[0]
    Ahat = np.block([[A, np.zeros((n, n_K))],
                     [np.zeros((n_K, n)), np.zeros((n_K, n_K))]])
    Bhat = np.block([[np.zeros((n, n_K)), B],
                     [np.eye(n_K), np.zeros((n_K, p))]])
    Chat = np.block([[np.zeros((n_K, n)), np.eye(n_K)],
                     [C, np.zeros((m, n_K))]])
    return Ahat, Bhat, Chat


def reconstruct_controller(A, B, C, X, Y, n_K: int, epsilon: float = 1e-3,
                           n_phi: int | None = None,
                           opts: BundleOptions | None = None):
    """Controller from feasible (X, Y): complete X_cl, solve the Theta LMI.

    X_cl = [[Xtil, L], [L^T, I]] with L L^T = Xtil - Ytil^{-1} (rank <= n_K
    required); with X_cl fixed the Lyapunov inequality is linear in
    Theta = [[A_K, B_K], [C_K, D_K]] and is solved by sdp_feasibility.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n = A.shape[0]
    d1 = X.shape[0]
    if n_phi is None:
        n_phi = n - d1
    if d1 != n - n_phi or Y.shape[0] != d1:
        raise DimensionError("X/Y blocks do not match n - n_phi")

    Xtil = scipy.linalg.block_diag(X, np.eye(n_phi)) if d1 else np.eye(n)
    Ytil = scipy.linalg.block_diag(Y, np.eye(n_phi)) if d1 else np.eye(n)
    S = Xtil - np.linalg.inv(Ytil)
    w, V = scipy.linalg.eigh(_sym(S))
    w = w[::-1]
    V = V[:, ::-1]
    tol = 1e-7 * max(1.0, abs(w[0]) if len(w) else 1.0)
    rank = int(np.sum(w > tol))
    if rank > n_K:
        raise PreconditionError(
            f"rank(Xtil - Ytil^-1) = {rank} exceeds requested order {n_K}")
    L = V[:, :n_K] * np.sqrt(np.clip(w[:n_K], 0.0, None))
    if n_K:
        X_cl = np.block([[Xtil, L], [L.T, np.eye(n_K)]])
    else:
        X_cl = Xtil
    # fixed X_cl: Psi + P^T Theta Q + Q^T Theta^T P < 0, linear in Theta
    Ahat, Bhat, Chat = _theta_hat_matrices(A, B, C, n_K)
    Psi = Ahat.T @ X_cl + X_cl @ Ahat + epsilon * X_cl
    P = Bhat.T @ X_cl
    Q = Chat
    p = B.shape[1]
    m = C.shape[0]
    rows = n_K + p
    cols = n_K + m
    coeffs = []
    for r in range(rows):
        for c in range(cols):
            E = np.zeros((rows, cols))
            E[r, c] = 1.0
            M = P.T @ E @ Q
            coeffs.append(M + M.T)
    blk = LmiBlock(F0=_sym(Psi), coeffs=coeffs, margin=strict_margin(Psi),
                   name="theta")
    problem = LmiProblem(blocks=[blk], n_vars=rows * cols)
    res = sdp_feasibility(problem, opts=opts)
    if not res.feasible:
        return None, res
    Theta = res.y.reshape(rows, cols)
    A_K = Theta[:n_K, :n_K]
    B_K = Theta[:n_K, n_K:]
    C_K = Theta[n_K:, :n_K]
    D_K = Theta[n_K:, n_K:]
    return ControllerRealization(A_K, B_K, C_K, D_K), res
