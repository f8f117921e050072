import numpy as np
import pytest
import scipy.linalg

from kreisslab.errors import DimensionError
from kreisslab.lmi import (
    LmiBlock,
    LmiProblem,
    lossless_check,
    null_space_basis,
    of_existence,
    qc_analysis,
    qc_analysis_closed_loop,
    reconstruct_controller,
    sdp_feasibility,
    sf_synthesis,
    strict_margin,
)
from kreisslab.loop import ControllerRealization, assemble_closed_loop
from kreisslab.models import brunton2_model, lorenz_model
from kreisslab.benchmarks import lorenz_chaos
from kreisslab.statespace import StateSpace


def lorenz_A(R=28.0):
    return np.array([[-10.0, 10.0, 0.0], [R, -1.0, 0.0], [0.0, 0.0, -1.0]])


B_LORENZ = np.array([[0.0], [1.0], [0.0]])
C_X = np.array([[1.0, 0.0, 0.0]])


# ---------------------------------------------------------------------------
# Engine basics
# ---------------------------------------------------------------------------

def test_sdp_scalar_interval_feasible():
    # diag(y - 1, -y) < 0 is feasible exactly on 0 < y < 1
    blk = LmiBlock(F0=np.diag([-1.0, 0.0]), coeffs=[np.diag([1.0, -1.0])],
                   margin=1e-7)
    res = sdp_feasibility(LmiProblem(blocks=[blk], n_vars=1))
    assert res.feasible
    assert 0.0 < res.y[0] < 1.0
    assert res.margin < 0


def test_sdp_constant_identity_infeasible():
    blk = LmiBlock(F0=np.eye(2), coeffs=[], margin=1e-7)
    res = sdp_feasibility(LmiProblem(blocks=[blk], n_vars=0))
    assert res.status == "infeasible"


def test_sdp_rejects_asymmetric_blocks():
    with pytest.raises(DimensionError):
        LmiProblem(blocks=[LmiBlock(F0=np.array([[0.0, 1.0], [0.0, 0.0]]),
                                    coeffs=[], margin=0.0)], n_vars=0)


def test_problem_json_roundtrip():
    blk = LmiBlock(F0=np.diag([-1.0, 0.0]), coeffs=[np.diag([1.0, -1.0])],
                   margin=1e-7, name="demo")
    prob = LmiProblem(blocks=[blk], n_vars=1, var_names=["y"])
    clone = LmiProblem.from_json(prob.to_json())
    assert clone.n_vars == 1
    assert clone.var_names == ["y"]
    assert np.allclose(clone.blocks[0].F0, prob.blocks[0].F0)
    assert sdp_feasibility(clone).feasible


def test_null_space_basis():
    N = null_space_basis(C_X)
    assert N.shape == (3, 2)
    assert np.allclose(C_X @ N, 0.0, atol=1e-12)
    assert np.allclose(N.T @ N, np.eye(2), atol=1e-12)


# ---------------------------------------------------------------------------
# Lossless identity
# ---------------------------------------------------------------------------

def test_lossless_identity_pointwise():
    model = lorenz_model(lorenz_chaos())
    x = np.array([1.0, 2.0, 3.0])
    w = model.phi(x)
    assert x @ model.B_w @ w == pytest.approx(0.0, abs=1e-12)


def test_lossless_identity_sampled():
    model = lorenz_model(lorenz_chaos())
    _, max_rel = lossless_check(model, samples=100000, seed=0)
    assert max_rel <= 1e-12


def test_lossless_violated_by_perturbed_nonlinearity():
    model = lorenz_model(lorenz_chaos())
    from dataclasses import replace

    def phi_bad(x):
        return model.phi(x) + np.array([0.0, x[0]])

    bad = replace(model, phi=phi_bad)
    _, max_rel = lossless_check(bad, samples=2000, seed=0)
    assert max_rel > 1e-3


# ---------------------------------------------------------------------------
# QC analysis
# ---------------------------------------------------------------------------

def test_qc_static_x_gain_feasible():
    A_cl = lorenz_A() + B_LORENZ @ np.array([[-27.01]]) @ C_X
    cert = qc_analysis(A_cl, (1, 2, 0), epsilon=1e-3)
    assert cert.feasible
    # direct numeric recheck of the certificate
    X = cert.X_cl
    resid = A_cl.T @ X + X @ A_cl + cert.epsilon * X
    assert np.max(np.linalg.eigvalsh(resid)) <= 0.0
    assert np.min(np.linalg.eigvalsh(X)) > 0.0
    # enforced partition zeros
    assert np.allclose(X[1:3, 1:3], np.eye(2), atol=1e-12)
    assert np.allclose(X[0, 1:3], 0.0, atol=1e-12)


def test_qc_open_loop_infeasible():
    cert = qc_analysis(lorenz_A(), (1, 2, 0), epsilon=1e-3)
    assert cert.status == "infeasible"


def test_qc_kreiss_static_gain_feasible():
    A_cl = lorenz_A() + B_LORENZ @ np.array([[-34.70]]) @ C_X
    assert qc_analysis(A_cl, (1, 2, 0), epsilon=1e-3).feasible


def test_qc_closed_loop_wrapper_dynamic():
    model = lorenz_model(lorenz_chaos(), measurement="x")
    ctrl = ControllerRealization.from_tf([-306.5, -2809.0], [1.0, 0.1044])
    cert = qc_analysis_closed_loop(model, ctrl, epsilon=1e-3)
    assert cert.feasible


def test_qc_brunton_static_never_certifies():
    # the oscillator has n_phi = n, an unstable linear part, and a pinned
    # identity middle block, so no structured certificate can exist
    model = brunton2_model()
    ctrl = ControllerRealization.static([[-1.0]])
    cert = qc_analysis_closed_loop(model, ctrl, epsilon=1e-3)
    assert not cert.feasible


def test_qc_partition_mismatch():
    with pytest.raises(DimensionError):
        qc_analysis(lorenz_A(), (2, 2, 2), epsilon=1e-3)


# ---------------------------------------------------------------------------
# Elimination soundness: full form with mu0 = -1 vs reduced structure
# ---------------------------------------------------------------------------

def _full_qc_feasibility(A_cl, B_w_cl, eps):
    """Full inequality with the S-procedure multiplier fixed at -1.

    The zero lower-right block forces X B_w = B_w; that linear constraint is
    eliminated exactly, leaving the Lyapunov block over the remaining
    symmetric degrees of freedom.
    """
    dim = A_cl.shape[0]
    pairs = [(i, j) for i in range(dim) for j in range(i, dim)]

    def emb(i, j):
        E = np.zeros((dim, dim))
        E[i, j] = E[j, i] = 1.0
        return E

    rows = []
    rhs = []
    for col in range(B_w_cl.shape[1]):
        for r in range(dim):
            coef = np.zeros(len(pairs))
            for k, (i, j) in enumerate(pairs):
                coef[k] = emb(i, j)[r, :] @ B_w_cl[:, col]
            rows.append(coef)
            rhs.append(B_w_cl[r, col])
    Aeq = np.asarray(rows)
    beq = np.asarray(rhs)
    sol, *_ = np.linalg.lstsq(Aeq, beq, rcond=None)
    if np.linalg.norm(Aeq @ sol - beq) > 1e-9:
        return "infeasible"
    null = scipy.linalg.null_space(Aeq)

    def xmat(z):
        v = sol + null @ z
        X = np.zeros((dim, dim))
        for k, (i, j) in enumerate(pairs):
            X[i, j] = X[j, i] = v[k]
        return X

    X0 = xmat(np.zeros(null.shape[1]))
    lyap0 = A_cl.T @ X0 + X0 @ A_cl + eps * X0
    coeffs_l = []
    coeffs_p = []
    for c in range(null.shape[1]):
        z = np.zeros(null.shape[1])
        z[c] = 1.0
        E = xmat(z) - X0
        coeffs_l.append(A_cl.T @ E + E @ A_cl + eps * E)
        coeffs_p.append(-E)
    blocks = [LmiBlock(F0=lyap0, coeffs=coeffs_l, margin=strict_margin(lyap0),
                       name="lyap"),
              LmiBlock(F0=-X0, coeffs=coeffs_p, margin=1e-8, name="pd")]
    res = sdp_feasibility(LmiProblem(blocks=blocks, n_vars=null.shape[1]))
    return res.status


def test_elimination_soundness_on_random_instances(rng):
    model = lorenz_model(lorenz_chaos(), measurement="x")
    B_w_cl = np.vstack([model.B_w, np.zeros((0, 2))])
    agree = 0
    for trial in range(10):
        K = float(rng.uniform(-60.0, 10.0))
        A_cl = model.A + model.B_u @ np.array([[K]]) @ model.C_y
        reduced = qc_analysis(A_cl, (1, 2, 0), epsilon=1e-3).status
        full = _full_qc_feasibility(A_cl, model.B_w, 1e-3)
        assert {reduced, full} <= {"feasible", "infeasible"}
        assert reduced == full
        agree += 1
    assert agree == 10


# ---------------------------------------------------------------------------
# State-feedback synthesis
# ---------------------------------------------------------------------------

def test_sf_synthesis_chaos_regime():
    K, res = sf_synthesis(lorenz_A(28.0), B_LORENZ, n_phi=2, epsilon=1e-3)
    assert res.feasible
    A_cl = lorenz_A(28.0) + B_LORENZ @ K
    assert qc_analysis(A_cl, (1, 2, 0), epsilon=1e-3).feasible


def test_sf_synthesis_fixed_point_regime():
    K, res = sf_synthesis(lorenz_A(10.0), B_LORENZ, n_phi=2, epsilon=1e-3)
    assert res.feasible
    A_cl = lorenz_A(10.0) + B_LORENZ @ K
    assert qc_analysis(A_cl, (1, 2, 0), epsilon=1e-3).feasible


def test_sf_synthesis_zero_gain_admissible_when_A_certifies():
    A = np.array([[-1.0, 0.3], [0.3, -1.0]])
    B = np.array([[0.0], [1.0]])
    K, res = sf_synthesis(A, B, n_phi=1, epsilon=1e-3)
    assert res.feasible
    # A alone satisfies the structured inequality, so W = 0 is admissible
    cert = qc_analysis(A, (1, 1, 0), epsilon=1e-3)
    assert cert.feasible


def test_congruence_equivalence_sf_forms(rng):
    # X-form: (A+BK)^T diag(X,I) + diag(X,I)(A+BK) + eps diag(X,I) < 0
    # Y-form: same with the congruence diag(Y,I) = diag(X,I)^{-1}
    def form_feasible(A, K, B, transpose):
        n = A.shape[0]
        A_cl = A + B @ K
        d1 = n - 1
        const = np.zeros((n, n))
        const[d1:, d1:] = np.eye(1)
        mats = []
        for i in range(d1):
            for j in range(i, d1):
                E = np.zeros((n, n))
                E[i, j] = E[j, i] = 1.0
                mats.append(E)

        def lyap(M):
            if transpose:
                return A_cl.T @ M + M @ A_cl + 1e-3 * M
            return A_cl @ M + M @ A_cl.T + 1e-3 * M

        blocks = [LmiBlock(F0=lyap(const), coeffs=[lyap(M) for M in mats],
                           margin=strict_margin(lyap(const))),
                  LmiBlock(F0=-const, coeffs=[-M for M in mats],
                           margin=1e-8)]
        return sdp_feasibility(LmiProblem(blocks=blocks,
                                          n_vars=len(mats))).feasible

    for _ in range(8):
        A = rng.standard_normal((3, 3))
        B = rng.standard_normal((3, 1))
        K = rng.standard_normal((1, 3))
        assert form_feasible(A, K, B, True) == form_feasible(A, K, B, False)


# ---------------------------------------------------------------------------
# Output-feedback existence and reconstruction
# ---------------------------------------------------------------------------

def test_of_existence_lorenz_order_bound():
    res = of_existence(lorenz_A(28.0), B_LORENZ, C_X, n_phi=2, epsilon=1e-3)
    assert res.feasible
    assert res.max_order <= 1


def test_of_existence_nphi_equals_n_reduces_to_numerical_abscissa():
    # n_phi = n leaves no X/Y freedom: feasibility is a constant-matrix test
    model = brunton2_model()
    res = of_existence(model.A, model.B_u, model.C_y, n_phi=2, epsilon=1e-3)
    assert not res.feasible  # sigma_u > 0 makes the projected block positive
    assert res.max_order == 0
    stable = np.array([[-1.0, 0.4], [0.0, -2.0]])
    res2 = of_existence(stable, np.array([[0.0], [1.0]]),
                        np.array([[1.0, 0.0]]), n_phi=2, epsilon=1e-3)
    assert res2.feasible


def test_of_existence_linear_plant_full_order():
    A = np.array([[0.5, 1.0], [0.0, -2.0]])
    B = np.array([[0.0], [1.0]])
    C = np.array([[1.0, 0.0]])
    res = of_existence(A, B, C, n_phi=0, epsilon=1e-3)
    assert res.feasible
    assert res.max_order <= 2


def test_reconstruct_controller_lorenz_chaos():
    A = lorenz_A(28.0)
    res = of_existence(A, B_LORENZ, C_X, n_phi=2, epsilon=1e-3)
    ctrl, theta_res = reconstruct_controller(A, B_LORENZ, C_X, res.X, res.Y,
                                             n_K=1, epsilon=1e-3, n_phi=2)
    assert theta_res.feasible
    plant = StateSpace(A, B_LORENZ, C_X)
    cl = assemble_closed_loop(plant, ctrl)
    cert = qc_analysis(cl.A_cl, (1, 2, 1), epsilon=1e-3)
    assert cert.feasible


def test_reconstruct_controller_fixed_point_regime():
    A = lorenz_A(10.0)
    res = of_existence(A, B_LORENZ, C_X, n_phi=2, epsilon=1e-3)
    ctrl, theta_res = reconstruct_controller(A, B_LORENZ, C_X, res.X, res.Y,
                                             n_K=1, epsilon=1e-3, n_phi=2)
    assert theta_res.feasible
    plant = StateSpace(A, B_LORENZ, C_X)
    cl = assemble_closed_loop(plant, ctrl)
    assert qc_analysis(cl.A_cl, (1, 2, 1), epsilon=1e-3).feasible


def test_reconstruct_static_agrees_with_sf_route():
    # degenerate n_K = 0 with C = I: both routes must certify
    A = lorenz_A(28.0)
    C = np.eye(3)
    res = of_existence(A, B_LORENZ, C, n_phi=2, epsilon=1e-3)
    assert res.feasible
    ctrl, theta_res = reconstruct_controller(A, B_LORENZ, C, res.X,
                                             np.atleast_2d(1.0 / res.X),
                                             n_K=0, epsilon=1e-3, n_phi=2)
    assert theta_res.feasible
    A_cl = A + B_LORENZ @ ctrl.D_K
    assert qc_analysis(A_cl, (1, 2, 0), epsilon=1e-3).feasible
    K_sf, res_sf = sf_synthesis(A, B_LORENZ, n_phi=2, epsilon=1e-3)
    assert res_sf.feasible
    assert qc_analysis(A + B_LORENZ @ K_sf, (1, 2, 0), epsilon=1e-3).feasible
