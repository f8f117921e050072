import numpy as np
import pytest

from kreisslab.errors import DimensionError, StabilityError
from kreisslab.linalg import (
    eig,
    expm,
    is_hurwitz,
    numerical_abscissa,
    solve_lyapunov,
    spectral_abscissa,
    svd_triple,
)

from conftest import random_stable_statespace


def test_expm_zero_matrix_is_identity():
    assert np.allclose(expm(np.zeros((2, 2)), 5.0), np.eye(2))


def test_expm_diagonal():
    E = expm(np.diag([-1.0, -2.0]), 1.0)
    assert np.allclose(E, np.diag([np.exp(-1.0), np.exp(-2.0)]), atol=1e-12)


def test_expm_rotation_quarter_turn():
    M = np.array([[0.0, 1.0], [-1.0, 0.0]])
    E = expm(M, np.pi / 2)
    assert np.allclose(E, np.array([[0.0, 1.0], [-1.0, 0.0]]), atol=1e-12)


def test_expm_rejects_nonsquare():
    with pytest.raises(DimensionError):
        expm(np.ones((2, 3)))


def test_expm_semigroup_property(rng):
    for _ in range(10):
        n = int(rng.integers(2, 7))
        A = random_stable_statespace(rng, n).A
        t, s = rng.uniform(0.1, 2.0, size=2)
        lhs = expm(A, t + s)
        rhs = expm(A, t) @ expm(A, s)
        assert np.linalg.norm(lhs - rhs) <= 1e-8 * np.linalg.norm(lhs)


def test_eig_diagonal():
    spec = eig(np.diag([-1.0, -2.0]))
    assert sorted(spec.eigenvalues.real) == pytest.approx([-2.0, -1.0])


def test_eig_rotation_pair():
    spec = eig(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    assert sorted(spec.eigenvalues.imag) == pytest.approx([-1.0, 1.0])
    assert np.allclose(spec.eigenvalues.real, 0.0, atol=1e-12)


def _cubic_roots_oracle(a2, a1, a0):
    """Roots of s^3 + a2 s^2 + a1 s + a0 by bisection plus deflation."""
    def f(x):
        return ((x + a2) * x + a1) * x + a0

    lo, hi = -1e6, 1e6
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(lo) * f(mid) <= 0:
            hi = mid
        else:
            lo = mid
    r = 0.5 * (lo + hi)
    # deflate: s^2 + (a2 + r) s + (a1 + r(a2 + r))
    b1 = a2 + r
    b0 = a1 + r * b1
    disc = complex(b1 * b1 - 4 * b0) ** 0.5
    return [r, (-b1 + disc) / 2, (-b1 - disc) / 2]


def test_eig_companion_cubic_matches_root_oracle():
    a2, a1, a0 = 1.0, 1.0, 0.9608
    A = np.array([[0, 1, 0], [0, 0, 1], [-a0, -a1, -a2]], dtype=float)
    got = sorted(eig(A).eigenvalues, key=lambda z: (z.real, z.imag))
    want = sorted(_cubic_roots_oracle(a2, a1, a0),
                  key=lambda z: (z.real, z.imag))
    for g, w in zip(got, want):
        assert abs(g - w) <= 1e-8


def test_eig_vector_residuals(rng):
    A = rng.standard_normal((5, 5))
    spec = eig(A, vectors=True)
    for k in range(5):
        v = spec.eigenvectors[:, k]
        lam = spec.eigenvalues[k]
        assert np.linalg.norm(A @ v - lam * v) <= 1e-8 * np.linalg.norm(v)


def test_eig_conjugate_closure(rng):
    for _ in range(20):
        A = rng.standard_normal((4, 4))
        w = eig(A).eigenvalues
        assert np.allclose(sorted(w, key=lambda z: (z.real, z.imag)),
                           sorted(w.conj(), key=lambda z: (z.real, z.imag)),
                           atol=1e-8)


def test_svd_identity():
    triple = svd_triple(np.eye(3))
    assert triple.sigma_max == pytest.approx(1.0)
    assert triple.Q.shape == (3, 3)  # full cluster at a triple singular value


def test_svd_row_vector():
    triple = svd_triple(np.array([[1.0, 1.0]]))
    assert triple.sigma_max == pytest.approx(np.sqrt(2.0))


def test_svd_example8_cb():
    B = np.array([[0.4722, 0.7973], [0.0339, 0.5553]])
    triple = svd_triple(np.eye(2) @ B)
    assert triple.sigma_max == pytest.approx(1.0577, abs=1e-3)


def test_svd_orthonormality_and_reconstruction(rng):
    for _ in range(20):
        M = rng.standard_normal((4, 3))
        triple = svd_triple(M)
        assert np.allclose(triple.Q.T @ triple.Q,
                           np.eye(triple.Q.shape[1]), atol=1e-10)
        assert np.allclose(triple.P.T @ triple.P,
                           np.eye(triple.P.shape[1]), atol=1e-10)
        U, s, Vt = np.linalg.svd(M)
        recon = (U[:, :len(s)] * s) @ Vt[:len(s), :]
        assert np.linalg.norm(M - recon) <= 1e-10 * np.linalg.norm(M)
        assert np.all(np.diff(triple.singular_values) <= 1e-12)


def test_lyapunov_scalar_cases():
    assert solve_lyapunov([[-1.0]], [[2.0]])[0, 0] == pytest.approx(1.0)
    assert solve_lyapunov([[-1.0]], [[1.0]])[0, 0] == pytest.approx(0.5)


def test_lyapunov_matches_kronecker_oracle(rng):
    A = random_stable_statespace(rng, 4).A
    W = rng.standard_normal((4, 4))
    W = W + W.T
    Q = solve_lyapunov(A, W)
    # vectorized oracle: (I (x) A + A (x) I) vec(Q) = -vec(W)
    K = np.kron(np.eye(4), A) + np.kron(A, np.eye(4))
    q_oracle = np.linalg.solve(K, -W.ravel(order="F")).reshape(4, 4, order="F")
    assert np.allclose(Q, q_oracle, atol=1e-9 * max(1, np.abs(W).max()))


def test_lyapunov_psd_for_psd_input(rng):
    for _ in range(10):
        A = random_stable_statespace(rng, 4).A
        B = rng.standard_normal((4, 2))
        Q = solve_lyapunov(A, B @ B.T)
        assert np.min(np.linalg.eigvalsh(Q)) >= -1e-10


def test_lyapunov_requires_hurwitz():
    with pytest.raises(StabilityError):
        solve_lyapunov([[1.0]], [[1.0]])


def test_spectral_abscissa_examples():
    assert spectral_abscissa(np.diag([-1.0, -2.0])) == pytest.approx(-1.0)
    assert spectral_abscissa([[0.0, 1.0], [-1.0, 0.0]]) == pytest.approx(0.0,
                                                                        abs=1e-12)


def test_numerical_abscissa_examples():
    assert numerical_abscissa(-np.eye(2)) == pytest.approx(-1.0)
    assert numerical_abscissa([[0.0, 1.0], [0.0, 0.0]]) == pytest.approx(0.5)


def test_abscissa_field_of_values_containment(rng):
    for _ in range(100):
        A = rng.standard_normal((4, 4))
        assert spectral_abscissa(A) <= numerical_abscissa(A) + 1e-12


def test_is_hurwitz():
    assert is_hurwitz(-np.eye(2))
    assert not is_hurwitz([[0.0, 1.0], [-1.0, 0.0]])
