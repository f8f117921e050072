import numpy as np
import pytest

from kreisslab.errors import DimensionError, PreconditionError
from kreisslab.loop import (
    ControllerRealization,
    ControllerStructure,
    assemble_closed_loop,
    complementary_sensitivity,
    restriction_matrix,
)
from kreisslab.statespace import StateSpace

BRUNTON = StateSpace([[0.1, -1.0], [1.0, 0.1]], [[0.0], [1.0]], [[0.0, 1.0]])


def test_zero_controller_keeps_plant():
    cl = assemble_closed_loop(BRUNTON, ControllerRealization.static([[0.0]]))
    assert np.allclose(cl.A_cl, BRUNTON.A)
    assert np.allclose(cl.J, np.eye(2))


def test_static_gain_assembly():
    K = -0.20
    cl = assemble_closed_loop(BRUNTON, ControllerRealization.static([[K]]))
    assert np.allclose(cl.A_cl, BRUNTON.A + BRUNTON.B * K @ BRUNTON.C)


def test_dynamic_assembly_block_layout():
    ctrl = ControllerRealization([[-17.95]], [[1.0]], [[129.027]], [[-47.06]])
    plant = StateSpace([[-10.0, 10.0, 0.0], [28.0, -1.0, 0.0],
                        [0.0, 0.0, -1.0]], [[0.0], [1.0], [0.0]],
                       [[1.0, 0.0, 0.0]])
    cl = assemble_closed_loop(plant, ctrl)
    assert cl.A_cl.shape == (4, 4)
    assert np.allclose(cl.A_cl[:3, :3],
                       plant.A + plant.B @ ctrl.D_K @ plant.C)
    assert np.allclose(cl.A_cl[:3, 3:], plant.B @ ctrl.C_K)
    assert np.allclose(cl.A_cl[3:, :3], ctrl.B_K @ plant.C)
    assert cl.A_cl[3, 3] == pytest.approx(-17.95)
    assert np.max(np.linalg.eigvals(cl.A_cl).real) < 0
    assert np.allclose(cl.J, restriction_matrix(3, 1))


def test_assembly_dimension_mismatch():
    ctrl = ControllerRealization.static([[1.0, 2.0]])
    with pytest.raises(DimensionError):
        assemble_closed_loop(BRUNTON, ctrl)


def test_controller_from_tf_and_dc_gain():
    ctrl = ControllerRealization.from_tf([0.001071, -2.247], [1.0, 1.483])
    assert ctrl.n_K == 1
    assert ctrl.D_K[0, 0] == pytest.approx(0.001071)
    assert ctrl.dc_gain()[0, 0] == pytest.approx(-2.247 / 1.483, rel=1e-9)


def test_dc_gain_needs_invertible_A_K():
    ctrl = ControllerRealization([[0.0]], [[1.0]], [[1.0]], [[0.0]])
    with pytest.raises(PreconditionError):
        ctrl.dc_gain()


def test_structure_pack_unpack_roundtrip(rng):
    st = ControllerStructure.full(2, 1, 1)
    theta = rng.standard_normal(st.n_theta)
    ctrl = st.unpack(theta)
    assert np.allclose(st.pack(ctrl), theta)


def test_structure_masked_entries_stay_zero():
    st = ControllerStructure.static_masked([[True, False, True]])
    ctrl = st.unpack([2.0, -3.0])
    assert np.allclose(ctrl.D_K, [[2.0, 0.0, -3.0]])
    assert st.n_theta == 2


def test_structure_unpack_length_check():
    st = ControllerStructure.static(1, 1)
    with pytest.raises(DimensionError):
        st.unpack([1.0, 2.0])


def test_grad_mapping_matches_fd(rng):
    # random smooth scalar function of A_cl: f = trace(W A_cl); gradient
    # through structure must match direct finite differences in theta
    st = ControllerStructure.full(1, 1, 1)
    theta = rng.standard_normal(st.n_theta)
    W = rng.standard_normal((3, 3))

    def f(th):
        cl = assemble_closed_loop(BRUNTON, st.unpack(th))
        return float(np.sum(W * cl.A_cl))

    grad = st.grad_from_closed_loop(W, BRUNTON)
    h = 1e-7
    for i in range(st.n_theta):
        e = np.zeros(st.n_theta)
        e[i] = h
        fd = (f(theta + e) - f(theta - e)) / (2 * h)
        assert grad[i] == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_complementary_sensitivity_shares_closed_loop_spectrum():
    ctrl = ControllerRealization.from_tf([0.001071, -2.247], [1.0, 1.483])
    T = complementary_sensitivity(BRUNTON, ctrl)
    cl = assemble_closed_loop(BRUNTON, ctrl)
    got = np.sort_complex(np.linalg.eigvals(T.A))
    want = np.sort_complex(np.linalg.eigvals(cl.A_cl))
    assert np.allclose(got, want, atol=1e-10)


def test_complementary_sensitivity_zero_controller():
    T = complementary_sensitivity(BRUNTON, ControllerRealization.static([[0.0]]))
    # K = 0 gives T = 0
    s = 0.7 + 0.3j
    assert abs(T.transfer(s)[0, 0]) <= 1e-12
