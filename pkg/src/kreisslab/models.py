"""Benchmark nonlinear plants and closed-loop simulation.

Ships the Lorenz system and the 2nd/4th-order oscillator models with their
quadratic/cubic nonlinearities, fixed-point and limit-cycle geometry,
switched-on closed-loop integration (adaptive embedded RK 4/5 pair, exact
event at the switch time) and transient-amplification curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from .errors import DimensionError, PreconditionError, StabilityError
from .linalg import is_hurwitz
from .loop import ControllerRealization
from .statespace import StateSpace

__all__ = [
    "closed_loop_field",
    "LorenzParams",
    "Brunton2Params",
    "Brunton4Params",
    "NonlinearModel",
    "Trajectory",
    "SimulationOptions",
    "lorenz_model",
    "brunton2_model",
    "brunton4_model",
    "lorenz_fixed_points",
    "model_as_statespace",
    "limit_cycle_radius",
    "simulate_closed_loop",
    "transient_curve",
]


@dataclass(frozen=True)
class LorenzParams:
    p: float = 10.0
    R: float = 28.0
    b: float = 1.0

    def __post_init__(self):
        if self.p <= 0 or self.b <= 0:
            raise PreconditionError("Lorenz parameters p, b must be positive")


@dataclass(frozen=True)
class Brunton2Params:
    sigma_u: float = 0.1
    omega_u: float = 1.0
    alpha_u: float = 1.0
    beta_u: float = 1.0
    gamma_u: float = 0.0
    g: float = 1.0

    def __post_init__(self):
        if self.alpha_u <= 0 or self.beta_u <= 0:
            raise PreconditionError("alpha_u and beta_u must be positive")


@dataclass(frozen=True)
class Brunton4Params:
    """Fourth-order oscillator data.

    The numeric parameter set is external to this toolkit and must be
    supplied by the caller (e.g. through a problem file); `provenance`
    records where it came from.
    """

    sigma_u: float
    omega_u: float
    sigma_a: float
    omega_a: float
    alpha_u: float
    alpha_a: float
    g: float
    beta: dict = field(default_factory=dict)    # keys uu, au, ua, aa
    gamma: dict = field(default_factory=dict)   # keys uu, au, ua, aa
    provenance: str = "external"


@dataclass(frozen=True, eq=False)
class NonlinearModel:
    """dx/dt = A x + B_w phi(x) + B_u u, y = C_y x.

    phi has vector dimension n_phi; phi(0) = 0 and phi'(0) = 0 so the
    linearization at the origin is (A, B_u, C_y).
    """

    name: str
    A: np.ndarray
    B_w: np.ndarray
    B_u: np.ndarray
    C_y: np.ndarray
    n_phi: int
    phi: object            # callable x -> R^{n_phi}
    phi_jacobian: object   # callable x -> R^{n_phi x n}
    params: object = None

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def check_origin(self, tol: float = 1e-9) -> bool:
        """Numeric check of B_w phi(0) = 0 and B_u phi'(0) C_y = 0."""
        z = np.zeros(self.n)
        ok = np.linalg.norm(self.B_w @ self.phi(z)) <= tol
        ok = ok and np.linalg.norm(self.phi_jacobian(z)) <= tol
        return bool(ok)


def lorenz_model(params: LorenzParams = LorenzParams(),
                 measurement: str = "x") -> NonlinearModel:
    """Lorenz system with actuation on the second state.

    measurement selects C_y: "x" (first state), "y" (second state), or
    "state" (full state feedback).
    """
    p, R, b = params.p, params.R, params.b
    A = np.array([[-p, p, 0.0], [R, -1.0, 0.0], [0.0, 0.0, -b]])
    B_w = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    B_u = np.array([[0.0], [1.0], [0.0]])
    if measurement == "x":
        C_y = np.array([[1.0, 0.0, 0.0]])
    elif measurement == "y":
        C_y = np.array([[0.0, 1.0, 0.0]])
    elif measurement == "state":
        C_y = np.eye(3)
    else:
        raise PreconditionError(f"unknown measurement '{measurement}'")

    def phi(x):
        return np.array([-x[0] * x[2], x[0] * x[1]])

    def phi_jac(x):
        return np.array([[-x[2], 0.0, -x[0]], [x[1], x[0], 0.0]])

    return NonlinearModel(name="lorenz", A=A, B_w=B_w, B_u=B_u, C_y=C_y,
                          n_phi=2, phi=phi, phi_jacobian=phi_jac,
                          params=params)


def brunton2_model(params: Brunton2Params = Brunton2Params()) -> NonlinearModel:
    """Second-order oscillator with cubic saturation and limit cycle."""
    s, w = params.sigma_u, params.omega_u
    a, bb, gg, g = params.alpha_u, params.beta_u, params.gamma_u, params.g
    A = np.array([[s, -w], [w, s]])
    B_w = np.eye(2)
    B_u = np.array([[0.0], [g]])
    C_y = np.array([[0.0, 1.0]])
    M = np.array([[-bb, -gg], [gg, -bb]])

    def phi(x):
        return a * (x[0] ** 2 + x[1] ** 2) * (M @ x[:2])

    def phi_jac(x):
        r2 = x[0] ** 2 + x[1] ** 2
        return a * (2.0 * np.outer(M @ x[:2], x[:2]) + r2 * M)

    return NonlinearModel(name="brunton2", A=A, B_w=B_w, B_u=B_u, C_y=C_y,
                          n_phi=2, phi=phi, phi_jacobian=phi_jac,
                          params=params)


def brunton4_model(params: Brunton4Params) -> NonlinearModel:
    """Fourth-order two-oscillator model; parameters supplied externally."""
    for key in ("uu", "au", "ua", "aa"):
        if key not in params.beta or key not in params.gamma:
            raise PreconditionError(
                f"fourth-order model needs beta/gamma '{key}' entries")

    def rot(sig, om):
        return np.array([[sig, -om], [om, sig]])

    def damp(b, gdm):
        return np.array([[-b, -gdm], [gdm, -b]])

    A = scipy.linalg.block_diag(rot(params.sigma_u, params.omega_u),
                                rot(params.sigma_a, params.omega_a))
    A5 = scipy.linalg.block_diag(damp(params.beta["uu"], params.gamma["uu"]),
                                 damp(params.beta["au"], params.gamma["au"]))
    A6 = scipy.linalg.block_diag(damp(params.beta["ua"], params.gamma["ua"]),
                                 damp(params.beta["aa"], params.gamma["aa"]))
    B_w = np.eye(4)
    B_u = np.array([[0.0], [params.g], [0.0], [params.g]])
    C_y = np.array([[1.0, 0.0, 1.0, 0.0]])

    def phi(x):
        ru = x[0] ** 2 + x[1] ** 2
        ra = x[2] ** 2 + x[3] ** 2
        return (params.alpha_u * ru * A5 + params.alpha_a * ra * A6) @ x

    def phi_jac(x):
        ru = x[0] ** 2 + x[1] ** 2
        ra = x[2] ** 2 + x[3] ** 2
        base = params.alpha_u * ru * A5 + params.alpha_a * ra * A6
        du = 2.0 * np.outer(params.alpha_u * (A5 @ x), np.array([x[0], x[1], 0, 0]))
        da = 2.0 * np.outer(params.alpha_a * (A6 @ x), np.array([0, 0, x[2], x[3]]))
        return base + du + da

    return NonlinearModel(name="brunton4", A=A, B_w=B_w, B_u=B_u, C_y=C_y,
                          n_phi=4, phi=phi, phi_jacobian=phi_jac,
                          params=params)


def lorenz_fixed_points(params: LorenzParams):
    """The steady states: origin plus (+-sqrt(R-1), +-sqrt(R-1), R-1).

    For R <= 1 only the origin exists; the second return value flags
    whether the off-origin pair is present.
    """
    origin = np.zeros(3)
    if params.R <= 1.0:
        return [origin], False
    r = math.sqrt(params.R - 1.0)
    return [origin, np.array([r, r, params.R - 1.0]),
            np.array([-r, -r, params.R - 1.0])], True


def model_as_statespace(model: NonlinearModel) -> StateSpace:
    """Linear channel (A, B_w, C_y) for disturbance-to-measurement analysis."""
    return StateSpace(model.A, model.B_w, model.C_y)


def limit_cycle_radius(params: Brunton2Params):
    """Open-loop limit cycle radius sqrt(sigma_u / (alpha_u beta_u)).

    Returns (radius, exists); sigma_u <= 0 means no limit cycle.
    """
    if params.sigma_u <= 0:
        return 0.0, False
    return math.sqrt(params.sigma_u / (params.alpha_u * params.beta_u)), True


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

@dataclass
class SimulationOptions:
    rtol: float = 1e-9
    atol: float = 1e-12
    n_points: int = 2001
    blowup_radius: float = 1e9


@dataclass(eq=False)
class Trajectory:
    t: np.ndarray
    x: np.ndarray          # plant states, shape (n, len(t))
    x_K: np.ndarray        # controller states, shape (n_K, len(t))
    u: np.ndarray          # control input, shape (p, len(t))
    y: np.ndarray          # measurement, shape (m, len(t))
    t_on: float
    diverged: bool
    final_state: np.ndarray

    def final_plant_norm(self) -> float:
        return float(np.linalg.norm(self.x[:, -1]))


def closed_loop_field(model: NonlinearModel,
                      controller: ControllerRealization | None):
    """(f, J_f) of the autonomous closed loop in the stacked state (x, x_K)."""
    n = model.n
    n_K = controller.n_K if controller is not None else 0

    def f(z):
        x = z[:n]
        xk = z[n:]
        dx = model.A @ x + model.B_w @ model.phi(x)
        if controller is not None:
            y = model.C_y @ x
            dx = dx + model.B_u @ (controller.C_K @ xk + controller.D_K @ y)
            dxk = controller.A_K @ xk + controller.B_K @ y
        else:
            dxk = np.zeros(0)
        return np.concatenate([dx, dxk])

    def jac(z):
        x = z[:n]
        J11 = model.A + model.B_w @ model.phi_jacobian(x)
        if controller is None:
            return J11
        J11 = J11 + model.B_u @ controller.D_K @ model.C_y
        J12 = model.B_u @ controller.C_K
        J21 = controller.B_K @ model.C_y
        J22 = controller.A_K
        return np.block([[J11, J12], [J21, J22]])

    return f, jac


def _closed_loop_field(model: NonlinearModel,
                       controller: ControllerRealization | None):
    n = model.n
    n_K = controller.n_K if controller is not None else 0

    def field(t, z, on: bool):
        x = z[:n]
        xk = z[n:]
        w = model.phi(x)
        dx = model.A @ x + model.B_w @ w
        if on and controller is not None:
            y = model.C_y @ x
            u = controller.C_K @ xk + controller.D_K @ y
            dx = dx + model.B_u @ u
            dxk = controller.A_K @ xk + controller.B_K @ y
        else:
            dxk = np.zeros(n_K)
        return np.concatenate([dx, dxk])

    return field, n, n_K


def default_horizon(model: NonlinearModel,
                    controller: ControllerRealization | None,
                    t_on: float) -> float:
    """t_on plus three times the slowest stable closed-loop time constant."""
    if controller is None:
        return t_on + 30.0
    plant = StateSpace(model.A, model.B_u, model.C_y)
    from .loop import assemble_closed_loop

    A_cl = assemble_closed_loop(plant, controller).A_cl
    alpha = float(np.max(np.linalg.eigvals(A_cl).real))
    if alpha >= 0:
        return t_on + 30.0
    return t_on + 3.0 / abs(alpha)


def simulate_closed_loop(model: NonlinearModel,
                         controller: ControllerRealization | None,
                         x0, t_on: float, t_final: float | None = None,
                         options: SimulationOptions | None = None) -> Trajectory:
    """Integrate the loop with u = 0 before t_on and u = K y after.

    The integration restarts exactly at t_on (controller state starts at
    zero there).  t_final defaults to three slowest closed-loop time
    constants past t_on.  Finite-time blowup is reported as a diverged
    trajectory with the last accepted state retained.
    """
    options = options or SimulationOptions()
    if t_final is None:
        t_final = default_horizon(model, controller, t_on)
    if t_on > t_final:
        raise PreconditionError("t_on must not exceed t_final")
    if controller is not None and (controller.n_meas != model.C_y.shape[0]
                                   or controller.n_ctrl != model.B_u.shape[1]):
        raise DimensionError("controller dimensions do not match the model")
    field, n, n_K = _closed_loop_field(model, controller)
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != n:
        raise DimensionError(f"x0 must have {n} entries")

    def blowup(t, z):
        return float(np.linalg.norm(z) - options.blowup_radius)

    blowup.terminal = True
    blowup.direction = 1.0

    t_grid = np.linspace(0.0, t_final, options.n_points)
    t_grid = np.unique(np.concatenate([t_grid, [t_on]]))
    segs = []
    diverged = False
    z = np.concatenate([x0, np.zeros(n_K)])
    for (a, b, on) in ((0.0, t_on, False), (t_on, t_final, True)):
        if b <= a:
            continue
        t_eval = t_grid[(t_grid >= a) & (t_grid <= b)]
        sol = solve_ivp(lambda t, zz: field(t, zz, on), (a, b), z,
                        method="RK45", rtol=options.rtol, atol=options.atol,
                        t_eval=t_eval, events=blowup, dense_output=False)
        segs.append((sol.t, sol.y))
        if sol.status == 1 or not sol.success:  # event or step failure
            diverged = True
            z = sol.y[:, -1] if sol.y.size else z
            break
        z = sol.y[:, -1]
    t_all = np.concatenate([s[0] for s in segs])
    z_all = np.hstack([s[1] for s in segs])
    # drop the duplicated junction point
    keep = np.concatenate([[True], np.diff(t_all) > 0])
    t_all = t_all[keep]
    z_all = z_all[:, keep]
    x = z_all[:n, :]
    xk = z_all[n:, :]
    y = model.C_y @ x
    p = model.B_u.shape[1]
    u = np.zeros((p, len(t_all)))
    if controller is not None:
        after = t_all >= t_on
        u[:, after] = (controller.C_K @ xk[:, after]
                       + controller.D_K @ y[:, after])
    return Trajectory(t=t_all, x=x, x_K=xk, u=u, y=y, t_on=t_on,
                      diverged=diverged, final_state=z_all[:, -1])


def transient_curve(A_cl, J, t_grid):
    """sigma_max(J^T e^{A_cl t} J) sampled on a time grid."""
    A_cl = np.atleast_2d(np.asarray(A_cl, dtype=float))
    J = np.atleast_2d(np.asarray(J, dtype=float))
    if not is_hurwitz(A_cl):
        raise StabilityError("transient curve requires a Hurwitz matrix")
    t_grid = np.asarray(t_grid, dtype=float)
    vals = np.empty_like(t_grid)
    for k, t in enumerate(t_grid):
        E = scipy.linalg.expm(A_cl * t)
        vals[k] = np.linalg.svd(J.T @ E @ J, compute_uv=False)[0]
    return vals
