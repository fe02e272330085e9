"""Penalized trajectory cost and its exact derivatives.

The objective combines quadratic control effort, a terminal state penalty
toward the goal, a sclera-port penalty on the lateral offset between the port
and the tool axis, and a retinal collision penalty that activates when the
tip is within a margin of the estimated sphere surface.

Derivatives are taken in local tangent coordinates
dx = [dp, dphi, dv, dw] in R^12, with the orientation perturbed as
R exp(dphi^). Gradients and Hessians are exact (curvature terms included) so
they agree with finite differences of the cost through the retraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CenterSingularity
from .geometry import EyeGeometry
from .kinematics import (
    ControlInput,
    IntegrationConfig,
    ToolState,
    skew,
    so3_exp,
    so3_log,
    so3_right_jacobian,
)

NX = 12  # tangent state dimension
NU = 6  # control dimension

_EX = np.array([1.0, 0.0, 0.0])


def default_terminal_gain() -> np.ndarray:
    """Position block 1e3, velocity and angular-velocity blocks 1e2."""
    P = np.zeros((9, 9))
    P[0:3, 0:3] = 1e3 * np.eye(3)
    P[3:6, 3:6] = 1e2 * np.eye(3)
    P[6:9, 6:9] = 1e2 * np.eye(3)
    return P


@dataclass
class CostParams:
    """Gains, penalty weights, and horizon of the planning objective."""

    P_f: np.ndarray = field(default_factory=default_terminal_gain)
    R_u: np.ndarray = field(default_factory=lambda: 1e-3 * np.eye(6))
    w_s: float = 1e4
    w_e: float = 1e4
    eps: float = 0.2
    sclera_point: np.ndarray | None = None
    eye: EyeGeometry | None = None
    horizon: int = 100
    dt: float = 0.01
    sclera_projector_sign: str = "minus"

    def __post_init__(self) -> None:
        self.P_f = np.asarray(self.P_f, dtype=float).reshape(9, 9)
        self.R_u = np.asarray(self.R_u, dtype=float).reshape(6, 6)
        if self.sclera_point is not None:
            self.sclera_point = np.asarray(self.sclera_point, dtype=float).reshape(3)
        if np.any(np.linalg.eigvalsh(0.5 * (self.P_f + self.P_f.T)) < -1e-9):
            raise ValueError("P_f must be positive semidefinite")
        if np.any(np.linalg.eigvalsh(0.5 * (self.R_u + self.R_u.T)) <= 0.0):
            raise ValueError("R_u must be positive definite")
        if self.w_s < 0.0 or self.w_e < 0.0:
            raise ValueError("penalty weights must be non-negative")
        if not self.eps > 0.0:
            raise ValueError("eps must be positive")
        if self.horizon < 2:
            raise ValueError("horizon must be at least 2")
        if self.sclera_projector_sign not in ("minus", "plus"):
            raise ValueError("sclera_projector_sign must be 'minus' or 'plus'")

    def integration(self, mass: float = 1.0, inertia: np.ndarray | None = None) -> IntegrationConfig:
        return IntegrationConfig(dt=self.dt, mass=mass, inertia=np.eye(3) if inertia is None else inertia)

    @property
    def _sigma(self) -> float:
        # ||(I - aa^T)s||^2 = ||s||^2 - (a.s)^2 and ||(I + aa^T)s||^2 = ||s||^2 + 3(a.s)^2.
        return -1.0 if self.sclera_projector_sign == "minus" else 3.0


def sclera_residual(x: ToolState, p_s: np.ndarray, sign: str = "minus") -> np.ndarray:
    """Offset between the port and the tool-axis line.

    With the default projector (I - r_x r_x^T) this is the component of
    (p_s - p) orthogonal to the tool axis: zero exactly when the axis line
    passes through the port. The 'plus' form keeps the printed
    (I + r_x r_x^T) variant for comparison.
    """
    a = x.axis
    s = np.asarray(p_s, dtype=float) - x.p
    if sign == "minus":
        return s - a * (a @ s)
    return s + a * (a @ s)


def collision_penalty(p: np.ndarray, eye: EyeGeometry, eps: float) -> float:
    """Surface-deviation penalty, active within eps of the surface and beyond.

    Value is (||d_c|| - r)^2 for ||d_c|| > r - eps, exactly zero otherwise
    (no smoothing across the activation indicator).
    """
    d = np.asarray(p, dtype=float) - eye.center
    rho = float(np.linalg.norm(d))
    if rho < 1e-12:
        raise CenterSingularity("tool tip at the sphere center")
    if rho <= eye.radius - eps:
        return 0.0
    return (rho - eye.radius) ** 2


def stage_cost(x: ToolState, u: ControlInput, cp: CostParams) -> float:
    """Per-step cost: control effort + sclera penalty + collision penalty."""
    uu = np.concatenate([u.u_v, u.u_w])
    cost = 0.5 * float(uu @ (cp.R_u @ uu))
    if cp.sclera_point is not None and cp.w_s > 0.0:
        m = sclera_residual(x, cp.sclera_point, cp.sclera_projector_sign)
        cost += cp.w_s * float(m @ m)
    if cp.eye is not None and cp.w_e > 0.0:
        cost += cp.w_e * collision_penalty(x.p, cp.eye, cp.eps)
    return cost


def terminal_cost(x: ToolState, cp: CostParams, p_goal: np.ndarray) -> float:
    """Quadratic terminal penalty on [p - p_goal, v, omega]."""
    e = np.concatenate([x.p - np.asarray(p_goal, dtype=float), x.v, x.omega])
    return 0.5 * float(e @ (cp.P_f @ e))


@dataclass
class QuadraticExpansion:
    """Gradient and Hessian of a cost term in tangent coordinates."""

    gx: np.ndarray
    gu: np.ndarray
    Hxx: np.ndarray
    Huu: np.ndarray
    Hux: np.ndarray


def _sclera_blocks(x: ToolState, cp: CostParams):
    """Exact gradient/Hessian blocks of the sclera term over (dp, dphi)."""
    s = cp.sclera_point - x.p
    a = x.axis
    w = x.R.T @ s
    t = float(a @ s)
    sig = cp._sigma
    ws = cp.w_s
    g_t = -np.cross(w, _EX)
    grad_p = -2.0 * ws * (s + sig * t * a)
    grad_phi = 2.0 * ws * sig * t * g_t
    H_pp = 2.0 * ws * (np.eye(3) + sig * np.outer(a, a))
    H_pphi = -2.0 * ws * sig * (np.outer(a, g_t) - t * (x.R @ skew(_EX)))
    H_t = 0.5 * (np.outer(_EX, w) + np.outer(w, _EX)) - (w[0]) * np.eye(3)
    H_phiphi = 2.0 * ws * sig * (np.outer(g_t, g_t) + t * H_t)
    return grad_p, grad_phi, H_pp, H_pphi, H_phiphi


def _collision_blocks(p: np.ndarray, cp: CostParams):
    """Exact gradient/Hessian of the collision term over dp (zero when inactive)."""
    d = p - cp.eye.center
    rho = float(np.linalg.norm(d))
    if rho < 1e-12:
        raise CenterSingularity("tool tip at the sphere center")
    r = cp.eye.radius
    if rho <= r - cp.eps:
        return np.zeros(3), np.zeros((3, 3))
    n = d / rho
    grad = 2.0 * cp.w_e * (rho - r) * n
    P_t = np.eye(3) - np.outer(n, n)
    H = 2.0 * cp.w_e * (np.outer(n, n) + ((rho - r) / rho) * P_t)
    return grad, H


def stage_expansion(
    x: ToolState,
    u: ControlInput,
    cp: CostParams,
    waypoint: tuple[np.ndarray, float] | None = None,
) -> QuadraticExpansion:
    """Exact quadratic expansion of the stage cost at (x, u).

    `waypoint` optionally adds weight * ||p - target||^2, used by the
    vessel-following schedule.
    """
    gx = np.zeros(NX)
    Hxx = np.zeros((NX, NX))
    uu = np.concatenate([u.u_v, u.u_w])
    gu = cp.R_u @ uu
    Huu = cp.R_u.copy()
    Hux = np.zeros((NU, NX))
    if cp.sclera_point is not None and cp.w_s > 0.0:
        grad_p, grad_phi, H_pp, H_pphi, H_phiphi = _sclera_blocks(x, cp)
        gx[0:3] += grad_p
        gx[3:6] += grad_phi
        Hxx[0:3, 0:3] += H_pp
        Hxx[0:3, 3:6] += H_pphi
        Hxx[3:6, 0:3] += H_pphi.T
        Hxx[3:6, 3:6] += H_phiphi
    if cp.eye is not None and cp.w_e > 0.0:
        grad, H = _collision_blocks(x.p, cp)
        gx[0:3] += grad
        Hxx[0:3, 0:3] += H
    if waypoint is not None:
        target, weight = waypoint
        diff = x.p - np.asarray(target, dtype=float)
        gx[0:3] += 2.0 * weight * diff
        Hxx[0:3, 0:3] += 2.0 * weight * np.eye(3)
    return QuadraticExpansion(gx=gx, gu=gu, Hxx=Hxx, Huu=Huu, Hux=Hux)


# Maps the 9-d terminal error [p - goal, v, w] onto the 12-d tangent state.
_TERMINAL_SELECT = np.zeros((9, NX))
_TERMINAL_SELECT[0:3, 0:3] = np.eye(3)
_TERMINAL_SELECT[3:6, 6:9] = np.eye(3)
_TERMINAL_SELECT[6:9, 9:12] = np.eye(3)


def terminal_expansion(x: ToolState, cp: CostParams, p_goal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact gradient and Hessian of the terminal cost in tangent coordinates."""
    e = np.concatenate([x.p - np.asarray(p_goal, dtype=float), x.v, x.omega])
    gx = _TERMINAL_SELECT.T @ (cp.P_f @ e)
    Hxx = _TERMINAL_SELECT.T @ cp.P_f @ _TERMINAL_SELECT
    return gx, Hxx


def linearize_dynamics(x: ToolState, u: ControlInput, cfg: IntegrationConfig) -> tuple[np.ndarray, np.ndarray]:
    """Jacobians A = d(x') / d(dx), B = d(x') / d(du) in tangent coordinates.

    Derived from the semi-implicit Euler step with the orientation update
    linearized through the right Jacobian of the rotation exponential.
    """
    dt = cfg.dt
    m = cfg.mass
    I_in = cfg.inertia
    I_inv = cfg.inertia_inv
    R = x.R
    w = x.omega
    # Next-step nominal angular velocity enters the orientation linearization.
    w_next = w + dt * (I_inv @ (u.u_w - np.cross(w, I_in @ w)))
    W = np.eye(3) + dt * (I_inv @ (skew(I_in @ w) - skew(w) @ I_in))
    U = dt * I_inv
    Dvphi = -(dt / m) * (R @ skew(u.u_v))
    Dvu = (dt / m) * R
    E = so3_exp(dt * w_next).T
    Jr = so3_right_jacobian(dt * w_next)

    A = np.zeros((NX, NX))
    B = np.zeros((NX, NU))
    # dp' rows
    A[0:3, 0:3] = np.eye(3)
    A[0:3, 3:6] = dt * Dvphi
    A[0:3, 6:9] = dt * np.eye(3)
    B[0:3, 0:3] = dt * Dvu
    # dphi' rows
    A[3:6, 3:6] = E
    A[3:6, 9:12] = dt * (Jr @ W)
    B[3:6, 3:6] = dt * (Jr @ U)
    # dv' rows
    A[6:9, 3:6] = Dvphi
    A[6:9, 6:9] = np.eye(3)
    B[6:9, 0:3] = Dvu
    # dw' rows
    A[9:12, 9:12] = W
    B[9:12, 3:6] = U
    return A, B


def state_difference(x: ToolState, ref: ToolState) -> np.ndarray:
    """Tangent coordinates of x about ref (inverse of state_retract)."""
    return np.concatenate(
        [x.p - ref.p, so3_log(ref.R.T @ x.R), x.v - ref.v, x.omega - ref.omega]
    )


def state_retract(ref: ToolState, dx: np.ndarray) -> ToolState:
    """Apply tangent coordinates dx to ref."""
    return ToolState(
        ref.p + dx[0:3],
        ref.R @ so3_exp(dx[3:6]),
        ref.v + dx[6:9],
        ref.omega + dx[9:12],
    )
