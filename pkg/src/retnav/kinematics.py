"""Rigid-body tool state and discrete-time dynamics.

The end-effector is modeled as a unit-mass / configurable-inertia rigid body.
Translational forces are commanded in the end-effector frame and act on the
base-frame velocity; torques act on the end-effector-frame angular velocity.
Integration is semi-implicit Euler with the orientation advanced through the
rotation exponential and re-orthonormalized every step.

Units: mm, s, kg-equivalent mass. Angular quantities in rad.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidState

# Below this angle the Rodrigues coefficients switch to their series forms.
_SMALL_ANGLE = 1e-8


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix: skew(a) @ b == cross(a, b)."""
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def so3_exp(phi: np.ndarray) -> np.ndarray:
    """Rotation matrix for a rotation vector via the Rodrigues formula."""
    phi = np.asarray(phi, dtype=float)
    angle = float(np.linalg.norm(phi))
    K = skew(phi)
    if angle < _SMALL_ANGLE:
        # Second-order series; exact to machine precision at this scale.
        return np.eye(3) + K + 0.5 * (K @ K)
    s = np.sin(angle) / angle
    c = (1.0 - np.cos(angle)) / (angle * angle)
    return np.eye(3) + s * K + c * (K @ K)


def so3_log(R: np.ndarray) -> np.ndarray:
    """Rotation vector of a rotation matrix (inverse of so3_exp)."""
    trace = float(np.trace(R))
    cos_angle = min(1.0, max(-1.0, 0.5 * (trace - 1.0)))
    angle = np.arccos(cos_angle)
    axis_raw = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if angle < _SMALL_ANGLE:
        return 0.5 * axis_raw
    if np.pi - angle < 1e-6:
        # Near pi the off-diagonal difference degenerates; recover the axis
        # from the dominant diagonal entry instead.
        diag = np.diag(R)
        k = int(np.argmax(diag))
        axis = np.zeros(3)
        axis[k] = np.sqrt(max(0.0, (diag[k] + 1.0) * 0.5))
        for j in range(3):
            if j != k:
                axis[j] = (R[k, j] + R[j, k]) / (4.0 * axis[k])
        if axis_raw[k] < 0.0:
            axis = -axis
        return angle * axis
    return (angle / (2.0 * np.sin(angle))) * axis_raw


def so3_right_jacobian(phi: np.ndarray) -> np.ndarray:
    """Right Jacobian of so3_exp: exp((phi + d)^) ~ exp(phi^) exp((J_r d)^)."""
    phi = np.asarray(phi, dtype=float)
    angle = float(np.linalg.norm(phi))
    K = skew(phi)
    if angle < _SMALL_ANGLE:
        return np.eye(3) - 0.5 * K + (K @ K) / 6.0
    a2 = angle * angle
    c1 = (1.0 - np.cos(angle)) / a2
    c2 = (angle - np.sin(angle)) / (a2 * angle)
    return np.eye(3) - c1 * K + c2 * (K @ K)


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """Project a near-rotation matrix back onto SO(3).

    One Newton step of the orthogonality iteration; for drift at the
    accumulation scale of repeated exp-multiplies this keeps
    ||R^T R - I||_inf at machine precision.
    """
    return R @ (1.5 * np.eye(3) - 0.5 * (R.T @ R))


@dataclass
class ToolState:
    """End-effector state: position, orientation, and twist.

    p     -- tip position, mm, base frame
    R     -- orientation matrix (columns are end-effector axes in base frame);
             the tool axis is the first column
    v     -- translational velocity, mm/s, base frame
    omega -- angular velocity, rad/s, end-effector frame
    """

    p: np.ndarray
    R: np.ndarray
    v: np.ndarray
    omega: np.ndarray

    def __post_init__(self) -> None:
        self.p = np.asarray(self.p, dtype=float).reshape(3)
        self.R = np.asarray(self.R, dtype=float).reshape(3, 3)
        self.v = np.asarray(self.v, dtype=float).reshape(3)
        self.omega = np.asarray(self.omega, dtype=float).reshape(3)

    @property
    def axis(self) -> np.ndarray:
        """Tool axis direction in the base frame."""
        return self.R[:, 0]

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.p))
            and np.all(np.isfinite(self.R))
            and np.all(np.isfinite(self.v))
            and np.all(np.isfinite(self.omega))
        )

    def copy(self) -> "ToolState":
        return ToolState(self.p.copy(), self.R.copy(), self.v.copy(), self.omega.copy())

    @staticmethod
    def rest(p, R=None) -> "ToolState":
        """Stationary state at position p with orientation R (identity default)."""
        if R is None:
            R = np.eye(3)
        return ToolState(np.asarray(p, dtype=float), np.asarray(R, dtype=float), np.zeros(3), np.zeros(3))


@dataclass
class ControlInput:
    """Force/torque command, both expressed in the end-effector frame."""

    u_v: np.ndarray
    u_w: np.ndarray

    def __post_init__(self) -> None:
        self.u_v = np.asarray(self.u_v, dtype=float).reshape(3)
        self.u_w = np.asarray(self.u_w, dtype=float).reshape(3)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u_v)) and np.all(np.isfinite(self.u_w)))

    def within_limits(self, max_force: float = 10.0, max_torque: float = 10.0) -> bool:
        """Check against actuator limits; enforced at command boundaries, not in the solver."""
        return bool(np.linalg.norm(self.u_v) <= max_force and np.linalg.norm(self.u_w) <= max_torque)

    @staticmethod
    def zero() -> "ControlInput":
        return ControlInput(np.zeros(3), np.zeros(3))


@dataclass
class IntegrationConfig:
    """Time step and inertial parameters of the rigid-body model."""

    dt: float = 0.01
    mass: float = 1.0
    inertia: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self) -> None:
        self.inertia = np.asarray(self.inertia, dtype=float).reshape(3, 3)
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if not np.allclose(self.inertia, self.inertia.T):
            raise ValueError("inertia must be symmetric")
        if np.any(np.linalg.eigvalsh(self.inertia) <= 0.0):
            raise ValueError("inertia must be positive definite")

    @property
    def inertia_inv(self) -> np.ndarray:
        return np.linalg.inv(self.inertia)


def step_dynamics(x: ToolState, u: ControlInput, cfg: IntegrationConfig) -> ToolState:
    """Advance the state one semi-implicit Euler step.

    v' = v + dt/m * R u_v          (force rotated to base frame)
    p' = p + dt * v'
    w' = w + dt * I^-1 (u_w - w x I w)
    R' = R exp(dt * w'^), re-orthonormalized
    """
    if not x.is_finite() or not u.is_finite():
        raise InvalidState("non-finite state or control")
    dt = cfg.dt
    v_next = x.v + (dt / cfg.mass) * (x.R @ u.u_v)
    p_next = x.p + dt * v_next
    gyro = np.cross(x.omega, cfg.inertia @ x.omega)
    w_next = x.omega + dt * (cfg.inertia_inv @ (u.u_w - gyro))
    R_next = orthonormalize(x.R @ so3_exp(dt * w_next))
    return ToolState(p_next, R_next, v_next, w_next)


def rollout(x0: ToolState, controls, cfg: IntegrationConfig) -> list[ToolState]:
    """Propagate a control sequence; returns len(controls) + 1 states, [0] == x0."""
    states = [x0]
    x = x0
    for u in controls:
        x = step_dynamics(x, u, cfg)
        states.append(x)
    return states
