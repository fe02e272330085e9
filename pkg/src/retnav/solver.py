"""Trajectory optimization via iterative LQR.

Backward pass: quadratic value expansion along the nominal trajectory using
exact cost derivatives and first-order dynamics, stabilized by Levenberg
regularization on the control Hessian. Forward pass: nonlinear rollout of the
affine policy with backtracking line search (factors 1, 1/2, ..., 2^-10).
Accepted iterations never increase the total cost.

The iteration loop runs in compiled kernels (_kernels module); this module
owns packing, parameter plumbing, and the public result types.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .costs import CostParams
from .errors import NonFiniteCost, RegularizationCeiling
from .kinematics import ControlInput, IntegrationConfig, ToolState

_ALPHAS = np.array([0.5**i for i in range(11)])
_REG_MAX = 1e8
_REG_MIN = 1e-6


@dataclass
class Trajectory:
    """Solved state/control sequence with per-stage costs."""

    states: list[ToolState]
    controls: list[ControlInput]
    stage_costs: np.ndarray
    total_cost: float

    def positions(self) -> np.ndarray:
        return np.array([s.p for s in self.states])


@dataclass
class SolveReport:
    iterations: int
    converged: bool
    final_cost: float
    cost_history: list[float] = field(default_factory=list)
    regularization_final: float = 0.0


WaypointSchedule = dict[int, tuple[np.ndarray, float]]


def pack_state(x: ToolState) -> np.ndarray:
    out = np.empty(18)
    out[0:3] = x.p
    out[3:12] = x.R.reshape(9)
    out[12:15] = x.v
    out[15:18] = x.omega
    return out


def unpack_state(row: np.ndarray) -> ToolState:
    return ToolState(row[0:3].copy(), row[3:12].reshape(3, 3).copy(), row[12:15].copy(), row[15:18].copy())


def ddp_solve(
    x0: ToolState,
    p_goal,
    cp: CostParams,
    warm_start: list[ControlInput] | None = None,
    waypoints: WaypointSchedule | None = None,
    integration: IntegrationConfig | None = None,
    max_iterations: int = 200,
    tol: float = 1e-8,
) -> tuple[Trajectory, SolveReport]:
    """Minimize the penalized objective from x0 toward p_goal.

    `waypoints` maps stage indices to (target, weight) pairs that add
    intermediate position costs (vessel following). The warm start, when
    given, fixes the horizon; otherwise cp.horizon zero controls are used.
    """
    p_goal = np.asarray(p_goal, dtype=float).reshape(3)
    cfg = integration if integration is not None else cp.integration()
    if warm_start is not None:
        U0 = np.array([np.concatenate([u.u_v, u.u_w]) for u in warm_start], dtype=float).reshape(-1, 6)
    else:
        U0 = np.zeros((cp.horizon, 6))
    n = U0.shape[0]

    wp_w = np.zeros(n)
    wp_t = np.zeros((n, 3))
    if waypoints:
        for idx, (target, weight) in waypoints.items():
            if not 0 <= idx < n:
                raise ValueError(f"waypoint stage {idx} outside horizon {n}")
            wp_w[idx] = float(weight)
            wp_t[idx] = np.asarray(target, dtype=float)

    has_s = cp.sclera_point is not None and cp.w_s > 0.0
    p_s = cp.sclera_point if has_s else np.zeros(3)
    has_e = cp.eye is not None and cp.w_e > 0.0
    e_c = cp.eye.center if has_e else np.zeros(3)
    e_r = cp.eye.radius if has_e else 1.0

    X, U, costs, J, iters, converged, reg, hist, hist_len, status = _kernels._solve(
        pack_state(x0),
        U0,
        cfg.dt,
        cfg.mass,
        np.ascontiguousarray(cfg.inertia),
        np.ascontiguousarray(cfg.inertia_inv),
        np.ascontiguousarray(cp.R_u),
        np.ascontiguousarray(cp.P_f),
        p_goal,
        cp.w_s,
        np.ascontiguousarray(p_s),
        has_s,
        cp._sigma,
        cp.w_e,
        np.ascontiguousarray(e_c),
        e_r,
        cp.eps,
        has_e,
        wp_w,
        wp_t,
        max_iterations,
        tol,
        _REG_MIN,
        _REG_MAX,
        _ALPHAS,
    )
    if status == 1:
        raise NonFiniteCost("initial rollout cost is not finite")
    if status == 2:
        raise RegularizationCeiling(f"backward pass failed at regularization {reg:g}")

    traj = Trajectory(
        states=[unpack_state(X[i]) for i in range(n + 1)],
        controls=[ControlInput(U[i, 0:3].copy(), U[i, 3:6].copy()) for i in range(n)],
        stage_costs=costs,
        total_cost=float(J),
    )
    report = SolveReport(
        iterations=int(iters),
        converged=bool(converged),
        final_cost=float(J),
        cost_history=[float(h) for h in hist[:hist_len]],
        regularization_final=float(reg),
    )
    return traj, report
