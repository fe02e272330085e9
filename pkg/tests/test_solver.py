import numpy as np
import pytest

from retnav.costs import CostParams, sclera_residual, state_difference
from retnav.errors import NonFiniteCost
from retnav.geometry import EyeGeometry
from retnav.kinematics import ControlInput, IntegrationConfig, ToolState, step_dynamics
from retnav.solver import ddp_solve

EYE = EyeGeometry([0.0, 0.0, -12.7], 12.7)
P_S = np.array([-8.89, 0.0, 2.70])


def lqr_oracle(p0, v0, goal, n, dt, mass, pos_gain, vel_gain, ctrl_gain):
    """Discrete-time Riccati recursion for the (p, v) double integrator.

    Independent of the DDP path: plain matrix recursions over the exact
    linear system e' = A e + B u with terminal cost only.
    """
    A = np.block([[np.eye(3), dt * np.eye(3)], [np.zeros((3, 3)), np.eye(3)]])
    B = np.vstack([dt * dt / mass * np.eye(3), dt / mass * np.eye(3)])
    R = ctrl_gain * np.eye(3)
    P = np.block(
        [[pos_gain * np.eye(3), np.zeros((3, 3))], [np.zeros((3, 3)), vel_gain * np.eye(3)]]
    )
    gains = []
    V = P
    for _ in range(n):
        K = np.linalg.solve(R + B.T @ V @ B, B.T @ V @ A)
        V = A.T @ V @ (A - B @ K)
        V = 0.5 * (V + V.T)
        gains.append(K)
    gains.reverse()
    e = np.concatenate([np.asarray(p0) - np.asarray(goal), v0])
    controls = []
    for K in gains:
        u = -K @ e
        controls.append(u)
        e = A @ e + B @ u
    return np.array(controls)


def quadratic_params(n=100, dt=0.01):
    return CostParams(w_s=0.0, w_e=0.0, sclera_point=None, eye=None, horizon=n, dt=dt)


def axis_through(p, target):
    a = np.asarray(target, dtype=float) - np.asarray(p, dtype=float)
    a /= np.linalg.norm(a)
    helper = np.array([0.0, 0.0, 1.0]) if abs(a[2]) < 0.9 else np.array([0.0, 1.0, 0.0])
    b = np.cross(a, helper)
    b /= np.linalg.norm(b)
    return np.column_stack([a, b, np.cross(a, b)])


class TestLqrEquivalence:
    def test_optimum_at_start(self):
        cp = quadratic_params()
        x0 = ToolState.rest([1.0, 2.0, 3.0])
        traj, report = ddp_solve(x0, [1.0, 2.0, 3.0], cp)
        assert report.converged
        assert report.iterations <= 2
        for u in traj.controls:
            np.testing.assert_allclose(u.u_v, 0.0, atol=1e-12)
            np.testing.assert_allclose(u.u_w, 0.0, atol=1e-12)
        assert traj.total_cost == pytest.approx(0.0, abs=1e-15)

    def test_matches_riccati_1d(self):
        cp = quadratic_params()
        x0 = ToolState.rest([0.0, 0.0, 0.0])
        goal = np.array([3.0, 0.0, 0.0])
        traj, report = ddp_solve(x0, goal, cp)
        assert report.converged
        u_ref = lqr_oracle(x0.p, x0.v, goal, cp.horizon, cp.dt, 1.0, 1e3, 1e2, 1e-3)
        u_sol = np.array([u.u_v for u in traj.controls])
        rel = np.linalg.norm(u_sol - u_ref) / np.linalg.norm(u_ref)
        assert rel <= 1e-6
        # off-axis and rotational channels stay quiet
        assert np.max(np.abs(u_sol[:, 1:])) <= 1e-9 * np.max(np.abs(u_ref))
        assert np.max(np.abs([u.u_w for u in traj.controls])) <= 1e-9

    def test_matches_riccati_3d(self):
        cp = quadratic_params()
        x0 = ToolState([1.0, -1.0, 0.5], np.eye(3), [0.5, 0.2, -0.1], np.zeros(3))
        goal = np.array([-2.0, 3.0, 2.5])
        traj, report = ddp_solve(x0, goal, cp)
        assert report.converged
        u_ref = lqr_oracle(x0.p, x0.v, goal, cp.horizon, cp.dt, 1.0, 1e3, 1e2, 1e-3)
        u_sol = np.array([u.u_v for u in traj.controls])
        rel = np.linalg.norm(u_sol - u_ref) / np.linalg.norm(u_ref)
        assert rel <= 1e-6

    def test_terminal_state_reaches_goal_region(self):
        cp = quadratic_params()
        x0 = ToolState.rest([0.0, 0.0, 4.0])
        goal = np.array([1.0, -1.0, 0.0])
        traj, _ = ddp_solve(x0, goal, cp)
        assert np.linalg.norm(traj.states[-1].p - goal) < 0.05
        assert np.linalg.norm(traj.states[-1].v) < 0.5


class TestSolverInvariants:
    def test_cost_history_non_increasing(self):
        cp = CostParams(sclera_point=P_S, eye=EYE, horizon=80)
        x0 = ToolState.rest([2.0, 1.0, 3.0], axis_through([2.0, 1.0, 3.0], P_S))
        goal = np.array([-1.0, -1.0, -0.0788])
        traj, report = ddp_solve(x0, goal, cp)
        hist = np.array(report.cost_history)
        assert np.all(np.diff(hist) <= 0.0)
        assert report.final_cost == pytest.approx(hist[-1])

    def test_dynamic_consistency(self):
        cp = CostParams(sclera_point=P_S, eye=EYE, horizon=60)
        x0 = ToolState.rest([1.5, 0.5, 2.5], axis_through([1.5, 0.5, 2.5], P_S))
        traj, _ = ddp_solve(x0, [0.0, 0.0, 0.0], cp)
        cfg = cp.integration()
        x = traj.states[0]
        for i, u in enumerate(traj.controls):
            x = step_dynamics(x, u, cfg)
            assert np.linalg.norm(x.p - traj.states[i + 1].p) <= 1e-9

    def test_warm_start_preserved_horizon(self):
        cp = quadratic_params(n=50)
        x0 = ToolState.rest([0.0, 0.0, 2.0])
        warm = [ControlInput.zero() for _ in range(30)]
        traj, _ = ddp_solve(x0, [0.0, 0.0, 0.0], cp, warm_start=warm)
        assert len(traj.controls) == 30
        assert len(traj.states) == 31

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_non_finite_warm_start(self):
        cp = quadratic_params(n=10)
        x0 = ToolState.rest([0.0, 0.0, 2.0])
        warm = [ControlInput([1e200, 0.0, 0.0], np.zeros(3)) for _ in range(10)]
        with pytest.raises(NonFiniteCost):
            ddp_solve(x0, [0.0, 0.0, 0.0], cp, warm_start=warm)

    def test_stage_costs_shape(self):
        cp = quadratic_params(n=40)
        x0 = ToolState.rest([0.0, 0.0, 1.0])
        traj, _ = ddp_solve(x0, [1.0, 0.0, 0.0], cp)
        assert traj.stage_costs.shape == (40,)
        assert traj.total_cost >= float(np.sum(traj.stage_costs))


class TestScleraDominance:
    def mean_residual(self, w_s):
        start = np.array([2.0, 1.0, 3.0])
        cp = CostParams(w_s=w_s, w_e=0.0, sclera_point=P_S, eye=None, horizon=100)
        x0 = ToolState.rest(start, axis_through(start, P_S))
        goal = np.array([-1.0, -1.0, -0.0788])  # on the sphere surface
        traj, _ = ddp_solve(x0, goal, cp)
        res = [np.linalg.norm(sclera_residual(s, P_S)) for s in traj.states]
        return float(np.mean(res))

    def test_high_weight_bounds_residual(self):
        assert self.mean_residual(1e4) <= 0.1

    def test_zero_weight_exceeds(self):
        assert self.mean_residual(0.0) > 0.1

    def test_weight_sweep_non_increasing(self):
        residuals = [self.mean_residual(w) for w in (1e2, 1e3, 1e4)]
        assert residuals[0] >= residuals[1] >= residuals[2]


class TestWaypointSchedule:
    def test_waypoints_pull_trajectory(self):
        cp = quadratic_params(n=60)
        x0 = ToolState.rest([0.0, 0.0, 2.0])
        target = np.array([1.0, 0.5, 1.5])
        schedule = {30: (target, 1e4)}
        traj, report = ddp_solve(x0, [2.0, 1.0, 1.0], cp, waypoints=schedule)
        assert report.converged
        assert np.linalg.norm(traj.states[30].p - target) < 0.01
