import numpy as np
import pytest

from retnav.errors import InvalidState
from retnav.kinematics import (
    ControlInput,
    IntegrationConfig,
    ToolState,
    orthonormalize,
    rollout,
    skew,
    so3_exp,
    so3_log,
    so3_right_jacobian,
    step_dynamics,
)


def matrix_exp_series(K: np.ndarray, terms: int = 20) -> np.ndarray:
    """Truncated matrix-exponential series, the independent oracle for so3_exp."""
    out = np.eye(3)
    acc = np.eye(3)
    for n in range(1, terms):
        acc = acc @ K / n
        out = out + acc
    return out


class TestSo3:
    def test_zero_is_identity(self):
        np.testing.assert_allclose(so3_exp(np.zeros(3)), np.eye(3))

    def test_quarter_turn_about_z(self):
        R = so3_exp(np.array([0.0, 0.0, np.pi / 2]))
        np.testing.assert_allclose(R @ np.array([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0], atol=1e-15)

    def test_matches_series_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            phi = rng.uniform(0.0, 2.0) * axis
            np.testing.assert_allclose(so3_exp(phi), matrix_exp_series(skew(phi)), atol=1e-12)

    def test_small_angle_branch_matches_series(self):
        for scale in (1e-9, 1e-10, 1e-12):
            phi = scale * np.array([1.0, -2.0, 0.5])
            np.testing.assert_allclose(so3_exp(phi), matrix_exp_series(skew(phi)), atol=1e-15)

    def test_log_inverts_exp(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            phi = rng.uniform(0.0, np.pi * 0.99) * axis
            np.testing.assert_allclose(so3_log(so3_exp(phi)), phi, atol=1e-9)

    def test_log_near_pi(self):
        phi = (np.pi - 1e-8) * np.array([0.0, 1.0, 0.0])
        rec = so3_log(so3_exp(phi))
        np.testing.assert_allclose(so3_exp(rec), so3_exp(phi), atol=1e-7)

    def test_right_jacobian_first_order(self):
        rng = np.random.default_rng(3)
        phi = rng.uniform(-1.0, 1.0, 3)
        J = so3_right_jacobian(phi)
        h = 1e-7
        for j in range(3):
            d = np.zeros(3)
            d[j] = h
            fd = so3_log(so3_exp(phi).T @ so3_exp(phi + d)) / h
            np.testing.assert_allclose(J[:, j], fd, atol=1e-6)


class TestStepDynamics:
    def test_rest_fixed_point(self):
        x = ToolState.rest([1.0, 2.0, 3.0])
        nxt = step_dynamics(x, ControlInput.zero(), IntegrationConfig())
        np.testing.assert_allclose(nxt.p, x.p)
        np.testing.assert_allclose(nxt.R, x.R)
        np.testing.assert_allclose(nxt.v, 0.0)
        np.testing.assert_allclose(nxt.omega, 0.0)

    def test_pure_drift(self):
        x = ToolState([0.0, 0.0, 0.0], np.eye(3), [1.0, 0.0, 0.0], [0.0, 0.0, 0.0])
        nxt = step_dynamics(x, ControlInput.zero(), IntegrationConfig(dt=0.1))
        np.testing.assert_allclose(nxt.p, [0.1, 0.0, 0.0])

    def test_constant_force_matches_closed_form(self):
        # Semi-implicit recurrence: v_k = k dt a, p_k = p0 + dt^2 a k(k+1)/2.
        dt, n = 0.02, 25
        a = np.array([0.3, -0.1, 0.5])
        cfg = IntegrationConfig(dt=dt)
        x = ToolState.rest([0.0, 0.0, 0.0])
        u = ControlInput(a, np.zeros(3))
        for _ in range(n):
            x = step_dynamics(x, u, cfg)
        v_exact = n * dt * a
        p_exact = dt * dt * a * (n * (n + 1) / 2.0)
        np.testing.assert_allclose(x.v, v_exact, rtol=1e-12)
        np.testing.assert_allclose(x.p, p_exact, rtol=1e-12)

    def test_force_rotated_by_orientation(self):
        R = so3_exp(np.array([0.0, 0.0, np.pi / 2]))
        x = ToolState.rest([0.0, 0.0, 0.0], R)
        nxt = step_dynamics(x, ControlInput([1.0, 0.0, 0.0], [0.0, 0.0, 0.0]), IntegrationConfig(dt=0.1))
        # ee-frame +x force acts along base +y after the quarter turn
        np.testing.assert_allclose(nxt.v, [0.0, 0.1, 0.0], atol=1e-15)

    def test_non_finite_raises(self):
        x = ToolState([np.nan, 0.0, 0.0], np.eye(3), np.zeros(3), np.zeros(3))
        with pytest.raises(InvalidState):
            step_dynamics(x, ControlInput.zero(), IntegrationConfig())

    def test_inertia_must_be_spd(self):
        with pytest.raises(ValueError):
            IntegrationConfig(inertia=-np.eye(3))
        with pytest.raises(ValueError):
            IntegrationConfig(dt=0.0)


class TestRollout:
    def test_zero_controls_constant(self):
        x0 = ToolState.rest([1.0, 1.0, 1.0])
        states = rollout(x0, [ControlInput.zero()] * 5, IntegrationConfig())
        assert len(states) == 6
        for s in states:
            np.testing.assert_allclose(s.p, x0.p)

    def test_single_step_equals_step_dynamics(self):
        x0 = ToolState([0.0, 0.0, 0.0], np.eye(3), [1.0, 0.0, 0.0], [0.0, 0.1, 0.0])
        u = ControlInput([0.2, 0.0, -0.1], [0.0, 0.05, 0.0])
        cfg = IntegrationConfig()
        states = rollout(x0, [u], cfg)
        expected = step_dynamics(x0, u, cfg)
        np.testing.assert_allclose(states[1].p, expected.p)
        np.testing.assert_allclose(states[1].R, expected.R)

    def test_fold_equivalence(self):
        rng = np.random.default_rng(5)
        cfg = IntegrationConfig()
        x0 = ToolState.rest([0.0, 0.0, 0.0])
        controls = [ControlInput(rng.normal(size=3), rng.normal(size=3)) for _ in range(40)]
        states = rollout(x0, controls, cfg)
        x = x0
        for u in controls:
            x = step_dynamics(x, u, cfg)
        np.testing.assert_allclose(states[-1].p, x.p)
        np.testing.assert_allclose(states[-1].R, x.R)
        np.testing.assert_allclose(states[-1].v, x.v)
        np.testing.assert_allclose(states[-1].omega, x.omega)


class TestInvariants:
    def test_rotation_stays_orthonormal_10k_steps(self):
        rng = np.random.default_rng(0)
        cfg = IntegrationConfig()
        x = ToolState.rest([0.0, 0.0, 0.0])
        worst = 0.0
        for i in range(10_000):
            u = ControlInput(0.5 * np.sin(0.01 * i + np.arange(3)), 0.5 * np.cos(0.02 * i + np.arange(3)))
            x = step_dynamics(x, u, cfg)
            drift = np.max(np.abs(x.R.T @ x.R - np.eye(3)))
            worst = max(worst, drift)
        assert worst <= 1e-9

    def test_zero_input_momentum_conserved(self):
        x = ToolState([0.0, 0.0, 0.0], np.eye(3), [0.3, -0.2, 0.1], [0.5, 0.4, -0.6])
        cfg = IntegrationConfig(inertia=2.0 * np.eye(3))
        v0, w0 = np.linalg.norm(x.v), np.linalg.norm(x.omega)
        for _ in range(1000):
            x = step_dynamics(x, ControlInput.zero(), cfg)
            assert abs(np.linalg.norm(x.v) - v0) <= 1e-12
            assert abs(np.linalg.norm(x.omega) - w0) <= 1e-12

    def test_time_step_convergence_first_order(self):
        def u_of_t(t):
            return ControlInput(
                [np.sin(2 * t), np.cos(3 * t), 0.2],
                [0.3 * np.cos(t), -0.2 * np.sin(2 * t), 0.1],
            )

        def terminal(dt):
            cfg = IntegrationConfig(dt=dt)
            x = ToolState.rest([0.0, 0.0, 0.0])
            steps = int(round(1.0 / dt))
            for i in range(steps):
                x = step_dynamics(x, u_of_t(i * dt), cfg)
            return x

        ref = terminal(1.0 / 6400)
        def err(dt):
            x = terminal(dt)
            return np.linalg.norm(x.p - ref.p) + np.linalg.norm(x.v - ref.v)

        e1, e2 = err(1.0 / 100), err(1.0 / 200)
        assert 1.7 <= e1 / e2 <= 2.3

    def test_orthonormalize_corrects_drift(self):
        R = so3_exp(np.array([0.1, 0.2, 0.3])) + 1e-7 * np.ones((3, 3))
        fixed = orthonormalize(orthonormalize(R))
        assert np.max(np.abs(fixed.T @ fixed - np.eye(3))) < 1e-12
