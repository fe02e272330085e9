"""Deterministic session core behind the operator protocol.

A Session owns one scene and one tool. All mutation flows through
handle_command() and tick(), both pure with respect to wall clock: event
payloads carry simulation time only, so a recorded command sequence replays
to a bit-identical event log. One tick advances one simulation step;
replanning happens inside the tick whose index hits the cadence.

Command types (payload fields in parentheses):
    click_goal (pixel)            start or retarget navigation
    set_weights (w_s, w_e, replan_hz; any subset)
    start_localization (samples)  probe the surface and fit the sphere
    set_vessel_path (pixels)      plan and begin vessel following
    pause / resume / reset
    run_benchmark (count, noise_sigma)

Event types: hello, ack, state_tick, fit_update, goal_reached, vessel_done,
benchmark_result, error. Every command is answered by exactly one ack.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .costs import CostParams, sclera_residual
from .errors import GoalOffRetina, NoIntersection, RetNavError
from .geometry import FitResult, project_shadow, raycast_sphere
from .kinematics import ToolState
from .oracle import DiscretizationSpec, OracleConfig, PerceptionOracle
from .report import GoalEntry
from .scenario import Scenario, default_scenario, localization_pixels
from .solver import Trajectory, ddp_solve
from .tasks import Z_GUARD_MM, VesselPath, run_localization, run_navigation_benchmark

PROTO_VERSION = 1

_LIGHT_DIR = np.array([0.0, 0.0, -1.0])


def canonical(msg: dict) -> str:
    """Stable single-line encoding used for logs and replay comparison."""
    return json.dumps(msg, sort_keys=True, separators=(",", ":"))


@dataclass
class SessionConfig:
    seed: int = 0
    replan_hz: float = 5.0
    tick_hz: float = 100.0
    max_replans: int = 200
    solve_iters: int = 60
    noise_sigma: float = 0.0
    plan_preview_stride: int = 5

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "replan_hz": self.replan_hz,
            "tick_hz": self.tick_hz,
            "max_replans": self.max_replans,
            "solve_iters": self.solve_iters,
            "noise_sigma": self.noise_sigma,
            "plan_preview_stride": self.plan_preview_stride,
        }


@dataclass
class _NavState:
    goal_pixel: tuple[float, float]
    plan: Trajectory | None = None
    cursor: int = 0
    replans: int = 0
    final_approach: bool = False
    executed: list[ToolState] = field(default_factory=list)
    warm: list | None = None
    goal_estimate: np.ndarray | None = None


class Session:
    """One scene, one tool, serialized command/tick mutation."""

    def __init__(
        self,
        scenario: Scenario | None = None,
        cp: CostParams | None = None,
        config: SessionConfig | None = None,
        spec: DiscretizationSpec | None = None,
    ):
        self.config = config or SessionConfig()
        self.scenario = scenario or default_scenario()
        self.cp = cp or CostParams(sclera_point=self.scenario.sclera_point, eye=None)
        self.spec = spec or DiscretizationSpec()
        self.oracle = PerceptionOracle(
            spec=self.spec,
            cfg=OracleConfig(noise_sigma=np.full(3, self.config.noise_sigma), seed=self.config.seed),
        )
        self.tool = self.scenario.initial_tool.copy()
        self.mode = "idle"
        self.paused = False
        self.tick_index = 0
        self.fit: FitResult | None = None
        self._nav: _NavState | None = None
        self._vessel_plan: Trajectory | None = None
        self._vessel_cursor = 0
        self._cfg_integration = self.cp.integration()
        self._cmd_seq = 0

    # -- protocol surface -------------------------------------------------

    def hello(self) -> dict:
        return {
            "type": "hello",
            "proto_version": PROTO_VERSION,
            "camera": self.scenario.camera.to_dict(),
            "eye_silhouette": {
                "center_px": [float(v) for v in self.scenario.camera.point_to_pixel(self.scenario.true_eye.center)],
                "radius_px": self.scenario.true_eye.radius / self.scenario.camera.scale,
            },
            "config": self.config.to_dict(),
        }

    def handle_command(self, cmd: dict) -> list[dict]:
        """Validate and apply one command; first event is always its ack."""
        self._cmd_seq += 1
        seq = self._cmd_seq
        ctype = cmd.get("type")
        handlers = {
            "click_goal": self._cmd_click_goal,
            "set_weights": self._cmd_set_weights,
            "start_localization": self._cmd_start_localization,
            "set_vessel_path": self._cmd_set_vessel_path,
            "pause": self._cmd_pause,
            "resume": self._cmd_resume,
            "reset": self._cmd_reset,
            "run_benchmark": self._cmd_run_benchmark,
        }
        handler = handlers.get(ctype)
        if handler is None:
            return [self._ack(seq, False, "BadPayload", f"unknown command type {ctype!r}")]
        try:
            events = handler(cmd)
        except RetNavError as exc:
            return [self._ack(seq, False, type(exc).__name__, str(exc))]
        except (KeyError, TypeError, ValueError) as exc:
            return [self._ack(seq, False, "BadPayload", str(exc))]
        return [self._ack(seq, True)] + events

    def tick(self) -> list[dict]:
        """Advance one simulation step and emit the state tick."""
        events: list[dict] = []
        if not self.paused:
            if self.mode == "navigating":
                events.extend(self._tick_navigating())
            elif self.mode == "vessel":
                events.extend(self._tick_vessel())
        self.tick_index += 1
        events.append(self._state_tick())
        return events

    # -- command handlers --------------------------------------------------

    def _require_mode(self, *allowed: str) -> None:
        if self.mode not in allowed:
            from .errors import BadMode

            raise BadMode(f"command not allowed in mode {self.mode!r}")

    def _cmd_click_goal(self, cmd: dict) -> list[dict]:
        self._require_mode("idle", "navigating")
        pixel = cmd["pixel"]
        if not (isinstance(pixel, (list, tuple)) and len(pixel) == 2):
            from .errors import BadPayload

            raise BadPayload("pixel must be a 2-element list")
        pixel = (float(pixel[0]), float(pixel[1]))
        if not self.scenario.camera.in_bounds(pixel):
            raise GoalOffRetina(f"pixel {pixel} outside the image")
        try:
            raycast_sphere(self.scenario.camera, pixel, self.scenario.true_eye)
        except NoIntersection as exc:
            raise GoalOffRetina(f"pixel {pixel} misses the retina") from exc
        self._nav = _NavState(goal_pixel=pixel, executed=[self.tool.copy()])
        self.mode = "navigating"
        return []

    def _cmd_set_weights(self, cmd: dict) -> list[dict]:
        self._require_mode("idle", "navigating")
        from .errors import BadPayload

        updates = {}
        for key in ("w_s", "w_e"):
            if key in cmd:
                value = float(cmd[key])
                if value < 0.0:
                    raise BadPayload(f"{key} must be non-negative")
                updates[key] = value
        if "replan_hz" in cmd:
            value = float(cmd["replan_hz"])
            if not 0.0 < value <= self.config.tick_hz:
                raise BadPayload("replan_hz must be in (0, tick_hz]")
            self.config.replan_hz = value
        if updates:
            self.cp = CostParams(
                P_f=self.cp.P_f,
                R_u=self.cp.R_u,
                w_s=updates.get("w_s", self.cp.w_s),
                w_e=updates.get("w_e", self.cp.w_e),
                eps=self.cp.eps,
                sclera_point=self.cp.sclera_point,
                eye=self.cp.eye,
                horizon=self.cp.horizon,
                dt=self.cp.dt,
                sclera_projector_sign=self.cp.sclera_projector_sign,
            )
        return []

    def _cmd_start_localization(self, cmd: dict) -> list[dict]:
        self._require_mode("idle")
        samples = int(cmd.get("samples", 30))
        if samples < 4:
            from .errors import BadPayload

            raise BadPayload("need at least 4 samples")
        self.mode = "localizing"
        try:
            pixels = localization_pixels(self.scenario, samples, seed=self.config.seed)
            self.fit, report = run_localization(
                self.scenario,
                pixels,
                oracle_cfg=self.oracle.cfg,
                ransac_seed=self.config.seed,
                spec=self.spec,
            )
        finally:
            self.mode = "idle"
        loc = dict(report.localization)
        return [{"type": "fit_update", "tick": self.tick_index, "fit": loc}]

    def _cmd_set_vessel_path(self, cmd: dict) -> list[dict]:
        self._require_mode("idle")
        from .errors import BadMode
        from .tasks import plan_vessel_trajectory

        if self.fit is None:
            raise BadMode("vessel following requires a localization fit")
        path = VesselPath(np.asarray(cmd["pixels"], dtype=float))
        traj, wps, _ = plan_vessel_trajectory(self.scenario, path, self.fit, self.cp)
        self._vessel_plan, self._vessel_cursor = traj, 0
        self._vessel_wps = wps
        self._vessel_path = path
        self.tool = traj.states[0].copy()
        self.mode = "vessel"
        return []

    def _cmd_pause(self, cmd: dict) -> list[dict]:
        self.paused = True
        return []

    def _cmd_resume(self, cmd: dict) -> list[dict]:
        self.paused = False
        return []

    def _cmd_reset(self, cmd: dict) -> list[dict]:
        self.tool = self.scenario.initial_tool.copy()
        self.mode = "idle"
        self.paused = False
        self._nav = None
        self._vessel_plan = None
        self.fit = None
        self.oracle.reset()
        return []

    def _cmd_run_benchmark(self, cmd: dict) -> list[dict]:
        self._require_mode("idle")
        from .scenario import benchmark_grid

        count = int(cmd.get("count", 50))
        noise = float(cmd.get("noise_sigma", self.config.noise_sigma))
        pixels = benchmark_grid(self.scenario.camera, count)
        report = run_navigation_benchmark(
            self.scenario, pixels, self.cp, noise_sigma=noise, seed=self.config.seed,
            solve_iters=self.config.solve_iters,
        )
        return [{"type": "benchmark_result", "tick": self.tick_index, "report": report.to_json_dict()}]

    # -- tick internals ----------------------------------------------------

    def _steps_per_replan(self) -> int:
        return max(1, int(round(self.config.tick_hz / self.config.replan_hz)))

    def _tick_navigating(self) -> list[dict]:
        nav = self._nav
        due = nav.plan is None or (not nav.final_approach and nav.cursor >= self._steps_per_replan())
        if due and not nav.final_approach:
            if nav.replans >= self.config.max_replans:
                self.mode = "idle"
                self._nav = None
                return [
                    {
                        "type": "error",
                        "tick": self.tick_index,
                        "code": "MaxIterExceeded",
                        "message": f"goal not reached within {self.config.max_replans} replans",
                    }
                ]
            try:
                pred = self.oracle.predict(self.tool, self.scenario.true_eye, self.scenario.camera, nav.goal_pixel)
            except RetNavError as exc:
                self.mode = "idle"
                self._nav = None
                return [
                    {"type": "error", "tick": self.tick_index, "code": type(exc).__name__, "message": str(exc)}
                ]
            p_goal = self.tool.p + self.tool.R @ pred.d
            nav.goal_estimate = p_goal
            traj, _ = ddp_solve(
                self.tool, p_goal, self.cp, warm_start=nav.warm, max_iterations=self.config.solve_iters
            )
            nav.plan = traj
            nav.cursor = 0
            nav.replans += 1
            if abs(self.tool.p[2] - p_goal[2]) <= Z_GUARD_MM:
                nav.final_approach = True
        plan = nav.plan
        if nav.cursor < len(plan.controls):
            self.tool = plan.states[nav.cursor + 1].copy()
            nav.cursor += 1
            nav.executed.append(self.tool.copy())
        if nav.final_approach and nav.cursor >= len(plan.controls):
            entry = self._landing_entry(nav)
            self.mode = "idle"
            self._nav = None
            return [{"type": "goal_reached", "tick": self.tick_index, "entry": entry.to_dict()}]
        if not nav.final_approach and nav.cursor >= self._steps_per_replan():
            nav.warm = self._shifted_warm(plan, nav.cursor)
        return []

    def _shifted_warm(self, traj: Trajectory, executed: int):
        from .kinematics import ControlInput

        tail = traj.controls[executed:]
        if not tail:
            tail = [traj.controls[-1]]
        pad = [ControlInput(tail[-1].u_v.copy(), tail[-1].u_w.copy()) for _ in range(executed)]
        return tail + pad

    def _landing_entry(self, nav: _NavState) -> GoalEntry:
        cam = self.scenario.camera
        landing = cam.point_to_pixel(self.tool.p)
        x_err_px = abs(landing[0] - nav.goal_pixel[0])
        y_err_px = abs(landing[1] - nav.goal_pixel[1])
        norms = [float(np.linalg.norm(sclera_residual(s, self.scenario.sclera_point))) for s in nav.executed]
        return GoalEntry(
            pixel=nav.goal_pixel,
            x_err_px=float(x_err_px),
            y_err_px=float(y_err_px),
            x_err_mm=float(x_err_px * cam.scale),
            y_err_mm=float(y_err_px * cam.scale),
            z_err_mm=None,
            sclera_mean_mm=float(np.mean(norms)),
            sclera_max_mm=float(np.max(norms)),
            replans=nav.replans,
            landed=True,
            landing_px=(float(landing[0]), float(landing[1])),
        )

    def _tick_vessel(self) -> list[dict]:
        plan = self._vessel_plan
        if self._vessel_cursor < len(plan.controls):
            self.tool = plan.states[self._vessel_cursor + 1].copy()
            self._vessel_cursor += 1
            return []
        summary = self._vessel_summary(plan)
        self.mode = "idle"
        self._vessel_plan = None
        return [{"type": "vessel_done", "tick": self.tick_index, "vessel": summary}]

    def _vessel_summary(self, traj: Trajectory) -> dict:
        wps = self._vessel_wps
        steps = len(traj.controls) // (len(wps) - 1)
        knots = [i * steps for i in range(len(wps))]
        errors = np.array([np.abs(traj.states[k].p - wps[i]) for i, k in enumerate(knots)])
        positions = traj.positions()
        dist_true = np.linalg.norm(positions - self.scenario.true_eye.center, axis=1)
        sclera = [float(np.linalg.norm(sclera_residual(s, self.scenario.sclera_point))) for s in traj.states]
        return {
            "tracking_err_mm": [float(v) for v in errors.mean(axis=0)],
            "tracking_err_max_mm": float(errors.max()),
            "sclera_mean_mm": float(np.mean(sclera)),
            "sclera_max_mm": float(np.max(sclera)),
            "penetrations": int(np.count_nonzero(dist_true > self.scenario.true_eye.radius + 1e-9)),
            "waypoints": len(wps),
        }

    def _state_tick(self) -> dict:
        cam = self.scenario.camera
        if self.scenario.true_eye.surface_distance(self.tool.p) <= 0.0:
            # at or past contact the markers coincide
            shadow_out = [float(v) for v in self.tool.p]
        else:
            try:
                shadow = project_shadow(self.tool.p, _LIGHT_DIR, self.scenario.true_eye)
                shadow_out = [float(v) for v in shadow]
            except NoIntersection:
                shadow_out = None
        plan_preview = None
        goal_pixel = None
        sclera = float(np.linalg.norm(sclera_residual(self.tool, self.scenario.sclera_point)))
        active_plan = None
        if self.mode == "navigating" and self._nav is not None and self._nav.plan is not None:
            active_plan = self._nav.plan
            goal_pixel = [self._nav.goal_pixel[0], self._nav.goal_pixel[1]]
        elif self.mode == "vessel" and self._vessel_plan is not None:
            active_plan = self._vessel_plan
        if active_plan is not None:
            stride = self.config.plan_preview_stride
            pts = active_plan.positions()[::stride]
            plan_preview = [[float(v) for v in p] for p in pts]
            tail = active_plan.positions()[-1]
            plan_preview.append([float(v) for v in tail])
        return {
            "type": "state_tick",
            "tick": self.tick_index,
            "t": self.tick_index / self.config.tick_hz,
            "mode": self.mode,
            "paused": self.paused,
            "tool": {
                "p": [float(v) for v in self.tool.p],
                "axis": [float(v) for v in self.tool.axis],
                "v": [float(v) for v in self.tool.v],
            },
            "shadow": shadow_out,
            "plan": plan_preview,
            "goal_pixel": goal_pixel,
            "sclera_residual_mm": sclera,
        }

    def _ack(self, seq: int, ok: bool, code: str | None = None, message: str | None = None) -> dict:
        out = {"type": "ack", "tick": self.tick_index, "cmd_seq": seq, "ok": ok}
        if not ok:
            out["error"] = code
            out["message"] = message
        return out
