"""Shared key-value configuration file.

Plain-text `key = value` lines; `#` starts a comment. Values parse as
numbers, booleans, strings, or comma-separated number lists. Dotted keys
group settings by module. The same file (and defaults) drive both the CLI
and the session service.

Recognized keys:

    solver.w_s                sclera penalty weight
    solver.w_e                collision penalty weight
    solver.eps                collision margin, mm
    solver.control_gain       control-effort gain (scales identity)
    solver.terminal_pos_gain  terminal position gain (scales identity)
    solver.terminal_vel_gain  terminal velocity/angular gain
    solver.horizon            planning steps
    solver.dt                 step length, s
    solver.sclera_projector_sign   minus | plus
    oracle.noise_sigma        mm, scalar or 3-list (pre-quantization)
    oracle.seed               noise stream seed
    oracle.bins               3-list, bins per axis       # defaults 580,1345,320
    oracle.range_x            2-list, mm                  # span of the x head
    oracle.range_y            2-list, mm
    oracle.range_z            2-list, mm
    camera.scale              mm per pixel
    sim.replan_hz             replanning rate
    sim.eye_jitter_mm         per-axis eye randomization
    service.tick_hz           advertised tick rate (simulation rate)
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .costs import CostParams, default_terminal_gain
from .oracle import AxisSpec, DiscretizationSpec, OracleConfig


def _parse_scalar(text: str):
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        if any(c in text for c in ".eE") and not text.lstrip("+-").isdigit():
            return float(text)
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_config(text: str) -> dict:
    """Parse `key = value` lines into a flat dict."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        if "," in value:
            out[key] = [_parse_scalar(v.strip()) for v in value.split(",")]
        else:
            out[key] = _parse_scalar(value)
    return out


def load_config(path) -> dict:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _as_vector3(value) -> np.ndarray:
    if isinstance(value, (int, float)):
        return np.full(3, float(value))
    return np.asarray([float(v) for v in value], dtype=float).reshape(3)


def cost_params_from_config(cfg: dict, **overrides) -> CostParams:
    """CostParams from config keys; kwargs override (scenario wiring etc.)."""
    P_f = default_terminal_gain()
    if "solver.terminal_pos_gain" in cfg:
        P_f[0:3, 0:3] = float(cfg["solver.terminal_pos_gain"]) * np.eye(3)
    if "solver.terminal_vel_gain" in cfg:
        P_f[3:9, 3:9] = float(cfg["solver.terminal_vel_gain"]) * np.eye(6)
    kwargs = dict(
        P_f=P_f,
        R_u=float(cfg.get("solver.control_gain", 1e-3)) * np.eye(6),
        w_s=float(cfg.get("solver.w_s", 1e4)),
        w_e=float(cfg.get("solver.w_e", 1e4)),
        eps=float(cfg.get("solver.eps", 0.2)),
        horizon=int(cfg.get("solver.horizon", 100)),
        dt=float(cfg.get("solver.dt", 0.01)),
        sclera_projector_sign=str(cfg.get("solver.sclera_projector_sign", "minus")),
    )
    kwargs.update(overrides)
    return CostParams(**kwargs)


def oracle_from_config(cfg: dict) -> tuple[DiscretizationSpec, OracleConfig]:
    bins = cfg.get("oracle.bins", [580, 1345, 320])
    ranges = [
        cfg.get("oracle.range_x", [-11.6, 11.6]),
        cfg.get("oracle.range_y", [-26.9, 26.9]),
        cfg.get("oracle.range_z", [-6.4, 6.4]),
    ]
    spec = DiscretizationSpec(
        x=AxisSpec(int(bins[0]), float(ranges[0][0]), float(ranges[0][1])),
        y=AxisSpec(int(bins[1]), float(ranges[1][0]), float(ranges[1][1])),
        z=AxisSpec(int(bins[2]), float(ranges[2][0]), float(ranges[2][1])),
    )
    oc = OracleConfig(
        noise_sigma=_as_vector3(cfg.get("oracle.noise_sigma", 0.0)),
        seed=int(cfg.get("oracle.seed", 0)),
    )
    return spec, oc


def example_config() -> str:
    """Documented template with every recognized key at its default."""
    return "\n".join(
        [
            "# retnav configuration (key = value; '#' comments)",
            "",
            "solver.w_s = 1e4            # sclera penalty weight",
            "solver.w_e = 1e4            # collision penalty weight",
            "solver.eps = 0.2            # collision margin, mm",
            "solver.control_gain = 1e-3",
            "solver.terminal_pos_gain = 1e3",
            "solver.terminal_vel_gain = 1e2",
            "solver.horizon = 100",
            "solver.dt = 0.01",
            "solver.sclera_projector_sign = minus",
            "",
            "# The physical spans of the prediction bins are a documented guess",
            "# sized to the visible workspace at 0.04 mm per bin.",
            "oracle.noise_sigma = 0.0",
            "oracle.seed = 0",
            "oracle.bins = 580, 1345, 320",
            "oracle.range_x = -11.6, 11.6",
            "oracle.range_y = -26.9, 26.9",
            "oracle.range_z = -6.4, 6.4",
            "",
            "camera.scale = 0.04         # mm per pixel",
            "sim.replan_hz = 5",
            "sim.eye_jitter_mm = 0.30",
            "service.tick_hz = 100",
            "",
        ]
    )
