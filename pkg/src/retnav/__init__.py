"""Desk-scale retinal navigation: perception oracle, sphere localization,
and penalty-based trajectory optimization with a benchmark CLI and an
operator session service."""

from .costs import CostParams, sclera_residual, stage_cost, terminal_cost
from .geometry import (
    CameraModel,
    EyeGeometry,
    FitResult,
    fit_sphere_lsq,
    fit_sphere_ransac,
    project_shadow,
    raycast_sphere,
)
from .kinematics import ControlInput, IntegrationConfig, ToolState, rollout, so3_exp, step_dynamics
from .oracle import DiscretizationSpec, GoalPrediction, OracleConfig, PerceptionOracle, predict_goal
from .report import GoalEntry, RunReport
from .scenario import Scenario, default_scenario, generate_collection_scenarios
from .service import Session, SessionConfig
from .solver import SolveReport, Trajectory, ddp_solve
from .tasks import (
    VesselPath,
    closed_loop_navigate,
    run_localization,
    run_navigation_benchmark,
    run_vessel_following,
)

__version__ = "0.1.0"

__all__ = [
    "CameraModel",
    "ControlInput",
    "CostParams",
    "DiscretizationSpec",
    "EyeGeometry",
    "FitResult",
    "GoalEntry",
    "GoalPrediction",
    "IntegrationConfig",
    "OracleConfig",
    "PerceptionOracle",
    "RunReport",
    "Scenario",
    "Session",
    "SessionConfig",
    "SolveReport",
    "ToolState",
    "Trajectory",
    "VesselPath",
    "closed_loop_navigate",
    "ddp_solve",
    "default_scenario",
    "fit_sphere_lsq",
    "fit_sphere_ransac",
    "generate_collection_scenarios",
    "predict_goal",
    "project_shadow",
    "raycast_sphere",
    "rollout",
    "run_localization",
    "run_navigation_benchmark",
    "run_vessel_following",
    "sclera_residual",
    "so3_exp",
    "stage_cost",
    "step_dynamics",
    "terminal_cost",
]
