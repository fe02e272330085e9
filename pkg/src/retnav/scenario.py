"""Scene construction and randomization for the benchmark tasks.

The default scene places the eye sphere with its apex at the origin, an
orthographic camera 20 mm overhead, and the sclera port outside the sphere
up-and-left of the working cap. Tool start states are sampled above the
retinal cap with the tool axis oriented through the port.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import DEFAULT_EYE_RADIUS_MM, CameraModel, EyeGeometry
from .kinematics import ToolState

#: Eye-stage jitter applied between trajectories (phantom rig).
PHANTOM_EYE_JITTER_MM = 0.30
#: Eye jitter used by the rendered-scene randomization.
SIMULATION_EYE_JITTER_MM = 0.5

_BASE_CENTER = np.array([0.0, 0.0, -DEFAULT_EYE_RADIUS_MM])
_BASE_SCLERA = np.array([-8.89, 0.0, 2.70])


def axis_toward(p, target) -> np.ndarray:
    """Rotation matrix whose first column points from p toward target."""
    a = np.asarray(target, dtype=float) - np.asarray(p, dtype=float)
    a = a / np.linalg.norm(a)
    helper = np.array([0.0, 0.0, 1.0]) if abs(a[2]) < 0.9 else np.array([0.0, 1.0, 0.0])
    b = np.cross(a, helper)
    b = b / np.linalg.norm(b)
    return np.column_stack([a, b, np.cross(a, b)])


@dataclass
class Scenario:
    """Ground-truth scene plus randomization ranges for a task run."""

    true_eye: EyeGeometry
    sclera_point: np.ndarray
    camera: CameraModel
    initial_tool: ToolState
    eye_jitter_mm: float = PHANTOM_EYE_JITTER_MM
    start_lateral_mm: float = 4.0
    start_height_mm: tuple[float, float] = (1.5, 4.0)

    def __post_init__(self) -> None:
        self.sclera_point = np.asarray(self.sclera_point, dtype=float).reshape(3)
        gap = np.linalg.norm(self.sclera_point - self.true_eye.center) - self.true_eye.radius
        if gap <= 0.0:
            raise ValueError("sclera point must lie outside the sphere")

    def surface_height(self, xy) -> float:
        """z of the retinal dome above the lateral position xy."""
        c = self.true_eye.center
        lat_sq = (xy[0] - c[0]) ** 2 + (xy[1] - c[1]) ** 2
        if lat_sq >= self.true_eye.radius**2:
            raise ValueError("lateral position outside the dome")
        return c[2] + np.sqrt(self.true_eye.radius**2 - lat_sq)


def default_scenario(eye_jitter_mm: float = PHANTOM_EYE_JITTER_MM) -> Scenario:
    eye = EyeGeometry(_BASE_CENTER.copy(), DEFAULT_EYE_RADIUS_MM)
    start = np.array([2.0, 1.0, 3.0])
    return Scenario(
        true_eye=eye,
        sclera_point=_BASE_SCLERA.copy(),
        camera=CameraModel(),
        initial_tool=ToolState.rest(start, axis_toward(start, _BASE_SCLERA)),
        eye_jitter_mm=eye_jitter_mm,
    )


def jitter_eye(eye: EyeGeometry, jitter_mm: float, rng: np.random.Generator) -> EyeGeometry:
    """Uniform per-axis shift within +-jitter_mm."""
    return EyeGeometry(eye.center + rng.uniform(-jitter_mm, jitter_mm, 3), eye.radius)


def random_start(scenario: Scenario, rng: np.random.Generator) -> ToolState:
    """Stationary start above the cap, tool axis through the port."""
    lat = scenario.start_lateral_mm
    xy = scenario.true_eye.center[:2] + rng.uniform(-lat, lat, 2)
    height = rng.uniform(*scenario.start_height_mm)
    p = np.array([xy[0], xy[1], scenario.surface_height(xy) + height])
    return ToolState.rest(p, axis_toward(p, scenario.sclera_point))


def random_sclera_point(rng: np.random.Generator, eye: EyeGeometry) -> np.ndarray:
    """Port outside the sphere, up-and-sideways of the cap."""
    azimuth = np.pi + rng.uniform(-0.6, 0.6)  # around the -x side
    polar = rng.uniform(0.45, 0.75)  # angle from +z
    direction = np.array(
        [np.sin(polar) * np.cos(azimuth), np.sin(polar) * np.sin(azimuth), np.cos(polar)]
    )
    return eye.center + 1.4 * eye.radius * direction


def random_cap_pixel(scenario: Scenario, rng: np.random.Generator, radius_mm: float = 5.0) -> np.ndarray:
    """Pixel uniform over the disc of the visible cap around the apex."""
    r = radius_mm * np.sqrt(rng.uniform())
    theta = rng.uniform(0.0, 2.0 * np.pi)
    apex_xy = scenario.true_eye.center[:2]
    point = np.array([apex_xy[0] + r * np.cos(theta), apex_xy[1] + r * np.sin(theta), 0.0])
    return scenario.camera.point_to_pixel(point)


def generate_collection_scenarios(
    base: Scenario,
    n: int,
    seed: int = 0,
    mode: str = "phantom",
) -> list[tuple[ToolState, np.ndarray, Scenario]]:
    """Randomized (start, goal pixel, scene) triples for data-collection runs.

    Phantom mode jitters the eye within +-0.30 mm per axis, simulation mode
    within +-0.5 mm; start pose, sclera port, and on-cap goal are drawn fresh
    each trial. Deterministic for a given seed.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    if mode not in ("phantom", "simulation"):
        raise ValueError("mode must be 'phantom' or 'simulation'")
    jitter = PHANTOM_EYE_JITTER_MM if mode == "phantom" else SIMULATION_EYE_JITTER_MM
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        eye = jitter_eye(base.true_eye, jitter, rng)
        sclera = random_sclera_point(rng, eye)
        scene = Scenario(
            true_eye=eye,
            sclera_point=sclera,
            camera=base.camera,
            initial_tool=base.initial_tool,
            eye_jitter_mm=jitter,
            start_lateral_mm=base.start_lateral_mm,
            start_height_mm=base.start_height_mm,
        )
        start = random_start(scene, rng)
        start = ToolState.rest(start.p, axis_toward(start.p, sclera))
        goal = random_cap_pixel(scene, rng)
        out.append((start, goal, scene))
    return out


def benchmark_grid(camera: CameraModel, count: int = 50, extent_mm: tuple[float, float] = (4.0, 5.0)) -> np.ndarray:
    """Rectangular goal-pixel grid over the visible cap.

    50 goals arrange as 5 x 10 and 100 goals as 10 x 10, mirroring the
    phantom and rendered-scene benchmark layouts.
    """
    if count == 50:
        cols, rows = 5, 10
    elif count == 100:
        cols, rows = 10, 10
    else:
        cols = int(np.floor(np.sqrt(count)))
        rows = int(np.ceil(count / cols))
    xs = np.linspace(-extent_mm[0], extent_mm[0], cols)
    ys = np.linspace(-extent_mm[1], extent_mm[1], rows)
    pixels = []
    for y in ys:
        for x in xs:
            if len(pixels) == count:
                break
            pixels.append(camera.point_to_pixel([x, y, 0.0]))
    return np.array(pixels)


def localization_pixels(scenario: Scenario, n: int = 30, seed: int = 0, rim_mm: float = 9.5) -> np.ndarray:
    """Sample pixels for surface probing, weighted toward the cap rim.

    Two thirds of the points land in the outer annulus where the dome
    curvature is informative; placements are randomized so quantization
    phases stay independent across samples (symmetric layouts correlate the
    depth errors and stall the fit's averaging).
    """
    rng = np.random.default_rng(seed)
    apex_xy = scenario.true_eye.center[:2]
    pixels = []
    n_outer = (2 * n) // 3
    for i in range(n):
        lo, hi = (0.75 * rim_mm, rim_mm) if i < n_outer else (0.0, 0.6 * rim_mm)
        r = np.sqrt(rng.uniform(lo**2, hi**2))
        theta = rng.uniform(0.0, 2.0 * np.pi)
        point = np.array([apex_xy[0] + r * np.cos(theta), apex_xy[1] + r * np.sin(theta), 0.0])
        pixels.append(scenario.camera.point_to_pixel(point))
    return np.array(pixels)
