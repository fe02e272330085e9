"""Goal-prediction oracle with quantized output.

Stands in for the learned pixel-to-displacement predictor: given the scene
state and a clicked pixel, it returns the end-effector-frame vector from the
tool tip to the corresponding retinal surface point. The continuous value is
optionally corrupted by Gaussian noise and then snapped to the per-axis bin
grid (580 / 1345 / 320 bins for x / y / z), so downstream consumers see the
same quantized interface a bin-classifying network would produce.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GoalOffRetina, NoIntersection, OutOfRange
from .geometry import CameraModel, EyeGeometry, raycast_sphere
from .kinematics import ToolState


@dataclass
class AxisSpec:
    """Uniform binning of one output axis over [lo, hi)."""

    bins: int
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if self.bins <= 0:
            raise ValueError("bins must be positive")
        if not self.lo < self.hi:
            raise ValueError("lo must be below hi")

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.bins


@dataclass
class DiscretizationSpec:
    """Per-axis output quantization.

    Default ranges span the visible workspace at 0.04 mm per bin; the bin
    counts fix the x/y/z resolution of the prediction head.
    """

    x: AxisSpec = field(default_factory=lambda: AxisSpec(580, -11.6, 11.6))
    y: AxisSpec = field(default_factory=lambda: AxisSpec(1345, -26.9, 26.9))
    z: AxisSpec = field(default_factory=lambda: AxisSpec(320, -6.4, 6.4))

    @property
    def axes(self) -> tuple[AxisSpec, AxisSpec, AxisSpec]:
        return (self.x, self.y, self.z)

    def half_widths(self) -> np.ndarray:
        return np.array([a.width / 2.0 for a in self.axes])


@dataclass
class OracleConfig:
    """Gaussian prediction noise (mm, pre-quantization) and its seed."""

    noise_sigma: np.ndarray = field(default_factory=lambda: np.zeros(3))
    seed: int = 0

    def __post_init__(self) -> None:
        self.noise_sigma = np.asarray(self.noise_sigma, dtype=float).reshape(3)
        if np.any(self.noise_sigma < 0.0):
            raise ValueError("noise_sigma must be non-negative")


@dataclass
class GoalPrediction:
    """Quantized vector-to-goal in the end-effector frame."""

    d: np.ndarray
    bin_indices: tuple[int, int, int]
    noise_applied: np.ndarray


def discretize(value: float, axis: AxisSpec) -> int:
    """Bin index of a value; the upper range bound maps into the last bin."""
    if not (axis.lo <= value <= axis.hi):
        raise OutOfRange(f"{value} outside [{axis.lo}, {axis.hi}]")
    idx = int(np.floor((value - axis.lo) / axis.width))
    return min(idx, axis.bins - 1)


def undiscretize(index: int, axis: AxisSpec) -> float:
    """Bin-center value of a bin index."""
    if not (0 <= index < axis.bins):
        raise OutOfRange(f"bin {index} outside [0, {axis.bins})")
    return axis.lo + (index + 0.5) * axis.width


def _quantize_saturating(value: float, axis: AxisSpec) -> int:
    # The bin head argmaxes over a fixed grid, so noisy values saturate at
    # the boundary bins rather than erroring.
    idx = int(np.floor((value - axis.lo) / axis.width))
    return min(max(idx, 0), axis.bins - 1)


def predict_goal(
    tool: ToolState,
    eye: EyeGeometry,
    cam: CameraModel,
    pixel,
    spec: DiscretizationSpec | None = None,
    cfg: OracleConfig | None = None,
    rng: np.random.Generator | None = None,
) -> GoalPrediction:
    """Predict the end-effector-frame vector from the tool tip to a clicked goal.

    The true displacement comes from the pixel's raycast onto the sphere; the
    goal reconstructs in the base frame as p + R d. Noise (if configured) is
    added before quantization. Raises GoalOffRetina when the ray misses and
    OutOfRange when the true displacement exceeds the discretization span.
    """
    spec = spec or DiscretizationSpec()
    cfg = cfg or OracleConfig()
    if not cam.in_bounds(pixel):
        raise GoalOffRetina(f"pixel {pixel} outside the image")
    try:
        hit = raycast_sphere(cam, pixel, eye)
    except NoIntersection as exc:
        raise GoalOffRetina(f"pixel {pixel} misses the retina") from exc
    d_true = tool.R.T @ (hit - tool.p)
    for value, axis in zip(d_true, spec.axes):
        if not (axis.lo <= value <= axis.hi):
            raise OutOfRange(f"true displacement {value:.3f} outside [{axis.lo}, {axis.hi}]")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    noise = rng.normal(0.0, cfg.noise_sigma)
    noisy = d_true + noise
    indices = tuple(_quantize_saturating(v, a) for v, a in zip(noisy, spec.axes))
    d = np.array([undiscretize(i, a) for i, a in zip(indices, spec.axes)])
    return GoalPrediction(d=d, bin_indices=indices, noise_applied=noise)


class PerceptionOracle:
    """Stateful wrapper holding the noise stream for a prediction sequence.

    Identical (spec, cfg) pairs produce identical prediction sequences.
    """

    def __init__(self, spec: DiscretizationSpec | None = None, cfg: OracleConfig | None = None):
        self.spec = spec or DiscretizationSpec()
        self.cfg = cfg or OracleConfig()
        self._rng = np.random.default_rng(self.cfg.seed)

    def reset(self) -> None:
        self._rng = np.random.default_rng(self.cfg.seed)

    def predict(self, tool: ToolState, eye: EyeGeometry, cam: CameraModel, pixel) -> GoalPrediction:
        return predict_goal(tool, eye, cam, pixel, self.spec, self.cfg, rng=self._rng)
