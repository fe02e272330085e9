"""Task result records: per-goal entries, aggregates, and serialization.

Pixel and mm error columns are tied by the camera scale (0.04 mm/px). The
machine-readable form is canonical JSON with sorted keys and no wall-clock
content, so reruns with identical seeds produce byte-identical files; timing
appears only in the human-readable table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import DEFAULT_SCALE_MM_PER_PX


@dataclass
class GoalEntry:
    """Outcome of one navigation goal."""

    pixel: tuple[float, float]
    x_err_px: float
    y_err_px: float
    x_err_mm: float
    y_err_mm: float
    z_err_mm: float | None
    sclera_mean_mm: float
    sclera_max_mm: float
    replans: int
    landed: bool
    error: str | None = None
    landing_px: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        return {
            "pixel": [self.pixel[0], self.pixel[1]],
            "landing_px": None if self.landing_px is None else [self.landing_px[0], self.landing_px[1]],
            "x_err_px": self.x_err_px,
            "y_err_px": self.y_err_px,
            "x_err_mm": self.x_err_mm,
            "y_err_mm": self.y_err_mm,
            "z_err_mm": self.z_err_mm,
            "sclera_mean_mm": self.sclera_mean_mm,
            "sclera_max_mm": self.sclera_max_mm,
            "replans": self.replans,
            "landed": self.landed,
            "error": self.error,
        }


@dataclass
class RunReport:
    """Aggregated result of one task run."""

    task: str
    seed: int = 0
    noise_sigma: float = 0.0
    entries: list[GoalEntry] = field(default_factory=list)
    localization: dict | None = None
    vessel: dict | None = None
    timing_s: float = 0.0
    scale_mm_per_px: float = DEFAULT_SCALE_MM_PER_PX

    @property
    def landed_entries(self) -> list[GoalEntry]:
        return [e for e in self.entries if e.landed]

    @property
    def mean_x_err_mm(self) -> float:
        entries = self.landed_entries
        return float(np.mean([e.x_err_mm for e in entries])) if entries else float("nan")

    @property
    def mean_y_err_mm(self) -> float:
        entries = self.landed_entries
        return float(np.mean([e.y_err_mm for e in entries])) if entries else float("nan")

    @property
    def mean_xy_err_mm(self) -> float:
        """Mean of the combined per-goal xy error norm."""
        entries = self.landed_entries
        if not entries:
            return float("nan")
        return float(np.mean([np.hypot(e.x_err_mm, e.y_err_mm) for e in entries]))

    @property
    def sclera_mean_mm(self) -> float:
        entries = self.landed_entries
        return float(np.mean([e.sclera_mean_mm for e in entries])) if entries else float("nan")

    @property
    def sclera_max_mm(self) -> float:
        entries = self.landed_entries
        return float(np.max([e.sclera_max_mm for e in entries])) if entries else float("nan")

    def to_json_dict(self) -> dict:
        out: dict = {
            "task": self.task,
            "seed": self.seed,
            "noise_sigma": self.noise_sigma,
            "scale_mm_per_px": self.scale_mm_per_px,
        }
        if self.entries:
            out["goals"] = [e.to_dict() for e in self.entries]
            out["aggregate"] = {
                "mean_x_err_mm": self.mean_x_err_mm,
                "mean_y_err_mm": self.mean_y_err_mm,
                "mean_xy_err_mm": self.mean_xy_err_mm,
                "sclera_mean_mm": self.sclera_mean_mm,
                "sclera_max_mm": self.sclera_max_mm,
                "landed": len(self.landed_entries),
                "total": len(self.entries),
            }
        if self.localization is not None:
            out["localization"] = self.localization
        if self.vessel is not None:
            out["vessel"] = self.vessel
        return out

    def to_json(self) -> str:
        """Canonical machine-readable form (no wall-clock content)."""
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    def matches_golden(self, path) -> bool:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read() == self.to_json()

    def to_table(self) -> str:
        """Human-readable summary in the benchmark-table layout."""
        scale = self.scale_mm_per_px
        lines = [f"Task: {self.task} (seed {self.seed}, noise sigma {self.noise_sigma} mm)"]
        fmt = "  {:<16} {:>12} {:>12}"
        if self.entries:
            lines.append(fmt.format("error category", "mm", "pixels"))
            mx, my = self.mean_x_err_mm, self.mean_y_err_mm
            lines.append(fmt.format("x error", f"{mx:.3f}", f"{mx / scale:.2f}"))
            lines.append(fmt.format("y error", f"{my:.3f}", f"{my / scale:.2f}"))
            lines.append(fmt.format("z error", "NA", "NA"))
            lines.append(fmt.format("sclera error", f"{self.sclera_mean_mm:.3f}", ""))
            lines.append(
                f"  goals landed: {len(self.landed_entries)}/{len(self.entries)}"
                f"  max sclera: {self.sclera_max_mm:.3f} mm"
            )
        if self.localization is not None:
            loc = self.localization
            ce = loc["center_err_mm"]
            lines.append("  eye localization (mm)")
            lines.append(f"    center error: {ce[0]:.3f}, {ce[1]:.3f}, {ce[2]:.3f}")
            lines.append(f"    radius error: {loc['radius_err_mm']:.3f}")
            lines.append(f"    inliers: {loc['inliers']}/{loc['total']} rms {loc['rms_residual']:.4f}")
        if self.vessel is not None:
            v = self.vessel
            te = v["tracking_err_mm"]
            lines.append("  vessel following (mm)")
            lines.append(f"    tracking error: {te[0]:.4f}, {te[1]:.4f}, {te[2]:.4f}")
            lines.append(f"    sclera error: {v['sclera_mean_mm']:.3f}")
            lines.append(f"    penetrations: {v['penetrations']}")
        lines.append(f"  wall time: {self.timing_s:.2f} s")
        return "\n".join(lines)
