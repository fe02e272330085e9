"""Retinal surface model: sphere fitting, camera mapping, and ray casts.

The eye is a sphere; the retinal working surface is the spherical cap seen by
a top-down orthographic camera. Sphere estimation follows the algebraic
least-squares rearrangement of ||p - p0||^2 = r^2 into a linear system,
optionally wrapped in RANSAC for outlier rejection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    NegativeRadiusSquared,
    NoConsensus,
    NoIntersection,
    RankDeficient,
)

#: Phantom eye: 25.4 mm diameter.
DEFAULT_EYE_RADIUS_MM = 12.7

#: Tool tip measures 0.32 mm and 8 px in the image: 0.04 mm per pixel.
DEFAULT_SCALE_MM_PER_PX = 0.32 / 8.0


@dataclass
class EyeGeometry:
    """Sphere model of the retinal surface."""

    center: np.ndarray
    radius: float = DEFAULT_EYE_RADIUS_MM

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=float).reshape(3)
        self.radius = float(self.radius)
        if not self.radius > 0.0:
            raise ValueError("radius must be positive")

    def surface_distance(self, p: np.ndarray) -> float:
        """Signed distance from the sphere surface (positive outside)."""
        return float(np.linalg.norm(np.asarray(p, dtype=float) - self.center) - self.radius)

    def to_dict(self) -> dict:
        return {"center": [float(c) for c in self.center], "radius": self.radius}


@dataclass
class CameraModel:
    """Orthographic top-down camera.

    Pixel (width/2, height/2) maps to the optical center's xy position; image
    u grows with +x and v with +y at `scale` mm per pixel. Rays start on the
    camera plane and travel along `view_dir` (default -z).
    """

    optical_center: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 20.0]))
    view_dir: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -1.0]))
    width: int = 640
    height: int = 480
    scale: float = DEFAULT_SCALE_MM_PER_PX

    def __post_init__(self) -> None:
        self.optical_center = np.asarray(self.optical_center, dtype=float).reshape(3)
        self.view_dir = np.asarray(self.view_dir, dtype=float).reshape(3)
        n = np.linalg.norm(self.view_dir)
        if not np.isclose(n, 1.0):
            raise ValueError("view_dir must be unit length")
        if not self.scale > 0.0:
            raise ValueError("scale must be positive")

    def pixel_to_mm(self, px: float) -> float:
        """Convert a pixel distance to mm."""
        return float(px) * self.scale

    def mm_to_pixel(self, mm: float) -> float:
        """Convert a mm distance to pixels."""
        return float(mm) / self.scale

    def pixel_to_point(self, pixel) -> np.ndarray:
        """World position of a pixel on the camera plane."""
        u, v = float(pixel[0]), float(pixel[1])
        x = self.optical_center[0] + (u - self.width / 2.0) * self.scale
        y = self.optical_center[1] + (v - self.height / 2.0) * self.scale
        return np.array([x, y, self.optical_center[2]])

    def point_to_pixel(self, point) -> np.ndarray:
        """Image coordinates of a world point (orthographic projection)."""
        point = np.asarray(point, dtype=float)
        u = (point[0] - self.optical_center[0]) / self.scale + self.width / 2.0
        v = (point[1] - self.optical_center[1]) / self.scale + self.height / 2.0
        return np.array([u, v])

    def in_bounds(self, pixel) -> bool:
        return 0.0 <= pixel[0] <= self.width and 0.0 <= pixel[1] <= self.height

    def to_dict(self) -> dict:
        return {
            "optical_center": [float(c) for c in self.optical_center],
            "width": self.width,
            "height": self.height,
            "scale": self.scale,
        }


@dataclass
class FitResult:
    """Sphere estimate with its consensus set."""

    eye: EyeGeometry
    inlier_mask: np.ndarray
    rms_residual: float

    def to_dict(self) -> dict:
        return {
            "center": [float(c) for c in self.eye.center],
            "radius": self.eye.radius,
            "inliers": int(np.count_nonzero(self.inlier_mask)),
            "total": int(self.inlier_mask.size),
            "rms_residual": self.rms_residual,
        }


def fit_sphere_lsq(points) -> EyeGeometry:
    """Least-squares sphere through a point set.

    Rearranges ||p - p0||^2 = r^2 into rows [2 p_i^T, 1] c = ||p_i||^2 with
    c = [p0; r^2 - ||p0||^2] and solves for c.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] < 4:
        raise RankDeficient(f"need at least 4 points, got {pts.shape[0]}")
    A = np.hstack([2.0 * pts, np.ones((pts.shape[0], 1))])
    f = np.sum(pts * pts, axis=1)
    c, _, rank, _ = np.linalg.lstsq(A, f, rcond=None)
    if rank < 4:
        raise RankDeficient("points are degenerate (coplanar or coincident)")
    center = c[:3]
    r_sq = c[3] + float(center @ center)
    if r_sq < 0.0:
        raise NegativeRadiusSquared(f"r^2 = {r_sq}")
    return EyeGeometry(center, float(np.sqrt(r_sq)))


def sphere_residuals(points, eye: EyeGeometry) -> np.ndarray:
    """Absolute radial residual |  ||p - p0|| - r  | per point."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.linalg.norm(pts - eye.center, axis=1)
    return np.abs(d - eye.radius)


def fit_sphere_ransac(
    points,
    inlier_threshold: float = 0.1,
    max_iters: int = 2000,
    seed: int = 0,
) -> FitResult:
    """RANSAC sphere fit: minimal 4-point hypotheses, largest consensus wins.

    The winning consensus set is refit with fit_sphere_lsq. Deterministic for
    a given seed.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[0]
    if n < 4:
        raise NoConsensus(f"need at least 4 points, got {n}")
    rng = np.random.default_rng(seed)
    best_mask = None
    best_count = 3
    any_valid = False
    ones4 = np.ones((4, 1))
    for _ in range(max_iters):
        idx = rng.choice(n, size=4, replace=False)
        sub = pts[idx]
        A4 = np.hstack([2.0 * sub, ones4])
        f4 = np.sum(sub * sub, axis=1)
        try:
            c = np.linalg.solve(A4, f4)
        except np.linalg.LinAlgError:
            continue
        center = c[:3]
        r_sq = c[3] + float(center @ center)
        if not np.isfinite(r_sq) or r_sq <= 0.0:
            continue
        any_valid = True
        radius = np.sqrt(r_sq)
        dist = np.linalg.norm(pts - center, axis=1)
        mask = np.abs(dist - radius) <= inlier_threshold
        count = int(np.count_nonzero(mask))
        if count > best_count:
            best_count = count
            best_mask = mask
            if count == n:
                break
    if best_mask is None:
        if not any_valid:
            raise RankDeficient("every minimal subset was degenerate")
        raise NoConsensus("no 4-point hypothesis reached a consensus set")
    eye = fit_sphere_lsq(pts[best_mask])
    # Re-score against the refit model so the reported set matches the estimate.
    final_mask = sphere_residuals(pts, eye) <= inlier_threshold
    if np.count_nonzero(final_mask) >= 4:
        eye = fit_sphere_lsq(pts[final_mask])
    else:
        final_mask = best_mask
    rms = float(np.sqrt(np.mean(sphere_residuals(pts[final_mask], eye) ** 2)))
    return FitResult(eye=eye, inlier_mask=final_mask, rms_residual=rms)


def intersect_ray_sphere(origin, direction, eye: EyeGeometry) -> float:
    """Smallest non-negative ray parameter hitting the sphere.

    Uses the cancellation-stable quadratic: q = -(b + sign(b) sqrt(disc)) / 2.
    Raises NoIntersection on a miss or when the sphere lies entirely behind
    the origin.
    """
    o = np.asarray(origin, dtype=float) - eye.center
    d = np.asarray(direction, dtype=float)
    a = float(d @ d)
    b = 2.0 * float(o @ d)
    c = float(o @ o) - eye.radius**2
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        raise NoIntersection("ray misses the sphere")
    sqrt_disc = float(np.sqrt(disc))
    if b >= 0.0:
        q = -0.5 * (b + sqrt_disc)
    else:
        q = -0.5 * (b - sqrt_disc)
    roots = []
    if abs(a) > 0.0:
        roots.append(q / a)
    if abs(q) > 0.0:
        roots.append(c / q)
    hits = sorted(t for t in roots if t >= 0.0)
    if not hits:
        raise NoIntersection("sphere is behind the ray origin")
    return hits[0]


def raycast_sphere(cam: CameraModel, pixel, eye: EyeGeometry) -> np.ndarray:
    """First (upper) intersection of the pixel's view ray with the sphere."""
    origin = cam.pixel_to_point(pixel)
    t = intersect_ray_sphere(origin, cam.view_dir, eye)
    return origin + t * cam.view_dir


def project_shadow(tool_tip, light_dir, eye: EyeGeometry) -> np.ndarray:
    """Shadow of the tip cast along the light direction onto the surface.

    The gap ||shadow - tip|| shrinks to zero as the tip approaches the
    surface, mirroring the tool-shadow depth cue.
    """
    tip = np.asarray(tool_tip, dtype=float)
    t = intersect_ray_sphere(tip, np.asarray(light_dir, dtype=float), eye)
    return tip + t * np.asarray(light_dir, dtype=float)


def save_points(path, points) -> None:
    """Write points as three-column mm coordinates, one per line."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lines = ["# x_mm y_mm z_mm"]
    for p in pts:
        lines.append(f"{p[0]:.9f} {p[1]:.9f} {p[2]:.9f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_points(path) -> np.ndarray:
    """Read a three-column mm point file; '#' starts a comment."""
    rows = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"expected 3 columns, got {len(parts)}: {raw!r}")
        rows.append([float(x) for x in parts])
    return np.array(rows, dtype=float).reshape(-1, 3)
