"""RANSAC line/circle fitting of the hand trajectory and joint-type classification.

A circle is fitted first; the joint is prismatic when the angular range of the
inlier arc stays below the 30-degree threshold (a straight path looks like a
tiny arc of a huge circle), revolute otherwise.

Hand trajectories are short, so whenever the number of distinct minimal
samples is at most the iteration budget every sample is tried exhaustively
and ties resolve by enumeration order; otherwise seeded random sampling is
used.  Either way the fit is deterministic for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import least_squares

from .core_model import JointModel, MotionSequence, axis_point_from_circle
from .errors import FitFailureError, InvalidParameterError

DEFAULT_ANGLE_THRESHOLD = math.radians(30.0)


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 500
    inlier_threshold: float = 0.01
    min_inliers: int | None = None   # None = max(minimal sample, half the points)
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidParameterError("iterations must be >= 1")
        if self.inlier_threshold <= 0:
            raise InvalidParameterError("inlier_threshold must be positive")

    def resolved_min_inliers(self, n_points: int, minimal_sample: int) -> int:
        if self.min_inliers is not None:
            return self.min_inliers
        return max(minimal_sample, int(math.ceil(0.5 * n_points)))


@dataclass(frozen=True)
class LineFit:
    point_on_line: np.ndarray
    direction: np.ndarray
    inlier_indices: np.ndarray
    extent: float


@dataclass(frozen=True)
class CircleFit:
    center: np.ndarray
    radius: float
    normal: np.ndarray
    inlier_indices: np.ndarray
    angular_range: float


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if not np.all(np.isfinite(pts)):
        raise InvalidParameterError("trajectory points must be finite")
    return pts


def point_line_distance(points, point_on_line, direction) -> np.ndarray:
    rel = points - point_on_line
    along = rel @ direction
    return np.linalg.norm(rel - np.outer(along, direction), axis=1)


def point_circle_distance(points, center, radius, normal) -> np.ndarray:
    """Exact 3-D point-to-circle distance."""
    rel = points - center
    off_plane = rel @ normal
    in_plane = rel - np.outer(off_plane, normal)
    return np.sqrt((np.linalg.norm(in_plane, axis=1) - radius) ** 2 + off_plane ** 2)


def circumscribed_circle(a, b, c):
    """Circle through three points; None when they are (nearly) collinear."""
    v1 = b - a
    v2 = c - a
    normal = np.cross(v1, v2)
    cross_norm = float(np.linalg.norm(normal))
    scale = max(np.linalg.norm(v1), np.linalg.norm(v2), 1e-30)
    if cross_norm < 1e-12 * scale * scale:
        return None
    v11 = v1 @ v1
    v22 = v2 @ v2
    v12 = v1 @ v2
    # |v1 x v2|^2 equals v11*v22 - v12^2 but does not cancel catastrophically
    common = 2.0 * cross_norm * cross_norm
    lam1 = v22 * (v11 - v12) / common
    lam2 = v11 * (v22 - v12) / common
    center = a + lam1 * v1 + lam2 * v2
    radius = float(np.linalg.norm(lam1 * v1 + lam2 * v2))
    return center, radius, normal / cross_norm


def smallest_enclosing_arc(angles) -> float:
    """Span of the smallest arc containing every angle (wraparound-aware)."""
    a = np.sort(np.mod(np.asarray(angles, dtype=float), 2.0 * math.pi))
    if a.size <= 1:
        return 0.0
    gaps = np.diff(a)
    wrap = a[0] + 2.0 * math.pi - a[-1]
    return float(2.0 * math.pi - max(gaps.max(initial=0.0), wrap))


def _minimal_samples(n_points: int, sample_size: int, config: RansacConfig):
    total = math.comb(n_points, sample_size)
    if total <= config.iterations:
        yield from combinations(range(n_points), sample_size)
        return
    rng = np.random.default_rng(config.seed)
    for _ in range(config.iterations):
        yield tuple(rng.choice(n_points, size=sample_size, replace=False))


def fit_line_ransac(points, config: RansacConfig) -> LineFit:
    pts = _as_points(points)
    n = pts.shape[0]
    if n < 2:
        raise InvalidParameterError("line fitting needs at least 2 points")
    best_count = -1
    best_inliers = None
    for i, j in _minimal_samples(n, 2, config):
        d = pts[j] - pts[i]
        norm = np.linalg.norm(d)
        if norm < 1e-12:
            continue
        d = d / norm
        inliers = point_line_distance(pts, pts[i], d) < config.inlier_threshold
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_inliers = inliers
    min_inliers = config.resolved_min_inliers(n, 2)
    if best_inliers is None or best_count < min_inliers:
        raise FitFailureError(f"line fit found {max(best_count, 0)} inliers, need {min_inliers}")
    idx = np.flatnonzero(best_inliers)
    inlier_pts = pts[idx]
    centroid = inlier_pts.mean(axis=0)
    # total least squares on the inliers
    _, _, vt = np.linalg.svd(inlier_pts - centroid, full_matrices=False)
    direction = vt[0]
    proj = inlier_pts @ direction
    if proj[-1] < proj[0]:
        direction = -direction
        proj = -proj
    return LineFit(point_on_line=centroid, direction=direction,
                   inlier_indices=idx, extent=float(proj.max() - proj.min()))


def _refine_circle(pts, center, radius, normal):
    """Nonlinear least squares over (center, radius, normal); falls back to the
    RANSAC model whenever refinement does not improve the residual."""
    def residual(x):
        n = x[4:7]
        n = n / np.linalg.norm(n)
        return point_circle_distance(pts, x[0:3], x[3], n)

    x0 = np.concatenate([center, [radius], normal])
    cost0 = float(np.sum(residual(x0) ** 2))
    method = "lm" if pts.shape[0] >= x0.size else "trf"  # lm needs residuals >= params
    try:
        sol = least_squares(residual, x0, method=method, max_nfev=200)
    except Exception:
        return center, radius, normal
    r = abs(float(sol.x[3]))
    if (not np.all(np.isfinite(sol.x)) or r <= 0.0
            or 2.0 * float(sol.cost) > cost0 + 1e-30):
        return center, radius, normal
    return sol.x[0:3], r, sol.x[4:7] / np.linalg.norm(sol.x[4:7])


def fit_circle_ransac(points, config: RansacConfig) -> CircleFit:
    pts = _as_points(points)
    n = pts.shape[0]
    if n < 3:
        raise InvalidParameterError("circle fitting needs at least 3 points")
    best_count = -1
    best_model = None
    best_inliers = None
    for sample in _minimal_samples(n, 3, config):
        model = circumscribed_circle(pts[sample[0]], pts[sample[1]], pts[sample[2]])
        if model is None:
            continue
        d = point_circle_distance(pts, *model)
        inliers = d < config.inlier_threshold
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_model = model
            best_inliers = inliers
    min_inliers = config.resolved_min_inliers(n, 3)
    if best_model is None or best_count < min_inliers:
        raise FitFailureError(
            f"circle fit found {max(best_count, 0)} inliers, need {min_inliers}")
    idx = np.flatnonzero(best_inliers)
    center, radius, normal = _refine_circle(pts[idx], *best_model)
    rel = pts[idx] - center
    in_plane = rel - np.outer(rel @ normal, normal)
    u = in_plane[0]
    u_norm = np.linalg.norm(u)
    if u_norm < 1e-12:
        angular_range = 0.0
    else:
        u = u / u_norm
        v = np.cross(normal, u)
        angles = np.arctan2(in_plane @ v, in_plane @ u)
        angular_range = smallest_enclosing_arc(angles)
    return CircleFit(center=center, radius=float(radius), normal=normal,
                     inlier_indices=idx, angular_range=angular_range)


def classify_joint(points, config: RansacConfig,
                   angle_threshold: float = DEFAULT_ANGLE_THRESHOLD):
    """Classify the trajectory as prismatic or revolute and build the initial model.

    Exactly collinear trajectories admit no circumscribed circle at all; they
    are the limiting case of a vanishing arc and classify as prismatic.
    """
    pts = _as_points(points)
    if pts.shape[0] < 3:
        raise InvalidParameterError("classification needs at least 3 trajectory points")
    try:
        circle = fit_circle_ransac(pts, config)
    except FitFailureError:
        circle = None
    if circle is None or circle.angular_range < angle_threshold:
        line = fit_line_ransac(pts, config)
        return JointModel.prismatic(line.direction), line
    axis_point = axis_point_from_circle(circle.center, circle.normal)
    return JointModel.revolute(circle.normal, axis_point), circle


def initial_motions(joint: JointModel, hand_centroids, fit) -> MotionSequence:
    """Per-frame motion amounts from the hand trajectory.

    Signs follow the package convention: the returned amount for frame i maps
    frame-i points into the frame-0 configuration.
    """
    pts = _as_points(hand_centroids)
    if joint.is_prismatic:
        m = -(pts - pts[0]) @ joint.direction
    else:
        center = np.asarray(fit.center, dtype=float)
        n = joint.direction
        rel = pts - center
        in_plane = rel - np.outer(rel @ n, n)
        ref = in_plane[0]
        ref_norm = np.linalg.norm(ref)
        if ref_norm < 1e-12:
            raise InvalidParameterError("first hand centroid lies on the rotation axis")
        angles = np.arctan2(np.cross(ref, in_plane) @ n, in_plane @ ref)
        m = -angles
    m[0] = 0.0
    return MotionSequence(m)


def fit_to_json_dict(fit) -> dict:
    """Serializable summary of a trajectory fit."""
    if isinstance(fit, CircleFit):
        return {
            "kind": "circle",
            "angular_range_deg": math.degrees(fit.angular_range),
            "radius": float(fit.radius),
            "center": [float(x) for x in fit.center],
            "normal": [float(x) for x in fit.normal],
            "inliers": [int(i) for i in fit.inlier_indices],
        }
    return {
        "kind": "line",
        "angular_range_deg": 0.0,
        "direction": [float(x) for x in fit.direction],
        "point_on_line": [float(x) for x in fit.point_on_line],
        "extent": float(fit.extent),
        "inliers": [int(i) for i in fit.inlier_indices],
    }
