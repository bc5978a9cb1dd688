"""Depth-image ingestion: backprojection, static-point removal, hand centroids,
voxel downsampling, normal estimation and frame subsampling.

All operations are pure per frame; frames can be processed independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputFormatError, InvalidParameterError


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics: focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidParameterError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InvalidParameterError("principal point must lie inside the image")

    def to_json_dict(self) -> dict:
        return {
            "fx": float(self.fx),
            "fy": float(self.fy),
            "cx": float(self.cx),
            "cy": float(self.cy),
            "width": int(self.width),
            "height": int(self.height),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "CameraIntrinsics":
        try:
            return cls(fx=float(data["fx"]), fy=float(data["fy"]),
                       cx=float(data["cx"]), cy=float(data["cy"]),
                       width=int(data["width"]), height=int(data["height"]))
        except KeyError as exc:
            raise InputFormatError(f"intrinsics JSON missing key {exc}") from exc


@dataclass(frozen=True)
class FrameCloud:
    """One frame's 3-D points (meters, camera frame of frame 0) with optional normals.

    ``view_origins`` holds the sensor position each point was observed from;
    it backs the incidence-angle tests during segmentation.
    """

    frame_index: int
    points: np.ndarray
    normals: np.ndarray | None = None
    view_origins: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidParameterError("points must be an (n, 3) array")
        pts = np.ascontiguousarray(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.normals is not None:
            nrm = np.ascontiguousarray(np.asarray(self.normals, dtype=float))
            if nrm.shape != pts.shape:
                raise InvalidParameterError("normals must match points in shape")
            nrm.setflags(write=False)
            object.__setattr__(self, "normals", nrm)
        origins = self.view_origins
        if origins is None:
            origins = np.zeros_like(pts)
        else:
            origins = np.asarray(origins, dtype=float)
            if origins.shape == (3,):
                origins = np.broadcast_to(origins, pts.shape).copy()
            if origins.shape != pts.shape:
                raise InvalidParameterError("view_origins must be a 3-vector or match points")
            origins = np.ascontiguousarray(origins)
        origins.setflags(write=False)
        object.__setattr__(self, "view_origins", origins)

    def __len__(self) -> int:
        return int(self.points.shape[0])

    @property
    def sensor_origin(self) -> np.ndarray:
        """Representative sensor position (single-sensor frames assumed)."""
        if len(self) == 0:
            return np.zeros(3)
        return self.view_origins[0]

    def select(self, indices) -> "FrameCloud":
        idx = np.asarray(indices)
        return FrameCloud(
            frame_index=self.frame_index,
            points=self.points[idx],
            normals=None if self.normals is None else self.normals[idx],
            view_origins=self.view_origins[idx],
        )


@dataclass(frozen=True)
class HandObservation:
    """Per-frame 2-D hand joints with confidences, plus 3-D data when recoverable."""

    frame_index: int
    joints_2d: np.ndarray
    confidences: np.ndarray
    centroid_3d: np.ndarray | None = None
    joints_3d: np.ndarray | None = None

    def __post_init__(self):
        uv = np.asarray(self.joints_2d, dtype=float).reshape(-1, 2)
        conf = np.asarray(self.confidences, dtype=float).reshape(-1)
        if uv.shape[0] != conf.shape[0]:
            raise InvalidParameterError("joints_2d and confidences must have equal length")
        if conf.size and (conf.min() < 0.0 or conf.max() > 1.0):
            raise InvalidParameterError("confidences must lie in [0, 1]")
        uv.setflags(write=False)
        conf.setflags(write=False)
        object.__setattr__(self, "joints_2d", uv)
        object.__setattr__(self, "confidences", conf)
        if self.centroid_3d is not None:
            c = np.asarray(self.centroid_3d, dtype=float)
            c.setflags(write=False)
            object.__setattr__(self, "centroid_3d", c)
        if self.joints_3d is not None:
            j3 = np.asarray(self.joints_3d, dtype=float).reshape(-1, 3)
            j3.setflags(write=False)
            object.__setattr__(self, "joints_3d", j3)

    def valid_joint_mask(self) -> np.ndarray:
        """Joints with positive confidence and a recovered 3-D position."""
        if self.joints_3d is None:
            return np.zeros(self.confidences.shape, dtype=bool)
        return (self.confidences > 0.0) & np.all(np.isfinite(self.joints_3d), axis=1)


def project(points, intrinsics: CameraIntrinsics):
    """Project camera-frame points to pixel coordinates.

    Returns ``(uv, z)``; callers must check ``z > 0`` for visibility.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    z = pts[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intrinsics.fx * pts[:, 0] / z + intrinsics.cx
        v = intrinsics.fy * pts[:, 1] / z + intrinsics.cy
    return np.column_stack([u, v]), z


def backproject(depth, intrinsics: CameraIntrinsics, keep_mask=None,
                frame_index: int = 0, view_origin=(0.0, 0.0, 0.0)) -> FrameCloud:
    """Backproject a depth image into a FrameCloud.

    Zero / NaN depth marks invalid pixels; ``keep_mask`` (optional, boolean,
    True = keep) further restricts the output.
    """
    d = np.asarray(depth, dtype=float)
    if d.shape != (intrinsics.height, intrinsics.width):
        raise InputFormatError(
            f"depth shape {d.shape} does not match intrinsics "
            f"({intrinsics.height}, {intrinsics.width})")
    valid = np.isfinite(d) & (d > 0.0)
    if keep_mask is not None:
        mask = np.asarray(keep_mask, dtype=bool)
        if mask.shape != d.shape:
            raise InputFormatError("keep_mask shape does not match depth")
        valid &= mask
    vs, us = np.nonzero(valid)
    z = d[vs, us]
    x = (us - intrinsics.cx) * z / intrinsics.fx
    y = (vs - intrinsics.cy) * z / intrinsics.fy
    pts = np.column_stack([x, y, z])
    return FrameCloud(frame_index=frame_index, points=pts,
                      view_origins=np.asarray(view_origin, dtype=float))


def remove_static(frame_depth, background_depth, static_threshold: float) -> np.ndarray:
    """Keep-mask for pixels whose depth differs from the background capture.

    A pixel survives if both depths are valid and differ by more than the
    threshold, or if the frame sees geometry where the background is invalid.
    """
    f = np.asarray(frame_depth, dtype=float)
    b = np.asarray(background_depth, dtype=float)
    if f.shape != b.shape:
        raise InputFormatError(f"depth shapes differ: {f.shape} vs {b.shape}")
    valid_f = np.isfinite(f) & (f > 0.0)
    valid_b = np.isfinite(b) & (b > 0.0)
    with np.errstate(invalid="ignore"):
        moved = np.abs(f - b) > static_threshold
    return (valid_f & valid_b & moved) | (valid_f & ~valid_b)


def hand_centroid_3d(observation: HandObservation, depth, intrinsics: CameraIntrinsics,
                     window_radius: int = 2, min_confidence: float = 0.1) -> HandObservation:
    """Fill in 3-D joints and the hand centroid from the depth map.

    Each sufficiently confident joint takes the median of the valid depths in
    a (2r+1)^2 window around its pixel; joints without valid depth stay
    missing and the centroid is absent when no joint can be recovered.
    """
    d = np.asarray(depth, dtype=float)
    if d.shape != (intrinsics.height, intrinsics.width):
        raise InputFormatError("depth shape does not match intrinsics")
    n = observation.joints_2d.shape[0]
    joints_3d = np.full((n, 3), np.nan)
    for k in range(n):
        if observation.confidences[k] < min_confidence:
            continue
        u, v = observation.joints_2d[k]
        if not (0 <= u < intrinsics.width and 0 <= v < intrinsics.height):
            continue
        iu = int(round(u))
        iv = int(round(v))
        u0 = max(0, iu - window_radius)
        u1 = min(intrinsics.width, iu + window_radius + 1)
        v0 = max(0, iv - window_radius)
        v1 = min(intrinsics.height, iv + window_radius + 1)
        window = d[v0:v1, u0:u1]
        vals = window[np.isfinite(window) & (window > 0.0)]
        if vals.size == 0:
            continue
        z = float(np.median(vals))
        joints_3d[k] = ((u - intrinsics.cx) * z / intrinsics.fx,
                        (v - intrinsics.cy) * z / intrinsics.fy,
                        z)
    present = np.all(np.isfinite(joints_3d), axis=1)
    centroid = joints_3d[present].mean(axis=0) if np.any(present) else None
    return HandObservation(frame_index=observation.frame_index,
                           joints_2d=observation.joints_2d,
                           confidences=observation.confidences,
                           centroid_3d=centroid,
                           joints_3d=joints_3d)


def voxel_downsample(cloud: FrameCloud, voxel: float) -> FrameCloud:
    """Replace the points in each occupied voxel by their centroid."""
    if voxel <= 0:
        raise InvalidParameterError("voxel size must be positive")
    if len(cloud) == 0:
        return cloud
    keys = np.floor(cloud.points / voxel).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    n_vox = counts.shape[0]
    sums = np.zeros((n_vox, 3))
    np.add.at(sums, inverse, cloud.points)
    centroids = sums / counts[:, None]
    origin_sums = np.zeros((n_vox, 3))
    np.add.at(origin_sums, inverse, cloud.view_origins)
    return FrameCloud(frame_index=cloud.frame_index, points=centroids,
                      view_origins=origin_sums / counts[:, None])


def estimate_normals(cloud: FrameCloud, k: int = 16) -> FrameCloud:
    """Per-point normals from the PCA of the k-nearest neighborhood.

    Normals are flipped to face the sensor (negative dot product against the
    point-minus-view-origin ray).
    """
    n = len(cloud)
    if n < k:
        raise InvalidParameterError(f"need at least {k} points for normal estimation, got {n}")
    tree = cKDTree(cloud.points)
    _, idx = tree.query(cloud.points, k=k)
    neighborhoods = cloud.points[idx]                     # (n, k, 3)
    centered = neighborhoods - neighborhoods.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k
    _, vecs = np.linalg.eigh(cov)
    normals = vecs[:, :, 0]                               # smallest eigenvalue
    rays = cloud.points - cloud.view_origins
    flip = np.einsum("ij,ij->i", normals, rays) > 0.0
    normals[flip] *= -1.0
    return FrameCloud(frame_index=cloud.frame_index, points=cloud.points,
                      normals=normals, view_origins=cloud.view_origins)


def subsample_frames(sequence, max_frames: int = 15):
    """Drop frames without a hand centroid, then thin to ``max_frames`` evenly.

    The first retained frame is always kept; remaining picks are spread at
    approximately uniform spacing over the frames that have a hand centroid.
    """
    with_hand = [(cloud, obs) for cloud, obs in sequence if obs.centroid_3d is not None]
    if not with_hand:
        raise InputFormatError("no frame has a recoverable hand centroid")
    if len(with_hand) <= max_frames:
        return with_hand
    picks = np.round(np.linspace(0, len(with_hand) - 1, max_frames)).astype(int)
    picks = np.unique(picks)
    return [with_hand[i] for i in picks]
