"""Manipulated-object segmentation.

Candidates are the frame-0 points that keep overlapping the other frames once
everything is mapped into the frame-0 configuration (the symmetric region).
Surface normals then split candidates into confident and ambiguous, and
Euclidean clusters near the first-frame hand position are selected.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core_model import JointModel
from .errors import EmptySegmentationError, InvalidParameterError
from .ingest import FrameCloud


@dataclass(frozen=True)
class SegmentationConfig:
    tau_sym_first: float = 0.05     # overlap threshold, first pass
    tau_sym_refine: float = 0.03    # overlap threshold inside the refinement loop
    incidence_max_deg: float = 70.0
    cluster_tolerance: float = 0.03
    min_cluster_size: int = 50
    tau_hand: float = 0.15
    normal_cone_deg: float = 30.0
    workers: int = -1

    def __post_init__(self):
        for name in ("tau_sym_first", "tau_sym_refine", "incidence_max_deg",
                     "cluster_tolerance", "min_cluster_size", "tau_hand",
                     "normal_cone_deg"):
            if getattr(self, name) <= 0:
                raise InvalidParameterError(f"{name} must be positive")


@dataclass(frozen=True)
class SegmentationResult:
    """Frame-0 labels plus the selected object points in the frame-0 configuration."""

    reference_cloud: FrameCloud
    reference_labels: np.ndarray          # bool per reference point, True = object
    object_cloud: FrameCloud
    object_indices: np.ndarray            # indices into the reference cloud
    cluster_ids: np.ndarray               # per object point
    confidence_flags: np.ndarray          # per object point, True = confident

    def object_count(self) -> int:
        return int(self.object_indices.size)


def extract_symmetric(frames, joint: JointModel, motions, config: SegmentationConfig,
                      tau_sym: float) -> np.ndarray:
    """Indices of frame-0 points whose median distance to the aligned frames is small.

    For each frame-0 point and each frame j > 0 the nearest-neighbor distance
    to frame j mapped into the frame-0 configuration is collected; frames in
    which the point's surface patch would have been seen at a grazing
    incidence angle are skipped.  A point is a candidate when at least half
    of the other frames contribute and the median distance stays below
    ``tau_sym``.
    """
    f0 = frames[0]
    if f0.normals is None:
        raise InvalidParameterError("frame-0 normals are required for the incidence test")
    m = motions.as_array() if hasattr(motions, "as_array") else np.asarray(motions, dtype=float)
    if m.shape[0] != len(frames):
        raise InvalidParameterError("one motion amount per frame is required")
    n_frames = len(frames)
    n0 = len(f0)
    if n0 == 0 or n_frames < 2:
        return np.zeros(0, dtype=int)
    cos_max = math.cos(math.radians(config.incidence_max_deg))
    dists = np.full((n_frames - 1, n0), np.nan)
    for j in range(1, n_frames):
        if len(frames[j]) == 0:
            continue  # an empty frame simply contributes no distances
        T = joint.transform(float(m[j]))
        transformed = T.apply(frames[j].points)
        tree = cKDTree(transformed)
        d, _ = tree.query(f0.points, workers=config.workers)
        # incidence of the frame-0 surface element as frame j observed it
        inv = T.inverse()
        p_j = inv.apply(f0.points)
        n_j = f0.normals @ inv.rotation.T
        rays = p_j - frames[j].sensor_origin
        ray_norm = np.linalg.norm(rays, axis=1)
        ray_norm[ray_norm < 1e-12] = 1.0
        cos_inc = -np.einsum("ij,ij->i", rays, n_j) / ray_norm
        ok = cos_inc >= cos_max
        dists[j - 1, ok] = d[ok]
    contributing = np.sum(np.isfinite(dists), axis=0)
    required = math.ceil((n_frames - 1) / 2)
    enough = contributing >= required
    candidates = np.zeros(n0, dtype=bool)
    if enough.any():
        med = np.nanmedian(dists[:, enough], axis=0)
        candidates[enough] = med < tau_sym
    return np.flatnonzero(candidates)


def classify_confidence(normals, joint: JointModel, config: SegmentationConfig) -> np.ndarray:
    """True where the surface normal is geometrically consistent with the joint.

    Prismatic: the normal is aligned with the slide direction (either
    hemisphere).  Revolute: the normal is nearly orthogonal to the rotation
    axis, i.e. it sweeps tangentially when the object rotates.  Everything
    else only appears to move with the model and stays ambiguous.
    """
    if normals is None:
        raise InvalidParameterError("normals are required for confidence classification")
    nrm = np.asarray(normals, dtype=float).reshape(-1, 3)
    alignment = np.abs(np.clip(nrm @ joint.direction, -1.0, 1.0))
    cone = math.radians(config.normal_cone_deg)
    if joint.is_prismatic:
        return alignment >= math.cos(cone)
    return alignment <= math.sin(cone)


def euclidean_clusters(points: np.ndarray, tolerance: float, min_size: int):
    """Connected components under the fixed-radius neighbor graph."""
    n = points.shape[0]
    if n == 0:
        return []
    tree = cKDTree(points)
    processed = np.zeros(n, dtype=bool)
    clusters = []
    queue = deque()
    for seed in range(n):
        if processed[seed]:
            continue
        queue.clear()
        queue.append(seed)
        processed[seed] = True
        members = []
        while queue:
            idx = queue.popleft()
            members.append(idx)
            for nb in tree.query_ball_point(points[idx], tolerance):
                if not processed[nb]:
                    processed[nb] = True
                    queue.append(nb)
        if len(members) >= min_size:
            clusters.append(np.array(sorted(members)))
    return clusters


def cluster_and_select(reference_cloud: FrameCloud, candidate_indices, confidence_flags,
                       hand_point, config: SegmentationConfig) -> SegmentationResult:
    """Cluster the candidates and keep the clusters near the first-frame hand."""
    if hand_point is None:
        raise InvalidParameterError("a frame-0 hand centroid is required for cluster selection")
    candidate_indices = np.asarray(candidate_indices, dtype=int)
    flags = np.asarray(confidence_flags, dtype=bool)
    if candidate_indices.size == 0:
        raise EmptySegmentationError("no symmetric candidates to cluster")
    cand_pts = reference_cloud.points[candidate_indices]
    clusters = euclidean_clusters(cand_pts, config.cluster_tolerance, config.min_cluster_size)
    hand = np.asarray(hand_point, dtype=float)
    selected = []
    for local in clusters:
        min_dist = float(np.min(np.linalg.norm(cand_pts[local] - hand, axis=1)))
        if min_dist <= config.tau_hand:
            selected.append(local)
    if not selected:
        raise EmptySegmentationError(
            f"no candidate cluster within {config.tau_hand} m of the hand")
    object_local = np.concatenate(selected)
    cluster_ids = np.concatenate([np.full(len(local), cid, dtype=int)
                                  for cid, local in enumerate(selected)])
    object_indices = candidate_indices[object_local]
    order = np.argsort(object_indices)   # canonical order: by reference index
    object_local = object_local[order]
    object_indices = object_indices[order]
    cluster_ids = cluster_ids[order]
    labels = np.zeros(len(reference_cloud), dtype=bool)
    labels[object_indices] = True
    return SegmentationResult(
        reference_cloud=reference_cloud,
        reference_labels=labels,
        object_cloud=reference_cloud.select(object_indices),
        object_indices=object_indices,
        cluster_ids=cluster_ids,
        confidence_flags=flags[object_local],
    )


def segment_sequence(frames, hands, joint: JointModel, motions,
                     config: SegmentationConfig, tau_sym=None) -> SegmentationResult:
    """Full segmentation pass: symmetric extraction, confidence flags, selection."""
    tau = config.tau_sym_first if tau_sym is None else tau_sym
    candidates = extract_symmetric(frames, joint, motions, config, tau)
    if candidates.size == 0:
        raise EmptySegmentationError("symmetric-region extraction found no candidates")
    flags = classify_confidence(frames[0].normals[candidates], joint, config)
    hand0 = hands[0].centroid_3d if hands else None
    return cluster_and_select(frames[0], candidates, flags, hand0, config)
