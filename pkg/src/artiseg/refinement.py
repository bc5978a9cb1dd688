"""Parameter refinement on the segmented points with a hand soft constraint.

The refined objective couples the mean geometric alignment error of the
segmented region (unit weights, frame 0 against every other frame) with a
hand term that ties each frame's 3-D hand joints to their frame-0 positions
under the articulation transform, weighted by the detection confidences.
The refine -> re-segment loop runs a configurable number of times.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .alignment import (
    AlignmentConfig,
    ConstrainedIcpObjective,
    JointParameterState,
    ResidualGroup,
    canonical_orientation,
    minimize_objective,
)
from .core_model import JointModel, MotionSequence
from .errors import DegenerateGeometryError, EmptySegmentationError, InvalidParameterError
from .segmentation import SegmentationConfig, SegmentationResult, segment_sequence


@dataclass(frozen=True)
class RefinementConfig:
    hand_term_weight: float = 0.01      # lambda on the hand soft constraint
    loop_iterations: int = 2            # refine -> re-segment repetitions
    transfer_tolerance: float = 0.03    # label transfer distance to frames j > 0
    icp: AlignmentConfig = field(default_factory=AlignmentConfig)

    def __post_init__(self):
        if self.hand_term_weight < 0:
            raise InvalidParameterError("hand_term_weight must be non-negative")
        if self.loop_iterations < 1:
            raise InvalidParameterError("loop_iterations must be >= 1")


def _motion_array(motions) -> np.ndarray:
    return (motions.as_array() if isinstance(motions, MotionSequence)
            else np.asarray(motions, dtype=float).copy())


def transfer_segmentation(frames, object_points: np.ndarray, joint: JointModel,
                          motions: np.ndarray, tolerance: float, workers: int = -1):
    """Per-frame object indices: points whose frame-0-configuration image lies
    within ``tolerance`` of the frame-0 object cloud."""
    tree = cKDTree(object_points)
    out = []
    for j, frame in enumerate(frames):
        if j == 0:
            out.append(None)  # frame 0 uses the segmentation itself
            continue
        moved = joint.transform(float(motions[j])).apply(frame.points)
        d, _ = tree.query(moved, workers=workers)
        out.append(np.flatnonzero(d < tolerance))
    return out


def geometric_cost(frames, object_indices, joint: JointModel, motions) -> float:
    """Sum over frames of the unit-weight correspondence error of the segmented
    points: frame-0 object points against each frame's object points, all in
    the frame-0 configuration (empty for a single-frame sequence)."""
    m = _motion_array(motions)
    idx0 = np.asarray(object_indices[0])
    if idx0.size == 0:
        raise EmptySegmentationError("frame-0 segmentation is empty")
    p0 = frames[0].points[idx0]
    total = 0.0
    for j in range(1, len(frames)):
        idx_j = np.asarray(object_indices[j])
        if idx_j.size == 0:
            raise EmptySegmentationError(f"frame {j} has no segmented points")
        moved = joint.transform(float(m[j])).apply(frames[j].points[idx_j])
        d, _ = cKDTree(moved).query(p0)
        total += float(np.sum(d))
    return total


def hand_cost(hands, joint: JointModel, motions) -> float:
    """Confidence-weighted sum of hand-joint alignment errors against frame 0.

    Terms with a missing 3-D joint on either side contribute nothing.
    """
    m = _motion_array(motions)
    h0 = hands[0]
    if h0.joints_3d is None:
        return 0.0
    valid0 = h0.valid_joint_mask()
    total = 0.0
    for j in range(1, len(hands)):
        hj = hands[j]
        if hj.joints_3d is None:
            continue
        valid = valid0 & hj.valid_joint_mask()
        if not valid.any():
            continue
        T = joint.transform(float(m[j]))
        d = np.linalg.norm(h0.joints_3d[valid] - T.apply(hj.joints_3d[valid]), axis=1)
        alpha = h0.confidences[valid] * hj.confidences[valid]
        total += float(np.sum(alpha * d))
    return total


def _hand_groups(hands, lam: float):
    """Residual groups for the hand term: frame-j joints as sources matched to
    their frame-0 counterparts, weight lambda * alpha_0 * alpha_j."""
    if lam == 0.0 or not hands:
        return []
    h0 = hands[0]
    if h0.joints_3d is None:
        return []
    valid0 = h0.valid_joint_mask()
    groups = []
    for j in range(1, len(hands)):
        hj = hands[j]
        if hj.joints_3d is None:
            continue
        valid = valid0 & hj.valid_joint_mask()
        if not valid.any():
            continue
        weights = lam * h0.confidences[valid] * hj.confidences[valid]
        groups.append(ResidualGroup(j, 0, hj.joints_3d[valid], h0.joints_3d[valid],
                                    weights))
    return groups


@dataclass(frozen=True)
class RefineIteration:
    index: int
    cost_start: float      # objective under this iteration's correspondences, before the update
    cost: float            # same correspondences, after the inner solve
    num_correspondences: int
    joint: JointModel
    motions: np.ndarray


@dataclass(frozen=True)
class RefineResult:
    joint: JointModel
    motions: MotionSequence
    objective: float         # at the returned parameters, final correspondences
    input_objective: float   # at the input parameters, final correspondences
    iterations: list = field(default_factory=list)


def refine(frames, segmentation: SegmentationResult, hands, joint: JointModel,
           motions, config: RefinementConfig) -> RefineResult:
    """Minimize mean segmented-region error plus the weighted hand term.

    The returned parameters never score worse than the inputs under the final
    correspondence set.
    """
    m = _motion_array(motions)
    n_seg = segmentation.object_count()
    if n_seg == 0:
        raise EmptySegmentationError("cannot refine with an empty segmentation")
    object_points = segmentation.object_cloud.points
    hand_groups = _hand_groups(hands, config.hand_term_weight)
    state = JointParameterState.from_model(joint)
    input_state = JointParameterState.from_model(joint)
    input_motions = m.copy()
    icp_cfg = config.icp
    geo_weight = 1.0 / n_seg
    trace: list[RefineIteration] = []
    prev_cost = None
    prev_params = None
    groups = None
    # Re-matching against re-transferred labels can fluctuate the objective
    # slightly between outer iterations (the correspondence set changes), so
    # the loop runs to small-|change| convergence; the guard below makes the
    # call as a whole non-increasing.
    for outer in range(icp_cfg.outer_iterations):
        model = state.to_model()
        per_frame = transfer_segmentation(frames, object_points, model, m,
                                          config.transfer_tolerance, icp_cfg.workers)
        groups = list(hand_groups)
        total = 0
        for j in range(1, len(frames)):
            idx_j = per_frame[j]
            if idx_j.size == 0:
                continue
            frame_points = frames[j].points[idx_j]
            T_j = model.transform(float(m[j]))
            tree = cKDTree(T_j.apply(frame_points))
            d, nn = tree.query(object_points, workers=icp_cfg.workers)
            keep = d <= icp_cfg.max_corr_dist
            if not keep.any():
                continue
            groups.append(ResidualGroup(0, j, object_points[keep],
                                        frame_points[nn[keep]],
                                        np.full(int(keep.sum()), geo_weight)))
            total += int(keep.sum())
        if total < icp_cfg.min_total_correspondences:
            raise DegenerateGeometryError(
                f"refinement found only {total} segmented correspondences")
        objective = ConstrainedIcpObjective(state, m, groups)
        cost_start = objective.cost()
        state, m, cost, _ = minimize_objective(objective, icp_cfg)
        trace.append(RefineIteration(outer, cost_start, cost, total,
                                     state.to_model(), m.copy()))
        if prev_params is not None:
            dir_change = float(np.linalg.norm(state.direction - prev_params[0]))
            m_change = float(np.max(np.abs(m - prev_params[1])))
            if max(dir_change, m_change) < icp_cfg.param_tol:
                break
            if abs(prev_cost - cost) < icp_cfg.cost_tol * max(prev_cost, 1e-30):
                break
        prev_cost = cost
        prev_params = (state.direction.copy(), m.copy())
    # Guard: under the final correspondences the result must not be worse
    # than the input parameters.
    final_cost = ConstrainedIcpObjective(state, m, groups).cost()
    input_cost = ConstrainedIcpObjective(input_state, input_motions, groups).cost()
    if input_cost < final_cost:
        state, m, final_cost = input_state, input_motions, input_cost
    joint_out, m_out = canonical_orientation(state.to_model(), m)
    return RefineResult(joint=joint_out, motions=MotionSequence(m_out),
                        objective=final_cost, input_objective=input_cost,
                        iterations=trace)


@dataclass(frozen=True)
class RefinementLoopResult:
    joint: JointModel
    motions: MotionSequence
    segmentation: SegmentationResult
    motion_range: tuple
    refine_iterations: list = field(default_factory=list)
    refine_objectives: list = field(default_factory=list)  # (input, returned) per call


def run_refinement_loop(frames, hands, joint: JointModel, motions,
                        seg_config: SegmentationConfig,
                        ref_config: RefinementConfig) -> RefinementLoopResult:
    """Alternate refinement and re-segmentation.

    The first segmentation uses the wide overlap threshold; every
    re-segmentation inside the loop uses the tighter one.  Also reports the
    observed range of physical displacements across the sequence.
    """
    segmentation = segment_sequence(frames, hands, joint, motions, seg_config,
                                    seg_config.tau_sym_first)
    m = _motion_array(motions)
    traces = []
    objectives = []
    for _ in range(ref_config.loop_iterations):
        result = refine(frames, segmentation, hands, joint, m, ref_config)
        joint, m = result.joint, result.motions.as_array()
        traces.append(result.iterations)
        objectives.append((result.input_objective, result.objective))
        segmentation = segment_sequence(frames, hands, joint, m, seg_config,
                                        seg_config.tau_sym_refine)
    displacements = -m
    motion_range = (float(displacements.min()), float(displacements.max()))
    return RefinementLoopResult(joint=joint, motions=MotionSequence(m),
                                segmentation=segmentation,
                                motion_range=motion_range,
                                refine_iterations=traces,
                                refine_objectives=objectives)
