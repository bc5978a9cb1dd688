"""Hand-weighted constrained multi-frame ICP.

The articulation parameters and all per-frame motion amounts (frame 0 pinned
to zero) are optimized jointly.  Correspondence residuals enter the objective
as weighted Euclidean norms; each norm r is smoothed as sqrt(r^2 + delta^2) so
the objective stays differentiable at zero, and the sum is minimized by
iteratively reweighted least squares with Levenberg-Marquardt damping.  Unit
vectors are updated through a two-DoF tangent basis that is re-centered after
every accepted step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .core_model import (
    JointModel,
    MotionSequence,
    PRISMATIC,
    RigidTransform,
    skew_matrix,
)
from .errors import DegenerateGeometryError, InvalidParameterError
from .ingest import FrameCloud

SMOOTH_DELTA = 1e-6  # meters


@dataclass(frozen=True)
class AlignmentConfig:
    """Solver settings.  ``hand_softening`` is the constant added to the
    point-to-hand distance inside the correspondence weight."""

    hand_softening: float = 0.2
    max_corr_dist: float = 0.10
    outer_iterations: int = 30
    inner_iterations: int = 15
    frame_pairs_policy: str = "star+chain"
    param_tol: float = 1e-8
    cost_tol: float = 1e-10
    min_total_correspondences: int = 10
    workers: int = -1

    def __post_init__(self):
        if self.hand_softening <= 0:
            raise InvalidParameterError("hand_softening must be positive")
        if self.max_corr_dist <= 0:
            raise InvalidParameterError("max_corr_dist must be positive")
        if self.outer_iterations < 1 or self.inner_iterations < 1:
            raise InvalidParameterError("iteration counts must be >= 1")
        if self.frame_pairs_policy not in ("star", "star+chain"):
            raise InvalidParameterError(
                f"unknown frame_pairs_policy {self.frame_pairs_policy!r}")


@dataclass(frozen=True)
class Correspondence:
    source_index: int
    target_index: int
    weight: float


def hand_weight(point, hand_point, softening: float) -> float:
    """Weight of a point given the frame's hand position; 1 when no hand was seen."""
    if softening <= 0:
        raise InvalidParameterError("softening constant must be positive")
    if hand_point is None:
        return 1.0
    dist = float(np.linalg.norm(np.asarray(point, dtype=float) - np.asarray(hand_point, dtype=float)))
    return (1.0 / (softening + dist)) ** 2


def _hand_weights(points: np.ndarray, hand_point, softening: float) -> np.ndarray:
    if hand_point is None:
        return np.ones(points.shape[0])
    dist = np.linalg.norm(points - np.asarray(hand_point, dtype=float), axis=1)
    return (1.0 / (softening + dist)) ** 2


def frame_pairs(n_frames: int, policy: str = "star+chain"):
    """Frame pairs entering the multi-frame objective.

    The star anchors every frame to frame 0 (the gauge); the chain adds
    adjacent pairs, which stabilizes sequences with large total motion.
    """
    star = [(0, j) for j in range(1, n_frames)]
    if policy == "star":
        return star
    if policy == "star+chain":
        return star + [(j - 1, j) for j in range(2, n_frames)]
    raise InvalidParameterError(f"unknown frame_pairs_policy {policy!r}")


def _match_arrays(source: FrameCloud, target: FrameCloud,
                  T_source: RigidTransform, T_target: RigidTransform,
                  config: AlignmentConfig, hand_source=None, hand_target=None):
    if len(target) == 0:
        raise InvalidParameterError("cannot match against an empty target cloud")
    sp = T_source.apply(source.points)
    tp = T_target.apply(target.points)
    tree = cKDTree(tp)
    dist, idx = tree.query(sp, workers=config.workers)
    keep = dist <= config.max_corr_dist
    src_idx = np.flatnonzero(keep)
    tgt_idx = idx[keep]
    w = (_hand_weights(source.points[src_idx], hand_source, config.hand_softening)
         * _hand_weights(target.points[tgt_idx], hand_target, config.hand_softening))
    return src_idx, tgt_idx, w


def find_correspondences(source: FrameCloud, target: FrameCloud,
                         T_source: RigidTransform, T_target: RigidTransform,
                         config: AlignmentConfig,
                         hand_source=None, hand_target=None):
    """Nearest-neighbor pairs between two transformed clouds.

    Weights follow the hand-distance scheme evaluated on the untransformed
    points against each frame's own hand centroid.
    """
    src_idx, tgt_idx, w = _match_arrays(source, target, T_source, T_target,
                                        config, hand_source, hand_target)
    return [Correspondence(int(s), int(t), float(wi))
            for s, t, wi in zip(src_idx, tgt_idx, w)]


def pairwise_error(source: FrameCloud, target: FrameCloud, joint: JointModel,
                   m_source: float, m_target: float, config: AlignmentConfig,
                   hand_source=None, hand_target=None, correspondences=None) -> float:
    """Sum of weighted correspondence norms between two frames (not squared)."""
    T_s = joint.transform(m_source)
    T_t = joint.transform(m_target)
    if correspondences is None:
        correspondences = find_correspondences(source, target, T_s, T_t, config,
                                               hand_source, hand_target)
    if not correspondences:
        return 0.0
    si = np.array([c.source_index for c in correspondences])
    ti = np.array([c.target_index for c in correspondences])
    w = np.array([c.weight for c in correspondences])
    d = T_s.apply(source.points[si]) - T_t.apply(target.points[ti])
    return float(np.sum(w * np.linalg.norm(d, axis=1)))


def _orthobasis(direction: np.ndarray) -> np.ndarray:
    """Two unit vectors spanning the plane orthogonal to ``direction``."""
    helper = np.zeros(3)
    helper[int(np.argmin(np.abs(direction)))] = 1.0
    e1 = np.cross(direction, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(direction, e1)
    return np.column_stack([e1, e2])


class JointParameterState:
    """Articulation parameters plus the tangent basis for local updates."""

    __slots__ = ("kind", "direction", "axis_point", "basis")

    def __init__(self, kind: str, direction: np.ndarray, axis_point=None):
        self.kind = kind
        self.direction = np.asarray(direction, dtype=float)
        self.direction = self.direction / np.linalg.norm(self.direction)
        self.axis_point = None if axis_point is None else np.asarray(axis_point, dtype=float)
        self.basis = _orthobasis(self.direction)

    @classmethod
    def from_model(cls, model: JointModel) -> "JointParameterState":
        return cls(model.kind, model.direction, model.axis_point)

    def to_model(self) -> JointModel:
        if self.kind == PRISMATIC:
            return JointModel.prismatic(self.direction)
        return JointModel.revolute(self.direction, self.axis_point)

    @property
    def n_joint_params(self) -> int:
        return 2 if self.kind == PRISMATIC else 4

    def local_params(self, delta: np.ndarray):
        """Map local coordinates to (direction, axis_point) without re-centering."""
        direction = self.direction + self.basis @ delta[:2]
        direction = direction / np.linalg.norm(direction)
        if self.kind == PRISMATIC:
            return direction, None
        return direction, self.axis_point + self.basis @ delta[2:4]

    def retracted(self, delta: np.ndarray) -> "JointParameterState":
        """Apply a local step and re-center: re-orthogonalize the axis point
        against the new direction (a no-op on the underlying transform) and
        rebuild the tangent basis."""
        direction, axis_point = self.local_params(delta)
        if axis_point is not None:
            axis_point = axis_point - (axis_point @ direction) * direction
        return JointParameterState(self.kind, direction, axis_point)


@dataclass
class ResidualGroup:
    """Correspondence block between two frames: frame-i points against their
    matched frame-j points, with per-pair weights."""

    source_frame: int
    target_frame: int
    source_points: np.ndarray
    target_points: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return int(self.weights.shape[0])


def _joint_transform(kind, direction, axis_point, amount) -> tuple[np.ndarray, np.ndarray]:
    """(rotation, translation) without the validation overhead of RigidTransform."""
    if kind == PRISMATIC:
        return np.eye(3), amount * direction
    R = (math.cos(amount) * np.eye(3)
         + (1.0 - math.cos(amount)) * np.outer(direction, direction)
         + math.sin(amount) * skew_matrix(direction))
    return R, axis_point - R @ axis_point


class ConstrainedIcpObjective:
    """Smoothed articulated-ICP objective with its analytic Jacobian.

    Local parameter vector: two direction-tangent coordinates, then (revolute
    only) two axis-point offsets in the same tangent plane, then the motion
    amounts of frames 1..N-1.  The Jacobian is exact at the linearization
    point (local origin).
    """

    def __init__(self, state: JointParameterState, motions: np.ndarray,
                 groups, smooth_delta: float = SMOOTH_DELTA):
        self.state = state
        self.motions = np.asarray(motions, dtype=float)
        self.groups = [g for g in groups if len(g) > 0]
        self.smooth_delta = smooth_delta
        self.n_frames = self.motions.shape[0]
        self.n_joint = state.n_joint_params
        self.n_params = self.n_joint + self.n_frames - 1

    def motion_column(self, frame: int) -> int | None:
        return None if frame == 0 else self.n_joint + frame - 1

    def _params_at(self, x: np.ndarray):
        direction, axis_point = self.state.local_params(x[:self.n_joint])
        motions = self.motions.copy()
        motions[1:] += x[self.n_joint:]
        return direction, axis_point, motions

    def _displacements(self, direction, axis_point, motions):
        transforms = {}
        needed = {g.source_frame for g in self.groups} | {g.target_frame for g in self.groups}
        for f in needed:
            transforms[f] = _joint_transform(self.state.kind, direction, axis_point, motions[f])
        out = []
        for g in self.groups:
            Ri, ti = transforms[g.source_frame]
            Rj, tj = transforms[g.target_frame]
            out.append((g.source_points @ Ri.T + ti) - (g.target_points @ Rj.T + tj))
        return out

    def residuals(self, x=None) -> np.ndarray:
        """Smoothed residual norms, one per correspondence, at local offset x."""
        x = np.zeros(self.n_params) if x is None else np.asarray(x, dtype=float)
        d = self._displacements(*self._params_at(x))
        if not d:
            return np.zeros(0)
        norms2 = np.concatenate([np.einsum("ij,ij->i", di, di) for di in d])
        return np.sqrt(norms2 + self.smooth_delta ** 2)

    def cost(self, x=None) -> float:
        phi = self.residuals(x)
        if phi.size == 0:
            return 0.0
        w = np.concatenate([g.weights for g in self.groups])
        return float(np.sum(w * phi))

    def total_weight(self) -> float:
        return float(sum(g.weights.sum() for g in self.groups))

    def _group_jacobians(self, direction, axis_point, motions):
        """Per group: displacement d (k,3) and dict of {column: derivative (k,3)}.

        Derivatives are taken at the local origin, where the normalization of
        the direction has unit Jacobian restricted to the tangent basis.
        """
        kind = self.state.kind
        basis = self.state.basis
        per_frame = {}
        needed = {g.source_frame for g in self.groups} | {g.target_frame for g in self.groups}
        for f in needed:
            m = motions[f]
            if kind == PRISMATIC:
                per_frame[f] = None
            else:
                R = (math.cos(m) * np.eye(3)
                     + (1.0 - math.cos(m)) * np.outer(direction, direction)
                     + math.sin(m) * skew_matrix(direction))
                dRs = []
                for a in range(2):
                    e = basis[:, a]
                    dR = ((1.0 - math.cos(m)) * (np.outer(e, direction) + np.outer(direction, e))
                          + math.sin(m) * skew_matrix(e))
                    dRs.append(dR)
                per_frame[f] = (R, dRs)
        results = []
        for g in self.groups:
            cols: dict[int, np.ndarray] = {}
            if kind == PRISMATIC:
                d = (g.source_points - g.target_points
                     + (motions[g.source_frame] - motions[g.target_frame]) * direction)
                dm = motions[g.source_frame] - motions[g.target_frame]
                for a in range(2):
                    cols[a] = np.broadcast_to(dm * basis[:, a], d.shape)
                ci = self.motion_column(g.source_frame)
                cj = self.motion_column(g.target_frame)
                if ci is not None:
                    cols[ci] = np.broadcast_to(direction, d.shape)
                if cj is not None:
                    cols[cj] = np.broadcast_to(-direction, d.shape)
            else:
                Ri, dRi = per_frame[g.source_frame]
                Rj, dRj = per_frame[g.target_frame]
                vp = g.source_points - axis_point
                vq = g.target_points - axis_point
                Avp = vp @ Ri.T
                Avq = vq @ Rj.T
                d = Avp - Avq
                for a in range(2):
                    cols[a] = vp @ dRi[a].T - vq @ dRj[a].T
                for a in range(2):
                    cols[2 + a] = np.broadcast_to((Rj - Ri) @ basis[:, a], d.shape)
                ci = self.motion_column(g.source_frame)
                cj = self.motion_column(g.target_frame)
                if ci is not None:
                    cols[ci] = np.cross(direction, Avp)
                if cj is not None:
                    cols[cj] = -np.cross(direction, Avq)
            results.append((d, cols))
        return results

    def residuals_and_jacobian(self):
        """Analytic (residuals, Jacobian) of the smoothed norms at the local origin."""
        direction, axis_point, motions = self._params_at(np.zeros(self.n_params))
        blocks = self._group_jacobians(direction, axis_point, motions)
        total = sum(len(g) for g in self.groups)
        phi = np.zeros(total)
        jac = np.zeros((total, self.n_params))
        row = 0
        for (d, cols), g in zip(blocks, self.groups):
            k = len(g)
            phi_g = np.sqrt(np.einsum("ij,ij->i", d, d) + self.smooth_delta ** 2)
            phi[row:row + k] = phi_g
            for col, deriv in cols.items():
                jac[row:row + k, col] = np.einsum("ij,ij->i", d, deriv) / phi_g
            row += k
        return phi, jac

    def normal_equations(self):
        """Gauss-Newton system of the IRLS majorizer at the local origin.

        Returns (cost, H, g) where H and g use per-residual weights
        w_k / phi_k, the standard reweighting for a smoothed-norm objective.
        """
        direction, axis_point, motions = self._params_at(np.zeros(self.n_params))
        blocks = self._group_jacobians(direction, axis_point, motions)
        H = np.zeros((self.n_params, self.n_params))
        grad = np.zeros(self.n_params)
        cost = 0.0
        for (d, cols), g in zip(blocks, self.groups):
            phi = np.sqrt(np.einsum("ij,ij->i", d, d) + self.smooth_delta ** 2)
            cost += float(np.sum(g.weights * phi))
            psi = g.weights / phi
            keys = sorted(cols)
            derivs = [cols[c] for c in keys]
            for a, ca in enumerate(keys):
                grad[ca] += np.einsum("ij,ij,i->", derivs[a], d, psi)
                for b in range(a, len(keys)):
                    val = np.einsum("ij,ij,i->", derivs[a], derivs[b], psi)
                    H[ca, keys[b]] += val
                    if keys[b] != ca:
                        H[keys[b], ca] += val
        return cost, H, grad


def minimize_objective(objective: ConstrainedIcpObjective, config: AlignmentConfig):
    """Monotone damped Gauss-Newton/IRLS descent on the smoothed objective.

    Returns (state, motions, cost, n_accepted_steps); the cost never increases
    across accepted steps.
    """
    state = objective.state
    motions = objective.motions
    current = objective
    cost = current.cost()
    lam = 1e-6
    accepted = 0
    for _ in range(config.inner_iterations):
        _, H, grad = current.normal_equations()
        gmax = np.max(np.abs(grad)) if grad.size else 0.0
        if gmax < 1e-15:
            break
        diag = np.diag(H).copy()
        diag[diag < 1e-12] = 1e-12
        step = None
        new_cost = None
        for _attempt in range(10):
            try:
                step = np.linalg.solve(H + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial_cost = current.cost(step)
            if trial_cost <= cost:
                new_cost = trial_cost
                break
            lam *= 10.0
        if new_cost is None:
            break
        state = state.retracted(step[:current.n_joint])
        motions = motions.copy()
        motions[1:] += step[current.n_joint:]
        improvement = cost - new_cost
        step_size = float(np.max(np.abs(step)))
        cost = new_cost
        current = ConstrainedIcpObjective(state, motions, current.groups,
                                          current.smooth_delta)
        accepted += 1
        lam = max(lam / 3.0, 1e-12)
        if step_size < config.param_tol:
            break
        if improvement < config.cost_tol * max(cost, 1e-30):
            break
    return state, motions, cost, accepted


@dataclass(frozen=True)
class IcpIteration:
    index: int
    cost_start: float      # normalized objective before the parameter update
    cost: float            # normalized objective after the update, same matches
    num_correspondences: int
    joint: JointModel
    motions: np.ndarray


@dataclass(frozen=True)
class IcpResult:
    joint: JointModel
    motions: MotionSequence
    final_cost: float
    iterations: list = field(default_factory=list)


def canonical_orientation(joint: JointModel, motions: np.ndarray):
    """Flip (direction, motions) so the summed motion is non-positive.

    The two orientations describe the same physical joint; a fixed choice
    makes results deterministic and comparable.
    """
    if motions.sum() > 0.0:
        flipped = -motions
        flipped[0] = 0.0  # avoid negative zero in the gauge slot
        return joint.flipped(), flipped
    return joint, motions


def optimize_constrained_icp(frames, hands, init, config: AlignmentConfig) -> IcpResult:
    """Jointly optimize articulation parameters and per-frame motion amounts.

    ``init`` is a (JointModel, MotionSequence) pair, typically from the
    trajectory fit.  Alternates nearest-neighbor correspondence search with
    damped IRLS updates; an outer iteration is committed only when its
    weight-normalized cost does not exceed the previous one, which makes the
    reported cost trace non-increasing.
    """
    joint, motions0 = init
    if len(frames) < 2:
        raise InvalidParameterError("alignment needs at least 2 frames")
    motions = (motions0.as_array() if isinstance(motions0, MotionSequence)
               else np.asarray(motions0, dtype=float).copy())
    if motions.shape[0] != len(frames):
        raise InvalidParameterError("one motion amount per frame is required")
    hand_points = [None if h is None else h.centroid_3d for h in hands]
    pairs = frame_pairs(len(frames), config.frame_pairs_policy)
    state = JointParameterState.from_model(joint)
    trace: list[IcpIteration] = []
    prev_cost = None
    prev_params = None
    for outer in range(config.outer_iterations):
        direction, axis_point = state.direction, state.axis_point
        transforms = [RigidTransform(*_joint_transform(state.kind, direction, axis_point, m))
                      for m in motions]
        groups = []
        total = 0
        for (i, j) in pairs:
            if len(frames[i]) == 0 or len(frames[j]) == 0:
                continue  # empty frames fall through to the degeneracy check
            si, ti, w = _match_arrays(frames[i], frames[j], transforms[i], transforms[j],
                                      config, hand_points[i], hand_points[j])
            if si.size:
                groups.append(ResidualGroup(i, j, frames[i].points[si],
                                            frames[j].points[ti], w))
                total += si.size
        if total < config.min_total_correspondences:
            raise DegenerateGeometryError(
                f"only {total} correspondences at outer iteration {outer}")
        objective = ConstrainedIcpObjective(state, motions, groups)
        cost_start = objective.cost() / objective.total_weight()
        new_state, new_motions, raw_cost, _ = minimize_objective(objective, config)
        cost = raw_cost / objective.total_weight()
        if prev_cost is not None and cost > prev_cost:
            break  # re-matching no longer helps; keep the previous parameters
        state, motions = new_state, new_motions
        trace.append(IcpIteration(outer, cost_start, cost, total,
                                  state.to_model(), motions.copy()))
        if prev_params is not None:
            dir_change = float(np.linalg.norm(state.direction - prev_params[0]))
            m_change = float(np.max(np.abs(motions - prev_params[1])))
            if max(dir_change, m_change) < config.param_tol:
                break
            if abs(prev_cost - cost) < config.cost_tol * max(prev_cost, 1e-30):
                break
        prev_cost = cost
        prev_params = (state.direction.copy(), motions.copy())
    joint_out, motions_out = canonical_orientation(state.to_model(), motions)
    return IcpResult(joint=joint_out, motions=MotionSequence(motions_out),
                     final_cost=trace[-1].cost if trace else float("nan"),
                     iterations=trace)
