import math

import numpy as np
import pytest

from artiseg.alignment import (
    AlignmentConfig,
    ConstrainedIcpObjective,
    JointParameterState,
    ResidualGroup,
    find_correspondences,
    frame_pairs,
    hand_weight,
    optimize_constrained_icp,
    pairwise_error,
)
from artiseg.core_model import JointModel, MotionSequence, RigidTransform, rodrigues
from artiseg.errors import DegenerateGeometryError, InvalidParameterError
from artiseg.ingest import FrameCloud

from util_frames import articulated_frames, box_cloud, hands_on_object, no_hands

CFG = AlignmentConfig()
IDENTITY = RigidTransform.identity()


def cloud(points, index=0):
    return FrameCloud(frame_index=index, points=np.asarray(points, dtype=float))


class TestHandWeight:
    def test_weight_at_hand_position(self):
        assert hand_weight((0.1, 0.2, 0.3), (0.1, 0.2, 0.3), 0.2) == pytest.approx(25.0)

    def test_no_hand_gives_unit_weight(self):
        assert hand_weight((0.1, 0.2, 0.3), None, 0.2) == 1.0

    def test_distance_point_eight(self):
        assert hand_weight((0.8, 0.0, 0.0), (0.0, 0.0, 0.0), 0.2) == pytest.approx(1.0)


class TestFindCorrespondences:
    def test_identical_clouds_match_themselves(self):
        rng = np.random.default_rng(0)
        pts = rng.random((50, 3))
        corr = find_correspondences(cloud(pts), cloud(pts, 1), IDENTITY, IDENTITY, CFG)
        assert len(corr) == 50
        assert all(c.source_index == c.target_index for c in corr)

    def test_far_displacement_gives_no_pairs(self):
        pts = np.zeros((5, 3))
        far = pts + np.array([2.0 * CFG.max_corr_dist + 0.05, 0.0, 0.0])
        corr = find_correspondences(cloud(pts), cloud(far, 1), IDENTITY, IDENTITY, CFG)
        assert corr == []

    def test_matches_equal_brute_force_scan(self):
        rng = np.random.default_rng(1)
        src = rng.random((1000, 3))
        tgt = rng.random((1000, 3))
        config = AlignmentConfig(max_corr_dist=10.0)
        corr = find_correspondences(cloud(src), cloud(tgt, 1), IDENTITY, IDENTITY, config)
        # brute-force O(n^2) oracle
        d2 = np.sum((src[:, None, :] - tgt[None, :, :]) ** 2, axis=2)
        expected = np.argmin(d2, axis=1)
        assert np.array_equal(np.array([c.target_index for c in corr]), expected)

    def test_empty_target_rejected(self):
        with pytest.raises(InvalidParameterError):
            find_correspondences(cloud(np.zeros((2, 3))), cloud(np.zeros((0, 3)), 1),
                                 IDENTITY, IDENTITY, CFG)


class TestPairwiseError:
    def test_self_pair_is_zero(self):
        rng = np.random.default_rng(2)
        pts = rng.random((100, 3))
        joint = JointModel.prismatic((0.0, 0.0, 1.0))
        err = pairwise_error(cloud(pts), cloud(pts, 1), joint, 0.0, 0.0, CFG)
        assert err == pytest.approx(0.0, abs=1e-12)

    def test_noiseless_prismatic_at_ground_truth(self):
        rng = np.random.default_rng(3)
        direction = np.array([0.2, -0.1, 0.97])
        joint = JointModel.prismatic(direction / np.linalg.norm(direction))
        base = box_cloud(rng)
        frames = articulated_frames(joint, [0.0, 0.12], base)
        # estimation amounts are the negated physical displacements
        err = pairwise_error(frames[0], frames[1], joint, 0.0, -0.12, CFG)
        corr = find_correspondences(frames[0], frames[1], joint.transform(0.0),
                                    joint.transform(-0.12), CFG)
        assert err < 1e-9 * len(corr)

    def test_linear_in_weights(self):
        rng = np.random.default_rng(4)
        src = rng.random((40, 3))
        tgt = src + rng.normal(0, 0.01, (40, 3))
        joint = JointModel.prismatic((1.0, 0.0, 0.0))
        corr = find_correspondences(cloud(src), cloud(tgt, 1), IDENTITY, IDENTITY, CFG)
        doubled = [type(c)(c.source_index, c.target_index, 2.0 * c.weight) for c in corr]
        e1 = pairwise_error(cloud(src), cloud(tgt, 1), joint, 0.0, 0.0, CFG, correspondences=corr)
        e2 = pairwise_error(cloud(src), cloud(tgt, 1), joint, 0.0, 0.0, CFG, correspondences=doubled)
        assert e2 == pytest.approx(2.0 * e1, rel=1e-12)


class TestFramePairs:
    def test_star_and_chain(self):
        assert frame_pairs(4, "star") == [(0, 1), (0, 2), (0, 3)]
        assert frame_pairs(4, "star+chain") == [(0, 1), (0, 2), (0, 3), (1, 2), (2, 3)]


def random_objective(rng, kind):
    """A small random multi-frame problem with well-separated residuals."""
    n_frames = 4
    if kind == "prismatic":
        d = rng.normal(size=3)
        joint = JointModel.prismatic(d / np.linalg.norm(d))
    else:
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        l = rng.normal(size=3)
        l -= (l @ d) * d
        joint = JointModel.revolute(d, l)
    motions = np.concatenate([[0.0], rng.uniform(-0.6, 0.6, n_frames - 1)])
    groups = []
    for (i, j) in [(0, 1), (0, 2), (0, 3), (1, 2), (2, 3)]:
        k = 7
        groups.append(ResidualGroup(i, j, rng.normal(size=(k, 3)) * 0.3,
                                    rng.normal(size=(k, 3)) * 0.3,
                                    rng.uniform(0.5, 2.0, k)))
    state = JointParameterState.from_model(joint)
    return ConstrainedIcpObjective(state, motions, groups)


class TestAnalyticJacobian:
    @pytest.mark.parametrize("kind", ["prismatic", "revolute"])
    def test_matches_central_finite_differences(self, kind):
        rng = np.random.default_rng(10 if kind == "prismatic" else 11)
        worst = 0.0
        for _ in range(100):
            obj = random_objective(rng, kind)
            phi0, jac = obj.residuals_and_jacobian()
            fd = np.zeros_like(jac)
            h = 1e-6
            for p in range(obj.n_params):
                step = np.zeros(obj.n_params)
                step[p] = h
                fd[:, p] = (obj.residuals(step) - obj.residuals(-step)) / (2.0 * h)
            rel = np.linalg.norm(jac - fd) / max(np.linalg.norm(fd), 1e-12)
            worst = max(worst, rel)
        assert worst < 1e-5

    def test_residuals_match_cost(self):
        rng = np.random.default_rng(12)
        obj = random_objective(rng, "revolute")
        w = np.concatenate([g.weights for g in obj.groups])
        assert obj.cost() == pytest.approx(float(np.sum(w * obj.residuals())), rel=1e-12)


class TestOptimizeConstrainedIcp:
    def run_prismatic(self, init_angle_deg, seed=0):
        rng = np.random.default_rng(seed)
        direction = np.array([0.15, -0.1, 0.98])
        direction /= np.linalg.norm(direction)
        joint = JointModel.prismatic(direction)
        schedule = np.linspace(0.0, 0.3, 6)
        base = box_cloud(rng, n=900)
        frames = articulated_frames(joint, schedule, base)
        hands = hands_on_object(joint, schedule, contact=base[0])
        tilt = rodrigues(math.radians(init_angle_deg), (0.0, 1.0, 0.0))
        init_joint = JointModel.prismatic(tilt @ direction)
        init_m = MotionSequence(-schedule * math.cos(math.radians(init_angle_deg)))
        result = optimize_constrained_icp(frames, hands, (init_joint, init_m), CFG)
        return joint, schedule, result

    def test_noiseless_prismatic_recovery(self):
        joint, schedule, result = self.run_prismatic(10.0)
        angle = math.degrees(math.acos(min(1.0, abs(result.joint.direction @ joint.direction))))
        assert angle < 0.1
        sign = 1.0 if result.joint.direction @ joint.direction > 0 else -1.0
        assert np.max(np.abs(sign * result.motions.as_array() - (-schedule))) < 1e-4

    def test_noiseless_revolute_recovery(self):
        rng = np.random.default_rng(20)
        axis = np.array([0.05, 0.99, -0.1])
        axis /= np.linalg.norm(axis)
        l = np.array([0.3, 0.0, 1.3])
        l -= (l @ axis) * axis
        joint = JointModel.revolute(axis, l)
        schedule = np.linspace(0.0, math.radians(50.0), 6)
        base = box_cloud(rng, n=900, center=(0.55, 0.0, 1.55))
        frames = articulated_frames(joint, schedule, base)
        hands = hands_on_object(joint, schedule, contact=base[0])
        perturb = rodrigues(math.radians(5.0), (1.0, 0.0, 0.0))
        init_l = l + np.array([0.02, 0.0, -0.015])
        init_axis = perturb @ axis
        init_l -= (init_l @ init_axis) * init_axis
        init = (JointModel.revolute(init_axis, init_l), MotionSequence(-schedule))
        result = optimize_constrained_icp(frames, hands, init, CFG)
        angle = math.degrees(math.acos(min(1.0, abs(result.joint.direction @ axis))))
        assert angle < 0.1
        # distance between recovered and true axis lines
        n = np.cross(result.joint.direction, axis)
        w = result.joint.axis_point - l
        if np.linalg.norm(n) < 1e-12:
            axis_dist = np.linalg.norm(w - (w @ axis) * axis)
        else:
            axis_dist = abs(w @ (n / np.linalg.norm(n)))
        assert axis_dist < 1e-3

    def test_cost_never_increases_from_truth_init(self):
        rng = np.random.default_rng(21)
        joint = JointModel.prismatic((0.0, 0.0, 1.0))
        schedule = np.linspace(0.0, 0.2, 5)
        frames = articulated_frames(joint, schedule, box_cloud(rng))
        hands = no_hands(len(frames))
        init = (joint, MotionSequence(-schedule))
        result = optimize_constrained_icp(frames, hands, init, CFG)
        costs = [it.cost for it in result.iterations]
        assert all(b <= a + 1e-15 for a, b in zip(costs, costs[1:]))
        assert result.final_cost <= costs[0] + 1e-15

    def test_all_hands_absent_means_unit_weights(self):
        rng = np.random.default_rng(22)
        joint = JointModel.prismatic((1.0, 0.0, 0.0))
        frames = articulated_frames(joint, [0.0, 0.05], box_cloud(rng, n=300))
        corr = find_correspondences(frames[0], frames[1], joint.transform(0.0),
                                    joint.transform(-0.05), CFG,
                                    hand_source=None, hand_target=None)
        assert all(c.weight == 1.0 for c in corr)

    def test_gauge_fixing_reports_zero_first_motion(self):
        _, _, result = self.run_prismatic(5.0)
        assert result.motions[0] == 0.0
        assert sum(result.motions.as_array()) <= 0.0

    def test_gauge_choice_does_not_change_the_joint(self):
        # using a different frame as the reference (motions re-based so the
        # new first frame is the gauge zero) must recover the same direction
        rng = np.random.default_rng(24)
        direction = np.array([0.3, 0.1, 0.95])
        direction /= np.linalg.norm(direction)
        joint = JointModel.prismatic(direction)
        schedule = np.linspace(0.0, 0.25, 5)
        base = box_cloud(rng, n=700)
        frames = articulated_frames(joint, schedule, base)
        hands = no_hands(5)
        r1 = optimize_constrained_icp(
            frames, hands, (joint, MotionSequence(-schedule)), CFG)
        rolled = [FrameCloud(frame_index=i, points=frames[(i + 1) % 5].points)
                  for i in range(5)]
        rebased = -(np.roll(schedule, -1) - schedule[1])
        rebased[0] = 0.0
        r2 = optimize_constrained_icp(
            rolled, hands, (joint, MotionSequence(rebased)), CFG)
        assert abs(abs(r1.joint.direction @ r2.joint.direction) - 1.0) < 1e-6

    def test_degenerate_geometry_raises(self):
        frames = [cloud(np.zeros((2, 3)), 0), cloud(np.ones((2, 3)) * 5.0, 1)]
        hands = no_hands(2)
        init = (JointModel.prismatic((0.0, 0.0, 1.0)), MotionSequence(np.zeros(2)))
        with pytest.raises(DegenerateGeometryError):
            optimize_constrained_icp(frames, hands, init, CFG)

    def test_objective_invariant_to_point_reindexing(self):
        rng = np.random.default_rng(23)
        joint = JointModel.prismatic((0.0, 0.0, 1.0))
        base = box_cloud(rng, n=400)
        frames = articulated_frames(joint, [0.0, 0.08, 0.16], base)
        perm = rng.permutation(len(base))
        frames_perm = [frames[0],
                       FrameCloud(frame_index=1, points=frames[1].points[perm]),
                       frames[2]]
        hands = no_hands(3)
        init = (joint, MotionSequence(np.array([0.0, -0.08, -0.16])))
        r1 = optimize_constrained_icp(frames, hands, init, CFG)
        r2 = optimize_constrained_icp(frames_perm, hands, init, CFG)
        assert r1.final_cost == pytest.approx(r2.final_cost, rel=1e-9)
