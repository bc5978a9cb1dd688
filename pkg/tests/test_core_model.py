import json
import math

import numpy as np
import pytest

from artiseg.core_model import (
    JointModel,
    MotionSequence,
    RigidTransform,
    axis_point_from_circle,
    prismatic_transform,
    revolute_transform,
    rodrigues,
)
from artiseg.errors import InvalidParameterError


def random_unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


class TestPrismaticTransform:
    def test_zero_motion_is_identity(self):
        T = prismatic_transform((0.0, 0.0, 1.0), 0.0)
        assert np.allclose(T.rotation, np.eye(3))
        assert np.allclose(T.translation, 0.0)

    def test_direct_substitution(self):
        T = prismatic_transform((0.0, 0.0, 1.0), 0.5)
        assert np.allclose(T.rotation, np.eye(3))
        assert np.allclose(T.translation, (0.0, 0.0, 0.5))

    def test_translation_group_property(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            d = random_unit(rng)
            a1, a2 = rng.normal(size=2)
            lhs = prismatic_transform(d, a1).compose(prismatic_transform(d, a2))
            rhs = prismatic_transform(d, a1 + a2)
            assert np.allclose(lhs.translation, rhs.translation, atol=1e-12)

    def test_non_unit_direction_rejected(self):
        with pytest.raises(InvalidParameterError):
            prismatic_transform((0.0, 0.0, 2.0), 0.1)


class TestRodrigues:
    def test_zero_angle(self):
        assert np.allclose(rodrigues(0.0, (1.0, 0.0, 0.0)), np.eye(3))

    def test_quarter_turn_about_z(self):
        R = rodrigues(math.pi / 2, (0.0, 0.0, 1.0))
        assert np.allclose(R @ np.array([1.0, 0.0, 0.0]), (0.0, 1.0, 0.0), atol=1e-12)

    def test_half_turn_about_x(self):
        R = rodrigues(math.pi, (1.0, 0.0, 0.0))
        assert np.allclose(R @ np.array([0.0, 1.0, 0.0]), (0.0, -1.0, 0.0), atol=1e-12)

    def test_orthonormal_and_proper_for_random_inputs(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            R = rodrigues(rng.uniform(-math.pi, math.pi), random_unit(rng))
            assert np.max(np.abs(R @ R.T - np.eye(3))) < 1e-9
            assert abs(np.linalg.det(R) - 1.0) < 1e-9

    def test_non_unit_axis_rejected(self):
        with pytest.raises(InvalidParameterError):
            rodrigues(0.3, (0.0, 0.5, 0.0))


class TestRevoluteTransform:
    def test_zero_angle_is_identity(self):
        T = revolute_transform((0.0, 0.0, 1.0), (1.0, 0.0, 0.0), 0.0)
        assert np.allclose(T.rotation, np.eye(3))
        assert np.allclose(T.translation, 0.0)

    def test_axis_is_fixed(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = random_unit(rng)
            l = rng.normal(size=3)
            l -= (l @ n) * n
            theta = rng.uniform(-math.pi, math.pi)
            T = revolute_transform(n, l, theta)
            s = rng.normal()
            on_axis = l + s * n
            assert np.allclose(T.apply(on_axis), on_axis, atol=1e-9)

    def test_point_reflection_through_axis(self):
        T = revolute_transform((0.0, 0.0, 1.0), (1.0, 0.0, 0.0), math.pi)
        assert np.allclose(T.apply((0.0, 0.0, 0.0)), (2.0, 0.0, 0.0), atol=1e-12)

    def test_same_axis_composition(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            n = random_unit(rng)
            l = rng.normal(size=3)
            l -= (l @ n) * n
            t1, t2 = rng.uniform(-2, 2, size=2)
            lhs = revolute_transform(n, l, t1).compose(revolute_transform(n, l, t2))
            rhs = revolute_transform(n, l, t1 + t2)
            assert np.max(np.abs(lhs.matrix() - rhs.matrix())) < 1e-9

    def test_constraint_violation_rejected(self):
        with pytest.raises(InvalidParameterError):
            revolute_transform((0.0, 0.0, 1.0), (1.0, 0.0, 0.5), 0.1)


class TestAxisPointFromCircle:
    def test_direct_substitution(self):
        assert np.allclose(axis_point_from_circle((1.0, 2.0, 3.0), (0.0, 0.0, 1.0)),
                           (1.0, 2.0, 0.0))

    def test_already_orthogonal(self):
        c = np.array([0.3, -0.4, 0.0])
        assert np.allclose(axis_point_from_circle(c, (0.0, 0.0, 1.0)), c)

    def test_center_parallel_to_axis(self):
        assert np.allclose(axis_point_from_circle((0.0, 0.0, 5.0), (0.0, 0.0, 1.0)),
                           (0.0, 0.0, 0.0))

    def test_result_orthogonal_and_slide_invariant(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            n = random_unit(rng)
            c = rng.normal(size=3)
            l = axis_point_from_circle(c, n)
            assert abs(l @ n) < 1e-12
            s = rng.normal()
            assert np.allclose(axis_point_from_circle(c + s * n, n), l, atol=1e-12)


class TestJointModel:
    def test_inverse_composition_is_identity(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            if rng.random() < 0.5:
                joint = JointModel.prismatic(random_unit(rng))
            else:
                n = random_unit(rng)
                l = rng.normal(size=3)
                l -= (l @ n) * n
                joint = JointModel.revolute(n, l)
            m = rng.uniform(-1.5, 1.5)
            M = joint.transform(m).compose(joint.transform(-m)).matrix()
            assert np.max(np.abs(M - np.eye(4))) < 1e-9

    def test_json_round_trip(self):
        pj = JointModel.prismatic((0.0, 1.0, 0.0))
        assert JointModel.from_json_dict(json.loads(json.dumps(pj.to_json_dict()))).kind == "prismatic"
        rj = JointModel.revolute((0.0, 0.0, 1.0), (0.5, -0.2, 0.0))
        back = JointModel.from_json_dict(json.loads(json.dumps(rj.to_json_dict())))
        assert np.allclose(back.direction, rj.direction)
        assert np.allclose(back.axis_point, rj.axis_point)

    def test_revolute_requires_axis_point(self):
        with pytest.raises(InvalidParameterError):
            JointModel("revolute", np.array([0.0, 0.0, 1.0]))

    def test_near_unit_direction_is_repaired(self):
        joint = JointModel.prismatic((0.0, 0.0, 1.0 + 5e-7))
        assert abs(np.linalg.norm(joint.direction) - 1.0) < 1e-12

    def test_homogeneous_matrix_bottom_right_is_one(self):
        joint = JointModel.prismatic((1.0, 0.0, 0.0))
        assert joint.transform(0.3).matrix()[3, 3] == 1.0


class TestMotionSequence:
    def test_first_amount_must_be_zero(self):
        with pytest.raises(InvalidParameterError):
            MotionSequence(np.array([0.1, 0.2]))

    def test_basic_access(self):
        m = MotionSequence(np.array([0.0, -0.1, -0.2]))
        assert len(m) == 3
        assert m[2] == -0.2


class TestRigidTransform:
    def test_rejects_non_orthonormal_rotation(self):
        with pytest.raises(InvalidParameterError):
            RigidTransform(np.eye(3) * 1.001, np.zeros(3))

    def test_inverse(self):
        rng = np.random.default_rng(1)
        R = rodrigues(0.7, random_unit(rng))
        T = RigidTransform(R, rng.normal(size=3))
        assert np.max(np.abs(T.compose(T.inverse()).matrix() - np.eye(4))) < 1e-12
