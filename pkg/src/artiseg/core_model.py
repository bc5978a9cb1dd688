"""One-DoF joint models (prismatic / revolute) and the rigid transforms they induce.

Sign convention used throughout the package: the transform for motion amount
``m`` of frame ``i`` maps points observed in frame ``i`` back into the
configuration of frame 0.  Frame 0 is the gauge, so ``m[0] == 0`` always and
the physical displacement of the object at frame ``i`` is ``-m[i]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

PRISMATIC = "prismatic"
REVOLUTE = "revolute"

# Unit-length / orthogonality violations up to this are silently repaired;
# anything larger is treated as a caller bug.
UNIT_TOLERANCE = 1e-6


def as_vec3(value, name: str = "vector") -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,):
        raise InvalidParameterError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} must be finite")
    return arr


def normalize_unit(value, name: str = "direction") -> np.ndarray:
    """Return a unit copy of ``value``; reject vectors off unit length by > 1e-6."""
    arr = as_vec3(value, name)
    norm = float(np.linalg.norm(arr))
    if abs(norm - 1.0) > UNIT_TOLERANCE:
        raise InvalidParameterError(f"{name} must have unit length, |v| = {norm:.9f}")
    return arr / norm


def skew_matrix(v) -> np.ndarray:
    x, y, z = as_vec3(v, "axis")
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


@dataclass(frozen=True)
class RigidTransform:
    """A rotation-plus-translation map, p -> R p + t."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float)
        if R.shape != (3, 3) or t.shape != (3,):
            raise InvalidParameterError("rotation must be 3x3 and translation a 3-vector")
        if np.max(np.abs(R @ R.T - np.eye(3))) > 1e-9:
            raise InvalidParameterError("rotation matrix is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise InvalidParameterError("rotation matrix must have determinant +1")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            return self.rotation @ pts + self.translation
        return pts @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Return the transform equivalent to applying ``other`` first, then ``self``."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)

    def matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.translation
        return out


def prismatic_transform(direction, amount: float) -> RigidTransform:
    """Translation by ``amount`` along the unit slide direction."""
    d = normalize_unit(direction, "prismatic direction")
    return RigidTransform(np.eye(3), float(amount) * d)


def rodrigues(angle: float, axis) -> np.ndarray:
    """Rotation matrix for ``angle`` radians about the unit vector ``axis``."""
    n = normalize_unit(axis, "rotation axis")
    c = math.cos(angle)
    s = math.sin(angle)
    return c * np.eye(3) + (1.0 - c) * np.outer(n, n) + s * skew_matrix(n)


def project_to_orthogonal(point, direction) -> np.ndarray:
    p = as_vec3(point, "axis point")
    n = np.asarray(direction, dtype=float)
    return p - (p @ n) * n


def revolute_transform(axis_direction, axis_point, angle: float) -> RigidTransform:
    """Rotation by ``angle`` about the axis through ``axis_point`` along ``axis_direction``.

    Every point on the axis is a fixed point of the returned transform.
    """
    n = normalize_unit(axis_direction, "axis direction")
    l = as_vec3(axis_point, "axis point")
    if abs(float(n @ l)) > UNIT_TOLERANCE * (1.0 + np.linalg.norm(l)):
        raise InvalidParameterError("axis point must be orthogonal to the axis direction")
    l = project_to_orthogonal(l, n)
    R = rodrigues(angle, n)
    return RigidTransform(R, l - R @ l)


def axis_point_from_circle(center, axis_direction) -> np.ndarray:
    """Canonical axis point: the circle center projected onto the plane through the origin."""
    n = normalize_unit(axis_direction, "axis direction")
    c = as_vec3(center, "circle center")
    return c - (c @ n) * n


@dataclass(frozen=True)
class JointModel:
    """A 1-DoF articulation: slide direction, or rotation axis (direction + point)."""

    kind: str
    direction: np.ndarray
    axis_point: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (PRISMATIC, REVOLUTE):
            raise InvalidParameterError(f"unknown joint kind {self.kind!r}")
        d = normalize_unit(self.direction, "joint direction")
        d.setflags(write=False)
        object.__setattr__(self, "direction", d)
        if self.kind == REVOLUTE:
            if self.axis_point is None:
                raise InvalidParameterError("revolute joint requires an axis point")
            l = as_vec3(self.axis_point, "axis point")
            if abs(float(d @ l)) > UNIT_TOLERANCE * (1.0 + np.linalg.norm(l)):
                raise InvalidParameterError("axis point must be orthogonal to the axis direction")
            l = project_to_orthogonal(l, d)
            l.setflags(write=False)
            object.__setattr__(self, "axis_point", l)
        elif self.axis_point is not None:
            raise InvalidParameterError("prismatic joint takes no axis point")

    @classmethod
    def prismatic(cls, direction) -> "JointModel":
        return cls(PRISMATIC, np.asarray(direction, dtype=float))

    @classmethod
    def revolute(cls, axis_direction, axis_point) -> "JointModel":
        return cls(REVOLUTE, np.asarray(axis_direction, dtype=float),
                   np.asarray(axis_point, dtype=float))

    @property
    def is_prismatic(self) -> bool:
        return self.kind == PRISMATIC

    def transform(self, amount: float) -> RigidTransform:
        """Rigid transform for motion amount ``amount`` (meters or radians)."""
        if self.kind == PRISMATIC:
            return prismatic_transform(self.direction, amount)
        return revolute_transform(self.direction, self.axis_point, amount)

    def flipped(self) -> "JointModel":
        """Same physical joint with the direction vector negated."""
        if self.kind == PRISMATIC:
            return JointModel.prismatic(-self.direction)
        return JointModel.revolute(-self.direction, self.axis_point)

    def to_json_dict(self) -> dict:
        if self.kind == PRISMATIC:
            return {"type": PRISMATIC, "direction": [float(x) for x in self.direction]}
        return {
            "type": REVOLUTE,
            "axis_direction": [float(x) for x in self.direction],
            "axis_point": [float(x) for x in self.axis_point],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "JointModel":
        kind = data.get("type")
        if kind == PRISMATIC:
            return cls.prismatic(data["direction"])
        if kind == REVOLUTE:
            return cls.revolute(data["axis_direction"], data["axis_point"])
        raise InvalidParameterError(f"unknown joint type {kind!r}")


@dataclass(frozen=True)
class MotionSequence:
    """Per-frame motion amounts, one scalar per frame, with frame 0 pinned to zero."""

    amounts: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        arr = np.asarray(self.amounts, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise InvalidParameterError("motion amounts must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise InvalidParameterError("motion amounts must be finite")
        if arr[0] != 0.0:
            raise InvalidParameterError("the first frame's motion amount must be exactly zero")
        arr.setflags(write=False)
        object.__setattr__(self, "amounts", arr)

    def __len__(self) -> int:
        return int(self.amounts.size)

    def __getitem__(self, index) -> float:
        return float(self.amounts[index])

    def as_array(self) -> np.ndarray:
        return np.array(self.amounts)
