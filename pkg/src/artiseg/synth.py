"""Synthetic articulated scenes: the ground-truth oracle for the whole pipeline.

Depth images are produced by analytic ray casting against rectangles, discs
and oriented boxes (z-buffer).  The object is posed by the true articulation
transform at each frame, a hand blob rides rigidly on it, and hand keypoints
are the projections of 3-D joints attached to the blob's front face.  The
generator emits exactly the ingestion file formats plus per-pixel labels and
a truth record, and is bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .core_model import JointModel, RigidTransform, rodrigues
from .errors import GenerationError, InputFormatError, InvalidParameterError
from .formats import (
    save_depth,
    save_intrinsics,
    save_keypoints,
    save_labels_png,
    save_mask_png,
    write_json_atomic,
)
from .ingest import CameraIntrinsics, HandObservation, backproject, project

LABEL_BACKGROUND = 0
LABEL_OBJECT = 1
LABEL_HAND = 2

_EPS = 1e-9


@dataclass(frozen=True)
class RectPatch:
    center: np.ndarray
    axis_u: np.ndarray
    axis_v: np.ndarray
    half_u: float
    half_v: float

    def transformed(self, T: RigidTransform) -> "RectPatch":
        return RectPatch(T.apply(self.center), T.rotation @ self.axis_u,
                         T.rotation @ self.axis_v, self.half_u, self.half_v)

    def to_json_dict(self):
        return {"kind": "rect", "center": list(map(float, self.center)),
                "axis_u": list(map(float, self.axis_u)),
                "axis_v": list(map(float, self.axis_v)),
                "half_u": float(self.half_u), "half_v": float(self.half_v)}


@dataclass(frozen=True)
class Disc:
    center: np.ndarray
    normal: np.ndarray
    radius: float

    def transformed(self, T: RigidTransform) -> "Disc":
        return Disc(T.apply(self.center), T.rotation @ self.normal, self.radius)

    def to_json_dict(self):
        return {"kind": "disc", "center": list(map(float, self.center)),
                "normal": list(map(float, self.normal)), "radius": float(self.radius)}


@dataclass(frozen=True)
class Box:
    center: np.ndarray
    axes: np.ndarray       # rows are the box axis directions
    half_sizes: np.ndarray

    def transformed(self, T: RigidTransform) -> "Box":
        return Box(T.apply(self.center), self.axes @ T.rotation.T, self.half_sizes)

    def to_json_dict(self):
        return {"kind": "box", "center": list(map(float, self.center)),
                "axes": [list(map(float, row)) for row in self.axes],
                "half_sizes": list(map(float, self.half_sizes))}


def primitive_from_json(data: dict):
    kind = data.get("kind")
    if kind == "rect":
        return RectPatch(np.asarray(data["center"], dtype=float),
                         np.asarray(data["axis_u"], dtype=float),
                         np.asarray(data["axis_v"], dtype=float),
                         float(data["half_u"]), float(data["half_v"]))
    if kind == "disc":
        return Disc(np.asarray(data["center"], dtype=float),
                    np.asarray(data["normal"], dtype=float), float(data["radius"]))
    if kind == "box":
        return Box(np.asarray(data["center"], dtype=float),
                   np.asarray(data["axes"], dtype=float),
                   np.asarray(data["half_sizes"], dtype=float))
    raise InputFormatError(f"unknown geometry kind {kind!r}")


def _ray_dirs(intrinsics: CameraIntrinsics) -> np.ndarray:
    us = np.arange(intrinsics.width)
    vs = np.arange(intrinsics.height)
    uu, vv = np.meshgrid(us, vs)
    x = (uu - intrinsics.cx) / intrinsics.fx
    y = (vv - intrinsics.cy) / intrinsics.fy
    return np.stack([x, y, np.ones_like(x)], axis=-1).reshape(-1, 3)


def _ray_plane_patch(dirs, center, axis_u, axis_v, half_u, half_v, radius=None):
    normal = np.cross(axis_u, axis_v)
    normal = normal / np.linalg.norm(normal)
    denom = dirs @ normal
    num = float(center @ normal)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t = np.where(np.abs(denom) < _EPS, np.inf, num / denom)
        hit = dirs * t[:, None] - center
        if radius is None:
            a = hit @ (axis_u / np.linalg.norm(axis_u))
            b = hit @ (axis_v / np.linalg.norm(axis_v))
            inside = (np.abs(a) <= half_u) & (np.abs(b) <= half_v)
        else:
            inside = np.einsum("ij,ij->i", hit, hit) <= radius * radius
    return np.where(inside & (t > _EPS), t, np.inf)


def _ray_box(dirs, box: Box):
    o = -box.axes @ box.center          # camera origin in box coordinates
    d = dirs @ box.axes.T
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
    t1 = (-box.half_sizes - o) * inv
    t2 = (box.half_sizes - o) * inv
    t_low = np.fmin(t1, t2)
    t_high = np.fmax(t1, t2)
    # rays parallel to a slab: hit only if the origin is inside that slab
    parallel = np.abs(d) < _EPS
    outside = parallel & (np.abs(o) > box.half_sizes)
    t_low = np.where(parallel, -np.inf, t_low)
    t_high = np.where(parallel, np.inf, t_high)
    enter = np.max(t_low, axis=1)
    exit_ = np.min(t_high, axis=1)
    ok = (enter <= exit_) & (exit_ > _EPS) & ~outside.any(axis=1)
    return np.where(ok, np.where(enter > _EPS, enter, np.inf), np.inf)


def _cast(primitive, dirs):
    if isinstance(primitive, RectPatch):
        return _ray_plane_patch(dirs, primitive.center, primitive.axis_u,
                                primitive.axis_v, primitive.half_u, primitive.half_v)
    if isinstance(primitive, Disc):
        u = _orthogonal_unit(primitive.normal)
        return _ray_plane_patch(dirs, primitive.center, u,
                                np.cross(primitive.normal, u), 0.0, 0.0,
                                radius=primitive.radius)
    if isinstance(primitive, Box):
        return _ray_box(dirs, primitive)
    raise InvalidParameterError(f"unsupported primitive {type(primitive).__name__}")


def _orthogonal_unit(n):
    helper = np.zeros(3)
    helper[int(np.argmin(np.abs(n)))] = 1.0
    u = np.cross(n, helper)
    return u / np.linalg.norm(u)


def render(primitives_with_labels, intrinsics: CameraIntrinsics):
    """Z-buffer over the primitives; returns (depth, label arrays)."""
    dirs = _ray_dirs(intrinsics)
    n = dirs.shape[0]
    depth = np.full(n, np.inf)
    label = np.full(n, LABEL_BACKGROUND, dtype=np.uint8)
    for primitive, lab in primitives_with_labels:
        t = _cast(primitive, dirs)
        closer = t < depth
        depth[closer] = t[closer]
        label[closer] = lab
    depth[~np.isfinite(depth)] = np.nan
    shape = (intrinsics.height, intrinsics.width)
    return depth.reshape(shape), label.reshape(shape)


def default_hand_offsets() -> np.ndarray:
    """21 joint offsets laid out as a 7x3 grid on the blob's front face.

    The grid stays well inside the blob extent so keypoint jitter of a few
    pixels keeps the depth-lookup windows on the hand.
    """
    xs = np.linspace(-0.032, 0.032, 7)
    ys = np.linspace(-0.018, 0.018, 3)
    grid = [(x, y, 0.0) for y in ys for x in xs]
    return np.asarray(grid)


@dataclass(frozen=True)
class HandSpec:
    """Hand rigidly attached to the object at ``contact_point``.

    The blob is a small box whose front face (toward the camera) carries the
    keypoint grid, so noiseless depth lookups recover the joints exactly.
    """

    contact_point: np.ndarray
    blob_half_sizes: np.ndarray = field(default_factory=lambda: np.array([0.075, 0.05, 0.03]))
    joint_offsets_2d: np.ndarray = field(default_factory=default_hand_offsets)
    confidence_range: tuple = (0.6, 1.0)
    render_blob: bool = True

    def __post_init__(self):
        object.__setattr__(self, "contact_point",
                           np.asarray(self.contact_point, dtype=float))

    def joints_local(self) -> np.ndarray:
        offsets = np.asarray(self.joint_offsets_2d, dtype=float)
        out = offsets.copy()
        out[:, 2] -= float(self.blob_half_sizes[2])  # on the front face
        return out

    def to_json_dict(self):
        return {"contact_point": list(map(float, self.contact_point)),
                "blob_half_sizes": list(map(float, self.blob_half_sizes)),
                "joint_offsets": [list(map(float, row)) for row in self.joint_offsets_2d],
                "confidence_range": [float(self.confidence_range[0]),
                                     float(self.confidence_range[1])],
                "render_blob": bool(self.render_blob)}

    @classmethod
    def from_json_dict(cls, data):
        return cls(contact_point=np.asarray(data["contact_point"], dtype=float),
                   blob_half_sizes=np.asarray(data.get("blob_half_sizes", [0.06, 0.035, 0.03]), dtype=float),
                   joint_offsets_2d=np.asarray(data.get("joint_offsets", default_hand_offsets()), dtype=float),
                   confidence_range=tuple(data.get("confidence_range", (0.6, 1.0))),
                   render_blob=bool(data.get("render_blob", True)))


@dataclass(frozen=True)
class NoiseSpec:
    depth_sigma: float = 0.0
    hand_sigma_2d: float = 0.0
    dropout_rate: float = 0.0

    def to_json_dict(self):
        return {"depth_sigma": float(self.depth_sigma),
                "hand_sigma_2d": float(self.hand_sigma_2d),
                "dropout_rate": float(self.dropout_rate)}

    @classmethod
    def from_json_dict(cls, data):
        return cls(depth_sigma=float(data.get("depth_sigma", 0.0)),
                   hand_sigma_2d=float(data.get("hand_sigma_2d", 0.0)),
                   dropout_rate=float(data.get("dropout_rate", 0.0)))


@dataclass(frozen=True)
class SceneSpec:
    """Complete description of a synthetic manipulation capture."""

    joint: JointModel
    motion_schedule: np.ndarray          # physical displacement per frame, [0] = 0
    object_parts: list
    background_parts: list
    hand: HandSpec
    intrinsics: CameraIntrinsics
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0
    depth_format: str = "png"

    def __post_init__(self):
        schedule = np.asarray(self.motion_schedule, dtype=float)
        if schedule.size < 1 or schedule[0] != 0.0:
            raise InvalidParameterError("motion_schedule must start at exactly 0")
        schedule.setflags(write=False)
        object.__setattr__(self, "motion_schedule", schedule)
        if self.depth_format not in ("png", "dbin"):
            raise InvalidParameterError("depth_format must be 'png' or 'dbin'")
        if not self.object_parts:
            raise InvalidParameterError("at least one object primitive is required")

    def to_json_dict(self):
        return {
            "joint": self.joint.to_json_dict(),
            "motion_schedule": [float(s) for s in self.motion_schedule],
            "object_geometry": [p.to_json_dict() for p in self.object_parts],
            "background_geometry": [p.to_json_dict() for p in self.background_parts],
            "hand": self.hand.to_json_dict(),
            "intrinsics": self.intrinsics.to_json_dict(),
            "noise": self.noise.to_json_dict(),
            "seed": int(self.seed),
            "depth_format": self.depth_format,
        }

    @classmethod
    def from_json_dict(cls, data):
        try:
            return cls(
                joint=JointModel.from_json_dict(data["joint"]),
                motion_schedule=np.asarray(data["motion_schedule"], dtype=float),
                object_parts=[primitive_from_json(p) for p in data["object_geometry"]],
                background_parts=[primitive_from_json(p) for p in data.get("background_geometry", [])],
                hand=HandSpec.from_json_dict(data["hand"]),
                intrinsics=CameraIntrinsics.from_json_dict(data["intrinsics"]),
                noise=NoiseSpec.from_json_dict(data.get("noise", {})),
                seed=int(data.get("seed", 0)),
                depth_format=data.get("depth_format", "png"),
            )
        except KeyError as exc:
            raise InputFormatError(f"scene spec missing key {exc}") from exc


@dataclass(frozen=True)
class FrameData:
    depth: np.ndarray
    labels: np.ndarray
    mask: np.ndarray
    keypoints: HandObservation


@dataclass(frozen=True)
class GroundTruth:
    joint: JointModel
    motion_schedule: np.ndarray
    intrinsics: CameraIntrinsics
    frame0_depth: np.ndarray
    frame0_labels: np.ndarray


@dataclass(frozen=True)
class GeneratedScene:
    spec: SceneSpec
    background_depth: np.ndarray
    frames: list
    truth: GroundTruth
    directory: Path | None = None


def generate_scene(spec: SceneSpec, out_dir=None) -> GeneratedScene:
    """Render the scene; optionally write the ingestion file tree plus truth.json."""
    rng = np.random.default_rng(spec.seed)
    intr = spec.intrinsics

    def add_noise(depth):
        if spec.noise.depth_sigma <= 0:
            return depth
        noisy = depth + rng.normal(0.0, spec.noise.depth_sigma, depth.shape)
        return np.where(np.isfinite(depth), noisy, np.nan)

    bg_depth, _ = render([(p, LABEL_BACKGROUND) for p in spec.background_parts], intr)
    bg_depth = add_noise(bg_depth)

    blob_axes = np.eye(3)
    joints_local = spec.hand.joints_local()
    n_joints = joints_local.shape[0]
    frames = []
    for i, displacement in enumerate(spec.motion_schedule):
        T = spec.joint.transform(float(displacement))
        prims = [(p, LABEL_BACKGROUND) for p in spec.background_parts]
        prims += [(p.transformed(T), LABEL_OBJECT) for p in spec.object_parts]
        if spec.hand.render_blob:
            blob = Box(np.asarray(spec.hand.contact_point, dtype=float), blob_axes,
                       np.asarray(spec.hand.blob_half_sizes, dtype=float))
            prims.append((blob.transformed(T), LABEL_HAND))
        depth, labels = render(prims, intr)
        if not (labels == LABEL_OBJECT).any():
            raise GenerationError(f"object not visible in frame {i}")
        depth = add_noise(depth)
        joints_3d = T.apply(np.asarray(spec.hand.contact_point, dtype=float) + joints_local)
        uv, z = project(joints_3d, intr)
        if np.any(z <= 0):
            raise GenerationError(f"hand joints behind the camera in frame {i}")
        confidences = rng.uniform(spec.hand.confidence_range[0],
                                  spec.hand.confidence_range[1], n_joints)
        dropped = rng.random(n_joints) < spec.noise.dropout_rate
        confidences[dropped] = 0.0
        if spec.noise.hand_sigma_2d > 0:
            uv = uv + rng.normal(0.0, spec.noise.hand_sigma_2d, uv.shape)
        keypoints = HandObservation(frame_index=i, joints_2d=uv,
                                    confidences=np.clip(confidences, 0.0, 1.0))
        frames.append(FrameData(depth=depth, labels=labels,
                                mask=(labels == LABEL_HAND), keypoints=keypoints))

    truth = GroundTruth(joint=spec.joint, motion_schedule=spec.motion_schedule,
                        intrinsics=intr, frame0_depth=frames[0].depth,
                        frame0_labels=frames[0].labels)
    directory = None
    if out_dir is not None:
        directory = Path(out_dir)
        _write_scene(spec, bg_depth, frames, directory)
    return GeneratedScene(spec=spec, background_depth=bg_depth, frames=frames,
                          truth=truth, directory=directory)


def _write_scene(spec: SceneSpec, bg_depth, frames, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    frames_dir = directory / "frames"
    frames_dir.mkdir(exist_ok=True)
    ext = spec.depth_format
    save_intrinsics(directory / "intrinsics.json", spec.intrinsics)
    save_depth(directory / f"background_depth.{ext}", bg_depth)
    frame_files = []
    for i, frame in enumerate(frames):
        names = {
            "depth": f"frames/frame_{i:03d}_depth.{ext}",
            "keypoints": f"frames/frame_{i:03d}_keypoints.json",
            "mask": f"frames/frame_{i:03d}_mask.png",
            "labels": f"frames/frame_{i:03d}_labels.png",
        }
        save_depth(directory / names["depth"], frame.depth)
        save_keypoints(directory / names["keypoints"], frame.keypoints)
        save_mask_png(directory / names["mask"], frame.mask)
        save_labels_png(directory / names["labels"], frame.labels)
        frame_files.append(names)
    write_json_atomic(directory / "truth.json", {
        "joint": spec.joint.to_json_dict(),
        "motion_schedule": [float(s) for s in spec.motion_schedule],
        "intrinsics": spec.intrinsics.to_json_dict(),
        "files": {"background_depth": f"background_depth.{ext}", "frames": frame_files},
    })
    write_json_atomic(directory / "scene_spec.json", spec.to_json_dict())


def load_truth(path) -> GroundTruth:
    """Load a truth.json written by generate_scene."""
    from .formats import load_depth, load_labels_png, _read_json

    path = Path(path)
    data = _read_json(path)
    base = path.parent
    try:
        joint = JointModel.from_json_dict(data["joint"])
        schedule = np.asarray(data["motion_schedule"], dtype=float)
        intr = CameraIntrinsics.from_json_dict(data["intrinsics"])
        frame0 = data["files"]["frames"][0]
    except (KeyError, IndexError, TypeError) as exc:
        raise InputFormatError(f"malformed truth file {path}: {exc}") from exc
    return GroundTruth(joint=joint, motion_schedule=schedule, intrinsics=intr,
                       frame0_depth=load_depth(base / frame0["depth"]),
                       frame0_labels=load_labels_png(base / frame0["labels"]))


def line_line_distance(point_a, dir_a, point_b, dir_b) -> float:
    """Closest distance between two 3-D lines (handles the parallel case)."""
    n = np.cross(dir_a, dir_b)
    norm = np.linalg.norm(n)
    w = np.asarray(point_b, dtype=float) - np.asarray(point_a, dtype=float)
    if norm < 1e-9:
        return float(np.linalg.norm(w - (w @ dir_a) * np.asarray(dir_a)))
    return float(abs(w @ (n / norm)))


def evaluate(joint: JointModel, motions, truth: GroundTruth,
             reference_points=None, reference_labels=None,
             match_tolerance: float = 0.015) -> dict:
    """Error metrics of an estimate against the scene ground truth.

    A joint-type mismatch is reported as a metric, not an error.  The
    segmentation IoU is computed on the frame-0 analysis cloud: a reference
    point counts as true-object when it lies within ``match_tolerance`` of a
    backprojected ground-truth object pixel.
    """
    metrics = {
        "estimated_type": joint.kind,
        "true_type": truth.joint.kind,
        "classification_correct": bool(joint.kind == truth.joint.kind),
    }
    if not metrics["classification_correct"]:
        return metrics
    dot = float(np.clip(joint.direction @ truth.joint.direction, -1.0, 1.0))
    metrics["direction_error_deg"] = math.degrees(math.acos(abs(dot)))
    sign = 1.0 if dot >= 0.0 else -1.0
    m = motions.as_array() if hasattr(motions, "as_array") else np.asarray(motions, dtype=float)
    true_m = -truth.motion_schedule
    if m.shape == true_m.shape:
        metrics["motion_rmse"] = float(np.sqrt(np.mean((m - sign * true_m) ** 2)))
    if joint.kind == "revolute":
        metrics["axis_distance_m"] = line_line_distance(
            joint.axis_point, joint.direction,
            truth.joint.axis_point, truth.joint.direction)
    if reference_points is not None and reference_labels is not None:
        object_pixels = backproject(truth.frame0_depth, truth.intrinsics,
                                    keep_mask=(truth.frame0_labels == LABEL_OBJECT))
        ref = np.asarray(reference_points, dtype=float)
        pred = np.asarray(reference_labels, dtype=bool)
        if len(object_pixels) and ref.shape[0]:
            d, _ = cKDTree(object_pixels.points).query(ref)
            actual = d <= match_tolerance
            union = np.sum(pred | actual)
            metrics["segmentation_iou"] = (float(np.sum(pred & actual) / union)
                                           if union else 0.0)
        else:
            metrics["segmentation_iou"] = 0.0
    return metrics


# ---------------------------------------------------------------------------
# Canonical example scenes (desk scale).  Geometry is authored in a world
# frame (x right, y down, z forward, floor at y = 0) and mapped into camera
# coordinates through a simple tripod pose, which keeps floors away from
# grazing incidence.
# ---------------------------------------------------------------------------


def _camera_pose(height: float, pitch_deg: float) -> RigidTransform:
    """World-to-camera map for a camera ``height`` above the floor, pitched down.

    World frame: x right, y down, z forward, floor at y = 0.  A positive pitch
    tilts the optical axis toward the floor.
    """
    R = rodrigues(math.radians(pitch_deg), (1.0, 0.0, 0.0))
    position = np.array([0.0, -height, 0.0])
    return RigidTransform(R, -R @ position)


def _to_camera(spec_parts, T: RigidTransform):
    return [p.transformed(T) for p in spec_parts]


def default_intrinsics(width=224, height=168, focal=210.0) -> CameraIntrinsics:
    return CameraIntrinsics(fx=focal, fy=focal, cx=(width - 1) / 2.0,
                            cy=(height - 1) / 2.0, width=width, height=height)


def drawer_scene_spec(seed=0, noise: NoiseSpec | None = None, pull=0.30,
                      n_frames=10, intrinsics: CameraIntrinsics | None = None) -> SceneSpec:
    """A box-shaped drawer pulled out along its own depth axis, camera on a tripod."""
    intr = intrinsics or default_intrinsics()
    cam = _camera_pose(height=0.85, pitch_deg=22.0)
    slide_world = np.array([-0.10, -0.18, -0.97])
    slide_world /= np.linalg.norm(slide_world)
    e1 = _orthogonal_unit(slide_world)
    e2 = np.cross(slide_world, e1)
    axes_world = np.vstack([e1, e2, slide_world])
    center_world = np.array([0.05, -0.45, 1.55])
    drawer = Box(center_world, axes_world, np.array([0.16, 0.11, 0.13]))
    floor = RectPatch(np.array([0.0, 0.0, 1.45]), np.array([1.0, 0.0, 0.0]),
                      np.array([0.0, 0.0, 1.0]), 1.0, 0.75)
    wall = RectPatch(np.array([0.0, -0.6, 2.1]), np.array([1.0, 0.0, 0.0]),
                     np.array([0.0, 1.0, 0.0]), 1.0, 0.75)
    # hand grabs the middle of the front face: jittered keypoints that slip
    # off the blob still land on the face rather than on distant background
    contact_world = center_world + 0.13 * slide_world
    joint_cam = JointModel.prismatic(cam.rotation @ slide_world)
    return SceneSpec(
        joint=joint_cam,
        motion_schedule=np.linspace(0.0, pull, n_frames),
        object_parts=_to_camera([drawer], cam),
        background_parts=_to_camera([floor, wall], cam),
        hand=HandSpec(contact_point=cam.apply(contact_world)),
        intrinsics=intr,
        noise=noise or NoiseSpec(),
        seed=seed,
    )


def door_scene_spec(seed=0, noise: NoiseSpec | None = None, swing_deg=60.0,
                    n_frames=10, floor_disc=False,
                    intrinsics: CameraIntrinsics | None = None) -> SceneSpec:
    """A door panel swinging about a vertical hinge; optionally a floor disc
    centered on the axis (the classic ambiguous symmetric region)."""
    intr = intrinsics or default_intrinsics()
    cam = _camera_pose(height=0.95, pitch_deg=26.0)
    axis_dir_world = np.array([0.0, -1.0, 0.0])
    axis_foot_world = np.array([-0.28, 0.0, 1.62])   # where the axis meets the floor
    yaw0 = math.radians(-26.0)
    panel_dir = np.array([math.cos(yaw0), 0.0, math.sin(yaw0)])
    width, height_p, thickness = 0.46, 0.72, 0.036
    center_world = (axis_foot_world + 0.5 * width * panel_dir
                    + np.array([0.0, -0.12 - height_p / 2.0, 0.0]))
    normal_dir = np.cross(panel_dir, axis_dir_world)
    axes_world = np.vstack([panel_dir, axis_dir_world, normal_dir])
    panel = Box(center_world, axes_world,
                np.array([width / 2.0, height_p / 2.0, thickness / 2.0]))
    # normal_dir points toward the camera at the initial yaw; the hand blob
    # floats just in front of the panel surface, inboard of the swinging edge
    # so jittered keypoints still land on hand or panel rather than empty space
    contact_world = (axis_foot_world + 0.72 * width * panel_dir
                     + np.array([0.0, -0.12 - height_p / 2.0, 0.0])
                     + (thickness / 2.0 + 0.04) * normal_dir)
    background = []
    if floor_disc:
        background.append(Disc(axis_foot_world, np.array([0.0, -1.0, 0.0]), 0.55))
    else:
        background.append(RectPatch(np.array([0.0, 0.0, 1.55]), np.array([1.0, 0.0, 0.0]),
                                    np.array([0.0, 0.0, 1.0]), 1.0, 0.8))
        background.append(RectPatch(np.array([0.0, -0.6, 2.35]), np.array([1.0, 0.0, 0.0]),
                                    np.array([0.0, 1.0, 0.0]), 1.1, 0.8))
    axis_point_world = axis_foot_world  # on the axis; canonicalized by JointModel
    axis_dir_cam = cam.rotation @ axis_dir_world
    axis_point_cam = cam.apply(axis_point_world)
    axis_point_cam -= (axis_point_cam @ axis_dir_cam) * axis_dir_cam
    joint_cam = JointModel.revolute(axis_dir_cam, axis_point_cam)
    return SceneSpec(
        joint=joint_cam,
        motion_schedule=np.linspace(0.0, math.radians(swing_deg), n_frames),
        object_parts=_to_camera([panel], cam),
        background_parts=_to_camera(background, cam),
        hand=HandSpec(contact_point=cam.apply(contact_world)),
        intrinsics=intr,
        noise=noise or NoiseSpec(),
        seed=seed,
    )


def flat_panel_scene_spec(seed=0, noise: NoiseSpec | None = None, pull=0.22,
                          n_frames=10, intrinsics: CameraIntrinsics | None = None) -> SceneSpec:
    """A featureless plane that fills the whole view, sliding along its normal.

    With the panel extending past the frustum there is no boundary evidence,
    so the in-plane components of the slide direction are unobservable from
    geometry alone; only the hand constrains them.
    """
    intr = intrinsics or default_intrinsics()
    panel = Box(np.array([0.0, 0.0, 1.16]), np.eye(3), np.array([1.1, 0.85, 0.01]))
    wall = RectPatch(np.array([0.0, 0.0, 1.9]), np.array([1.0, 0.0, 0.0]),
                     np.array([0.0, 1.0, 0.0]), 1.6, 1.2)
    contact = np.array([0.12, 0.06, 1.15])
    return SceneSpec(
        joint=JointModel.prismatic(np.array([0.0, 0.0, -1.0])),
        motion_schedule=np.linspace(0.0, pull, n_frames),
        object_parts=[panel],
        background_parts=[wall],
        hand=HandSpec(contact_point=contact),
        intrinsics=intr,
        noise=noise or NoiseSpec(),
        seed=seed,
    )
