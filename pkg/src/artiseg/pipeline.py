"""End-to-end estimation pipeline: ingest -> trajectory fit -> constrained ICP
-> segmentation -> refinement loop, plus the on-disk result layout."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .alignment import AlignmentConfig, optimize_constrained_icp
from .core_model import JointModel, MotionSequence
from .errors import InputFormatError
from .formats import (
    atomic_write_bytes,
    load_depth,
    load_intrinsics,
    load_keypoints,
    load_mask_png,
    write_json_atomic,
)
from .ingest import (
    CameraIntrinsics,
    backproject,
    estimate_normals,
    hand_centroid_3d,
    remove_static,
    subsample_frames,
    voxel_downsample,
)
from .ply import write_ply
from .refinement import RefinementConfig, run_refinement_loop
from .segmentation import SegmentationConfig, SegmentationResult
from .trajectory_fit import (
    RansacConfig,
    classify_joint,
    fit_to_json_dict,
    initial_motions,
)

log = logging.getLogger("artiseg")

WORKERS_ENV = "ARTISEG_WORKERS"


def _workers_from_env(default: int = -1) -> int:
    value = os.environ.get(WORKERS_ENV)
    if not value:
        return default
    try:
        return int(value)
    except ValueError:
        raise InputFormatError(f"{WORKERS_ENV} must be an integer, got {value!r}")


@dataclass(frozen=True)
class PipelineConfig:
    """Aggregated settings; the defaults are the documented recommended profile."""

    use_background: bool = True
    static_threshold: float = 0.02
    voxel_size: float = 0.01
    normal_neighbors: int = 16
    max_frames: int = 15
    hand_window_radius: int = 2
    hand_min_confidence: float = 0.1
    angle_threshold_deg: float = 30.0
    ransac: RansacConfig = field(default_factory=RansacConfig)
    alignment: AlignmentConfig = field(default_factory=AlignmentConfig)
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    refinement: RefinementConfig = field(default_factory=RefinementConfig)

    @classmethod
    def from_json_dict(cls, data: dict) -> "PipelineConfig":
        """Parse-then-validate; unknown keys anywhere are rejected."""
        def build(dc_type, payload, path):
            if not isinstance(payload, dict):
                raise InputFormatError(f"config section {path} must be an object")
            names = {f.name: f for f in dataclasses.fields(dc_type)}
            unknown = set(payload) - set(names)
            if unknown:
                raise InputFormatError(
                    f"unknown config key(s) {sorted(unknown)} in {path}")
            kwargs = {}
            for key, value in payload.items():
                f = names[key]
                if dataclasses.is_dataclass(f.type) or f.name in (
                        "ransac", "alignment", "segmentation", "refinement", "icp"):
                    sub_type = {"ransac": RansacConfig, "alignment": AlignmentConfig,
                                "segmentation": SegmentationConfig,
                                "refinement": RefinementConfig,
                                "icp": AlignmentConfig}[f.name]
                    kwargs[key] = build(sub_type, value, f"{path}.{key}")
                else:
                    kwargs[key] = value
            try:
                return dc_type(**kwargs)
            except TypeError as exc:
                raise InputFormatError(f"bad config section {path}: {exc}") from exc
        return build(cls, data, "config")

    @classmethod
    def from_json_file(cls, path) -> "PipelineConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except FileNotFoundError as exc:
            raise InputFormatError(f"missing config file: {path}") from exc
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"invalid config JSON: {exc}") from exc
        return cls.from_json_dict(data)

    def to_json_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self), default=_json_default))


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


_FRAME_RE = re.compile(r"frame_(\d+)_depth\.(png|dbin)$")


@dataclass(frozen=True)
class FrameInput:
    index: int
    depth_path: Path
    keypoints_path: Path
    mask_path: Path | None


@dataclass(frozen=True)
class SceneInputs:
    intrinsics: CameraIntrinsics
    background_path: Path
    frames: list


def discover_inputs(input_dir) -> SceneInputs:
    """Locate the intrinsics, background depth and per-frame files."""
    base = Path(input_dir)
    if not base.is_dir():
        raise InputFormatError(f"input directory not found: {base}")
    intr = load_intrinsics(base / "intrinsics.json")
    background = None
    for ext in ("png", "dbin"):
        candidate = base / f"background_depth.{ext}"
        if candidate.exists():
            background = candidate
            break
    if background is None:
        raise InputFormatError(f"no background_depth.png/.dbin in {base}")
    frames_dir = base / "frames"
    if not frames_dir.is_dir():
        raise InputFormatError(f"no frames/ directory in {base}")
    found = {}
    for path in sorted(frames_dir.iterdir()):
        match = _FRAME_RE.match(path.name)
        if match:
            found[int(match.group(1))] = path
    if len(found) < 2:
        raise InputFormatError(
            f"a manipulation sequence needs at least 2 frames, found {len(found)}")
    frames = []
    for index in sorted(found):
        depth_path = found[index]
        keypoints_path = frames_dir / f"frame_{index:03d}_keypoints.json"
        if not keypoints_path.exists():
            raise InputFormatError(f"missing keypoint file for frame {index}: "
                                   f"{keypoints_path.name}")
        mask_path = frames_dir / f"frame_{index:03d}_mask.png"
        frames.append(FrameInput(index=index, depth_path=depth_path,
                                 keypoints_path=keypoints_path,
                                 mask_path=mask_path if mask_path.exists() else None))
    return SceneInputs(intrinsics=intr, background_path=background, frames=frames)


@dataclass(frozen=True)
class EstimationResult:
    joint: JointModel
    motions: MotionSequence
    motion_range: tuple
    segmentation: SegmentationResult
    frame_indices: list
    result_dict: dict
    out_dir: Path | None
    clouds: list = field(default_factory=list)   # downsampled analysis clouds
    hands: list = field(default_factory=list)


def _iteration_dicts(iterations, stage: str):
    return [{
        "stage": stage,
        "iter": int(it.index),
        "cost_start": float(it.cost_start),
        "cost": float(it.cost),
        "num_correspondences": int(it.num_correspondences),
        "joint": it.joint.to_json_dict(),
        "motions": [float(v) for v in it.motions],
    } for it in iterations]


def ingest_scene(input_dir, config: PipelineConfig | None = None):
    """Load, clean, subsample and downsample a capture directory.

    Returns (clouds, hands): the per-frame analysis clouds (frame 0 carrying
    normals) and the matching hand observations with 3-D data filled in.
    """
    config = config or PipelineConfig()
    inputs = discover_inputs(input_dir)
    intr = inputs.intrinsics
    background = load_depth(inputs.background_path) if config.use_background else None
    sequence = []
    for frame_input in inputs.frames:
        depth = load_depth(frame_input.depth_path)
        obs = load_keypoints(frame_input.keypoints_path)
        obs = hand_centroid_3d(obs, depth, intr,
                               window_radius=config.hand_window_radius,
                               min_confidence=config.hand_min_confidence)
        if background is not None:
            keep = remove_static(depth, background, config.static_threshold)
        else:
            keep = np.isfinite(depth) & (depth > 0.0)
        if frame_input.mask_path is not None:
            keep &= ~load_mask_png(frame_input.mask_path)
        cloud = backproject(depth, intr, keep_mask=keep, frame_index=frame_input.index)
        sequence.append((cloud, obs))
    retained = subsample_frames(sequence, max_frames=config.max_frames)
    clouds = []
    hands = []
    for cloud, obs in retained:
        clouds.append(voxel_downsample(cloud, config.voxel_size))
        hands.append(obs)
    if len(clouds) < 2:
        raise InputFormatError("fewer than 2 usable frames after subsampling")
    clouds[0] = estimate_normals(clouds[0], k=config.normal_neighbors)
    return clouds, hands


def run_estimation(input_dir, config: PipelineConfig | None = None, out_dir=None,
                   dump_diagnostics: bool = False) -> EstimationResult:
    """Run the full estimation pipeline on an input directory.

    Writes result.json, the segmentation PLY exports and the label index to
    ``out_dir`` (defaults to ``<input_dir>/result``); all output files are
    written atomically and are byte-stable across reruns.
    """
    config = config or PipelineConfig()
    workers = _workers_from_env()
    t0 = time.perf_counter()
    clouds, hands = ingest_scene(input_dir, config)
    log.info("ingested %d frames (%s points) in %.2fs",
             len(clouds), [len(c) for c in clouds], time.perf_counter() - t0)

    t2 = time.perf_counter()
    trajectory = np.array([obs.centroid_3d for obs in hands])
    joint0, fit = classify_joint(trajectory, config.ransac,
                                 math.radians(config.angle_threshold_deg))
    motions0 = initial_motions(joint0, trajectory, fit)
    log.info("initial estimate: %s in %.2fs", joint0.kind, time.perf_counter() - t2)

    t3 = time.perf_counter()
    align_cfg = dataclasses.replace(config.alignment, workers=workers)
    icp = optimize_constrained_icp(clouds, hands, (joint0, motions0), align_cfg)
    log.info("constrained ICP cost %.6g after %d iterations in %.2fs",
             icp.final_cost, len(icp.iterations), time.perf_counter() - t3)

    t4 = time.perf_counter()
    seg_cfg = dataclasses.replace(config.segmentation, workers=workers)
    ref_cfg = dataclasses.replace(config.refinement,
                                  icp=dataclasses.replace(config.refinement.icp,
                                                          workers=workers))
    loop = run_refinement_loop(clouds, hands, icp.joint, icp.motions, seg_cfg, ref_cfg)
    log.info("refinement loop (%d passes) in %.2fs: %d object points",
             ref_cfg.loop_iterations, time.perf_counter() - t4,
             loop.segmentation.object_count())

    diagnostics = {
        "alignment": _iteration_dicts(icp.iterations, "alignment"),
        "refinement": [_iteration_dicts(trace, f"refine_{i}")
                       for i, trace in enumerate(loop.refine_iterations)],
        "refine_objectives": [{"input": float(a), "returned": float(b)}
                              for a, b in loop.refine_objectives],
        "num_frames": len(clouds),
        "num_points_per_frame": [len(c) for c in clouds],
    }
    result_dict = {
        "joint": loop.joint.to_json_dict(),
        "motions": [float(v) for v in loop.motions.as_array()],
        "motion_range": [float(loop.motion_range[0]), float(loop.motion_range[1])],
        "joint_initial": joint0.to_json_dict(),
        "trajectory_fit": fit_to_json_dict(fit),
        "frame_indices": [int(c.frame_index) for c in clouds],
        "segmentation_ply": "segmentation.ply",
        "reference_cloud_ply": "reference_cloud.ply",
        "labels_json": "labels.json",
        "diagnostics": diagnostics,
    }

    destination = Path(out_dir) if out_dir is not None else Path(input_dir) / "result"
    destination.mkdir(parents=True, exist_ok=True)
    seg = loop.segmentation
    write_ply(destination / "segmentation.ply", seg.object_cloud.points,
              {"cluster_id": seg.cluster_ids.astype(np.int32),
               "confident": seg.confidence_flags.astype(np.uint8)})
    write_ply(destination / "reference_cloud.ply", seg.reference_cloud.points,
              {"is_object": seg.reference_labels.astype(np.uint8)})
    write_json_atomic(destination / "labels.json",
                      {"object_indices": [int(i) for i in seg.object_indices]})
    write_json_atomic(destination / "result.json", result_dict)
    if dump_diagnostics:
        lines = [json.dumps(entry, sort_keys=True)
                 for entry in diagnostics["alignment"]]
        for trace in diagnostics["refinement"]:
            lines += [json.dumps(entry, sort_keys=True) for entry in trace]
        atomic_write_bytes(destination / "diagnostics.jsonl",
                           ("\n".join(lines) + "\n").encode("utf-8"))
    log.info("total pipeline time %.2fs", time.perf_counter() - t0)
    return EstimationResult(joint=loop.joint, motions=loop.motions,
                            motion_range=loop.motion_range, segmentation=seg,
                            frame_indices=[int(c.frame_index) for c in clouds],
                            result_dict=result_dict, out_dir=destination,
                            clouds=clouds, hands=hands)
