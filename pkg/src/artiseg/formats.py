"""File codecs for the on-disk interchange formats.

Depth images are 16-bit single-channel PNG in millimeters, or a raw binary
layout ``{width: u32, height: u32, f32 meters row-major}`` selected by the
``.dbin`` extension.  Invalid depth is 0 in files and NaN in memory.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InputFormatError
from .ingest import CameraIntrinsics, HandObservation

DEPTH_SUFFIXES = (".png", ".dbin")


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename into place."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def write_json_atomic(path, obj) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    atomic_write_bytes(path, (text + "\n").encode("utf-8"))


def _read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise InputFormatError(f"missing file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"invalid JSON in {path}: {exc}") from exc


def save_depth_png(path, depth_m) -> None:
    d = np.asarray(depth_m, dtype=float)
    mm = np.where(np.isfinite(d) & (d > 0.0), np.round(d * 1000.0), 0.0)
    if mm.max(initial=0.0) > 65535:
        raise InputFormatError("depth exceeds the 65.535 m range of 16-bit millimeter PNG")
    img = Image.fromarray(mm.astype(np.uint16))
    import io
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def load_depth_png(path) -> np.ndarray:
    try:
        img = Image.open(path)
    except FileNotFoundError as exc:
        raise InputFormatError(f"missing file: {path}") from exc
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise InputFormatError(f"depth PNG must be single-channel: {path}")
    depth = arr.astype(float) / 1000.0
    depth[arr == 0] = np.nan
    return depth


def save_depth_dbin(path, depth_m) -> None:
    d = np.asarray(depth_m, dtype=np.float32)
    d = np.where(np.isfinite(d) & (d > 0.0), d, np.float32(0.0))
    header = struct.pack("<II", d.shape[1], d.shape[0])
    atomic_write_bytes(path, header + d.tobytes(order="C"))


def load_depth_dbin(path) -> np.ndarray:
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError as exc:
        raise InputFormatError(f"missing file: {path}") from exc
    if len(raw) < 8:
        raise InputFormatError(f"truncated depth file: {path}")
    width, height = struct.unpack("<II", raw[:8])
    expected = 8 + 4 * width * height
    if len(raw) != expected:
        raise InputFormatError(f"depth file size mismatch in {path}")
    depth = np.frombuffer(raw, dtype="<f4", offset=8).reshape(height, width).astype(float)
    depth[~(np.isfinite(depth) & (depth > 0.0))] = np.nan
    return depth


def load_depth(path) -> np.ndarray:
    suffix = Path(path).suffix.lower()
    if suffix == ".png":
        return load_depth_png(path)
    if suffix == ".dbin":
        return load_depth_dbin(path)
    raise InputFormatError(f"unsupported depth format {suffix!r} (expected .png or .dbin)")


def save_depth(path, depth_m) -> None:
    suffix = Path(path).suffix.lower()
    if suffix == ".png":
        save_depth_png(path, depth_m)
    elif suffix == ".dbin":
        save_depth_dbin(path, depth_m)
    else:
        raise InputFormatError(f"unsupported depth format {suffix!r} (expected .png or .dbin)")


def save_mask_png(path, mask) -> None:
    m = (np.asarray(mask, dtype=bool) * np.uint8(255))
    import io
    buf = io.BytesIO()
    Image.fromarray(m).save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def load_mask_png(path) -> np.ndarray:
    try:
        img = Image.open(path).convert("L")
    except FileNotFoundError as exc:
        raise InputFormatError(f"missing file: {path}") from exc
    return np.asarray(img) != 0


def save_labels_png(path, labels) -> None:
    arr = np.asarray(labels, dtype=np.uint8)
    import io
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def load_labels_png(path) -> np.ndarray:
    try:
        img = Image.open(path)
    except FileNotFoundError as exc:
        raise InputFormatError(f"missing file: {path}") from exc
    return np.asarray(img).astype(np.uint8)


def save_intrinsics(path, intrinsics: CameraIntrinsics) -> None:
    write_json_atomic(path, intrinsics.to_json_dict())


def load_intrinsics(path) -> CameraIntrinsics:
    return CameraIntrinsics.from_json_dict(_read_json(path))


def save_keypoints(path, observation: HandObservation, hand: str = "right") -> None:
    joints = [[float(u), float(v), float(c)]
              for (u, v), c in zip(observation.joints_2d, observation.confidences)]
    write_json_atomic(path, {"frame": int(observation.frame_index),
                             "hand": hand, "joints": joints})


def load_keypoints(path) -> HandObservation:
    data = _read_json(path)
    try:
        joints = np.asarray(data["joints"], dtype=float)
        frame = int(data["frame"])
        hand = data["hand"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputFormatError(f"malformed keypoint file {path}: {exc}") from exc
    if hand not in ("left", "right"):
        raise InputFormatError(f"keypoint file {path}: hand must be 'left' or 'right'")
    if joints.ndim != 2 or joints.shape[1] != 3:
        raise InputFormatError(f"keypoint file {path}: joints must be [u, v, confidence] rows")
    return HandObservation(frame_index=frame, joints_2d=joints[:, :2],
                           confidences=joints[:, 2])
