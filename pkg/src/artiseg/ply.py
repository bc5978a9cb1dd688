"""Minimal binary little-endian PLY writer/reader for point clouds."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import InputFormatError
from .formats import atomic_write_bytes

_DTYPES = {
    "float": "<f4",
    "double": "<f8",
    "int": "<i4",
    "uchar": "u1",
}
_NAMES = {v: k for k, v in _DTYPES.items()}


def write_ply(path, points, properties=None) -> None:
    """Write a vertex-only PLY: x/y/z as float plus optional extra properties.

    ``properties`` maps property name to a 1-D array; int arrays become
    ``int``, small unsigned arrays ``uchar``, floats ``float``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    n = pts.shape[0]
    columns = [("x", "<f4", pts[:, 0]), ("y", "<f4", pts[:, 1]), ("z", "<f4", pts[:, 2])]
    for name, values in (properties or {}).items():
        arr = np.asarray(values)
        if arr.shape != (n,):
            raise InputFormatError(f"property {name!r} must have one value per vertex")
        if arr.dtype == np.uint8 or arr.dtype == bool:
            columns.append((name, "u1", arr.astype(np.uint8)))
        elif np.issubdtype(arr.dtype, np.integer):
            columns.append((name, "<i4", arr.astype(np.int32)))
        else:
            columns.append((name, "<f4", arr.astype(np.float32)))
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header += [f"property {_NAMES[dt]} {name}" for name, dt, _ in columns]
    header.append("end_header")
    record = np.zeros(n, dtype=[(name, dt) for name, dt, _ in columns])
    for name, _, values in columns:
        record[name] = values
    atomic_write_bytes(path, ("\n".join(header) + "\n").encode("ascii") + record.tobytes())


def read_ply(path):
    """Read a binary little-endian vertex-only PLY; returns (points, properties)."""
    raw = Path(path).read_bytes()
    end = raw.find(b"end_header\n")
    if not raw.startswith(b"ply") or end < 0:
        raise InputFormatError(f"not a PLY file: {path}")
    header = raw[:end].decode("ascii").splitlines()
    body = raw[end + len(b"end_header\n"):]
    if "format binary_little_endian 1.0" not in header[1]:
        raise InputFormatError(f"unsupported PLY format in {path}")
    n = None
    fields = []
    for line in header[2:]:
        parts = line.split()
        if parts[0] == "element":
            if parts[1] != "vertex":
                raise InputFormatError(f"unsupported PLY element {parts[1]!r}")
            n = int(parts[2])
        elif parts[0] == "property":
            if parts[1] not in _DTYPES:
                raise InputFormatError(f"unsupported PLY property type {parts[1]!r}")
            fields.append((parts[2], _DTYPES[parts[1]]))
    if n is None:
        raise InputFormatError(f"PLY header missing vertex element: {path}")
    record = np.frombuffer(body, dtype=fields, count=n)
    names = [name for name, _ in fields]
    for coord in ("x", "y", "z"):
        if coord not in names:
            raise InputFormatError(f"PLY missing {coord} property: {path}")
    points = np.column_stack([record["x"], record["y"], record["z"]]).astype(float)
    extras = {name: np.array(record[name]) for name in names if name not in ("x", "y", "z")}
    return points, extras
