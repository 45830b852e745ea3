"""Binary little-endian PLY point clouds.

The supported vertex layout is exactly float32 x, y, z, optionally followed
by uint8 red, green, blue and an optional uint16 scan_id. ASCII and
big-endian files are rejected explicitly (full-room scans run to tens of
millions of points; a slow text path would only hide mistakes). Reading is
streamed in fixed-size chunks into preallocated arrays, and never reads
past the declared vertex count; truncated files fail with the byte offset
where the data ended.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..cloud_render import PointCloud
from ..errors import DataFormatError
from ._atomic import atomic_writer

__all__ = ["read_ply", "write_ply"]

_FLOAT_NAMES = ("float", "float32")
_UCHAR_NAMES = ("uchar", "uint8")
_USHORT_NAMES = ("ushort", "uint16")


def _parse_header(handle):
    """Returns (vertex_count, has_color, has_scan_id, data_offset)."""

    def read_line():
        start = handle.tell()
        line = handle.readline()
        if not line:
            raise DataFormatError("unexpected end of PLY header", handle.tell())
        if len(line) > 512:
            raise DataFormatError("PLY header line too long", start)
        return line.decode("ascii", errors="replace").strip(), start

    line, at = read_line()
    if line != "ply":
        raise DataFormatError("not a PLY file (missing 'ply' magic)", at)
    line, at = read_line()
    if line.startswith("format ascii"):
        raise DataFormatError("ASCII PLY is not supported; convert to "
                              "binary_little_endian", at)
    if line.startswith("format binary_big_endian"):
        raise DataFormatError("big-endian PLY is not supported", at)
    if not line.startswith("format binary_little_endian"):
        raise DataFormatError(f"unrecognized PLY format line {line!r}", at)

    vertex_count = None
    props: list[tuple[str, str]] = []
    while True:
        line, at = read_line()
        if line == "end_header":
            break
        if not line or line.startswith("comment") or line.startswith("obj_info"):
            continue
        parts = line.split()
        if parts[0] == "element":
            if parts[1] != "vertex" or vertex_count is not None:
                raise DataFormatError(
                    f"unsupported PLY element {' '.join(parts[1:2])!r}", at)
            try:
                vertex_count = int(parts[2])
            except (IndexError, ValueError):
                raise DataFormatError("malformed element line", at) from None
        elif parts[0] == "property":
            if vertex_count is None:
                raise DataFormatError("property outside the vertex element", at)
            if len(parts) != 3 or parts[1] == "list":
                raise DataFormatError(f"unsupported PLY property {line!r}", at)
            props.append((parts[1], parts[2]))
        else:
            raise DataFormatError(f"unrecognized PLY header line {line!r}", at)

    if vertex_count is None:
        raise DataFormatError("PLY header declares no vertex element", handle.tell())

    expect_xyz = [(t, n) for t, n in props[:3]]
    if (len(props) < 3 or any(t not in _FLOAT_NAMES for t, _ in expect_xyz)
            or [n for _, n in expect_xyz] != ["x", "y", "z"]):
        raise DataFormatError(
            "vertex layout must start with float x, y, z", handle.tell())
    rest = props[3:]
    has_color = False
    if len(rest) >= 3 and [n for _, n in rest[:3]] == ["red", "green", "blue"]:
        if any(t not in _UCHAR_NAMES for t, _ in rest[:3]):
            raise DataFormatError("color properties must be uchar", handle.tell())
        has_color = True
        rest = rest[3:]
    has_scan = False
    if len(rest) == 1 and rest[0][1] == "scan_id":
        if rest[0][0] not in _USHORT_NAMES:
            raise DataFormatError("scan_id property must be ushort", handle.tell())
        has_scan = True
        rest = []
    if rest:
        names = [n for _, n in rest]
        raise DataFormatError(f"unsupported vertex properties {names}", handle.tell())
    return vertex_count, has_color, has_scan, handle.tell()


def _record_dtype(has_color: bool, has_scan: bool) -> np.dtype:
    fields = [("x", "<f4"), ("y", "<f4"), ("z", "<f4")]
    if has_color:
        fields += [("red", "u1"), ("green", "u1"), ("blue", "u1")]
    if has_scan:
        fields.append(("scan_id", "<u2"))
    return np.dtype(fields)


def read_ply(path, *, chunk_points: int = 1 << 20) -> PointCloud:
    with open(path, "rb") as handle:
        count, has_color, has_scan, data_offset = _parse_header(handle)
        if count <= 0:
            raise DataFormatError("PLY declares no vertices", data_offset)
        dtype = _record_dtype(has_color, has_scan)

        positions = np.empty((count, 3), dtype=np.float64)
        colors = np.empty((count, 3), dtype=np.uint8) if has_color else None
        scan_id = np.empty(count, dtype=np.int32) if has_scan else None

        filled = 0
        while filled < count:
            want = min(chunk_points, count - filled)
            records = np.fromfile(handle, dtype=dtype, count=want)
            if records.size < want:
                raise DataFormatError(
                    f"PLY data truncated: {filled + records.size} of {count} "
                    "vertices present",
                    data_offset + (filled + records.size) * dtype.itemsize)
            sl = slice(filled, filled + want)
            positions[sl, 0] = records["x"]
            positions[sl, 1] = records["y"]
            positions[sl, 2] = records["z"]
            if has_color:
                colors[sl, 0] = records["red"]
                colors[sl, 1] = records["green"]
                colors[sl, 2] = records["blue"]
            if has_scan:
                scan_id[sl] = records["scan_id"]
            filled += want
    return PointCloud(positions, colors, scan_id)


def write_ply(path, cloud: PointCloud, *, include_scan_id: Optional[bool] = None,
              chunk_points: int = 1 << 20) -> None:
    """Write positions + colors (+ scan_id when present or requested)."""
    if include_scan_id is None:
        include_scan_id = bool(np.any(cloud.scan_id != 0))
    dtype = _record_dtype(True, include_scan_id)
    n = len(cloud)
    header = [
        "ply",
        "format binary_little_endian 1.0",
        f"element vertex {n}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
    ]
    if include_scan_id:
        header.append("property ushort scan_id")
    header.append("end_header")
    with atomic_writer(path) as handle:
        handle.write(("\n".join(header) + "\n").encode("ascii"))
        for start in range(0, n, chunk_points):
            stop = min(start + chunk_points, n)
            records = np.empty(stop - start, dtype=dtype)
            records["x"] = cloud.positions[start:stop, 0]
            records["y"] = cloud.positions[start:stop, 1]
            records["z"] = cloud.positions[start:stop, 2]
            records["red"] = cloud.colors[start:stop, 0]
            records["green"] = cloud.colors[start:stop, 1]
            records["blue"] = cloud.colors[start:stop, 2]
            if include_scan_id:
                records["scan_id"] = cloud.scan_id[start:stop].astype(np.uint16)
            handle.write(records.tobytes())
