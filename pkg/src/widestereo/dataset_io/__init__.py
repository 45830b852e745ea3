"""File formats and manifests: PFM, 16-bit depth PNG, binary PLY, JSON."""

from ._atomic import atomic_write_bytes, atomic_writer
from .depth_png import MAX_DEPTH_MM, read_depth_png, write_depth_png
from .manifest import (
    CAPTURE_HEIGHTS_M,
    LIGHTING_TAGS,
    SCHEMA_VERSION,
    SampleRecord,
    ScanEntry,
    SceneManifest,
    read_json,
    write_json,
)
from .pfm import read_pfm, write_pfm
from .ply import read_ply, write_ply

__all__ = [
    "atomic_write_bytes",
    "atomic_writer",
    "MAX_DEPTH_MM",
    "read_depth_png",
    "write_depth_png",
    "CAPTURE_HEIGHTS_M",
    "LIGHTING_TAGS",
    "SCHEMA_VERSION",
    "SampleRecord",
    "ScanEntry",
    "SceneManifest",
    "read_json",
    "write_json",
    "read_pfm",
    "write_pfm",
    "read_ply",
    "write_ply",
]
