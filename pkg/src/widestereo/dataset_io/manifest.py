"""Schema-versioned JSON manifests for scenes, samples, and their artifacts.

A scene manifest names the scan bundle (PLY paths keyed by scan id, central
scan first in fill order), the capture conditions, the calibrated reference
camera with its virtual-intrinsics policy factors, and optional polygon
masks. A sample record names one benchmark cell's four artifacts and the
geometry they were generated with. Paths are stored relative to the
manifest file unless absolute.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..camera_models import DoubleSphereIntrinsics
from ..cloud_render import PointCloud, PolygonMask
from ..errors import DataError
from ..geometry import RigidTransform, is_rotation
from ..virtual_rig import VirtualIntrinsicsPolicy
from ._atomic import atomic_write_bytes
from .ply import read_ply

__all__ = [
    "SCHEMA_VERSION",
    "CAPTURE_HEIGHTS_M",
    "LIGHTING_TAGS",
    "ScanEntry",
    "SceneManifest",
    "SampleRecord",
    "read_json",
    "write_json",
]

SCHEMA_VERSION = 1
CAPTURE_HEIGHTS_M = (0.5, 1.65, 2.5)
LIGHTING_TAGS = ("natural", "office", "mixed")


def read_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise DataError(f"{path}: expected a JSON object")
    return doc


def write_json(path, doc: Mapping[str, Any]) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    atomic_write_bytes(path, text.encode("utf-8"))


def _check_schema(doc: Mapping[str, Any], kind: str) -> None:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DataError(
            f"unknown schema version {version!r} (this build reads {SCHEMA_VERSION})")
    if doc.get("kind") != kind:
        raise DataError(f"expected a {kind!r} document, got {doc.get('kind')!r}")


def _pose_from_doc(doc: Optional[Mapping[str, Any]]) -> RigidTransform:
    if doc is None:
        return RigidTransform.identity()
    return RigidTransform(
        rotation=np.asarray(doc["rotation"], dtype=np.float64),
        translation=np.asarray(doc["translation"], dtype=np.float64),
    )


@dataclass(frozen=True)
class ScanEntry:
    scan_id: int
    path: str


@dataclass
class SceneManifest:
    scene_id: str
    scans: Tuple[ScanEntry, ...]
    central_scan_id: int
    capture_height_m: float
    lighting: str
    camera: DoubleSphereIntrinsics
    m: float = 0.2
    n: float = 1.25
    masks: Tuple[PolygonMask, ...] = field(default_factory=tuple)
    view_pose: RigidTransform = field(default_factory=RigidTransform.identity)

    def __post_init__(self):
        self.scans = tuple(self.scans)
        if not is_rotation(self.view_pose.rotation):
            raise DataError("view_pose rotation is not orthonormal")
        if not self.scans:
            raise DataError("a scene needs at least one scan")
        ids = [s.scan_id for s in self.scans]
        if len(set(ids)) != len(ids):
            raise DataError("scan ids must be unique within a scene")
        if self.central_scan_id not in ids:
            raise DataError(
                f"central scan {self.central_scan_id} is not in the bundle {ids}")
        if self.capture_height_m not in CAPTURE_HEIGHTS_M:
            raise DataError(
                f"capture height must be one of {CAPTURE_HEIGHTS_M} m")
        if self.lighting not in LIGHTING_TAGS:
            raise DataError(f"lighting must be one of {LIGHTING_TAGS}")
        self.masks = tuple(self.masks)

    @property
    def policy(self) -> VirtualIntrinsicsPolicy:
        return VirtualIntrinsicsPolicy(self.camera, self.m, self.n)

    def fill_order(self) -> List[int]:
        """Scan ids in hole-fill order: central first, then listed order."""
        rest = [s.scan_id for s in self.scans if s.scan_id != self.central_scan_id]
        return [self.central_scan_id] + rest

    def scan_paths(self, base_dir) -> List[str]:
        """Absolute scan paths in fill order."""
        by_id = {s.scan_id: s.path for s in self.scans}
        return [os.path.join(base_dir, by_id[sid]) if not os.path.isabs(by_id[sid])
                else by_id[sid]
                for sid in self.fill_order()]

    def validate_files(self, base_dir) -> None:
        missing = [p for p in self.scan_paths(base_dir) if not os.path.isfile(p)]
        if missing:
            raise DataError(f"scene {self.scene_id}: missing scan files {missing}")

    def load_bundle(self, base_dir) -> List[PointCloud]:
        """Read the scans (central first); each cloud gets its scan id."""
        self.validate_files(base_dir)
        bundle = []
        for sid, path in zip(self.fill_order(), self.scan_paths(base_dir)):
            cloud = read_ply(path)
            cloud.scan_id[:] = sid
            bundle.append(cloud)
        return bundle

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "scene",
            "scene_id": self.scene_id,
            "scans": [{"scan_id": s.scan_id, "path": s.path} for s in self.scans],
            "central_scan_id": self.central_scan_id,
            "capture_height_m": self.capture_height_m,
            "lighting": self.lighting,
            "camera": self.camera.to_dict(),
            "policy": {"m": self.m, "n": self.n},
            "masks": [m.to_dict() for m in self.masks],
            "view_pose": {
                "rotation": self.view_pose.rotation.tolist(),
                "translation": self.view_pose.translation.tolist(),
            },
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "SceneManifest":
        _check_schema(doc, "scene")
        try:
            policy = doc.get("policy", {})
            return cls(
                scene_id=str(doc["scene_id"]),
                scans=tuple(ScanEntry(int(s["scan_id"]), str(s["path"]))
                            for s in doc["scans"]),
                central_scan_id=int(doc["central_scan_id"]),
                capture_height_m=float(doc["capture_height_m"]),
                lighting=str(doc["lighting"]),
                camera=DoubleSphereIntrinsics.from_dict(doc["camera"]),
                m=float(policy.get("m", 0.2)),
                n=float(policy.get("n", 1.25)),
                masks=tuple(PolygonMask.from_dict(m) for m in doc.get("masks", [])),
                view_pose=_pose_from_doc(doc.get("view_pose")),
            )
        except KeyError as exc:
            raise DataError(f"scene manifest missing field {exc}") from exc

    @classmethod
    def read(cls, path) -> "SceneManifest":
        return cls.from_dict(read_json(path))

    def write(self, path) -> None:
        write_json(path, self.to_dict())


_ARTIFACT_KEYS = ("rgb_ref_path", "rgb_sec_path", "depth_ref_path",
                  "disparity_ref_path")


@dataclass
class SampleRecord:
    """One benchmark cell: rig geometry plus the four artifact paths."""

    sample_id: str
    scene_id: str
    camera_kind: str
    orientation_kind: str
    projection_kind: str
    fov_deg: float
    baseline_m: float
    width: int
    height: int
    rgb_ref_path: str
    rgb_sec_path: str
    depth_ref_path: str
    disparity_ref_path: str
    depth_overflow: bool = False

    def __post_init__(self):
        if not self.baseline_m > 0:
            raise DataError("sample baseline must be positive")
        if self.width <= 0 or self.height <= 0:
            raise DataError("sample dimensions must be positive")
        for key in _ARTIFACT_KEYS:
            if not getattr(self, key):
                raise DataError(f"sample record is missing {key}")

    def artifact_paths(self, base_dir) -> dict:
        out = {}
        for key in _ARTIFACT_KEYS:
            p = getattr(self, key)
            out[key] = p if os.path.isabs(p) else os.path.join(base_dir, p)
        return out

    def validate_files(self, base_dir) -> None:
        """Artifacts exist and their headers agree with the stored geometry."""
        from PIL import Image

        from .pfm import read_pfm

        paths = self.artifact_paths(base_dir)
        missing = [p for p in paths.values() if not os.path.isfile(p)]
        if missing:
            raise DataError(f"sample {self.sample_id}: missing artifacts {missing}")
        for key in ("rgb_ref_path", "rgb_sec_path", "depth_ref_path"):
            with Image.open(paths[key]) as img:
                if img.size != (self.width, self.height):
                    raise DataError(
                        f"sample {self.sample_id}: {key} is {img.size}, "
                        f"record says {(self.width, self.height)}")
        disp = read_pfm(paths["disparity_ref_path"])
        if disp.shape != (self.height, self.width):
            raise DataError(
                f"sample {self.sample_id}: disparity grid {disp.shape} does not "
                f"match the record ({self.height}, {self.width})")

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "sample",
            "sample_id": self.sample_id,
            "scene_id": self.scene_id,
            "camera_kind": self.camera_kind,
            "orientation_kind": self.orientation_kind,
            "projection_kind": self.projection_kind,
            "fov_deg": self.fov_deg,
            "baseline_m": self.baseline_m,
            "width": self.width,
            "height": self.height,
            "rgb_ref_path": self.rgb_ref_path,
            "rgb_sec_path": self.rgb_sec_path,
            "depth_ref_path": self.depth_ref_path,
            "disparity_ref_path": self.disparity_ref_path,
            "depth_overflow": self.depth_overflow,
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "SampleRecord":
        _check_schema(doc, "sample")
        try:
            return cls(
                sample_id=str(doc["sample_id"]),
                scene_id=str(doc["scene_id"]),
                camera_kind=str(doc["camera_kind"]),
                orientation_kind=str(doc["orientation_kind"]),
                projection_kind=str(doc["projection_kind"]),
                fov_deg=float(doc["fov_deg"]),
                baseline_m=float(doc["baseline_m"]),
                width=int(doc["width"]),
                height=int(doc["height"]),
                rgb_ref_path=str(doc["rgb_ref_path"]),
                rgb_sec_path=str(doc["rgb_sec_path"]),
                depth_ref_path=str(doc["depth_ref_path"]),
                disparity_ref_path=str(doc["disparity_ref_path"]),
                depth_overflow=bool(doc.get("depth_overflow", False)),
            )
        except KeyError as exc:
            raise DataError(f"sample record missing field {exc}") from exc

    @classmethod
    def read(cls, path) -> "SampleRecord":
        return cls.from_dict(read_json(path))

    def write(self, path) -> None:
        write_json(path, self.to_dict())
