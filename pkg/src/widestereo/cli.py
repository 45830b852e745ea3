"""Batch command-line front end.

Standard output carries machine-readable results only (one JSON document,
or CSV in sweep mode); progress and log lines go to standard error. Exit
codes: 0 success, 2 usage/configuration error, 3 data error, 4 geometry
domain error. A JSON config file (--config) can supply any long flag's
value under its dest name; explicit flags win. Output files are written to
a temporary sibling and renamed, so failed runs never leave partial
artifacts behind.
"""

from __future__ import annotations

import argparse
import glob
import io
import json
import logging
import os
import sys
from typing import Optional

import numpy as np
from PIL import Image

from ._parallel import THREADS_ENV_VAR
from .camera_models import intrinsics_from_dict
from .cloud_render import RenderSettings, synthesize_stereo_sample
from .dataset_io import (
    SampleRecord,
    SceneManifest,
    atomic_write_bytes,
    read_depth_png,
    read_json,
    read_pfm,
    write_depth_png,
    write_json,
    write_pfm,
)
from .errors import ConfigError, DataError, GeometryDomainError
from .metrics import depth_metrics, disparity_metrics, local_entropy_stats
from .projections import (
    CropRotateRecord,
    ProjectionSpec,
    crop_and_rotate_for_stereo,
    undo_crop_and_rotate,
    warp,
)
from .spherical_stereo import (
    DepthMap,
    DisparityMap,
    depth_to_disparity,
    disparity_to_depth,
)
from .virtual_rig import BenchmarkGrid, enumerate_benchmark

log = logging.getLogger("widestereo")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_GEOMETRY = 4


# ---------------------------------------------------------------------------
# small IO helpers

def _emit(doc) -> None:
    print(json.dumps(doc, sort_keys=True))


def _load_image_u8(path) -> np.ndarray:
    with Image.open(path) as img:
        if img.mode in ("RGB", "L"):
            return np.asarray(img)
        if img.mode in ("RGBA", "P", "LA"):
            return np.asarray(img.convert("RGB"))
    raise DataError(f"{path}: unsupported image mode for color input")


def _save_image_u8(path, array: np.ndarray) -> None:
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise ValueError("expected a uint8 image")
    buf = io.BytesIO()
    Image.fromarray(array).save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def _load_mask(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("L")) > 0


def _save_mask(path, mask: np.ndarray) -> None:
    _save_image_u8(path, np.where(mask, 255, 0).astype(np.uint8))


def _spec_from_doc(doc) -> ProjectionSpec:
    """Accept either a full projection spec or a bare camera block."""
    if "kind" in doc:
        return ProjectionSpec.from_dict(doc)
    if "model" in doc:
        K = intrinsics_from_dict(doc)
        if doc["model"] == "double_sphere":
            return ProjectionSpec.for_ds(K)
        return ProjectionSpec.for_pinhole(K)
    raise DataError("expected a projection spec ('kind') or camera block ('model')")


def _read_disparity(path) -> DisparityMap:
    values = read_pfm(path).astype(np.float64)
    valid = np.isfinite(values) & (values >= 0.0)
    return DisparityMap(np.where(valid, values, 0.0), valid)


def _read_depth_any(path) -> DepthMap:
    if str(path).endswith(".pfm"):
        values = read_pfm(path).astype(np.float64)
        valid = np.isfinite(values) & (values > 0.0)
        return DepthMap(np.where(valid, values, 0.0), valid)
    return read_depth_png(path)


def _write_disparity(path, disp: DisparityMap) -> None:
    write_pfm(path, np.where(disp.valid, disp.values, -1.0).astype(np.float32))


def _check_height(flag: Optional[int], grid_height: int) -> None:
    if flag is not None and int(flag) != grid_height:
        raise GeometryDomainError(
            f"--height {flag} does not match the grid height {grid_height}")


# ---------------------------------------------------------------------------
# config merging

def _apply_config(args: argparse.Namespace, fallbacks: dict) -> None:
    """Fill None-valued dests from the config file, then from fallbacks."""
    config_path = getattr(args, "config", None)
    if config_path:
        doc = read_json(config_path)
        for key, value in doc.items():
            if not hasattr(args, key):
                raise ConfigError(f"unknown config key {key!r}")
            if getattr(args, key) is None:
                setattr(args, key, value)
    for key, value in fallbacks.items():
        if getattr(args, key) is None:
            setattr(args, key, value)


# ---------------------------------------------------------------------------
# commands

def cmd_warp(args) -> int:
    _apply_config(args, {"interpolation": "bilinear", "kind": "color"})
    if args.interpolation not in ("nearest", "bilinear"):
        raise ConfigError(f"unknown interpolation {args.interpolation!r}")
    src_spec = _spec_from_doc(read_json(args.source))
    dst_spec = _spec_from_doc(read_json(args.target))

    if args.kind == "range":
        depth = read_depth_png(args.image)
        out, valid = warp(depth.values, src_spec, dst_spec,
                          interpolation=args.interpolation, kind="range",
                          src_valid=depth.valid)
        overflow = write_depth_png(args.output, DepthMap(out, valid))
        result = {"output": args.output, "valid_pixels": int(valid.sum()),
                  "overflow": overflow}
    elif args.kind == "color":
        image = _load_image_u8(args.image)
        src_valid = _load_mask(args.mask) if args.mask else None
        out, valid = warp(image, src_spec, dst_spec,
                          interpolation=args.interpolation, kind="color",
                          src_valid=src_valid)
        if out.dtype != np.uint8:
            out = np.clip(np.rint(out), 0, 255).astype(np.uint8)
        out[~valid] = 0
        _save_image_u8(args.output, out)
        result = {"output": args.output, "valid_pixels": int(valid.sum())}
    else:
        raise ConfigError(f"unknown warp kind {args.kind!r}")

    if args.mask_output:
        _save_mask(args.mask_output, valid)
        result["mask_output"] = args.mask_output
    _emit(result)
    return EXIT_OK


def cmd_disp2depth(args) -> int:
    _apply_config(args, {})
    if args.baseline_m is None or float(args.baseline_m) <= 0:
        raise ConfigError("--baseline-m must be a positive number")
    disp = _read_disparity(args.input)
    disp.baseline_m = float(args.baseline_m)
    _check_height(args.height, disp.height)
    depth = disparity_to_depth(disp)
    overflow = write_depth_png(args.output, depth)
    _emit({"output": args.output, "valid_pixels": int(depth.valid.sum()),
           "overflow": overflow})
    return EXIT_OK


def cmd_depth2disp(args) -> int:
    _apply_config(args, {})
    if args.baseline_m is None or float(args.baseline_m) <= 0:
        raise ConfigError("--baseline-m must be a positive number")
    depth = _read_depth_any(args.input)
    depth.baseline_m = float(args.baseline_m)
    _check_height(args.height, depth.height)
    disp = depth_to_disparity(depth)
    _write_disparity(args.output, disp)
    _emit({"output": args.output, "valid_pixels": int(disp.valid.sum())})
    return EXIT_OK


def _find_sample_records(data_dir):
    """(record, record_path) pairs under a generated dataset directory."""
    index_path = os.path.join(data_dir, "samples_index.json")
    paths = []
    if os.path.isfile(index_path):
        doc = read_json(index_path)
        paths = [os.path.join(data_dir, entry["path"])
                 for entry in doc.get("samples", [])]
    else:
        paths = sorted(glob.glob(os.path.join(data_dir, "samples", "*", "sample.json")))
    if not paths:
        raise DataError(f"no sample records found under {data_dir}")
    return [(SampleRecord.read(p), p) for p in paths]


def cmd_eval(args) -> int:
    _apply_config(args, {"kind": "disparity", "metric": "RelEPE",
                         "camera": "fisheye"})
    if args.sweep:
        return _eval_sweep(args)
    if not args.pred or not args.gt:
        raise ConfigError("eval requires --pred and --gt (or --sweep)")
    domain = {"kind": args.kind}
    if args.kind == "disparity":
        report = disparity_metrics(_read_disparity(args.pred),
                                   _read_disparity(args.gt), domain=domain)
    elif args.kind == "depth":
        report = depth_metrics(_read_depth_any(args.pred),
                               _read_depth_any(args.gt), domain=domain)
    else:
        raise ConfigError(f"unknown eval kind {args.kind!r}")
    if args.output:
        write_json(args.output, report.to_dict())
    _emit(report.to_dict())
    return EXIT_OK


def _eval_sweep(args) -> int:
    """Per-sample metric pivoted into a FOV x baseline CSV table."""
    if not args.pred_dir:
        raise ConfigError("--sweep requires --pred-dir")
    if args.kind != "disparity":
        raise ConfigError("sweep mode evaluates disparity predictions")
    records = [(r, p) for r, p in _find_sample_records(args.sweep)
               if args.camera in ("all", r.camera_kind)]
    if not records:
        raise DataError(f"no {args.camera} samples to sweep")

    cells: dict = {}
    for record, record_path in records:
        pred_path = os.path.join(args.pred_dir, record.sample_id + ".pfm")
        if not os.path.isfile(pred_path):
            raise DataError(f"missing prediction {pred_path}")
        gt_path = record.artifact_paths(os.path.dirname(record_path))[
            "disparity_ref_path"]
        report = disparity_metrics(_read_disparity(pred_path),
                                   _read_disparity(gt_path))
        if args.metric not in report.metrics:
            raise ConfigError(
                f"unknown metric {args.metric!r}; have {sorted(report.metrics)}")
        cells.setdefault((record.fov_deg, record.baseline_m), []).append(
            report[args.metric])
        log.info("evaluated %s", record.sample_id)

    fovs = sorted({f for f, _ in cells})
    baselines = sorted({b for _, b in cells})
    lines = ["fov_deg," + ",".join(f"b{int(round(b * 1000)):03d}mm"
                                   for b in baselines)]
    for f in fovs:
        row = [f"{f:g}"]
        for b in baselines:
            vals = cells.get((f, b))
            row.append(f"{np.mean(vals):.6f}" if vals else "")
        lines.append(",".join(row))
    csv_text = "\n".join(lines) + "\n"

    if args.output:
        atomic_write_bytes(args.output, csv_text.encode("utf-8"))
        _emit({"output": args.output, "metric": args.metric,
               "samples": len(records)})
    else:
        sys.stdout.write(csv_text)
    return EXIT_OK


def cmd_stats(args) -> int:
    _apply_config(args, {"bin_edges": "0,1,2,5,10,inf", "entropy_window": 11})
    edges = [float(tok) for tok in str(args.bin_edges).split(",")]
    if len(edges) < 2:
        raise ConfigError("--bin-edges needs at least two comma-separated values")
    records = _find_sample_records(args.data_dir)

    counts = np.zeros(len(edges) - 1, dtype=np.int64)
    total_valid = 0
    entropy_means = []
    for record, record_path in records:
        paths = record.artifact_paths(os.path.dirname(record_path))
        depth = read_depth_png(paths["depth_ref_path"])
        values = depth.values[depth.valid]
        if values.size:
            c, _ = np.histogram(values, bins=np.asarray(edges))
            counts += c
            total_valid += values.size
        rgb = _load_image_u8(paths["rgb_ref_path"])
        entropy_means.append(
            local_entropy_stats(rgb, window=int(args.entropy_window)).mean)
        log.info("stats over %s", record.sample_id)
    if total_valid == 0:
        raise DataError("no valid depth pixels in the dataset")

    _emit({
        "samples": len(records),
        "depth_histogram": {
            "bin_edges": edges,
            "fractions": (counts / total_valid).tolist(),
            "valid_pixels": int(total_valid),
        },
        "mean_local_entropy_bits": float(np.mean(entropy_means)),
        "entropy_window": int(args.entropy_window),
    })
    return EXIT_OK


def cmd_gen_stereo(args) -> int:
    _apply_config(args, {"image_height": 128, "splat_radius": 1.0})
    manifest = SceneManifest.read(args.manifest)
    base_dir = os.path.dirname(os.path.abspath(args.manifest))
    if args.grid:
        doc = read_json(args.grid)
        keys = ("baselines_m", "fovs_deg", "pinhole_fov_deg")
        grid = BenchmarkGrid(**{k: doc[k] for k in keys if k in doc})
    else:
        grid = BenchmarkGrid()

    bundle = manifest.load_bundle(base_dir)
    settings = RenderSettings(
        splat_radius_px=float(args.splat_radius),
        hole_fill_order=tuple(manifest.fill_order()),
        threads=args.threads,
    )
    descriptors = enumerate_benchmark(grid, manifest.view_pose)
    out_dir = args.out_dir
    entries = []
    for desc in descriptors:
        sample = synthesize_stereo_sample(
            bundle, desc.rig,
            camera_kind="fisheye" if desc.camera_kind == "fisheye" else "pinhole",
            image_height=int(args.image_height),
            policy=manifest.policy,
            settings=settings,
            masks=manifest.masks,
        )
        sample_dir = os.path.join(out_dir, "samples", desc.sample_id)
        os.makedirs(sample_dir, exist_ok=True)
        _save_image_u8(os.path.join(sample_dir, "rgb_ref.png"), sample.rgb_ref)
        _save_image_u8(os.path.join(sample_dir, "rgb_sec.png"), sample.rgb_sec)
        overflow = write_depth_png(os.path.join(sample_dir, "depth_ref.png"),
                                   sample.depth_ref)
        _write_disparity(os.path.join(sample_dir, "disparity_ref.pfm"),
                         sample.disparity_ref)
        record = SampleRecord(
            sample_id=desc.sample_id,
            scene_id=manifest.scene_id,
            camera_kind=desc.camera_kind,
            orientation_kind=desc.orientation_kind,
            projection_kind=sample.spec.kind,
            fov_deg=desc.fov_deg,
            baseline_m=desc.baseline_m,
            width=sample.spec.width,
            height=sample.spec.height,
            rgb_ref_path="rgb_ref.png",
            rgb_sec_path="rgb_sec.png",
            depth_ref_path="depth_ref.png",
            disparity_ref_path="disparity_ref.pfm",
            depth_overflow=overflow,
        )
        record.write(os.path.join(sample_dir, "sample.json"))
        entries.append({
            "sample_id": desc.sample_id,
            "path": os.path.join("samples", desc.sample_id, "sample.json"),
        })
        log.info("generated %s", desc.sample_id)

    index = {
        "schema_version": 1,
        "kind": "sample_index",
        "scene_id": manifest.scene_id,
        "samples": entries,
    }
    write_json(os.path.join(out_dir, "samples_index.json"), index)
    _emit(index)
    return EXIT_OK


def cmd_prep_stereo_input(args) -> int:
    _apply_config(args, {})
    image = _load_image_u8(args.image)
    if args.undo:
        if not args.record:
            raise ConfigError("--undo requires --record")
        record = CropRotateRecord.from_dict(read_json(args.record))
        mask = _load_mask(args.mask) if args.mask \
            else np.ones(image.shape[:2], dtype=bool)
        out, out_valid = undo_crop_and_rotate(image, mask, record)
        _save_image_u8(args.output, out)
        result = {"output": args.output,
                  "height": out.shape[0], "width": out.shape[1]}
    else:
        mask = _load_mask(args.mask) if args.mask \
            else np.ones(image.shape[:2], dtype=bool)
        out, out_valid, record = crop_and_rotate_for_stereo(image, mask)
        _save_image_u8(args.output, out)
        result = {"output": args.output,
                  "height": out.shape[0], "width": out.shape[1]}
        if args.record:
            write_json(args.record, record.to_dict())
            result["record"] = args.record
    if args.mask_output:
        _save_mask(args.mask_output, out_valid)
        result["mask_output"] = args.mask_output
    _emit(result)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="widestereo",
        description="Wide-FOV stereo dataset tooling: warping, spherical "
                    "depth/disparity conversion, sample generation, metrics.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file supplying default flag values")
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default: ${THREADS_ENV_VAR} or 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("warp", parents=[common],
                       help="resample an image into another projection")
    p.add_argument("--image", required=True)
    p.add_argument("--source", required=True,
                   help="JSON camera block or projection spec of the input")
    p.add_argument("--target", required=True,
                   help="JSON projection spec of the output")
    p.add_argument("--output", required=True)
    p.add_argument("--mask", help="validity mask PNG for the input")
    p.add_argument("--mask-output", help="write the output validity mask here")
    p.add_argument("--interpolation", choices=("nearest", "bilinear"))
    p.add_argument("--kind", choices=("color", "range"))
    p.set_defaults(func=cmd_warp)

    p = sub.add_parser("disp2depth", parents=[common],
                       help="disparity PFM to 16-bit depth PNG")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--baseline-m", type=float)
    p.add_argument("--height", type=int,
                   help="expected grid height (safety check)")
    p.set_defaults(func=cmd_disp2depth)

    p = sub.add_parser("depth2disp", parents=[common],
                       help="depth map to disparity PFM")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--baseline-m", type=float)
    p.add_argument("--height", type=int,
                   help="expected grid height (safety check)")
    p.set_defaults(func=cmd_depth2disp)

    p = sub.add_parser("eval", parents=[common],
                       help="compare predictions to ground truth")
    p.add_argument("--pred")
    p.add_argument("--gt")
    p.add_argument("--kind", choices=("disparity", "depth"))
    p.add_argument("--output", help="also write the report/CSV here")
    p.add_argument("--sweep", metavar="DATA_DIR",
                   help="evaluate every sample in a generated dataset")
    p.add_argument("--pred-dir", help="directory of <sample_id>.pfm predictions")
    p.add_argument("--metric", help="metric to pivot in sweep mode")
    p.add_argument("--camera", choices=("fisheye", "pinhole", "all"))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", parents=[common],
                       help="dataset depth histogram and local entropy")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--bin-edges", help="comma-separated depth bin edges in m")
    p.add_argument("--entropy-window", type=int)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("gen-stereo", parents=[common],
                       help="synthesize the benchmark grid for one scene")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--grid", help="JSON overriding baselines_m/fovs_deg/"
                                  "pinhole_fov_deg")
    p.add_argument("--image-height", type=int)
    p.add_argument("--splat-radius", type=float)
    p.set_defaults(func=cmd_gen_stereo)

    p = sub.add_parser("prep-stereo-input", parents=[common],
                       help="crop empty borders and rotate 90 degrees CCW")
    p.add_argument("--image", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--mask", help="validity mask PNG")
    p.add_argument("--mask-output")
    p.add_argument("--record", help="JSON file with the crop geometry")
    p.add_argument("--undo", action="store_true",
                   help="invert a previous run using --record")
    p.set_defaults(func=cmd_prep_stereo_input)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _fail("config", exc)
        return EXIT_USAGE
    except GeometryDomainError as exc:
        _fail("geometry", exc)
        return EXIT_GEOMETRY
    except (DataError, OSError, ValueError) as exc:
        _fail("data", exc)
        return EXIT_DATA


def _fail(category: str, exc: BaseException) -> None:
    print(json.dumps({"error": str(exc), "category": category}),
          file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
