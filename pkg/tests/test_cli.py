import json
import os

import numpy as np
import pytest
from PIL import Image

from widestereo import DepthMap, PointCloud, ProjectionSpec
from widestereo.cli import main
from widestereo.dataset_io import (
    SceneManifest,
    ScanEntry,
    read_depth_png,
    read_pfm,
    write_depth_png,
    write_pfm,
    write_ply,
)

from conftest import DS_FIXTURE, box_cloud


def _write_scene(tmp_path, step_m=0.08):
    cloud = box_cloud(step_m=step_m)
    write_ply(tmp_path / "scan0.ply", cloud)
    scene = SceneManifest(
        scene_id="unit_box",
        scans=(ScanEntry(0, "scan0.ply"),),
        central_scan_id=0,
        capture_height_m=1.65,
        lighting="mixed",
        camera=DS_FIXTURE,
    )
    path = tmp_path / "scene.json"
    scene.write(path)
    return path


def _gen(tmp_path, out_name="data", threads=None, capsys=None):
    manifest = _write_scene(tmp_path)
    grid = {"baselines_m": [0.065], "fovs_deg": [165.0]}
    grid_path = tmp_path / "grid.json"
    grid_path.write_text(json.dumps(grid))
    out_dir = tmp_path / out_name
    argv = ["gen-stereo", "--manifest", str(manifest),
            "--grid", str(grid_path), "--out-dir", str(out_dir),
            "--image-height", "48"]
    if threads is not None:
        argv += ["--threads", str(threads)]
    assert main(argv) == 0
    return out_dir


def test_usage_error_exits_2(capsys):
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 2
    assert main(["disp2depth", "--input", "x.pfm", "--output", "y.png"]) == 2
    out = capsys.readouterr()
    assert "baseline" in out.err


def test_missing_file_exits_3(tmp_path, capsys):
    code = main(["disp2depth", "--input", str(tmp_path / "nope.pfm"),
                 "--output", str(tmp_path / "o.png"), "--baseline-m", "0.1"])
    assert code == 3
    err_line = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err_line["category"] == "data"


def test_disp2depth_fixture(tmp_path, capsys):
    # H = 31, all rows at disparity 7.75: the equator row maps to exactly
    # the baseline; with B = 1 that is depth 1.000 m -> 1000 mm
    disp = np.full((31, 62), 7.75, dtype=np.float32)
    write_pfm(tmp_path / "d.pfm", disp)
    out = tmp_path / "depth.png"
    code = main(["disp2depth", "--input", str(tmp_path / "d.pfm"),
                 "--output", str(out), "--baseline-m", "1.0",
                 "--height", "31"])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["output"] == str(out) and doc["overflow"] is False
    depth = read_depth_png(out)
    assert depth.values[15, 0] == pytest.approx(1.0, abs=5e-4)

    # back through depth2disp: recovers the plateau to PNG precision
    back = tmp_path / "d2.pfm"
    assert main(["depth2disp", "--input", str(out), "--output", str(back),
                 "--baseline-m", "1.0"]) == 0
    again = read_pfm(back)
    assert again[15, 0] == pytest.approx(7.75, abs=2e-3)


def test_height_mismatch_exits_4(tmp_path, capsys):
    write_pfm(tmp_path / "d.pfm", np.full((16, 32), 2.0, np.float32))
    code = main(["disp2depth", "--input", str(tmp_path / "d.pfm"),
                 "--output", str(tmp_path / "o.png"),
                 "--baseline-m", "0.1", "--height", "64"])
    assert code == 4
    err_line = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err_line["category"] == "geometry"


def test_config_file_fills_flags_and_flags_win(tmp_path, capsys):
    write_pfm(tmp_path / "d.pfm", np.full((16, 32), 2.0, np.float32))
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"baseline_m": 0.5}))
    # config supplies the baseline
    assert main(["disp2depth", "--config", str(cfg),
                 "--input", str(tmp_path / "d.pfm"),
                 "--output", str(tmp_path / "a.png")]) == 0
    a = read_depth_png(tmp_path / "a.png")
    # explicit flag overrides the config value
    assert main(["disp2depth", "--config", str(cfg),
                 "--input", str(tmp_path / "d.pfm"),
                 "--output", str(tmp_path / "b.png"),
                 "--baseline-m", "1.0"]) == 0
    b = read_depth_png(tmp_path / "b.png")
    np.testing.assert_allclose(b.values[b.valid], 2 * a.values[a.valid],
                               atol=2e-3)

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"basline_m": 0.5}))  # typo -> usage error
    assert main(["disp2depth", "--config", str(bad),
                 "--input", str(tmp_path / "d.pfm"),
                 "--output", str(tmp_path / "c.png")]) == 2


def test_gen_stereo_layout_and_index(tmp_path, capsys):
    out_dir = _gen(tmp_path)
    index = json.loads((out_dir / "samples_index.json").read_text())
    stdout_doc = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert stdout_doc == index
    assert index["kind"] == "sample_index"
    ids = [e["sample_id"] for e in index["samples"]]
    # 2 orientations x (1 fisheye FOV + pinhole) x 1 baseline
    assert len(ids) == 4 and ids == sorted(ids)
    assert "fisheye_vertical_fov165_b065mm" in ids
    for entry in index["samples"]:
        sdir = out_dir / "samples" / entry["sample_id"]
        for name in ("rgb_ref.png", "rgb_sec.png", "depth_ref.png",
                     "disparity_ref.pfm", "sample.json"):
            assert (sdir / name).exists(), name
        record = json.loads((sdir / "sample.json").read_text())
        assert record["scene_id"] == "unit_box"
        assert record["baseline_m"] == 0.065


def test_eval_single_pair(tmp_path, capsys):
    gt = np.abs(np.random.default_rng(0).normal(2, 1, size=(16, 32))) + 0.5
    write_pfm(tmp_path / "gt.pfm", gt.astype(np.float32))
    write_pfm(tmp_path / "pred.pfm", gt.astype(np.float32))
    out = tmp_path / "report.json"
    code = main(["eval", "--pred", str(tmp_path / "pred.pfm"),
                 "--gt", str(tmp_path / "gt.pfm"), "--output", str(out)])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["metrics"]["EPE"]["value"] == 0.0
    assert json.loads(out.read_text()) == doc


def test_eval_depth_kind(tmp_path, capsys):
    depth = DepthMap(np.full((8, 16), 2.0))
    write_depth_png(tmp_path / "gt.png", depth)
    write_depth_png(tmp_path / "pred.png", depth)
    assert main(["eval", "--kind", "depth", "--pred", str(tmp_path / "pred.png"),
                 "--gt", str(tmp_path / "gt.png")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["metrics"]["AbsRel"]["value"] == 0.0
    assert doc["metrics"]["delta_1.25"]["value"] == 100.0


def test_eval_sweep_csv(tmp_path, capsys):
    out_dir = _gen(tmp_path)
    capsys.readouterr()
    pred_dir = tmp_path / "preds"
    pred_dir.mkdir()
    index = json.loads((out_dir / "samples_index.json").read_text())
    for entry in index["samples"]:
        gt = read_pfm(out_dir / "samples" / entry["sample_id"]
                      / "disparity_ref.pfm")
        write_pfm(pred_dir / f"{entry['sample_id']}.pfm", gt)
    assert main(["eval", "--sweep", str(out_dir),
                 "--pred-dir", str(pred_dir), "--camera", "fisheye"]) == 0
    csv_text = capsys.readouterr().out
    lines = csv_text.strip().splitlines()
    assert lines[0] == "fov_deg,b065mm"
    assert lines[1].startswith("165,")
    assert float(lines[1].split(",")[1]) == 0.0


def test_stats_command(tmp_path, capsys):
    out_dir = _gen(tmp_path)
    capsys.readouterr()
    assert main(["stats", "--data-dir", str(out_dir)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["samples"] == 4
    fr = doc["depth_histogram"]["fractions"]
    assert sum(fr) == pytest.approx(1.0)
    assert doc["mean_local_entropy_bits"] > 0.0


def test_warp_command(tmp_path, capsys):
    src_spec = ProjectionSpec.equirectangular(32)
    dst_spec = ProjectionSpec.cubemap(24)
    (tmp_path / "src.json").write_text(json.dumps(src_spec.to_dict()))
    (tmp_path / "dst.json").write_text(json.dumps(dst_spec.to_dict()))
    img = np.zeros((32, 64, 3), np.uint8)
    img[:16] = 200
    Image.fromarray(img).save(tmp_path / "pano.png")
    out = tmp_path / "cube.png"
    code = main(["warp", "--image", str(tmp_path / "pano.png"),
                 "--source", str(tmp_path / "src.json"),
                 "--target", str(tmp_path / "dst.json"),
                 "--output", str(out),
                 "--mask-output", str(tmp_path / "mask.png")])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["valid_pixels"] > 0
    with Image.open(out) as res:
        assert res.size == (96, 72)
    with Image.open(tmp_path / "mask.png") as m:
        assert np.asarray(m).max() == 255


def test_prep_stereo_input_roundtrip(tmp_path, capsys):
    img = np.random.default_rng(5).integers(0, 255, (20, 12, 3)).astype(np.uint8)
    img[:2] = 0
    img[-2:] = 0
    mask = np.zeros((20, 12), np.uint8)
    mask[2:18, :] = 255
    Image.fromarray(img).save(tmp_path / "in.png")
    Image.fromarray(mask).save(tmp_path / "mask.png")
    rec = tmp_path / "rec.json"
    assert main(["prep-stereo-input", "--image", str(tmp_path / "in.png"),
                 "--mask", str(tmp_path / "mask.png"),
                 "--output", str(tmp_path / "rot.png"),
                 "--record", str(rec)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["height"] == 12 and doc["width"] == 16

    assert main(["prep-stereo-input", "--undo",
                 "--image", str(tmp_path / "rot.png"),
                 "--record", str(rec),
                 "--output", str(tmp_path / "back.png")]) == 0
    with Image.open(tmp_path / "back.png") as back:
        restored = np.asarray(back)
    assert restored.shape == img.shape
    np.testing.assert_array_equal(restored[2:18], img[2:18])


def test_gen_stereo_thread_count_is_bit_identical(tmp_path):
    out1 = _gen(tmp_path, out_name="t1", threads=1)
    out8 = _gen(tmp_path, out_name="t8", threads=8)
    index = json.loads((out1 / "samples_index.json").read_text())
    for entry in index["samples"]:
        for name in ("rgb_ref.png", "rgb_sec.png", "depth_ref.png",
                     "disparity_ref.pfm"):
            a = (out1 / "samples" / entry["sample_id"] / name).read_bytes()
            b = (out8 / "samples" / entry["sample_id"] / name).read_bytes()
            assert a == b, f"{entry['sample_id']}/{name} differs"
