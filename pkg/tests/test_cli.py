import json

import numpy as np
import pytest

from sgl.cli import main
from sgl.core import load_raster


@pytest.fixture(scope="module")
def scene(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out", str(d / "scene.json"), "--width", "40", "--height", "40",
                 "--bands", "10", "--noise-factor", "0.1", "--seed", "1"]) == 0
    return d


def test_segment_outputs(scene, capsys):
    out = scene / "seg"
    assert main(["segment", str(scene / "scene.json"), "--out", str(out), "--k", "60", "--overlay"]) == 0
    summary = json.loads((out / "segment.json").read_text())
    a, hdr = load_raster(out / "assignment.json")
    assert hdr["dtype"] == "u32le" and a.max() + 1 == summary["count"] == hdr["count"]
    assert (out / "overlay.ppm").exists()
    assert {"count", "iterations", "energy"} <= set(summary)


def test_classify_then_eval(scene, capsys):
    out = scene / "run"
    args = ["classify", str(scene / "scene.json"), "--out", str(out), "--k", "80", "--sigma-l", "30",
            "--per-class", "3", "--seed", "2"]
    assert main(args) == 0
    printed = json.loads(capsys.readouterr().out)
    labels, hdr = load_raster(out / "labels.json")
    assert hdr["dtype"] == "u16le" and labels.shape == (40, 40)
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["hms"]["k_init"] == 80
    assert report["config"]["graph"]["sigma_l"] == 30.0
    assert "seconds" in json.loads((out / "timing.json").read_text())
    assert (out / "map.ppm").exists()
    assert main(["eval", "--pred", str(out / "labels.json"), "--gt", str(scene / "scene.json"),
                 "--train", str(out / "train.json")]) == 0
    m = json.loads(capsys.readouterr().out)
    assert m["oa"] == printed["oa"] == report["metrics"]["oa"]

    # same config and seed: byte-identical label raster and report
    out2 = scene / "run2"
    assert main(args[:3] + [str(out2)] + args[4:]) == 0
    assert (out / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
    assert (out / "labels.raw").read_bytes() == (out2 / "labels.raw").read_bytes()

    # reuse the training set explicitly
    out3 = scene / "run3"
    assert main(args[:3] + [str(out3)] + args[4:-2] + ["--train", str(out / "train.json")]) == 0
    assert (out / "labels.raw").read_bytes() == (out3 / "labels.raw").read_bytes()


def test_sweep_csv(scene, capsys):
    csv_path = scene / "sweep.csv"
    assert main(["sweep", str(scene / "scene.json"), "--k-values", "60,90", "--repetitions", "2",
                 "--sigma-l", "30", "--out", str(csv_path)]) == 0
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "k,mean_oa,std_oa,repetitions" and len(lines) == 3


def test_preset_and_config_file(scene, tmp_path):
    cfg_path = tmp_path / "cfg.json"
    out = tmp_path / "o"
    assert main(["classify", str(scene / "scene.json"), "--out", str(out), "--preset", "salinas",
                 "--k", "80", "--no-map"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["preset"] == "salinas" and report["config"]["normalize"] == "minmax"
    cfg_path.write_text(json.dumps(report["config"]))
    out2 = tmp_path / "o2"
    assert main(["classify", str(scene / "scene.json"), "--out", str(out2), "--config", str(cfg_path),
                 "--no-map"]) == 0
    assert (out / "report.json").read_bytes() == (out2 / "report.json").read_bytes()


@pytest.mark.parametrize("argv,code", [
    (["classify"], 1),
    (["frobnicate"], 1),
    (["classify", "{d}/scene.json", "--out", "{d}/x", "--kernel-beta", "2"], 1),
    (["classify", "{d}/scene.json", "--out", "{d}/x", "--k", "500"], 1),
    (["classify", "{d}/missing.json", "--out", "{d}/x"], 2),
    (["eval", "--pred", "{d}/missing.json", "--gt", "{d}/scene.json"], 2),
    (["sweep", "{d}/scene.json", "--k-values", "60", "--repetitions", "0"], 1),
])
def test_exit_codes(scene, argv, code, capsys):
    argv = [a.format(d=scene) for a in argv]
    try:
        rc = main(argv)
    except SystemExit as exc:
        rc = exc.code
    assert rc == code


def test_numerical_failure_exit_code(scene, monkeypatch):
    import sgl.pipeline as pipeline
    from sgl.errors import NumericalError

    def boom(*a, **k):
        raise NumericalError("synthetic failure")

    monkeypatch.setattr(pipeline, "lgc_solve", boom)
    assert main(["classify", str(scene / "scene.json"), "--out", str(scene / "bad"), "--k", "60"]) == 3


def test_corrupt_payload_exit_code(scene, tmp_path):
    hdr = json.loads((scene / "scene.json").read_text())
    raw = (scene / hdr["data_file"]).read_bytes()
    (tmp_path / "c.raw").write_bytes(raw[:-1])
    hdr["data_file"] = "c.raw"
    hdr["gt_file"] = str(scene / hdr["gt_file"])
    (tmp_path / "c.json").write_text(json.dumps(hdr))
    assert main(["classify", str(tmp_path / "c.json"), "--out", str(tmp_path / "o")]) == 2
