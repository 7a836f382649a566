import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from masksplitter import LabelMap, connected_components, split_masks
from masksplitter import pnm
from masksplitter.cli import read_manifest, run_cli
from masksplitter.errors import MaskSplitterError


@pytest.fixture
def two_on_one(tmp_path):
    pred = np.array([[1, 0, 1, 0], [1, 0, 1, 0]], dtype=np.uint8)
    gt = LabelMap.from_array(np.array([[1, 1, 1, 0], [1, 1, 1, 0]]))
    pnm.write_mask(tmp_path / "pred.pgm", pred)
    pnm.write_labels(tmp_path / "gt.pgm", gt)
    return tmp_path


def test_split_command(two_on_one, capsys):
    out = two_on_one / "out"
    assert run_cli(["split", "--pred", str(two_on_one / "pred.pgm"), "--gt", str(two_on_one / "gt.pgm"), "--out", str(out)]) == 0
    counts = json.loads((out / "counts.json").read_text())
    assert counts == {"n_good": 0, "n_bad_type1": 0, "n_bad_type2": 1}
    np.testing.assert_array_equal(pnm.read_mask(out / "bad2.pgm"), pnm.read_mask(two_on_one / "pred.pgm"))
    assert not pnm.read_mask(out / "good.pgm").any()


def test_split_counts_reproducible_from_emitted_masks(tmp_path):
    from masksplitter.dataset import synth_scene
    from masksplitter.masks import binarize_scores

    for seed in range(5):
        scores, gt = synth_scene(32, 32, 4, 0.6, seed, noise=0.9)
        pnm.write_mask(tmp_path / "p.pgm", binarize_scores(scores))
        pnm.write_labels(tmp_path / "g.pgm", gt)
        out = tmp_path / f"o{seed}"
        assert run_cli(["split", "--pred", str(tmp_path / "p.pgm"), "--gt", str(tmp_path / "g.pgm"), "--out", str(out)]) == 0
        counts = json.loads((out / "counts.json").read_text())
        emitted = sum(pnm.read_mask(out / f"{n}.pgm").astype(np.uint8) for n in ("good", "bad1", "bad2"))
        again = split_masks(connected_components(emitted), gt)
        assert again.counts == (counts["n_good"], counts["n_bad_type1"], counts["n_bad_type2"])


def _write_manifest(tmp_path, n_images=2, perfect=True):
    rows = ["image,pred,gt"]
    for i in range(n_images):
        gt = LabelMap.from_array(np.array([[1, 1, 0, 0, 0], [1, 1, 0, 2, 2], [0, 0, 0, 2, 2]]))
        pnm.write_labels(tmp_path / f"gt{i}.pgm", gt)
        pred = (gt.labels > 0) if perfect else (gt.labels == 1)
        pnm.write_mask(tmp_path / f"pred{i}.pgm", pred.astype(np.uint8))
        rows.append(f"img{i}.png,pred{i}.pgm,gt{i}.pgm")
    path = tmp_path / "run.csv"
    path.write_text("\n".join(rows) + "\n")
    return path


def test_eval_perfect(tmp_path, capsys):
    manifest = _write_manifest(tmp_path)
    report = tmp_path / "report.csv"
    assert run_cli(["eval", "--manifest", str(manifest), "--thresholds", "0.5,0.7,sweep", "--out", str(report)]) == 0
    out = capsys.readouterr().out
    assert "AP@0.5:0.95" in out and out.count("1.000") == 3
    rows = list(csv.reader(report.open()))
    assert rows[0] == ["run", "AP@0.5", "AP@0.7", "AP@0.5:0.95"]
    assert rows[1] == ["run", "1.000000", "1.000000", "1.000000"]


def test_eval_multiple_runs(tmp_path, capsys):
    a = tmp_path / "a"
    b = tmp_path / "b"
    a.mkdir()
    b.mkdir()
    ma, mb = _write_manifest(a), _write_manifest(b, perfect=False)
    report = tmp_path / "r.csv"
    assert run_cli(["eval", "--manifest", str(ma), "--name", "full", "--manifest", str(mb), "--name", "half", "--out", str(report)]) == 0
    rows = list(csv.reader(report.open()))
    assert [r[0] for r in rows[1:]] == ["full", "half"]
    assert float(rows[2][1]) < 1.0


def test_eval_with_score_files(tmp_path):
    manifest = _write_manifest(tmp_path, n_images=1)
    (tmp_path / "s0.txt").write_text("0.9\n0.1\n")
    manifest.write_text("img0.png,pred0.pgm,gt0.pgm,s0.txt\n")
    assert run_cli(["eval", "--manifest", str(manifest), "--out", str(tmp_path / "r.csv")]) == 0


def test_manifest_validation(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("a.png,p.pgm,g.pgm\na.png,q.pgm,h.pgm\n")
    with pytest.raises(MaskSplitterError, match="duplicate"):
        read_manifest(path)
    path.write_text("a.png,p.pgm\n")
    with pytest.raises(MaskSplitterError):
        read_manifest(path)
    path.write_text("image,pred,gt\n")
    with pytest.raises(MaskSplitterError):
        read_manifest(path)


def test_train_toy_grad_check(capsys):
    assert run_cli(["train-toy", "--grad-check", "--seed", "7", "--size", "6,6"]) == 0
    line = capsys.readouterr().out.strip().splitlines()[0]
    assert float(line.split(":")[1]) < 1e-5


def test_train_toy_curve(tmp_path):
    curve = tmp_path / "curve.csv"
    assert run_cli(["train-toy", "--seed", "0", "--size", "8,8", "--iters", "20", "--out", str(curve)]) == 0
    rows = list(csv.reader(curve.open()))
    assert rows[0] == ["step", "l_gs", "l_good", "l_badcows", "l_badpreds", "total"]
    assert len(rows) == 22
    values = [float(v) for v in rows[1][1:]]
    assert values[4] == values[0] + values[1] + values[2] + values[3]


def test_isodata_command(tmp_path, capsys):
    pnm.write_image(tmp_path / "f.pgm", np.array([[0, 0, 200, 200]], dtype=np.uint8))
    assert run_cli(["isodata", "--image", str(tmp_path / "f.pgm")]) == 0
    assert capsys.readouterr().out.strip() == "100"


def test_isodata_constant_image_fails(tmp_path, capsys):
    pnm.write_image(tmp_path / "f.pgm", np.full((2, 2), 9, dtype=np.uint8))
    assert run_cli(["isodata", "--image", str(tmp_path / "f.pgm")]) == 1
    assert "error" in capsys.readouterr().err


def test_synth_then_crop(tmp_path):
    scene = tmp_path / "scene"
    assert run_cli(["synth", "--seed", "1", "--n", "3", "--occlusion", "0", "--size", "60,80", "--out", str(scene)]) == 0
    for name in ("object.pfm", "background.pfm", "labels.pgm", "pred.pgm", "frame.pgm"):
        assert (scene / name).exists()
    crops = tmp_path / "crops"
    assert run_cli(["crop", "--frame", str(scene / "frame.pgm"), "--labels", str(scene / "labels.pgm"), "--size", "40", "--out", str(crops)]) == 0
    for i in range(1, 4):
        img = pnm.read_image(crops / f"crop_{i:05d}.pgm")
        lab = pnm.read_labels(crops / f"crop_{i:05d}_labels.pgm")
        assert img.shape == lab.shape == (40, 40)


def test_usage_errors_exit_2(capsys):
    assert run_cli(["frobnicate"]) == 2
    assert run_cli(["split", "--bogus"]) == 2
    assert run_cli(["train-toy", "--size", "abc"]) == 2
    assert "usage" in capsys.readouterr().err


def test_missing_file_exits_1(tmp_path):
    assert run_cli(["isodata", "--image", str(tmp_path / "nope.pgm")]) == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "masksplitter.cli", "isodata", "--image", str(tmp_path / "missing.pgm")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 1
