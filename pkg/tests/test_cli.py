import csv
import json
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from leafdx.cli import main
from leafdx.dataset_io import read_feature_table, write_feature_table
from leafdx.pipeline import ConfigError, PipelineConfig, analyze_image, rotated_features
from leafdx.synthetic import gaussian_blobs, leaf_image, write_leaf_dataset
from leafdx.trainers import ALGORITHMS


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, (json.loads(out.out) if code == 0 else None), out.err


@pytest.fixture(scope="module")
def leaf_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("leaves")
    write_leaf_dataset(root, per_class=4, size=32, seed=0)
    return root


@pytest.fixture(scope="module")
def blob_csv(tmp_path_factory):
    p = tmp_path_factory.mktemp("blobs") / "blobs.csv"
    write_feature_table(gaussian_blobs(n=40, seed=0), p)
    return p


def test_config_round_trip(tmp_path):
    cfg = PipelineConfig(lesion=2, augment="all", trainer={"algorithm": "lm", "max_epochs": 5})
    cfg.save(tmp_path / "c.json")
    back = PipelineConfig.load(tmp_path / "c.json")
    assert back == cfg and back.trainer.algorithm == "LM"
    assert PipelineConfig.from_dict(PipelineConfig().to_dict()) == PipelineConfig()


@pytest.mark.parametrize("bad", [{"augment": "some"}, {"lesion": "left"}, {"k_max": 1}, {"nope": 1},
                                 {"trainer": {"algorithm": "SGD"}}])
def test_config_rejects(bad):
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict(bad)


def test_rotated_rows_rot180_identical():
    img, _ = leaf_image(32, leaf_radius=1.0, seed=4)
    a = analyze_image(img, PipelineConfig())
    rot = dict(rotated_features(a, 8))
    assert np.array_equal(rot[180], a.features)


def test_extract_rows_and_flags(capsys, tmp_path, leaf_root):
    code, res, _ = run(capsys, "extract", "--dataset", leaf_root, "--output-dir", tmp_path)
    assert code == 0 and res["rows"] == 12 and res["augmented_rows"] == 0
    code, res, _ = run(capsys, "extract", "--dataset", leaf_root, "--output-dir", tmp_path,
                       "--augment", "all", "--features", tmp_path / "aug.csv")
    assert code == 0 and res["rows"] == 48 and res["augmented_rows"] == 36
    rows = read_feature_table(tmp_path / "aug.csv")
    assert [s.source_id for s in rows[:4]] == ["brown_spot/000.png"] + [
        f"brown_spot/000.png#rot{d}" for d in (90, 180, 270)]


def test_extract_empty_dataset(capsys, tmp_path):
    (tmp_path / "empty").mkdir()
    code, _, err = run(capsys, "extract", "--dataset", tmp_path / "empty", "--output-dir", tmp_path)
    assert code == 2 and "no classes found" in err


def test_extract_skips_bad_file(capsys, tmp_path, leaf_root):
    import shutil
    root = tmp_path / "ds"
    shutil.copytree(leaf_root, root)
    (root / "dark_spot" / "zz.png").write_bytes(b"junk")
    code, res, _ = run(capsys, "extract", "--dataset", root, "--output-dir", tmp_path)
    assert code == 0 and res["rows"] == 12 and len(res["skipped"]) == 1


def test_extract_parallel_matches_sequential(capsys, tmp_path, leaf_root):
    run(capsys, "extract", "--dataset", leaf_root, "--features", tmp_path / "a.csv")
    run(capsys, "extract", "--dataset", leaf_root, "--features", tmp_path / "b.csv", "--jobs", 2)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_train_and_classify_on_leaf_corpus(capsys, tmp_path, leaf_root):
    run(capsys, "extract", "--dataset", leaf_root, "--output-dir", tmp_path)
    code, res, _ = run(capsys, "train", "--output-dir", tmp_path, "--hidden", 5, "--epochs", 200)
    assert code == 0 and res["train_accuracy"] == 1.0
    for cls in ("brown_spot", "dark_spot", "rust_spot"):
        code, out, _ = run(capsys, "classify", "--model", tmp_path / "model.json",
                           leaf_root / cls / "001.png")
        assert code == 0 and out["class_name"] == cls
        assert len(out["features"]) == 13 and out["clusters"]["k"] >= 2


def test_train_br_on_blobs(capsys, tmp_path, blob_csv):
    code, res, _ = run(capsys, "train", "--features", blob_csv, "--output-dir", tmp_path,
                       "--algorithm", "br", "--epochs", 100)
    assert code == 0
    assert res["stop_reason"] in ("goal", "min_gradient", "max_epochs") and res["train_accuracy"] == 1.0
    report = json.loads((tmp_path / "report.json").read_text())
    assert {"effective_parameters", "alpha", "beta", "loss_history"} <= set(report)


def test_train_unknown_algorithm(capsys, tmp_path, blob_csv):
    code, _, err = run(capsys, "train", "--features", blob_csv, "--output-dir", tmp_path, "--algorithm", "adam")
    assert code == 2 and all(name in err for name in ALGORITHMS)


def test_train_invalid_csv(capsys, tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("F1,F2,F3,F4,F5,F6,F7,F8,F9,F10,F11,F12,F13,label,source_id\n"
                 "1,2,3,4,5,6,7,8,9,10,11,12,13,0,a\n1,2,3,4,5,6,7,8,9,oops,11,12,13,1,b\n")
    code, _, err = run(capsys, "train", "--features", p, "--output-dir", tmp_path)
    assert code == 2 and ":3:" in err and "F10" in err


def test_config_file_and_flag_override(capsys, tmp_path, blob_csv):
    cfg = PipelineConfig(features_csv=str(blob_csv), output_dir=str(tmp_path / "a"), n_hidden=3,
                         trainer={"algorithm": "SCG", "max_epochs": 5})
    cfg.save(tmp_path / "c.json")
    code, res, _ = run(capsys, "train", "--config", tmp_path / "c.json")
    assert code == 0 and res["epochs_run"] <= 5
    code, res, _ = run(capsys, "train", "--config", tmp_path / "c.json", "--epochs", 2)
    assert code == 0 and res["epochs_run"] <= 2
    assert json.loads((tmp_path / "a" / "report.json").read_text())["trainer"]["algorithm"] == "SCG"


def test_sweep_grid(capsys, tmp_path, blob_csv):
    code, res, _ = run(capsys, "sweep", "--features", blob_csv, "--output-dir", tmp_path,
                       "--trials", 2, "--epochs", 15)
    assert code == 0
    with open(tmp_path / "sweep.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["algorithm", "name", "N=5", "N=10", "N=15", "N=20"]
    assert [r[0] for r in rows[1:]] == list(ALGORITHMS)
    assert sum(len(r) - 2 for r in rows[1:]) == 40
    # every cell is the mean of its per-trial JSON
    for r in rows[1:]:
        for n, cell in zip((5, 10, 15, 20), r[2:]):
            trials = json.loads((tmp_path / "trials" / f"{r[0]}_N{n}.json").read_text())["trials"]
            assert float(cell) == pytest.approx(np.mean([t["accuracy"] for t in trials]), abs=1e-12)


def test_segment_outputs(capsys, tmp_path):
    img, truth = leaf_image(32, leaf_radius=1.0, seed=1)
    Image.fromarray(img.pixels).save(tmp_path / "leaf.png")
    code, res, _ = run(capsys, "segment", tmp_path / "leaf.png", "--output-dir", tmp_path)
    assert code == 0 and {"k", "centers", "lesion_cluster", "wcss"} <= set(res)
    mask = np.asarray(Image.open(tmp_path / "leaf_mask.png")) > 0
    assert (mask & truth).sum() / (mask | truth).sum() >= 0.95
    code, res, _ = run(capsys, "segment", tmp_path / "leaf.png", "--output-dir", tmp_path, "--lesion", 0)
    assert code == 0 and res["lesion_cluster"] == 0


def test_classify_non_image(capsys, tmp_path, blob_csv):
    run(capsys, "train", "--features", blob_csv, "--output-dir", tmp_path, "--epochs", 2)
    (tmp_path / "x.png").write_text("plain text")
    code, _, _ = run(capsys, "classify", "--model", tmp_path / "model.json", tmp_path / "x.png")
    assert code == 2


def test_degenerate_lesion_exit_code(capsys, tmp_path, blob_csv):
    run(capsys, "train", "--features", blob_csv, "--output-dir", tmp_path, "--epochs", 2)
    Image.fromarray(np.full((1, 1, 3), 90, dtype=np.uint8)).save(tmp_path / "dot.png")
    code, _, err = run(capsys, "classify", "--model", tmp_path / "model.json", tmp_path / "dot.png")
    assert code == 3 and "lesion segmentation failed" in err


def test_help_lists_commands():
    out = subprocess.run([sys.executable, "-m", "leafdx.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("extract", "train", "sweep", "classify", "segment"):
        assert cmd in out.stdout


def test_usage_error_exit_code():
    out = subprocess.run([sys.executable, "-m", "leafdx.cli", "train", "--epochs", "many"],
                         capture_output=True, text=True)
    assert out.returncode == 2
