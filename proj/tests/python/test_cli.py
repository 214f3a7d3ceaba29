"""CLI surface tests driven through the installed binary."""

import json
import os
import subprocess

import pytest

BIN = os.environ.get("MILTHROW_BIN")

pytestmark = pytest.mark.skipif(not BIN, reason="MILTHROW_BIN not set")


def run(*args, expect=0):
    proc = subprocess.run([BIN, *map(str, args)], capture_output=True, text=True)
    assert proc.returncode == expect, proc.stderr
    return proc


def test_unknown_flag_exits_1_with_usage_on_stderr(tmp_path):
    proc = subprocess.run([BIN, "train", "--bogus"], capture_output=True, text=True)
    assert proc.returncode == 1
    assert proc.stderr


def test_help_lists_defaults():
    out = run("train", "--help").stdout
    for flag in ("--lambda1", "--lambda2", "--lambda3", "--dropout", "--beta1", "--rho", "--seed"):
        assert flag in out
    assert "8e-05" in out or "8e-5" in out  # lambda defaults are printed


def test_synth_train_eval_predict_pipeline(tmp_path):
    corpus = tmp_path / "corpus"
    run("synth", "--out", corpus, "--dim", 6, "--normal", 5, "--anomalous", 5,
        "--segments", 8, "--separation", 2.5, "--seed", 4)
    assert (corpus / "run_manifest.json").exists()

    run("ingest", "--manifest", corpus / "manifest.csv")

    out = tmp_path / "run"
    run("train", "--manifest", corpus / "manifest.csv", "--out", out,
        "--iterations", 60, "--seed", 9, "--hidden", 8, 4, "--segments", 8)
    assert (out / "final.ckpt").exists()
    assert (out / "trainlog.csv").exists()
    run_manifest = json.loads((out / "run_manifest.json").read_text())
    assert run_manifest["config"]["iterations"] == 60
    assert run_manifest["tool_version"]

    eval_out = tmp_path / "eval"
    run("eval", "--manifest", corpus / "manifest.csv", "--checkpoint", out / "final.ckpt",
        "--out", eval_out, "--segments", 8)
    report = json.loads((eval_out / "report.json").read_text())
    assert set(report) == {"auc", "far_percent", "n_videos", "n_frames"}
    assert 0.0 <= report["auc"] <= 1.0
    assert (eval_out / "series" / "roc.csv").exists()

    pred_out = tmp_path / "pred"
    run("predict", "--manifest", corpus / "manifest.csv", "--checkpoint", out / "final.ckpt",
        "--video-id", "anom_0000", "--out", pred_out, "--segments", 8)
    lines = (pred_out / "anom_0000.csv").read_text().splitlines()
    assert lines[0] == "frame,score,label"
    assert len(lines) == 1 + 8 * 16  # header + one row per frame


def test_validation_failure_exits_1(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("video_id,split,label,n_frames,intervals,feature_paths\n"
                   "v,test,anomalous,200,120-100,features.csv\n")
    proc = subprocess.run([BIN, "ingest", "--manifest", str(bad)], capture_output=True, text=True)
    assert proc.returncode == 1
    assert "interval start >= end" in proc.stderr


def test_gradcheck_passes():
    proc = run("gradcheck", "--dim", 5, "--seed", 3, "--configs", 10)
    assert "max relative error" in proc.stdout


def write_corpus(root, dim, value):
    """Two-video corpus with constant features; same layout for any dim."""
    root.mkdir(parents=True)
    rows = [("a", "train", "anomalous", "64", "", "a.csv"),
            ("n", "train", "normal", "64", "", "n.csv"),
            ("t", "test", "anomalous", "64", "0-16", "t.csv"),
            ("u", "test", "normal", "64", "", "u.csv")]
    lines = ["video_id,split,label,n_frames,intervals,feature_paths"]
    lines += [",".join(r) for r in rows]
    (root / "manifest.csv").write_text("\n".join(lines) + "\n")
    for vid, _, _, _, _, feat in rows:
        row = ",".join([str(value)] * dim)
        body = "\n".join(row for _ in range(4))
        (root / feat).write_text(f"{vid},{dim},4\n{body}\n")


def test_concat_joins_aligned_corpora(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    write_corpus(a, 4, 1.5)
    write_corpus(b, 3, -2.0)
    joined = tmp_path / "joined"
    run("concat", "--manifests", a / "manifest.csv", b / "manifest.csv", "--out", joined)
    proc = run("ingest", "--manifest", joined / "manifest.csv")
    assert "dim: 7" in proc.stdout
    first_clip = (joined / "features" / "a.csv").read_text().splitlines()[1]
    assert first_clip == "1.5,1.5,1.5,1.5,-2,-2,-2"
