"""End-to-end command-line behavior, including exit codes."""

import json

import numpy as np
import pytest

from segfuse.checkpoint import load_checkpoint
from segfuse.cli import main
from segfuse.formats import read_manifest, read_segemb, write_segemb

MODEL_CONFIG = {"d_in": 8, "d_model": 16, "n_heads": 2, "n_layers_embed": 1,
                "n_layers_ssm": 1, "d_ffn": 32, "max_segments": 16}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Dataset + config + trained checkpoint shared by the read-only tests."""
    root = tmp_path_factory.mktemp("cli")
    assert main(["gen-data", "--out", str(root / "data"), "--tracks", "15",
                 "--dim", "8", "--seg-min", "6", "--seg-max", "14",
                 "--seed", "7"]) == 0
    config = root / "config.json"
    config.write_text(json.dumps(MODEL_CONFIG))
    assert main(["train", "--data", str(root / "data" / "manifest.jsonl"),
                 "--config", str(config), "--out", str(root / "model.ckpt"),
                 "--epochs", "3", "--lr", "1e-3", "--patience", "5",
                 "--seed", "1"]) == 0
    return root


@pytest.fixture(scope="module")
def bar_workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_bars")
    assert main(["gen-data", "--out", str(root / "data"), "--tracks", "6",
                 "--dim", "8", "--seg-min", "5", "--seg-max", "9",
                 "--seed", "3", "--bar-level"]) == 0
    return root


def _run(capsys, argv):
    rc = main(argv)
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


# ---------------------------------------------------------------------------
# gen-data

def test_gen_data_summary_and_determinism(tmp_path, capsys):
    argv = ["gen-data", "--tracks", "5", "--dim", "8", "--seg-min", "5",
            "--seg-max", "9", "--seed", "2"]
    rc, out, _ = _run(capsys, argv + ["--out", str(tmp_path / "a")])
    assert rc == 0
    summary = json.loads(out)
    assert summary["tracks_per_class"] == 5
    assert sum(summary["splits"].values()) == 10
    rc, _, _ = _run(capsys, argv + ["--out", str(tmp_path / "b")])
    assert rc == 0
    assert (tmp_path / "a" / "manifest.jsonl").read_bytes() == \
        (tmp_path / "b" / "manifest.jsonl").read_bytes()


def test_gen_data_bar_level_emits_downbeats(bar_workdir):
    downbeats = list((bar_workdir / "data").glob("*.downbeats"))
    assert len(downbeats) == 12


# ---------------------------------------------------------------------------
# train / eval

def test_train_writes_artifacts(workdir, capsys):
    # rerun a fresh short training to capture its summary output
    out_ckpt = workdir / "retrain.ckpt"
    rc, out, _ = _run(capsys, [
        "train", "--data", str(workdir / "data" / "manifest.jsonl"),
        "--config", str(workdir / "config.json"), "--out", str(out_ckpt),
        "--epochs", "2", "--lr", "1e-3", "--seed", "1"])
    assert rc == 0
    summary = json.loads(out)
    assert summary["epochs_run"] == 2
    assert summary["stop_reason"] in ("max_epochs", "patience")
    params = load_checkpoint(out_ckpt)
    assert params.config.d_in == 8
    csv = workdir / "retrain.history.csv"
    assert csv.read_text().splitlines()[0] == "epoch,train_loss,val_loss,val_acc"
    history = json.loads((workdir / "retrain.history.json").read_text())
    assert len(history["train_loss"]) == 2


def test_eval_reports_metrics_and_repeats_identically(workdir, capsys):
    argv = ["eval", "--data", str(workdir / "data" / "manifest.jsonl"),
            "--ckpt", str(workdir / "model.ckpt"), "--split", "test"]
    rc1, out1, _ = _run(capsys, argv)
    rc2, out2, _ = _run(capsys, argv)
    assert rc1 == rc2 == 0
    assert out1 == out2
    report = json.loads(out1)
    assert set(report) == {"accuracy", "precision", "recall", "f1", "auc",
                           "specificity", "tp", "fp", "tn", "fn"}
    assert report["tp"] + report["fp"] + report["tn"] + report["fn"] == 4


def test_eval_missing_checkpoint_exits_2(workdir, capsys):
    rc, _, err = _run(capsys, [
        "eval", "--data", str(workdir / "data" / "manifest.jsonl"),
        "--ckpt", str(workdir / "nope.ckpt")])
    assert rc == 2
    assert "error:" in err


# ---------------------------------------------------------------------------
# infer

def test_infer_segment_level(workdir, capsys):
    entry = read_manifest(workdir / "data" / "manifest.jsonl")[0]
    track = workdir / "data" / entry.path
    rc, out, _ = _run(capsys, ["infer", "--ckpt", str(workdir / "model.ckpt"),
                               "--input", str(track)])
    assert rc == 0
    result = json.loads(out)
    assert result["track_id"] == entry.track_id
    assert 0.0 < result["prob_fake"] < 1.0
    assert result["label"] == int(result["prob_fake"] >= 0.5)
    assert result["n_segments_valid"] == read_segemb(track).shape[0]


def test_infer_bar_level_with_downbeats(workdir, bar_workdir, capsys):
    entry = read_manifest(bar_workdir / "data" / "manifest.jsonl")[0]
    rc, out, _ = _run(capsys, [
        "infer", "--ckpt", str(workdir / "model.ckpt"),
        "--input", str(bar_workdir / "data" / entry.path), "--from-raw",
        "--downbeats", str(bar_workdir / "data" / f"{entry.track_id}.downbeats")])
    assert rc == 0
    result = json.loads(out)
    n_bars = read_segemb(bar_workdir / "data" / entry.path).shape[0]
    assert result["n_segments_valid"] == n_bars // 4


def test_infer_from_raw_requires_downbeats(workdir, capsys):
    entry = read_manifest(workdir / "data" / "manifest.jsonl")[0]
    rc, _, err = _run(capsys, ["infer", "--ckpt", str(workdir / "model.ckpt"),
                               "--input", str(workdir / "data" / entry.path),
                               "--from-raw"])
    assert rc == 2
    assert "--downbeats" in err


def test_infer_bad_magic_exits_2(workdir, tmp_path, capsys):
    bad = tmp_path / "bad.segemb"
    bad.write_bytes(b"NOTMAGIC" + b"\x00" * 32)
    rc, _, err = _run(capsys, ["infer", "--ckpt", str(workdir / "model.ckpt"),
                               "--input", str(bad)])
    assert rc == 2
    assert "magic" in err


def test_infer_dimension_mismatch_exits_2(workdir, tmp_path, capsys):
    wrong = tmp_path / "wrong.segemb"
    write_segemb(wrong, np.ones((5, 9), dtype=np.float32))
    rc, _, err = _run(capsys, ["infer", "--ckpt", str(workdir / "model.ckpt"),
                               "--input", str(wrong)])
    assert rc == 2


# ---------------------------------------------------------------------------
# export-gates

def test_export_gates_csv(workdir, capsys):
    out_csv = workdir / "gates.csv"
    rc, out, _ = _run(capsys, [
        "export-gates", "--ckpt", str(workdir / "model.ckpt"),
        "--data", str(workdir / "data" / "manifest.jsonl"),
        "--split", "test", "--out", str(out_csv)])
    assert rc == 0
    summary = json.loads(out)
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "track_id,label,segment_index,mean_gate"
    assert summary["n_rows"] == len(lines) - 1
    assert summary["direction"] in ("fake_gate_lower", "fake_gate_higher")

    manifest_dir = workdir / "data"
    expected_rows = 0
    for e in read_manifest(manifest_dir / "manifest.jsonl"):
        if e.split == "test":
            expected_rows += min(read_segemb(manifest_dir / e.path).shape[0], 16)
    assert summary["n_rows"] == expected_rows

    ids = []
    for line in lines[1:]:
        track_id, label, idx, gate = line.split(",")
        assert 0.0 < float(gate) < 1.0
        assert label in ("0", "1")
        ids.append(track_id)
    assert ids == sorted(ids)


def test_export_gates_rejects_non_gated(workdir, tmp_path, capsys):
    config = tmp_path / "concat.json"
    config.write_text(json.dumps({**MODEL_CONFIG, "fusion_mode": "concat"}))
    ckpt = tmp_path / "concat.ckpt"
    assert main(["train", "--data", str(workdir / "data" / "manifest.jsonl"),
                 "--config", str(config), "--out", str(ckpt),
                 "--epochs", "1", "--lr", "1e-3", "--seed", "0"]) == 0
    capsys.readouterr()
    rc, _, err = _run(capsys, [
        "export-gates", "--ckpt", str(ckpt),
        "--data", str(workdir / "data" / "manifest.jsonl"),
        "--out", str(tmp_path / "gates.csv")])
    assert rc == 2
    assert "no gate" in err


# ---------------------------------------------------------------------------
# config handling

def test_unknown_config_key_exits_2(workdir, tmp_path, capsys):
    config = tmp_path / "typo.json"
    config.write_text(json.dumps({**MODEL_CONFIG, "dmodel": 32}))
    rc, _, err = _run(capsys, [
        "train", "--data", str(workdir / "data" / "manifest.jsonl"),
        "--config", str(config), "--out", str(tmp_path / "m.ckpt"),
        "--epochs", "1"])
    assert rc == 2
    assert "'dmodel'" in err


def test_bad_train_flag_exits_2(workdir, tmp_path, capsys):
    rc, _, err = _run(capsys, [
        "train", "--data", str(workdir / "data" / "manifest.jsonl"),
        "--config", str(workdir / "config.json"),
        "--out", str(tmp_path / "m.ckpt"), "--epochs", "0"])
    assert rc == 2
    assert "epochs" in err


# ---------------------------------------------------------------------------
# ablate

def test_ablate_fusion_modes(workdir, capsys):
    rc, out, _ = _run(capsys, [
        "ablate", "--data", str(workdir / "data" / "manifest.jsonl"),
        "--config", str(workdir / "config.json"), "--modes", "gated,concat",
        "--epochs", "2", "--lr", "1e-3", "--seed", "1"])
    assert rc == 0
    result = json.loads(out)
    assert [row["mode"] for row in result["fusion"]] == ["gated", "concat"]
    for row in result["fusion"]:
        assert 0.0 <= row["metrics"]["accuracy"] <= 1.0


def test_ablate_segmentation_strategies(bar_workdir, capsys, tmp_path):
    table = tmp_path / "ablation.json"
    rc, out, _ = _run(capsys, [
        "ablate", "--data", str(bar_workdir / "data" / "manifest.jsonl"),
        "--segmentation", "fourbar,fixed", "--epochs", "1", "--lr", "1e-3",
        "--seed", "0", "--out", str(table)])
    assert rc == 0
    result = json.loads(out)
    assert [row["segmentation"] for row in result["segmentation"]] == \
        ["fourbar", "fixed"]
    assert json.loads(table.read_text()) == result


def test_ablate_without_axes_exits_2(workdir, capsys):
    rc, _, err = _run(capsys, [
        "ablate", "--data", str(workdir / "data" / "manifest.jsonl")])
    assert rc == 2
    assert "nothing to ablate" in err


def test_ablate_unknown_mode_exits_2(workdir, capsys):
    rc, _, err = _run(capsys, [
        "ablate", "--data", str(workdir / "data" / "manifest.jsonl"),
        "--modes", "blend"])
    assert rc == 2
    assert "blend" in err
