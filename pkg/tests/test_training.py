"""Training loop: splits, determinism, early stopping, failure modes."""

import numpy as np
import pytest

from segfuse.formats import ManifestEntry, read_manifest, write_manifest
from segfuse.model import FstConfig, init_params
from segfuse.synthgen import SynthSpec, gen_dataset
from segfuse.tensor import NonFiniteError
from segfuse.training import (
    TrainConfig,
    TrainHistory,
    _val_stats,
    evaluate,
    load_split,
    predict_prob,
    split_manifest,
    train,
)

TINY = FstConfig(d_in=8, d_model=16, n_heads=2, n_layers_embed=1, n_layers_ssm=1,
                 d_ffn=32, max_segments=16)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    spec = SynthSpec(n_tracks=15, d=8, seg_min=6, seg_max=14, seed=5)
    out = tmp_path_factory.mktemp("synth")
    return gen_dataset(spec, out)


# ---------------------------------------------------------------------------
# configs and history

def test_train_config_validation():
    TrainConfig(lr=0.0)  # explicitly legal
    for kwargs in ({"epochs": 0}, {"patience": 0}, {"lr": -1.0}, {"wd": -0.1},
                   {"batch_size": 0}, {"fusion_mode": "blend"}):
        with pytest.raises(ValueError):
            TrainConfig(**kwargs)


def test_history_validation():
    with pytest.raises(ValueError):
        TrainHistory(train_loss=[1.0], val_loss=[1.0, 2.0], val_acc=[0.5, 0.5],
                     best_epoch=0, stop_reason="max_epochs")
    with pytest.raises(ValueError):
        TrainHistory(train_loss=[1.0, 0.5], val_loss=[1.0, 0.5], val_acc=[0.5, 0.5],
                     best_epoch=0, stop_reason="max_epochs")  # best not the min


def test_history_csv_format(tmp_path):
    h = TrainHistory(train_loss=[0.7, 0.4], val_loss=[0.8, 0.5], val_acc=[0.5, 0.75],
                     best_epoch=1, stop_reason="max_epochs")
    path = tmp_path / "h.csv"
    h.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,train_loss,val_loss,val_acc"
    assert len(lines) == 3
    first = lines[1].split(",")
    assert first[0] == "1"  # epochs are 1-based in the CSV
    assert float(first[1]) == 0.7 and float(first[3]) == 0.5


# ---------------------------------------------------------------------------
# splitting

def _entries(n_real, n_fake):
    out = []
    for i in range(n_real):
        out.append(ManifestEntry(path=f"r{i}.segemb", track_id=f"r{i:03d}",
                                 label=0, split="train"))
    for i in range(n_fake):
        out.append(ManifestEntry(path=f"f{i}.segemb", track_id=f"f{i:03d}",
                                 label=1, split="train"))
    return out


def test_split_counts_and_stratification():
    out = split_manifest(_entries(20, 10), seed=0)
    assert [e.track_id for e in out] == [e.track_id for e in _entries(20, 10)]
    for label, n in ((0, 20), (1, 10)):
        mine = [e for e in out if e.label == label]
        counts = {s: sum(e.split == s for e in mine) for s in ("train", "val", "test")}
        assert counts["val"] == max(1, round(n / 10))
        assert counts["test"] == max(1, round(n / 10))
        assert counts["train"] == n - counts["val"] - counts["test"]


def test_split_deterministic_and_order_invariant():
    entries = _entries(12, 12)
    a = split_manifest(entries, seed=3)
    b = split_manifest(entries, seed=3)
    assert a == b
    shuffled = list(reversed(entries))
    c = split_manifest(shuffled, seed=3)
    assert {e.track_id: e.split for e in c} == {e.track_id: e.split for e in a}
    d = split_manifest(entries, seed=4)
    assert {e.track_id: e.split for e in d} != {e.track_id: e.split for e in a}


def test_split_small_class_warns():
    with pytest.warns(UserWarning, match="best-effort"):
        out = split_manifest(_entries(10, 2), seed=0)
    fake = [e.split for e in out if e.label == 1]
    assert sorted(fake) == ["train", "val"]  # no test slot with only 2 tracks


def test_split_rejects_other_ratios():
    with pytest.raises(ValueError):
        split_manifest(_entries(10, 10), seed=0, ratios=(6, 2, 2))


# ---------------------------------------------------------------------------
# training behavior

def test_lr_zero_leaves_parameters_at_init(dataset):
    tc = TrainConfig(epochs=4, lr=0.0, wd=1e-2, patience=10, seed=9)
    params, history = train(dataset, TINY, tc)
    init_ss, _ = np.random.SeedSequence(9).spawn(2)
    expected = init_params(TINY, np.random.default_rng(init_ss))
    for (n1, p1), (n2, p2) in zip(params.named_parameters(),
                                  expected.named_parameters()):
        assert n1 == n2
        np.testing.assert_array_equal(p1.data, p2.data)
    assert len(set(history.val_loss)) == 1  # frozen model, constant val loss


def test_lr_zero_stops_on_patience(dataset):
    tc = TrainConfig(epochs=50, lr=0.0, patience=3, seed=9)
    _, history = train(dataset, TINY, tc)
    assert history.stop_reason == "patience"
    assert history.best_epoch == 0
    assert history.n_epochs == 1 + 3  # first epoch improves over inf, then stalls


def test_training_is_seed_reproducible(dataset):
    tc = TrainConfig(epochs=3, lr=1e-3, patience=10, seed=11)
    p1, h1 = train(dataset, TINY, tc)
    p2, h2 = train(dataset, TINY, tc)
    assert h1.to_dict() == h2.to_dict()
    for (_, a), (_, b) in zip(p1.named_parameters(), p2.named_parameters()):
        np.testing.assert_array_equal(a.data, b.data)


def test_training_ignores_manifest_row_order(dataset, tmp_path):
    entries = read_manifest(dataset)
    reordered = tmp_path / "manifest.jsonl"
    write_manifest(reordered, list(reversed(entries)))
    for e in entries:
        (tmp_path / e.path).write_bytes((dataset.parent / e.path).read_bytes())
    tc = TrainConfig(epochs=3, lr=1e-3, patience=10, seed=11)
    _, h1 = train(dataset, TINY, tc)
    _, h2 = train(reordered, TINY, tc)
    assert h1.to_dict() == h2.to_dict()


def test_returned_params_are_the_best_epoch_snapshot(dataset):
    tc = TrainConfig(epochs=6, lr=3e-3, patience=10, seed=2)
    params, history = train(dataset, TINY, tc)
    val = load_split(dataset, "val")
    val.sort(key=lambda s: s.track_id)
    val_loss, _ = _val_stats(params, val)
    assert val_loss == history.val_loss[history.best_epoch]
    assert min(history.val_loss) == history.val_loss[history.best_epoch]


def test_fusion_mode_override(dataset):
    tc = TrainConfig(epochs=1, lr=1e-3, patience=5, seed=1, fusion_mode="concat")
    params, _ = train(dataset, TINY, tc)
    assert params.config.fusion_mode == "concat"
    names = [n for n, _ in params.named_parameters()]
    assert "fuse_proj.w" in names and "gate.w" not in names


def test_divergent_lr_raises_nonfinite(dataset):
    # layer norm rescales merely-huge activations, so the step size must be
    # large enough to overflow float32 inside a single matmul chain
    tc = TrainConfig(epochs=10, lr=1e20, wd=0.0, patience=10, seed=0)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(NonFiniteError):
            train(dataset, TINY, tc)


def test_train_requires_val_split(tmp_path, dataset):
    entries = [e for e in read_manifest(dataset) if e.split != "val"]
    manifest = tmp_path / "manifest.jsonl"
    write_manifest(manifest, entries)
    for e in entries:
        (tmp_path / e.path).write_bytes((dataset.parent / e.path).read_bytes())
    with pytest.raises(ValueError):
        train(manifest, TINY, TrainConfig(epochs=1))


# ---------------------------------------------------------------------------
# evaluation helpers

def test_predict_prob_range_and_padding(dataset):
    params = init_params(TINY, np.random.default_rng(0))
    for seq in load_split(dataset, "test"):
        p = predict_prob(params, seq)
        assert 0.0 < p < 1.0


def test_evaluate_produces_report(dataset):
    params = init_params(TINY, np.random.default_rng(0))
    report = evaluate(params, load_split(dataset, "test"))
    n = report.tp + report.fp + report.tn + report.fn
    assert n == len(load_split(dataset, "test"))
    assert 0.0 <= report.accuracy <= 1.0
    with pytest.raises(ValueError):
        evaluate(params, [])
