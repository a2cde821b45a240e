"""Span construction, bar pooling, and fixed-length normalization."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segfuse.segmentation import (
    DownbeatAnnotation,
    SegmentSpan,
    fixed_window_spans,
    four_bar_spans,
    load_downbeats,
    pad_or_crop,
    pool_bars,
)
from segfuse.ssm import SegmentEmbeddingSequence


def _ann(downbeats, duration=None):
    duration = duration if duration is not None else downbeats[-1]
    return DownbeatAnnotation(track_id="t", downbeats=list(downbeats),
                              track_duration=duration)


def test_downbeats_must_increase():
    with pytest.raises(ValueError):
        _ann([0.0, 2.0, 2.0])
    with pytest.raises(ValueError):
        _ann([0.0, 5.0], duration=3.0)


def test_span_validation():
    SegmentSpan(0.0, 1.0)
    with pytest.raises(ValueError):
        SegmentSpan(2.0, 1.0)
    with pytest.raises(ValueError):
        SegmentSpan(-1.0, 1.0)


def test_four_bar_spans_groups_and_drops_partial():
    ann = _ann([0, 2, 4, 6, 8, 10, 12, 14, 16, 18])  # 9 bars
    spans = four_bar_spans(ann)
    assert [(s.start, s.end) for s in spans] == [(0, 8), (8, 16)]
    # fewer downbeats than one group needs
    assert four_bar_spans(_ann([0, 2, 4, 6])) == []
    assert len(four_bar_spans(ann, bars_per_segment=3)) == 3
    with pytest.raises(ValueError):
        four_bar_spans(ann, bars_per_segment=0)


def test_fixed_window_exact_example():
    spans = [(s.start, s.end) for s in fixed_window_spans(15.0, 10.0, 2.5)]
    assert spans == [(0.0, 10.0), (2.5, 12.5), (5.0, 15.0)]


def test_fixed_window_validation_and_fit():
    assert fixed_window_spans(9.9, 10.0, 2.5) == []
    assert len(fixed_window_spans(10.0, 10.0, 2.5)) == 1
    with pytest.raises(ValueError):
        fixed_window_spans(10.0, 0.0, 2.5)
    with pytest.raises(ValueError):
        fixed_window_spans(10.0, 10.0, -1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(1.0, 500.0), st.floats(0.5, 30.0), st.floats(0.5, 10.0))
def test_fixed_window_properties(duration, window, hop):
    spans = fixed_window_spans(duration, window, hop)
    for k, s in enumerate(spans):
        assert s.end <= duration + 1e-6
        assert abs((s.end - s.start) - window) < 1e-9
        assert abs(s.start - k * hop) < 1e-9


def test_load_downbeats(tmp_path):
    p = tmp_path / "track.downbeats"
    p.write_text("0.0\n1.5\n3.0\n4.5\n")
    ann = load_downbeats(p)
    assert ann.track_id == "track"
    assert ann.downbeats == [0.0, 1.5, 3.0, 4.5]
    assert ann.track_duration == 4.5
    (tmp_path / "empty.downbeats").write_text("")
    with pytest.raises(ValueError):
        load_downbeats(tmp_path / "empty.downbeats")


def test_pool_bars_by_midpoint():
    downbeats = [0.0, 2.0, 4.0, 6.0, 8.0]
    bars = np.arange(8, dtype=np.float32).reshape(4, 2)
    spans = [SegmentSpan(0.0, 4.0), SegmentSpan(4.0, 8.0)]
    pooled = pool_bars(bars, downbeats, spans)
    np.testing.assert_allclose(pooled, [[1.0, 2.0], [5.0, 6.0]])
    # span catching no bar midpoint is skipped
    pooled = pool_bars(bars, downbeats, [SegmentSpan(0.0, 4.0), SegmentSpan(7.9, 8.0)])
    assert pooled.shape == (1, 2)
    with pytest.raises(ValueError):
        pool_bars(bars, [0.0, 2.0], spans)  # bar count mismatch
    with pytest.raises(ValueError):
        pool_bars(bars, downbeats, [SegmentSpan(100.0, 101.0)])


def _seq(n, d=3, n_valid=None):
    emb = np.arange(n * d, dtype=np.float32).reshape(n, d)
    return SegmentEmbeddingSequence(track_id="t", embeddings=emb, label=0,
                                    n_valid=n_valid if n_valid is not None else n)


def test_pad_short_sequences():
    out, mask = pad_or_crop(_seq(3), target=5)
    assert out.embeddings.shape == (5, 3)
    assert out.n_valid == 3
    np.testing.assert_array_equal(mask, [True, True, True, False, False])
    np.testing.assert_array_equal(out.embeddings[3:], np.zeros((2, 3)))
    np.testing.assert_array_equal(out.embeddings[:3], _seq(3).embeddings)
    assert out.label == 0


def test_crop_eval_takes_head():
    out, mask = pad_or_crop(_seq(7), target=4, mode="eval")
    assert out.n_valid == 4 and mask.all()
    np.testing.assert_array_equal(out.embeddings, _seq(7).embeddings[:4])


def test_crop_train_uses_random_offset():
    rng = np.random.default_rng(0)
    offsets = set()
    for _ in range(50):
        out, _ = pad_or_crop(_seq(10), target=4, mode="train", rng=rng)
        first = out.embeddings[0, 0]
        offsets.add(int(first) // 3)
        assert out.n_valid == 4
    assert offsets <= set(range(7))
    assert len(offsets) > 1  # actually random
    with pytest.raises(ValueError):
        pad_or_crop(_seq(10), target=4, mode="train")  # rng required


def test_pad_or_crop_validation():
    with pytest.raises(ValueError):
        pad_or_crop(_seq(5), target=0)
    with pytest.raises(ValueError):
        pad_or_crop(_seq(5), target=4, mode="predict")
    # exact length passes through unchanged in both modes
    out, mask = pad_or_crop(_seq(4), target=4, mode="train", rng=np.random.default_rng(0))
    np.testing.assert_array_equal(out.embeddings, _seq(4).embeddings)
    assert mask.all()
