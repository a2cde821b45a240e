"""Downbeat- and window-based segmentation, plus fixed-length normalization.

Tracks arrive as variable-length segment sequences; the model wants exactly
``target`` rows (48 by default).  Shorter sequences are zero-padded at the
tail behind a boolean mask, longer ones are cropped to a contiguous window:
deterministically from the head when evaluating, at a random offset when
training (cheap augmentation).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ssm import SegmentEmbeddingSequence

_TIME_EPS = 1e-9  # float guard for "span end <= duration" comparisons


@dataclass
class DownbeatAnnotation:
    """Downbeat timestamps for one track, seconds, strictly increasing."""

    track_id: str
    downbeats: list[float]
    track_duration: float

    def __post_init__(self):
        db = [float(t) for t in self.downbeats]
        if any(b <= a for a, b in zip(db, db[1:])):
            raise ValueError(f"track {self.track_id}: downbeats must be strictly increasing")
        if db and (db[0] < 0 or db[-1] > self.track_duration + _TIME_EPS):
            raise ValueError(f"track {self.track_id}: downbeats outside [0, duration]")
        self.downbeats = db


@dataclass(frozen=True)
class SegmentSpan:
    start: float
    end: float

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(f"bad span [{self.start}, {self.end}]")


def load_downbeats(path, track_id: str | None = None,
                   track_duration: float | None = None) -> DownbeatAnnotation:
    """Read a downbeat file: one decimal timestamp per line, ascending.

    Without an explicit duration the last timestamp is taken as the end of
    the track (our annotation files close the final bar with one).
    """
    path = Path(path)
    times = [float(line) for line in path.read_text().split()]
    if not times:
        raise ValueError(f"{path}: no downbeats")
    return DownbeatAnnotation(
        track_id=track_id if track_id is not None else path.stem,
        downbeats=times,
        track_duration=track_duration if track_duration is not None else times[-1],
    )


def four_bar_spans(ann: DownbeatAnnotation, bars_per_segment: int = 4) -> list[SegmentSpan]:
    """Group consecutive bars into non-overlapping segments.

    Segment k runs from downbeat[k*B] to downbeat[(k+1)*B]; the trailing
    partial group is dropped.  Returns [] when there are too few downbeats,
    so callers can fall back to fixed windows.
    """
    if bars_per_segment < 1:
        raise ValueError(f"bars_per_segment must be >= 1, got {bars_per_segment}")
    db = ann.downbeats
    n_spans = (len(db) - 1) // bars_per_segment
    return [
        SegmentSpan(db[k * bars_per_segment], db[(k + 1) * bars_per_segment])
        for k in range(n_spans)
    ]


def fixed_window_spans(track_duration: float, window: float, hop: float) -> list[SegmentSpan]:
    """Sliding windows [k*hop, k*hop + window] while the end fits the track."""
    if window <= 0 or hop <= 0:
        raise ValueError("window and hop must be positive")
    spans = []
    k = 0
    while k * hop + window <= track_duration + _TIME_EPS:
        spans.append(SegmentSpan(k * hop, k * hop + window))
        k += 1
    return spans


def pool_bars(bar_embeddings: np.ndarray, downbeats: list[float],
              spans: list[SegmentSpan]) -> np.ndarray:
    """Mean-pool per-bar embeddings into one embedding per span.

    Bar k covers [downbeats[k], downbeats[k+1]); it belongs to a span when
    its midpoint falls inside.  Spans that catch no bar are skipped.
    """
    mids = np.array([(a + b) / 2.0 for a, b in zip(downbeats, downbeats[1:])])
    if len(mids) != len(bar_embeddings):
        raise ValueError(
            f"{len(bar_embeddings)} bar embeddings but {len(mids)} bars in the annotation")
    pooled = []
    for span in spans:
        inside = (mids >= span.start - _TIME_EPS) & (mids < span.end - _TIME_EPS)
        if inside.any():
            pooled.append(bar_embeddings[inside].mean(axis=0))
    if not pooled:
        raise ValueError("no span contains any bar")
    return np.stack(pooled).astype(bar_embeddings.dtype)


def pad_or_crop(seq: SegmentEmbeddingSequence, target: int = 48, mode: str = "eval",
                rng: np.random.Generator | None = None):
    """Normalize to exactly ``target`` rows; returns (sequence, mask).

    Pads with zero rows at the tail (mask False there) or crops a contiguous
    window: the head in eval mode, a uniformly random offset in train mode.
    """
    if target < 1:
        raise ValueError(f"target must be >= 1, got {target}")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if seq.n_valid == 0:
        raise ValueError(f"track {seq.track_id}: no valid segments to pad or crop")

    valid = seq.embeddings[: seq.n_valid]
    n, d = valid.shape
    if n >= target:
        if n == target:
            offset = 0
        elif mode == "eval":
            offset = 0
        else:
            if rng is None:
                raise ValueError("train-mode crop needs a Generator for the offset")
            offset = int(rng.integers(0, n - target + 1))
        out = valid[offset : offset + target].copy()
        n_valid = target
    else:
        out = np.zeros((target, d), dtype=valid.dtype)
        out[:n] = valid
        n_valid = n

    normalized = SegmentEmbeddingSequence(
        track_id=seq.track_id, embeddings=out, label=seq.label, n_valid=n_valid)
    return normalized, normalized.valid_mask()
