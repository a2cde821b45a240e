"""Synthetic segment-embedding datasets with class-structural separation.

Real tracks are built from a small set of section prototypes arranged by a
form grammar (AABA by default), so their self-similarity matrices show
repeated blocks.  Fake tracks follow a normalized random walk: locally
smooth, globally drifting, so long-range similarity decays.  Class
separation lives in that structure; per-segment marginal statistics are
matched across classes, so pooled-statistics shortcuts do not work.

Prototypes and walk points are drawn on the sphere of radius sqrt(d), which
puts squared distances between unrelated vectors near 2d.  The kernel
denominator is d, so unrelated similarity sits near exp(-2) while repeated
sections stay near 1 - the spread the structural invariants need.  Fake
segments get the same observation noise as real ones, keeping norm
fluctuations class-independent.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .formats import ManifestEntry, write_manifest, write_segemb
from .ssm import SegmentEmbeddingSequence

DEFAULT_FORM = (0, 0, 1, 0)  # AABA


@dataclass(frozen=True)
class SynthSpec:
    n_tracks: int = 300          # per class
    d: int = 32
    seg_min: int = 20
    seg_max: int = 70
    n_sections: int = 2
    form: tuple = DEFAULT_FORM   # section index per form block, stretched to fit
    noise_sigma: float = 0.1
    drift_sigma: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.n_tracks < 1:
            raise ValueError(f"n_tracks must be >= 1, got {self.n_tracks}")
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.seg_min < 4:
            raise ValueError(f"seg_min must be >= 4, got {self.seg_min}")
        if self.seg_max < self.seg_min:
            raise ValueError(f"segment range [{self.seg_min}, {self.seg_max}] is empty")
        if self.n_sections < 2:
            raise ValueError(f"n_sections must be >= 2, got {self.n_sections}")
        if self.noise_sigma <= 0 or self.drift_sigma <= 0:
            raise ValueError("noise_sigma and drift_sigma must be > 0")
        if not self.form:
            raise ValueError("form grammar is empty")
        if any(not 0 <= s < self.n_sections for s in self.form):
            raise ValueError(f"form {self.form} references sections outside "
                             f"[0, {self.n_sections})")


def _shell(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """n points on the sphere of radius sqrt(d)."""
    v = rng.standard_normal((n, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * np.sqrt(d)


def _stretch_form(form: tuple, n_segments: int) -> np.ndarray:
    """Section index per segment, form blocks scaled proportionally."""
    blocks = (np.arange(n_segments) * len(form)) // n_segments
    return np.asarray(form)[blocks]


def gen_real(rng: np.random.Generator, spec: SynthSpec,
             track_id: str = "real") -> SegmentEmbeddingSequence:
    """Section prototypes + within-section jitter, arranged by the form."""
    n_seg = int(rng.integers(spec.seg_min, spec.seg_max + 1))
    prototypes = _shell(rng, spec.n_sections, spec.d)
    sections = _stretch_form(spec.form, n_seg)
    emb = prototypes[sections] + spec.noise_sigma * rng.standard_normal((n_seg, spec.d))
    return SegmentEmbeddingSequence(track_id=track_id,
                                    embeddings=emb.astype(np.float32), label=0)


def gen_fake(rng: np.random.Generator, spec: SynthSpec,
             track_id: str = "fake") -> SegmentEmbeddingSequence:
    """Normalized random walk on the shell, plus matched observation noise."""
    n_seg = int(rng.integers(spec.seg_min, spec.seg_max + 1))
    scale = np.sqrt(spec.d)
    walk = np.empty((n_seg, spec.d))
    x = _shell(rng, 1, spec.d)[0]
    for k in range(n_seg):
        walk[k] = x
        x = x + spec.drift_sigma * rng.standard_normal(spec.d)
        x *= scale / np.linalg.norm(x)
    emb = walk + spec.noise_sigma * rng.standard_normal((n_seg, spec.d))
    return SegmentEmbeddingSequence(track_id=track_id,
                                    embeddings=emb.astype(np.float32), label=1)


def _bar_sequence(rng: np.random.Generator, spec: SynthSpec, label: int,
                  bars_per_segment: int) -> np.ndarray:
    """Per-bar embeddings for one track (bar-level variant of the above).

    The fake walk steps at bar granularity with drift scaled by
    1/sqrt(bars_per_segment), so a segment's worth of bar steps diffuses as
    far as one segment-level step.
    """
    n_seg = int(rng.integers(spec.seg_min, spec.seg_max + 1))
    n_bars = n_seg * bars_per_segment
    if label == 0:
        prototypes = _shell(rng, spec.n_sections, spec.d)
        sections = np.repeat(_stretch_form(spec.form, n_seg), bars_per_segment)
        base = prototypes[sections]
    else:
        scale = np.sqrt(spec.d)
        step = spec.drift_sigma / np.sqrt(bars_per_segment)
        base = np.empty((n_bars, spec.d))
        x = _shell(rng, 1, spec.d)[0]
        for k in range(n_bars):
            base[k] = x
            x = x + step * rng.standard_normal(spec.d)
            x *= scale / np.linalg.norm(x)
    emb = base + spec.noise_sigma * rng.standard_normal((n_bars, spec.d))
    return emb.astype(np.float32)


def gen_dataset(spec: SynthSpec, out_dir, bar_level: bool = False,
                bars_per_segment: int = 4, bar_duration: float = 2.0) -> Path:
    """Write embedding files + manifest; returns the manifest path.

    With ``bar_level`` every track is emitted at bar granularity along with a
    ``<track_id>.downbeats`` file (one timestamp per line, final line = track
    end), so downstream segmentation strategies can be compared on it.
    """
    from .training import split_manifest

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    children = np.random.SeedSequence(spec.seed).spawn(2 * spec.n_tracks)

    entries = []
    for label, prefix in ((0, "real"), (1, "fake")):
        for i in range(spec.n_tracks):
            track_id = f"{prefix}_{i:04d}"
            rng = np.random.default_rng(children[label * spec.n_tracks + i])
            if bar_level:
                emb = _bar_sequence(rng, spec, label, bars_per_segment)
                times = np.arange(len(emb) + 1) * bar_duration
                (out_dir / f"{track_id}.downbeats").write_text(
                    "\n".join(f"{t:.6f}" for t in times) + "\n")
            else:
                gen = gen_real if label == 0 else gen_fake
                emb = gen(rng, spec, track_id).embeddings
            write_segemb(out_dir / f"{track_id}.segemb", emb)
            entries.append(ManifestEntry(path=f"{track_id}.segemb", track_id=track_id,
                                         label=label, split="train"))

    entries = split_manifest(entries, seed=spec.seed)
    manifest_path = out_dir / "manifest.jsonl"
    write_manifest(manifest_path, entries)
    return manifest_path
