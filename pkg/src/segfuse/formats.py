"""On-disk dataset formats: embedding files and JSONL manifests.

An embedding file holds one track's segment embeddings: 8-byte magic
``SEGEMB01``, u32 little-endian N, u32 little-endian d, then N*d 32-bit
little-endian floats row-major (file size exactly 16 + 4*N*d).

A manifest is JSON Lines, one object per track: path (relative to the
manifest's own directory, so datasets move as a unit), track_id, label,
split.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ssm import SegmentEmbeddingSequence

SEGEMB_MAGIC = b"SEGEMB01"
SPLITS = ("train", "val", "test")


def write_segemb(path, embeddings: np.ndarray) -> None:
    emb = np.asarray(embeddings)
    if emb.ndim != 2 or emb.size == 0:
        raise ValueError(f"embeddings must be a nonempty 2D array, got shape {emb.shape}")
    if not np.all(np.isfinite(emb)):
        raise ValueError("embeddings contain NaN/Inf")
    n, d = emb.shape
    header = SEGEMB_MAGIC + struct.pack("<II", n, d)
    Path(path).write_bytes(header + np.ascontiguousarray(emb, dtype="<f4").tobytes())


def read_segemb(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:8] != SEGEMB_MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:8]!r}")
    if len(raw) < 16:
        raise ValueError(f"{path}: truncated header")
    n, d = struct.unpack_from("<II", raw, 8)
    if len(raw) != 16 + 4 * n * d:
        raise ValueError(f"{path}: size {len(raw)}, header promises {16 + 4 * n * d}")
    emb = np.frombuffer(raw, dtype="<f4", offset=16).reshape(n, d).copy()
    if not np.all(np.isfinite(emb)):
        raise ValueError(f"{path}: embeddings contain NaN/Inf")
    return emb


@dataclass(frozen=True)
class ManifestEntry:
    path: str  # relative to the manifest file's directory
    track_id: str
    label: int
    split: str

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"track {self.track_id}: label must be 0 or 1, got {self.label}")
        if self.split not in SPLITS:
            raise ValueError(f"track {self.track_id}: split must be one of {SPLITS}")


def write_manifest(path, entries: list[ManifestEntry]) -> None:
    lines = [json.dumps({"path": e.path, "track_id": e.track_id,
                         "label": e.label, "split": e.split}) for e in entries]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> list[ManifestEntry]:
    """Parse and validate; every referenced embedding file must exist."""
    path = Path(path)
    entries = []
    for i, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        obj = json.loads(line)
        extra = set(obj) - {"path", "track_id", "label", "split"}
        if extra:
            raise ValueError(f"{path}:{i}: unknown manifest keys {sorted(extra)}")
        try:
            entries.append(ManifestEntry(path=obj["path"], track_id=obj["track_id"],
                                         label=obj["label"], split=obj["split"]))
        except KeyError as exc:
            raise ValueError(f"{path}:{i}: missing manifest key {exc}") from exc
    seen = set()
    for e in entries:
        if e.path in seen:
            raise ValueError(f"{path}: duplicate path {e.path!r}")
        seen.add(e.path)
        if not (path.parent / e.path).is_file():
            raise ValueError(f"{path}: referenced file missing: {e.path}")
    return entries


def load_split(manifest_path, split: str | None = None) -> list[SegmentEmbeddingSequence]:
    """Load the (optionally filtered) manifest into embedding sequences."""
    manifest_path = Path(manifest_path)
    if split is not None and split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
    out = []
    for e in read_manifest(manifest_path):
        if split is not None and e.split != split:
            continue
        emb = read_segemb(manifest_path.parent / e.path)
        out.append(SegmentEmbeddingSequence(track_id=e.track_id, embeddings=emb,
                                            label=e.label))
    return out
