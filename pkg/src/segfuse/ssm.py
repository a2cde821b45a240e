"""Gaussian-kernel self-similarity of a segment-embedding sequence.

For segments e_1..e_N of width d the similarity is
exp(-||e_i - e_j||^2 / d), with the denominator fixed to the embedding
width (not the sequence length, not a learned bandwidth).  Identical
segments score 1, and everything else decays with squared distance, so a
track built from repeating sections shows up as bright off-diagonal blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SegmentEmbeddingSequence:
    """One track as an N x d matrix of segment embeddings.

    ``n_valid`` counts the leading non-padding rows; rows at or past it are
    zero padding added by pad_or_crop.
    """

    track_id: str
    embeddings: np.ndarray
    label: int | None = None
    n_valid: int = field(default=-1)

    def __post_init__(self):
        self.embeddings = np.asarray(self.embeddings)
        if self.embeddings.ndim != 2:
            raise ValueError(f"embeddings must be N x d, got shape {self.embeddings.shape}")
        n, d = self.embeddings.shape
        if n < 1 or d < 1:
            raise ValueError(f"embeddings must be non-empty, got shape {self.embeddings.shape}")
        if self.n_valid == -1:
            self.n_valid = n
        if not 0 <= self.n_valid <= n:
            raise ValueError(f"n_valid={self.n_valid} out of range for N={n}")
        if not np.all(np.isfinite(self.embeddings)):
            raise ValueError(f"track {self.track_id}: embeddings contain NaN/Inf")
        if self.label is not None and self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")

    @property
    def n_segments(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def valid_mask(self) -> np.ndarray:
        return np.arange(self.n_segments) < self.n_valid


@dataclass
class SelfSimilarityMatrix:
    """N x N similarity values; rows/cols past ``n_valid`` are zeroed."""

    values: np.ndarray
    n_valid: int


def _gaussian_kernel(rows: np.ndarray) -> np.ndarray:
    """exp(-squared distance / d) between all row pairs, computed via the
    norm expansion with clamping so rounding never yields negatives."""
    d = rows.shape[1]
    sq = np.einsum("ij,ij->i", rows, rows)
    dist2 = sq[:, None] + sq[None, :] - 2.0 * (rows @ rows.T)
    dist2 = np.maximum(dist2, 0.0)
    dist2 = 0.5 * (dist2 + dist2.T)  # exact symmetry
    np.fill_diagonal(dist2, 0.0)
    return np.exp(-dist2 / d)


def self_similarity(seq: SegmentEmbeddingSequence) -> SelfSimilarityMatrix:
    """Kernel matrix of ``seq``; padded rows and columns are stored as 0
    rather than the kernel of whatever the padding holds."""
    values = _gaussian_kernel(seq.embeddings)
    n = seq.n_segments
    if seq.n_valid < n:
        values[seq.n_valid:, :] = 0.0
        values[:, seq.n_valid:] = 0.0
    return SelfSimilarityMatrix(values=values, n_valid=seq.n_valid)


def permute_check(seq: SegmentEmbeddingSequence, perm, tol: float = 1e-6) -> bool:
    """Does reordering segments commute with the kernel?

    Checks SSM(P @ E) == P @ SSM(E) @ P^T on the valid block.  ``perm`` must
    be a permutation of 0..n_valid-1.
    """
    n = seq.n_valid
    perm = np.asarray(perm)
    if sorted(perm.tolist()) != list(range(n)):
        raise ValueError(f"perm is not a permutation of 0..{n - 1}")
    rows = seq.embeddings[:n]
    base = _gaussian_kernel(rows)
    permuted = _gaussian_kernel(rows[perm])
    return bool(np.max(np.abs(permuted - base[np.ix_(perm, perm)])) < tol)
