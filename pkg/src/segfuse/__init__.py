"""Full-track AI-generated-music detection from segment embeddings.

A dual-stream transformer reads a track's segment embeddings alongside its
self-similarity matrix and fuses the two views through a learned gate.  The
package is numpy end to end, including the reverse-mode autodiff engine the
model trains with.
"""

from .attention import AttentionParams, multi_head_attention, positional_encoding
from .checkpoint import load_checkpoint, save_checkpoint
from .formats import (
    ManifestEntry,
    load_split,
    read_manifest,
    read_segemb,
    write_manifest,
    write_segemb,
)
from .metrics import MetricsReport, auc, compute_metrics
from .model import (
    FstConfig,
    FstParams,
    GateTrace,
    cross_modal_fusion,
    embed_stream_forward,
    forward,
    full_preset,
    fusion_variant_forward,
    init_params,
    param_count,
    pool_and_classify,
    ssm_stream_forward,
    tiny_preset,
)
from .optim import AdamState, adam_step, zero_grads
from .segmentation import (
    DownbeatAnnotation,
    SegmentSpan,
    fixed_window_spans,
    four_bar_spans,
    load_downbeats,
    pad_or_crop,
    pool_bars,
)
from .ssm import SegmentEmbeddingSequence, SelfSimilarityMatrix, permute_check, self_similarity
from .synthgen import SynthSpec, gen_dataset, gen_fake, gen_real
from .tensor import GradTape, NonFiniteError, Tensor, backward, bce_with_logits
from .training import TrainConfig, TrainHistory, evaluate, predict_prob, split_manifest, train

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "AttentionParams",
    "DownbeatAnnotation",
    "FstConfig",
    "FstParams",
    "GateTrace",
    "GradTape",
    "ManifestEntry",
    "MetricsReport",
    "NonFiniteError",
    "SegmentEmbeddingSequence",
    "SegmentSpan",
    "SelfSimilarityMatrix",
    "SynthSpec",
    "Tensor",
    "TrainConfig",
    "TrainHistory",
    "adam_step",
    "auc",
    "backward",
    "bce_with_logits",
    "compute_metrics",
    "cross_modal_fusion",
    "embed_stream_forward",
    "evaluate",
    "fixed_window_spans",
    "forward",
    "four_bar_spans",
    "full_preset",
    "fusion_variant_forward",
    "gen_dataset",
    "gen_fake",
    "gen_real",
    "init_params",
    "load_checkpoint",
    "load_downbeats",
    "load_split",
    "multi_head_attention",
    "pad_or_crop",
    "param_count",
    "permute_check",
    "pool_and_classify",
    "pool_bars",
    "positional_encoding",
    "predict_prob",
    "read_manifest",
    "read_segemb",
    "save_checkpoint",
    "self_similarity",
    "split_manifest",
    "ssm_stream_forward",
    "tiny_preset",
    "train",
    "write_manifest",
    "write_segemb",
    "zero_grads",
]
