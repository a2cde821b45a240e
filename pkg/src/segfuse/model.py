"""The fusion segment transformer.

Two encoder streams run side by side over a track's 48 segment slots: one
over the segment embeddings (content), one over the rows of the pairwise
self-similarity matrix (structure).  A cross-attention pair lets each stream
read the other, and a learned sigmoid gate blends the two views per position
and per channel before pooling and classification.

All learnable tensors live in ``FstParams``; ``named_parameters`` fixes their
canonical order, which doubles as the checkpoint serialization order and the
init draw order.  Shapes are determined entirely by ``FstConfig``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .attention import AttentionParams, check_tail_mask, multi_head_attention, positional_encoding
from .ssm import SegmentEmbeddingSequence, self_similarity
from .tensor import (
    NonFiniteError,
    Tensor,
    concat,
    dropout,
    gelu,
    layer_norm,
    sigmoid,
    tmax,
    tsum,
)

_POOL_NEG = -1e30  # additive bias that removes pad slots from the max-pool

FUSION_MODES = ("gated", "concat", "xattn_only")

_ATTN_FIELDS = ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo")
_INT_FIELDS = ("d_in", "d_model", "n_heads", "n_layers_embed", "n_layers_ssm",
               "d_ffn", "max_segments")


@dataclass(frozen=True)
class FstConfig:
    """Hyperparameters; every parameter shape follows from these."""

    d_in: int
    d_model: int
    n_heads: int
    n_layers_embed: int
    n_layers_ssm: int
    d_ffn: int
    max_segments: int = 48
    fusion_mode: str = "gated"
    dropout: float = 0.0

    def __post_init__(self):
        if min(self.d_in, self.d_model, self.n_heads, self.d_ffn) < 1:
            raise ValueError("widths and head count must be >= 1")
        if self.n_layers_embed < 0 or self.n_layers_ssm < 0:
            raise ValueError("encoder depths must be >= 0")
        if self.d_model % self.n_heads != 0:
            raise ValueError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.max_segments < 1:
            raise ValueError(f"max_segments must be >= 1, got {self.max_segments}")
        if self.fusion_mode not in FUSION_MODES:
            raise ValueError(f"fusion_mode must be one of {FUSION_MODES}, got {self.fusion_mode!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FstConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        missing = names - set(d)
        if missing:
            raise ValueError(f"missing config keys: {sorted(missing)}")
        kwargs = {}
        for name in names:
            v = d[name]
            if name in _INT_FIELDS:
                kwargs[name] = int(v)
            elif name == "fusion_mode":
                kwargs[name] = str(v)
            else:
                kwargs[name] = float(v)
        return cls(**kwargs)


def tiny_preset(fusion_mode: str = "gated") -> FstConfig:
    """Desk-scale config used throughout the tests."""
    return FstConfig(d_in=8, d_model=16, n_heads=2, n_layers_embed=1,
                     n_layers_ssm=1, d_ffn=32, fusion_mode=fusion_mode)


def full_preset(fusion_mode: str = "gated") -> FstConfig:
    """Production-scale config (~4M parameters)."""
    return FstConfig(d_in=768, d_model=256, n_heads=8, n_layers_embed=2,
                     n_layers_ssm=2, d_ffn=1024, fusion_mode=fusion_mode)


# ---------------------------------------------------------------------------
# parameter containers

@dataclass
class LinearParams:
    w: Tensor  # (n_in, n_out), applied as x @ w
    b: Tensor  # (n_out,)


@dataclass
class LayerNormParams:
    gamma: Tensor
    beta: Tensor


@dataclass
class EncoderLayerParams:
    attn: AttentionParams
    ln1: LayerNormParams
    ffn1: LinearParams
    ffn2: LinearParams
    ln2: LayerNormParams


@dataclass
class FstParams:
    """Every learnable tensor, grouped by sub-module.

    Fusion-mode-specific fields are None when the mode does not use them:
    gated owns the cross-attention pair, the two norms, and the gate;
    xattn_only shares everything gated has except the gate; concat owns only
    ``fuse_proj``.
    """

    config: FstConfig
    embed_proj: LinearParams
    ssm_proj: LinearParams
    embed_layers: list
    ssm_layers: list
    classifier: LinearParams
    xattn_contents: AttentionParams | None = None    # q = embeddings, kv = SSM
    xattn_structure: AttentionParams | None = None   # q = SSM, kv = embeddings
    ln_contents: LayerNormParams | None = None
    ln_structure: LayerNormParams | None = None
    gate: LinearParams | None = None        # w is (2*d_model, d_model), x @ w
    fuse_proj: LinearParams | None = None   # concat mode: (2*d_model, d_model)

    def named_parameters(self):
        """Yield (name, tensor) in the canonical fixed order.

        This order defines checkpoint layout and the init RNG draw order, so
        it must never change for a given config.
        """
        yield "embed_proj.w", self.embed_proj.w
        yield "embed_proj.b", self.embed_proj.b
        for i, layer in enumerate(self.embed_layers):
            yield from _layer_items(f"embed_layers.{i}", layer)
        yield "ssm_proj.w", self.ssm_proj.w
        yield "ssm_proj.b", self.ssm_proj.b
        for i, layer in enumerate(self.ssm_layers):
            yield from _layer_items(f"ssm_layers.{i}", layer)
        mode = self.config.fusion_mode
        if mode in ("gated", "xattn_only"):
            yield from _attn_items("xattn_contents", self.xattn_contents)
            yield from _attn_items("xattn_structure", self.xattn_structure)
            yield "ln_contents.gamma", self.ln_contents.gamma
            yield "ln_contents.beta", self.ln_contents.beta
            yield "ln_structure.gamma", self.ln_structure.gamma
            yield "ln_structure.beta", self.ln_structure.beta
        if mode == "gated":
            yield "gate.w", self.gate.w
            yield "gate.b", self.gate.b
        if mode == "concat":
            yield "fuse_proj.w", self.fuse_proj.w
            yield "fuse_proj.b", self.fuse_proj.b
        yield "classifier.w", self.classifier.w
        yield "classifier.b", self.classifier.b

    def check_finite(self) -> "FstParams":
        for name, p in self.named_parameters():
            p.check_finite(f"parameter {name}")
        return self


def _attn_items(prefix: str, a: AttentionParams):
    for field in _ATTN_FIELDS:
        yield f"{prefix}.{field}", getattr(a, field)


def _layer_items(prefix: str, layer: EncoderLayerParams):
    yield from _attn_items(f"{prefix}.attn", layer.attn)
    yield f"{prefix}.ln1.gamma", layer.ln1.gamma
    yield f"{prefix}.ln1.beta", layer.ln1.beta
    yield f"{prefix}.ffn1.w", layer.ffn1.w
    yield f"{prefix}.ffn1.b", layer.ffn1.b
    yield f"{prefix}.ffn2.w", layer.ffn2.w
    yield f"{prefix}.ffn2.b", layer.ffn2.b
    yield f"{prefix}.ln2.gamma", layer.ln2.gamma
    yield f"{prefix}.ln2.beta", layer.ln2.beta


# ---------------------------------------------------------------------------
# allocation and init

def _zeros(shape, dtype) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)


def _linear(n_in: int, n_out: int, dtype) -> LinearParams:
    return LinearParams(w=_zeros((n_in, n_out), dtype), b=_zeros((n_out,), dtype))


def _layernorm(d: int, dtype) -> LayerNormParams:
    return LayerNormParams(gamma=_zeros((d,), dtype), beta=_zeros((d,), dtype))


def _attention(d: int, dtype) -> AttentionParams:
    return AttentionParams(**{f: _zeros((d, d) if f.startswith("w") else (d,), dtype)
                              for f in _ATTN_FIELDS})


def _encoder_layer_params(d: int, d_ffn: int, dtype) -> EncoderLayerParams:
    return EncoderLayerParams(attn=_attention(d, dtype), ln1=_layernorm(d, dtype),
                              ffn1=_linear(d, d_ffn, dtype), ffn2=_linear(d_ffn, d, dtype),
                              ln2=_layernorm(d, dtype))


def alloc_params(config: FstConfig, dtype=np.float32) -> FstParams:
    """Allocate the full parameter structure, zero-filled."""
    d = config.d_model
    params = FstParams(
        config=config,
        embed_proj=_linear(config.d_in, d, dtype),
        ssm_proj=_linear(config.max_segments, d, dtype),
        embed_layers=[_encoder_layer_params(d, config.d_ffn, dtype)
                      for _ in range(config.n_layers_embed)],
        ssm_layers=[_encoder_layer_params(d, config.d_ffn, dtype)
                    for _ in range(config.n_layers_ssm)],
        classifier=_linear(2 * d, 1, dtype),
    )
    if config.fusion_mode in ("gated", "xattn_only"):
        params.xattn_contents = _attention(d, dtype)
        params.xattn_structure = _attention(d, dtype)
        params.ln_contents = _layernorm(d, dtype)
        params.ln_structure = _layernorm(d, dtype)
    if config.fusion_mode == "gated":
        params.gate = _linear(2 * d, d, dtype)
    if config.fusion_mode == "concat":
        params.fuse_proj = _linear(2 * d, d, dtype)
    return params


def init_params(config: FstConfig, rng: np.random.Generator,
                dtype=np.float32) -> FstParams:
    """Xavier-uniform weights, zero biases, identity layer norms.

    Only weight matrices consume RNG draws, in named_parameters order, so a
    seed pins the full initialization.
    """
    params = alloc_params(config, dtype)
    for name, p in params.named_parameters():
        leaf = name.rsplit(".", 1)[1]
        if leaf in ("wq", "wk", "wv", "wo", "w"):
            fan_in, fan_out = p.data.shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            p.data[...] = rng.uniform(-limit, limit, size=p.data.shape)
        elif leaf == "gamma":
            p.data[...] = 1.0
    return params


def astype_params(params: FstParams, dtype) -> FstParams:
    """Detached copy of the whole parameter tree in another float dtype
    (float64 for gradient checking)."""
    def t(x: Tensor) -> Tensor:
        return x.astype(dtype)

    def lin(l):
        return None if l is None else LinearParams(t(l.w), t(l.b))

    def lnp(l):
        return None if l is None else LayerNormParams(t(l.gamma), t(l.beta))

    def attn(a):
        if a is None:
            return None
        return AttentionParams(**{f: t(getattr(a, f)) for f in _ATTN_FIELDS})

    def layer(e):
        return EncoderLayerParams(attn=attn(e.attn), ln1=lnp(e.ln1),
                                  ffn1=lin(e.ffn1), ffn2=lin(e.ffn2), ln2=lnp(e.ln2))

    return FstParams(
        config=params.config,
        embed_proj=lin(params.embed_proj),
        ssm_proj=lin(params.ssm_proj),
        embed_layers=[layer(e) for e in params.embed_layers],
        ssm_layers=[layer(e) for e in params.ssm_layers],
        classifier=lin(params.classifier),
        xattn_contents=attn(params.xattn_contents),
        xattn_structure=attn(params.xattn_structure),
        ln_contents=lnp(params.ln_contents),
        ln_structure=lnp(params.ln_structure),
        gate=lin(params.gate),
        fuse_proj=lin(params.fuse_proj),
    )


def param_count(config: FstConfig) -> int:
    """Exact scalar parameter count, computed from shapes alone."""
    d, f = config.d_model, config.d_ffn
    enc_layer = 4 * (d * d + d) + 2 * d + (d * f + f) + (f * d + d) + 2 * d
    total = (config.d_in * d + d) + (config.max_segments * d + d)
    total += (config.n_layers_embed + config.n_layers_ssm) * enc_layer
    if config.fusion_mode in ("gated", "xattn_only"):
        total += 2 * 4 * (d * d + d) + 2 * (2 * d)
    if config.fusion_mode == "gated":
        total += 2 * d * d + d
    if config.fusion_mode == "concat":
        total += 2 * d * d + d
    total += 2 * d + 1
    return total


# ---------------------------------------------------------------------------
# forward passes

@dataclass
class GateTrace:
    """Channel-averaged gate per segment slot, for structural analysis."""

    mean_gate: np.ndarray  # float[max_segments], mean of G over channels
    mask: np.ndarray
    track_id: str
    predicted_label: int

    def __post_init__(self):
        valid = self.mean_gate[self.mask]
        if valid.size and not ((valid > 0.0) & (valid < 1.0)).all():
            raise ValueError(f"track {self.track_id}: gate trace outside (0, 1)")


def _apply_linear(x: Tensor, lin: LinearParams) -> Tensor:
    return x @ lin.w + lin.b


def _encoder_layer(x: Tensor, layer: EncoderLayerParams, n_heads: int,
                   mask: np.ndarray, rate: float, rng, training: bool) -> Tensor:
    a = multi_head_attention(x, x, layer.attn, n_heads, mask,
                             dropout_rate=rate, rng=rng, training=training)
    a = dropout(a, rate, rng, training)
    x = layer_norm(x + a, layer.ln1.gamma, layer.ln1.beta)
    h = _apply_linear(gelu(_apply_linear(x, layer.ffn1)), layer.ffn2)
    h = dropout(h, rate, rng, training)
    return layer_norm(x + h, layer.ln2.gamma, layer.ln2.beta)


def embed_stream_forward(e: Tensor, mask: np.ndarray, params: FstParams,
                         rng=None, training: bool = False) -> Tensor:
    """Content stream: project, add positional encoding, run the encoder."""
    cfg = params.config
    if e.shape != (cfg.max_segments, cfg.d_in):
        raise ValueError(
            f"embedding input {e.shape}, expected {(cfg.max_segments, cfg.d_in)}")
    x = _apply_linear(e, params.embed_proj)
    x = x + Tensor(positional_encoding(cfg.max_segments, cfg.d_model, dtype=x.dtype))
    for layer in params.embed_layers:
        x = _encoder_layer(x, layer, cfg.n_heads, mask, cfg.dropout, rng, training)
    return x


def ssm_stream_forward(ssm: Tensor, mask: np.ndarray, params: FstParams,
                       rng=None, training: bool = False) -> Tensor:
    """Structure stream: each SSM row is one position's similarity profile."""
    cfg = params.config
    n = cfg.max_segments
    if ssm.shape != (n, n):
        raise ValueError(f"SSM input {ssm.shape}, expected {(n, n)}")
    if not np.allclose(ssm.data, ssm.data.T, atol=1e-4):
        raise ValueError("SSM input is not symmetric")
    x = _apply_linear(ssm, params.ssm_proj)
    x = x + Tensor(positional_encoding(n, cfg.d_model, dtype=x.dtype))
    for layer in params.ssm_layers:
        x = _encoder_layer(x, layer, cfg.n_heads, mask, cfg.dropout, rng, training)
    return x


def _cross_streams(x_emb: Tensor, x_ssm: Tensor, mask: np.ndarray,
                   params: FstParams, rng=None, training: bool = False):
    """Post-norm residual cross-attention in both directions."""
    cfg = params.config
    a_c = multi_head_attention(x_emb, x_ssm, params.xattn_contents, cfg.n_heads,
                               mask, dropout_rate=cfg.dropout, rng=rng, training=training)
    x_contents = layer_norm(x_emb + a_c, params.ln_contents.gamma, params.ln_contents.beta)
    a_s = multi_head_attention(x_ssm, x_emb, params.xattn_structure, cfg.n_heads,
                               mask, dropout_rate=cfg.dropout, rng=rng, training=training)
    x_structure = layer_norm(x_ssm + a_s, params.ln_structure.gamma, params.ln_structure.beta)
    return x_contents, x_structure


def cross_modal_fusion(x_emb: Tensor, x_ssm: Tensor, mask: np.ndarray,
                       params: FstParams, rng=None, training: bool = False):
    """Gated fusion: returns (X_fused, gate), both (max_segments, d_model).

    The gate is sigmoid([X_contents ; X_structure] @ W_g + b_g), per position
    and per channel, and blends the two cross-attended views convexly.
    """
    if params.config.fusion_mode != "gated":
        raise ValueError(
            f"cross_modal_fusion requires fusion_mode='gated', got {params.config.fusion_mode!r}")
    x_contents, x_structure = _cross_streams(x_emb, x_ssm, mask, params, rng, training)
    gate = sigmoid(_apply_linear(concat([x_contents, x_structure], axis=-1), params.gate))
    fused = gate * x_contents + (1.0 - gate) * x_structure
    return fused, gate


def fusion_variant_forward(x_emb: Tensor, x_ssm: Tensor, mask: np.ndarray,
                           params: FstParams, mode: str, rng=None,
                           training: bool = False) -> Tensor:
    """Ablation fusions: plain concatenation, or cross-attention with the
    gate pinned to an even split."""
    if mode == "concat":
        return _apply_linear(concat([x_emb, x_ssm], axis=-1), params.fuse_proj)
    if mode == "xattn_only":
        x_contents, x_structure = _cross_streams(x_emb, x_ssm, mask, params, rng, training)
        # written as 0.5*a + 0.5*b so it is bit-identical to the gated path
        # when that gate evaluates to exactly 0.5
        return 0.5 * x_contents + (1.0 - 0.5) * x_structure
    raise ValueError(f"unknown fusion mode {mode!r}")


def pool_and_classify(x_fused: Tensor, mask: np.ndarray, params: FstParams) -> Tensor:
    """Masked mean-pool + masked max-pool, concatenated, then linear → logit."""
    mask = check_tail_mask(mask)
    if mask.shape[0] != x_fused.shape[0]:
        raise ValueError(f"mask length {mask.shape[0]} vs {x_fused.shape[0]} positions")
    col = mask[:, None]
    keep = Tensor(col.astype(x_fused.dtype))
    mean_pool = tsum(x_fused * keep, axis=0) / float(mask.sum())
    max_pool = tmax(x_fused + Tensor(np.where(col, 0.0, _POOL_NEG).astype(x_fused.dtype)),
                    axis=0)
    pooled = concat([mean_pool, max_pool], axis=-1).reshape(1, -1)
    return _apply_linear(pooled, params.classifier).reshape(())


def forward(seq: SegmentEmbeddingSequence, params: FstParams, rng=None,
            training: bool = False):
    """Full model: (logit, GateTrace | None).

    ``seq`` must already be padded/cropped to config.max_segments.  The trace
    is populated only in gated mode; probability = sigmoid(logit) with 0.5 as
    the decision threshold (label 1 = AI-generated).
    """
    cfg = params.config
    if seq.n_segments != cfg.max_segments or seq.dim != cfg.d_in:
        raise ValueError(
            f"sequence {seq.embeddings.shape} does not match config "
            f"{(cfg.max_segments, cfg.d_in)}")
    mask = seq.valid_mask()
    e = Tensor(seq.embeddings)
    ssm = Tensor(self_similarity(seq).values.astype(seq.embeddings.dtype))
    x_emb = embed_stream_forward(e, mask, params, rng, training)
    x_ssm = ssm_stream_forward(ssm, mask, params, rng, training)
    gate = None
    if cfg.fusion_mode == "gated":
        x_fused, gate = cross_modal_fusion(x_emb, x_ssm, mask, params, rng, training)
    else:
        x_fused = fusion_variant_forward(x_emb, x_ssm, mask, params,
                                         cfg.fusion_mode, rng, training)
    logit = pool_and_classify(x_fused, mask, params)
    logit.check_finite(f"logit (track {seq.track_id})")
    trace = None
    if gate is not None:
        mean_gate = gate.data.astype(np.float64).mean(axis=-1)
        valid = mean_gate[mask]
        # a sigmoid output can only leave (0, 1) by rounding or nan, so a
        # breach here is a numerical failure, not a contract violation
        if not np.all(np.isfinite(valid)) or valid.min() <= 0.0 or valid.max() >= 1.0:
            raise NonFiniteError(
                f"track {seq.track_id}: gate collapsed outside (0, 1)")
        trace = GateTrace(mean_gate=mean_gate, mask=mask, track_id=seq.track_id,
                          predicted_label=int(logit.data >= 0.0))
    return logit, trace
