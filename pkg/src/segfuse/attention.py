"""Multi-head scaled dot-product attention and sinusoidal position codes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, add, concat, dropout, matmul, mul, reshape, softmax_lastdim, swapaxes

MASK_BIAS = -1e9  # additive "minus infinity" for masked keys


@dataclass
class AttentionParams:
    """Projection weights for one attention block (stored input-major, x @ w)."""
    wq: Tensor
    bq: Tensor
    wk: Tensor
    bk: Tensor
    wv: Tensor
    bv: Tensor
    wo: Tensor
    bo: Tensor


def check_tail_mask(mask: np.ndarray) -> np.ndarray:
    """Validate a key mask: boolean, at least one True, False only at the tail."""
    mask = np.asarray(mask, dtype=bool)
    n_true = int(mask.sum())
    if n_true == 0:
        raise ValueError("attention mask excludes every key")
    if not mask[:n_true].all():
        raise ValueError("mask must be contiguous True followed by False (tail padding only)")
    return mask


def multi_head_attention(q_in: Tensor, kv_in: Tensor, params: AttentionParams,
                         n_heads: int, key_mask: np.ndarray,
                         dropout_rate: float = 0.0,
                         rng: np.random.Generator | None = None,
                         training: bool = False) -> Tensor:
    """Attend ``q_in`` (T_q x d) over ``kv_in`` (T_k x d).

    Heads are split from the model width, so d must be divisible by
    ``n_heads``.  Masked key positions get an additive large-negative bias
    before the softmax and therefore zero weight; each attention row sums to
    one over the unmasked keys.
    """
    t_q, d = q_in.shape
    t_k = kv_in.shape[0]
    if kv_in.shape[1] != d:
        raise ValueError(f"query/key width mismatch: {q_in.shape} vs {kv_in.shape}")
    if d % n_heads != 0:
        raise ValueError(f"model width {d} not divisible by {n_heads} heads")
    mask = check_tail_mask(key_mask)
    if mask.shape != (t_k,):
        raise ValueError(f"key mask length {mask.shape} does not match {t_k} keys")
    d_head = d // n_heads

    q = add(matmul(q_in, params.wq), params.bq)
    k = add(matmul(kv_in, params.wk), params.bk)
    v = add(matmul(kv_in, params.wv), params.bv)

    # (T, d) -> (heads, T, d_head)
    q = swapaxes(reshape(q, (t_q, n_heads, d_head)), 0, 1)
    k = swapaxes(reshape(k, (t_k, n_heads, d_head)), 0, 1)
    v = swapaxes(reshape(v, (t_k, n_heads, d_head)), 0, 1)

    scores = matmul(q, swapaxes(k, 1, 2))
    scores = mul(scores, Tensor(np.asarray(1.0 / math.sqrt(d_head), dtype=q_in.dtype)))
    bias = np.where(mask, 0.0, MASK_BIAS).astype(q_in.dtype)
    scores = add(scores, Tensor(bias))

    weights = softmax_lastdim(scores)
    weights = dropout(weights, dropout_rate, rng=rng, training=training)

    ctx = matmul(weights, v)                        # (heads, T_q, d_head)
    ctx = reshape(swapaxes(ctx, 0, 1), (t_q, d))    # concat heads
    return add(matmul(ctx, params.wo), params.bo)


def positional_encoding(n_positions: int, d_model: int, dtype=np.float32) -> np.ndarray:
    """Fixed sin/cos position table, shape (n_positions, d_model)."""
    pos = np.arange(n_positions, dtype=np.float64)[:, None]
    i = np.arange(0, d_model, 2, dtype=np.float64)
    angle = pos / np.power(10000.0, i / d_model)
    pe = np.zeros((n_positions, d_model), dtype=np.float64)
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle[:, : d_model // 2])
    return pe.astype(dtype)
