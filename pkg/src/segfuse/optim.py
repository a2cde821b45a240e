"""Adam with decoupled weight decay.

Weight decay is applied straight to the weights (theta *= 1 - lr*wd) rather
than folded into the gradient, so a zero-gradient step still shrinks the
parameter by exactly that factor.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    def __init__(self, named_params):
        self.m = {name: np.zeros_like(t.data) for name, t in named_params}
        self.v = {name: np.zeros_like(t.data) for name, t in named_params}
        self.step = 0


def adam_step(named_params, state: AdamState, lr: float, wd: float = 0.0,
              betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8) -> None:
    """One in-place update over ``[(name, Tensor), ...]``.

    Standard bias-corrected moments; a missing grad counts as zero.
    """
    if lr < 0:
        raise ValueError(f"lr must be non-negative, got {lr}")
    b1, b2 = betas
    state.step += 1
    t = state.step
    for name, p in named_params:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        if m.shape != p.data.shape:
            raise ValueError(f"adam state shape mismatch for {name}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        if wd:
            p.data *= 1.0 - lr * wd
        p.data -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.data.dtype)


def zero_grads(named_params) -> None:
    for _, p in named_params:
        p.grad = None
