"""Dense float tensors with reverse-mode automatic differentiation.

The engine is deliberately small: a ``Tensor`` wraps a numpy array, and every
primitive op that touches a tensor requiring gradients appends a backward
closure to the active ``GradTape``.  Because ops are recorded in execution
order, the tape itself is a topological order of the computation graph, and
replaying it in reverse implements the chain rule.

Recording only happens inside a ``with GradTape() as tape:`` block.  Forward
evaluation without an active tape allocates nothing extra, which is what makes
inference with frozen parameters safe to run from several threads at once
(the tape stack is thread-local).

Training code runs in float32; gradient checking runs the same graph in
float64, where central finite differences are quiet enough for tight
tolerances.
"""

from __future__ import annotations

import math
import threading

import numpy as np
from scipy.special import expit

_FLOAT_DTYPES = (np.float32, np.float64)


class NonFiniteError(ArithmeticError):
    """A tensor that must be finite contains NaN or Inf."""


# ---------------------------------------------------------------------------
# tape machinery

_tls = threading.local()


def _tape_stack() -> list:
    stack = getattr(_tls, "stack", None)
    if stack is None:
        stack = _tls.stack = []
    return stack


def active_tape():
    """The innermost open GradTape on this thread, or None."""
    stack = _tape_stack()
    return stack[-1] if stack else None


class GradTape:
    """Ordered record of executed primitive ops.

    Ops append themselves in execution order, which is a valid topological
    order of the graph, so ``backward`` replays the list in reverse and
    accumulates into each input's ``grad``.  The tape is cleared once
    ``backward`` finishes.
    """

    def __init__(self):
        self._nodes = []

    def __enter__(self) -> "GradTape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        stack = _tape_stack()
        assert stack and stack[-1] is self
        stack.pop()
        return False

    def __len__(self) -> int:
        return len(self._nodes)

    def record(self, backward_fn) -> None:
        self._nodes.append(backward_fn)

    def backward(self, loss: "Tensor") -> None:
        """Populate ``grad`` on every tensor the scalar ``loss`` depends on."""
        if not isinstance(loss, Tensor):
            raise TypeError("backward expects a Tensor loss")
        if loss.shape != ():
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not loss.requires_grad or not self._nodes:
            raise ValueError("loss is not connected to this tape")
        loss.grad = np.ones((), dtype=loss.data.dtype)
        for fn in reversed(self._nodes):
            fn()
        self._nodes.clear()


def backward(loss: "Tensor") -> None:
    """Run the backward pass on the current tape."""
    tape = active_tape()
    if tape is None:
        raise RuntimeError("no active GradTape")
    tape.backward(loss)


# ---------------------------------------------------------------------------
# tensor

class Tensor:
    """A numpy array plus gradient bookkeeping.

    ``data`` is always float32 or float64; ``grad`` has the same shape and
    dtype once a backward pass has run.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def astype(self, dtype) -> "Tensor":
        """Detached copy in another float dtype (params for grad checking)."""
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad)

    def check_finite(self, context: str = "tensor") -> "Tensor":
        if not np.all(np.isfinite(self.data)):
            raise NonFiniteError(f"{context} contains NaN/Inf")
        return self

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}, requires_grad={self.requires_grad})"

    # operator sugar; the functions below do the actual work
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def max(self, axis, keepdims=False):
        return tmax(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) != 1 or isinstance(shape[0], int) else shape[0])

    def swapaxes(self, a, b):
        return swapaxes(self, a, b)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def tanh(self):
        return tanh(self)

    def sigmoid(self):
        return sigmoid(self)


def as_tensor(x, like: Tensor | None = None) -> Tensor:
    """Coerce to Tensor; python scalars adopt ``like``'s dtype."""
    if isinstance(x, Tensor):
        return x
    dtype = like.data.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype))


# ---------------------------------------------------------------------------
# op plumbing

def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = g.astype(t.data.dtype, copy=True) if g.dtype != t.data.dtype else g.copy()
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _make(data: np.ndarray, inputs: tuple, backward_fn) -> Tensor:
    out = Tensor(data, requires_grad=any(t.requires_grad for t in inputs))
    tape = active_tape()
    if tape is not None and out.requires_grad:
        tape.record(backward_fn)
    return out


# ---------------------------------------------------------------------------
# elementwise arithmetic

def add(a, b) -> Tensor:
    a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = as_tensor(b, like=a)
    out_data = a.data + b.data

    def _backward():
        g = out.grad
        if g is None:
            return
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g, b.data.shape))

    out = _make(out_data, (a, b), _backward)
    return out


def sub(a, b) -> Tensor:
    a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = as_tensor(b, like=a)
    out_data = a.data - b.data

    def _backward():
        g = out.grad
        if g is None:
            return
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(-g, b.data.shape))

    out = _make(out_data, (a, b), _backward)
    return out


def mul(a, b) -> Tensor:
    a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = as_tensor(b, like=a)
    out_data = a.data * b.data

    def _backward():
        g = out.grad
        if g is None:
            return
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    out = _make(out_data, (a, b), _backward)
    return out


def div(a, b) -> Tensor:
    a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = as_tensor(b, like=a)
    out_data = a.data / b.data

    def _backward():
        g = out.grad
        if g is None:
            return
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g / b.data, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    out = _make(out_data, (a, b), _backward)
    return out


def neg(a: Tensor) -> Tensor:
    def _backward():
        g = out.grad
        if g is not None and a.requires_grad:
            _accumulate(a, -g)

    out = _make(-a.data, (a,), _backward)
    return out


# ---------------------------------------------------------------------------
# linear algebra

def matmul(a, b) -> Tensor:
    """Matrix product, including stacked (3D) operands with numpy broadcasting."""
    a = as_tensor(a)
    b = as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul expects operands with ndim >= 2")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} @ {b.shape}")
    out_data = a.data @ b.data

    def _backward():
        g = out.grad
        if g is None:
            return
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g @ b.data.swapaxes(-1, -2), a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(a.data.swapaxes(-1, -2) @ g, b.data.shape))

    out = _make(out_data, (a, b), _backward)
    return out


# ---------------------------------------------------------------------------
# reductions

def _expand_reduced(g: np.ndarray, shape: tuple, axis, keepdims: bool) -> np.ndarray:
    if axis is None:
        return np.broadcast_to(g, shape)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out_data = x.data.sum(axis=axis, keepdims=keepdims)

    def _backward():
        g = out.grad
        if g is not None and x.requires_grad:
            _accumulate(x, _expand_reduced(g, x.data.shape, axis, keepdims))

    out = _make(out_data, (x,), _backward)
    return out


def tmean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out_data = x.data.mean(axis=axis, keepdims=keepdims)
    count = x.data.size if axis is None else x.data.shape[axis]

    def _backward():
        g = out.grad
        if g is not None and x.requires_grad:
            _accumulate(x, _expand_reduced(g, x.data.shape, axis, keepdims) / count)

    out = _make(out_data, (x,), _backward)
    return out


def tmax(x: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    """Max along one axis; the gradient routes to the first argmax (ties)."""
    out_data = x.data.max(axis=axis, keepdims=keepdims)
    idx = np.expand_dims(x.data.argmax(axis=axis), axis)

    def _backward():
        g = out.grad
        if g is None or not x.requires_grad:
            return
        gx = np.zeros_like(x.data)
        gexp = g if keepdims else np.expand_dims(g, axis)
        np.put_along_axis(gx, idx, gexp, axis)
        _accumulate(x, gx)

    out = _make(out_data, (x,), _backward)
    return out


# ---------------------------------------------------------------------------
# shape ops

def reshape(x: Tensor, shape) -> Tensor:
    out_data = x.data.reshape(shape)

    def _backward():
        g = out.grad
        if g is not None and x.requires_grad:
            _accumulate(x, g.reshape(x.data.shape))

    out = _make(out_data, (x,), _backward)
    return out


def swapaxes(x: Tensor, a: int, b: int) -> Tensor:
    out_data = x.data.swapaxes(a, b)

    def _backward():
        g = out.grad
        if g is not None and x.requires_grad:
            _accumulate(x, g.swapaxes(a, b))

    out = _make(out_data, (x,), _backward)
    return out


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def _backward():
        g = out.grad
        if g is None:
            return
        pieces = np.split(g, offsets, axis=axis)
        for t, piece in zip(tensors, pieces):
            if t.requires_grad:
                _accumulate(t, piece)

    out = _make(out_data, tuple(tensors), _backward)
    return out


# ---------------------------------------------------------------------------
# pointwise nonlinearities

def exp(x: Tensor) -> Tensor:
    out_data = np.exp(x.data)

    def _backward():
        g = out.grad
        if g is not None and x.requires_grad:
            _accumulate(x, g * out_data)

    out = _make(out_data, (x,), _backward)
    return out


def log(x: Tensor) -> Tensor:
    out_data = np.log(x.data)

    def _backward():
        g = out.grad
        if g is not None and x.requires_grad:
            _accumulate(x, g / x.data)

    out = _make(out_data, (x,), _backward)
    return out


def tanh(x: Tensor) -> Tensor:
    out_data = np.tanh(x.data)

    def _backward():
        g = out.grad
        if g is not None and x.requires_grad:
            _accumulate(x, g * (1.0 - out_data * out_data))

    out = _make(out_data, (x,), _backward)
    return out


def sigmoid(x: Tensor) -> Tensor:
    out_data = expit(x.data)

    def _backward():
        g = out.grad
        if g is not None and x.requires_grad:
            _accumulate(x, g * out_data * (1.0 - out_data))

    out = _make(out_data, (x,), _backward)
    return out


_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


def gelu(x: Tensor) -> Tensor:
    """Smooth gelu (tanh form); chosen over relu so the loss surface has no
    kinks that would poison finite-difference gradient checks."""
    xd = x.data
    inner = _GELU_C * (xd + _GELU_A * xd**3)
    t = np.tanh(inner)
    out_data = 0.5 * xd * (1.0 + t)

    def _backward():
        g = out.grad
        if g is not None and x.requires_grad:
            d_inner = _GELU_C * (1.0 + 3.0 * _GELU_A * xd * xd)
            local = 0.5 * (1.0 + t) + 0.5 * xd * (1.0 - t * t) * d_inner
            _accumulate(x, g * local)

    out = _make(out_data, (x,), _backward)
    return out


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None = None,
            training: bool = False) -> Tensor:
    """Inverted dropout; identity when rate is 0 or not training."""
    if rate == 0.0 or not training:
        return x
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rng is None:
        raise ValueError("dropout with rate > 0 needs a Generator")
    keep = (rng.random(x.data.shape) >= rate).astype(x.data.dtype)
    scale = np.asarray(1.0 / (1.0 - rate), dtype=x.data.dtype)
    out_data = x.data * keep * scale

    def _backward():
        g = out.grad
        if g is not None and x.requires_grad:
            _accumulate(x, g * keep * scale)

    out = _make(out_data, (x,), _backward)
    return out


# ---------------------------------------------------------------------------
# fused ops with hand-derived backwards

def softmax_lastdim(x: Tensor) -> Tensor:
    """Softmax over the last axis, stabilized by max subtraction."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=-1, keepdims=True)

    def _backward():
        g = out.grad
        if g is not None and x.requires_grad:
            dot = (g * out_data).sum(axis=-1, keepdims=True)
            _accumulate(x, out_data * (g - dot))

    out = _make(out_data, (x,), _backward)
    return out


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each last-axis slice to zero mean / unit variance, then
    apply the affine pair.  Variance uses the biased (1/d) estimator."""
    if eps <= 0:
        raise ValueError("layer_norm eps must be positive")
    d = x.data.shape[-1]
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + np.asarray(eps, dtype=x.data.dtype))
    xhat = xc * inv
    out_data = gamma.data * xhat + beta.data

    def _backward():
        g = out.grad
        if g is None:
            return
        if beta.requires_grad:
            _accumulate(beta, _unbroadcast(g, beta.data.shape))
        if gamma.requires_grad:
            _accumulate(gamma, _unbroadcast(g * xhat, gamma.data.shape))
        if x.requires_grad:
            gx_hat = g * gamma.data
            term = gx_hat - gx_hat.mean(axis=-1, keepdims=True) \
                - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True)
            _accumulate(x, inv * term)

    out = _make(out_data, (x, gamma, beta), _backward)
    return out


def bce_with_logits(logit: Tensor, label: float) -> Tensor:
    """Binary cross-entropy on a raw scalar logit, in the overflow-safe
    softplus form.  dL/dz = sigmoid(z) - y."""
    if label not in (0, 1, 0.0, 1.0):
        raise ValueError(f"label must be 0 or 1, got {label!r}")
    if logit.shape != ():
        raise ValueError(f"bce_with_logits expects a scalar logit, got shape {logit.shape}")
    z = logit.data
    y = float(label)
    # max(z,0) - z*y + log(1 + exp(-|z|))
    out_data = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))

    def _backward():
        g = out.grad
        if g is not None and logit.requires_grad:
            _accumulate(logit, g * (expit(z) - y))

    out = _make(np.asarray(out_data, dtype=z.dtype), (logit,), _backward)
    return out
