"""Dense float64 tensors with reverse-mode automatic differentiation.

Define-by-run: every differentiable op records its backward rule on a
thread-local tape, ``backward(loss)`` replays the tape in exact reverse
execution order and clears it. Buffers are numpy arrays (row-major
float64); numpy supplies the storage and BLAS, the differentiation logic
lives here.

A tape and its tensors belong to one thread; separate model replicas may
run on separate threads.
"""

from __future__ import annotations

import json
import threading
from typing import Callable, Mapping

import numpy as np

from . import kernels

__all__ = [
    "Tensor", "Parameter", "no_grad", "backward", "finite_diff_check",
    "add", "sub", "mul", "neg", "scale", "matmul", "relu", "absolute",
    "arctan2", "wrap_angle", "concat", "reshape", "swapaxes", "reduce_sum",
    "mean", "softmax_rows", "layer_norm", "dropout", "weight_norm",
    "dilated_causal_conv", "zero_grads", "save_checkpoint", "load_checkpoint",
]


class _State(threading.local):
    def __init__(self):
        self.tape = []
        self.grad_enabled = True


_STATE = _State()


class Tensor:
    """A dense float64 array plus an optional accumulated gradient."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.ascontiguousarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor holds non-finite values")
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # arithmetic sugar; constants are wrapped as non-differentiable tensors
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

    def __neg__(self):
        return neg(self)

    def __abs__(self):
        return absolute(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take_slice(self, idx)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) != 1 else shape[0])

    def swapaxes(self, a, b):
        return swapaxes(self, a, b)


class Parameter(Tensor):
    """A named, trainable tensor. Gradient starts at zero and accumulates
    across backward passes until reset."""

    __slots__ = ("name",)

    def __init__(self, data, name: str):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.data)

    @property
    def value(self) -> np.ndarray:
        return self.data

    @property
    def gradient(self) -> np.ndarray:
        return self.grad

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def zero_grads(params) -> None:
    for p in params:
        p.zero_grad()


class no_grad:
    """Context manager that disables tape recording (evaluation mode)."""

    def __enter__(self):
        self._prev = _STATE.grad_enabled
        _STATE.grad_enabled = False
        return self

    def __exit__(self, *exc):
        _STATE.grad_enabled = self._prev
        return False


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    t.grad = g if t.grad is None else t.grad + g


def _record(out_data: np.ndarray, inputs, bwd: Callable) -> Tensor:
    out = Tensor(out_data)
    if _STATE.grad_enabled and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        _STATE.tape.append((out, bwd))
    return out


def backward(loss: Tensor) -> None:
    """Populate gradients of everything the scalar ``loss`` depends on.

    Consumes the tape; calling again without a fresh forward pass raises.
    """
    if not isinstance(loss, Tensor):
        raise TypeError("backward expects a Tensor")
    if loss.size != 1:
        raise ValueError("backward expects a scalar loss")
    tape = _STATE.tape
    if not tape or not loss.requires_grad:
        raise RuntimeError("no taped operations lead to this loss "
                           "(tape already consumed or recording disabled)")
    loss.grad = np.ones_like(loss.data)
    for out, bwd in reversed(tape):
        if out.grad is not None:
            bwd(out.grad)
    _STATE.tape = []


def tape_length() -> int:
    return len(_STATE.tape)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to ``shape``."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise and structural ops


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bwd(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _record(a.data + b.data, (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bwd(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(-g, b.shape))

    return _record(a.data - b.data, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bwd(g):
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    return _record(a.data * b.data, (a, b), bwd)


def neg(a) -> Tensor:
    a = as_tensor(a)

    def bwd(g):
        _accum(a, -g)

    return _record(-a.data, (a,), bwd)


def scale(a, s: float) -> Tensor:
    a = as_tensor(a)
    s = float(s)

    def bwd(g):
        _accum(a, g * s)

    return _record(a.data * s, (a,), bwd)


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0

    def bwd(g):
        _accum(a, g * mask)

    return _record(np.maximum(a.data, 0.0), (a,), bwd)


def absolute(a) -> Tensor:
    a = as_tensor(a)
    sign = np.sign(a.data)  # 0 at the kink: subgradient convention

    def bwd(g):
        _accum(a, g * sign)

    return _record(np.abs(a.data), (a,), bwd)


def arctan2(y, x, zero_eps: float | None = None) -> Tensor:
    """Elementwise quadrant-aware arctangent of y/x, range (-pi, pi].

    With ``zero_eps`` set, entries where both |y| and |x| fall below it
    yield angle 0 with zero gradient (stationary-displacement rule).
    """
    y, x = as_tensor(y), as_tensor(x)
    out = np.arctan2(y.data, x.data)
    out[out == -np.pi] = np.pi
    denom = x.data * x.data + y.data * y.data
    if zero_eps is not None:
        degenerate = (np.abs(x.data) < zero_eps) & (np.abs(y.data) < zero_eps)
    else:
        degenerate = denom == 0.0
    if np.any(degenerate):
        out = np.where(degenerate, 0.0, out)
    safe = np.where(degenerate, 1.0, denom)

    def bwd(g):
        live = ~degenerate
        _accum(y, _unbroadcast(g * np.where(live, x.data / safe, 0.0), y.shape))
        _accum(x, _unbroadcast(g * np.where(live, -y.data / safe, 0.0), x.shape))

    return _record(out, (y, x), bwd)


def wrap_angle(a) -> Tensor:
    """Elementwise wrap into (-pi, pi]; derivative 1 almost everywhere."""
    a = as_tensor(a)
    out = np.pi - np.mod(np.pi - a.data, 2 * np.pi)

    def bwd(g):
        _accum(a, g)

    return _record(out, (a,), bwd)


def concat(tensors, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ValueError("concat of an empty sequence")
    sizes = [t.shape[axis] for t in ts]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        for t, piece in zip(ts, np.split(g, splits, axis=axis)):
            _accum(t, piece)

    return _record(np.concatenate([t.data for t in ts], axis=axis), tuple(ts), bwd)


def take_slice(a, idx) -> Tensor:
    """Basic slicing/indexing; the backward scatters into a zero tensor."""
    a = as_tensor(a)

    def bwd(g):
        if a.requires_grad:
            gz = np.zeros_like(a.data)
            gz[idx] = g
            _accum(a, gz)

    return _record(a.data[idx], (a,), bwd)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape

    def bwd(g):
        _accum(a, g.reshape(old))

    return _record(a.data.reshape(shape), (a,), bwd)


def swapaxes(a, ax1: int, ax2: int) -> Tensor:
    a = as_tensor(a)

    def bwd(g):
        _accum(a, g.swapaxes(ax1, ax2))

    return _record(a.data.swapaxes(ax1, ax2), (a,), bwd)


def reduce_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    in_shape = a.shape

    def bwd(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, in_shape).copy())
            return
        if not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, in_shape).copy())

    return _record(a.data.sum(axis=axis, keepdims=keepdims), (a,), bwd)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = 1
        for ax in axes:
            count *= a.shape[ax]
    return scale(reduce_sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


# ---------------------------------------------------------------------------
# linear algebra and network ops


def matmul(a, b) -> Tensor:
    """Matrix product. Supports [..,m,k] @ [k,n] (shared right operand,
    gradients summed over leading axes) and equal-rank batched products."""
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    if ad.ndim < 2 or bd.ndim < 2:
        raise ValueError("matmul operands must be at least 2-D")
    if ad.shape[-1] != bd.shape[-2]:
        raise ValueError(f"matmul inner dimensions differ: {ad.shape} @ {bd.shape}")

    if bd.ndim == 2:
        k, n = bd.shape

        def bwd(g):
            _accum(a, g @ bd.T)
            if b.requires_grad:
                _accum(b, ad.reshape(-1, k).T @ g.reshape(-1, n))

        return _record(ad @ bd, (a, b), bwd)

    if ad.ndim == bd.ndim and ad.shape[:-2] == bd.shape[:-2]:

        def bwd(g):
            _accum(a, g @ bd.swapaxes(-1, -2))
            _accum(b, ad.swapaxes(-1, -2) @ g)

        return _record(ad @ bd, (a, b), bwd)

    raise ValueError(f"unsupported matmul operand ranks: {ad.shape} @ {bd.shape}")


def softmax_rows(a) -> Tensor:
    """Row-stochastic softmax along the last axis, max-shifted for stability."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        _accum(a, y * (g - (g * y).sum(axis=-1, keepdims=True)))

    return _record(y, (a,), bwd)


def layer_norm(a, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then apply an
    elementwise affine (gain, bias)."""
    a, gain, bias = as_tensor(a), as_tensor(gain), as_tensor(bias)
    mu = a.data.mean(axis=-1, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv

    def bwd(g):
        if bias.requires_grad:
            _accum(bias, _unbroadcast(g, bias.shape))
        if gain.requires_grad:
            _accum(gain, _unbroadcast(g * xhat, gain.shape))
        if a.requires_grad:
            gh = g * gain.data
            gx = inv * (gh - gh.mean(axis=-1, keepdims=True)
                        - xhat * (gh * xhat).mean(axis=-1, keepdims=True))
            _accum(a, gx)

    return _record(xhat * gain.data + bias.data, (a, gain, bias), bwd)


def dropout(a, rate: float, rng: np.random.Generator | None = None,
            training: bool = True) -> Tensor:
    """Zero each entry with probability ``rate`` and rescale survivors by
    1/(1-rate); identity in eval mode. The generator must be passed
    explicitly whenever the op can actually drop."""
    a = as_tensor(a)
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return a
    if rng is None:
        raise ValueError("training-mode dropout needs an explicit rng")
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)

    def bwd(g):
        _accum(a, g * keep)

    return _record(a.data * keep, (a,), bwd)


def weight_norm(v, g) -> Tensor:
    """Reparameterize weights as g * v / ||v|| per output channel.

    The channel axis is the last one; ||v|| is the Euclidean norm over all
    remaining axes. Differentiable in both v and g.
    """
    v, g = as_tensor(v), as_tensor(g)
    axes = tuple(range(v.ndim - 1))
    norm = np.sqrt((v.data * v.data).sum(axis=axes))
    if np.any(norm == 0.0):
        raise ValueError("weight_norm: zero-norm channel")
    if g.shape != norm.shape:
        raise ValueError(f"weight_norm gain shape {g.shape} != channels {norm.shape}")
    w = v.data * (g.data / norm)

    def bwd(gw):
        s = (gw * v.data).sum(axis=axes)
        if g.requires_grad:
            _accum(g, s / norm)
        if v.requires_grad:
            _accum(v, gw * (g.data / norm) - v.data * (g.data * s / norm**3))

    return _record(w, (v, g), bwd)


def dilated_causal_conv(x, w, dilation: int = 1) -> Tensor:
    """Causal 1-D convolution with zero left-padding.

    x: [time, ch_in] or [batch, time, ch_in]; w: [taps, ch_in, ch_out].
    Output keeps the input length; position t only sees inputs at t and
    earlier (spaced by ``dilation``).
    """
    x, w = as_tensor(x), as_tensor(w)
    if dilation < 1:
        raise ValueError("dilation must be >= 1")
    if w.ndim != 3:
        raise ValueError("conv weights must be [taps, ch_in, ch_out]")
    squeeze = x.ndim == 2
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 3:
        raise ValueError("conv input must be 2-D or 3-D")
    if xd.shape[-1] != w.shape[1]:
        raise ValueError(f"conv channel mismatch: input {xd.shape[-1]}, weights {w.shape[1]}")
    out = kernels.conv_causal_forward(xd, w.data, dilation)
    if squeeze:
        out = out[0]

    def bwd(g):
        gd = g[None] if squeeze else g
        gx, gw = kernels.conv_causal_backward(np.ascontiguousarray(gd), xd, w.data, dilation)
        _accum(x, gx[0] if squeeze else gx)
        _accum(w, gw)

    return _record(out, (x, w), bwd)


# ---------------------------------------------------------------------------
# gradient oracle


def finite_diff_check(f, x, eps: float = 1e-5) -> float:
    """Max relative error between taped gradients and central differences.

    ``f`` maps the tensor(s) to a scalar Tensor; ``x`` is a Tensor or a
    sequence of Tensors (each with requires_grad). Relative error per
    coordinate is |analytic - numeric| / max(1, |numeric|).
    """
    tensors = [x] if isinstance(x, Tensor) else list(x)
    for t in tensors:
        if not t.requires_grad:
            raise ValueError("finite_diff_check tensors must require gradients")

    def run():
        return f(*tensors) if len(tensors) > 1 else f(tensors[0])

    for t in tensors:
        t.grad = np.zeros_like(t.data)
    loss = run()
    backward(loss)
    analytic = [t.grad.copy() for t in tensors]

    max_rel = 0.0
    with no_grad():
        for t, an in zip(tensors, analytic):
            flat = t.data.ravel()
            an_flat = an.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                fp = float(run().data)
                flat[i] = orig - eps
                fm = float(run().data)
                flat[i] = orig
                numeric = (fp - fm) / (2.0 * eps)
                rel = abs(an_flat[i] - numeric) / max(1.0, abs(numeric))
                max_rel = max(max_rel, rel)
    return max_rel


# ---------------------------------------------------------------------------
# checkpoint I/O

CHECKPOINT_FORMAT = "motkit.checkpoint"
CHECKPOINT_VERSION = 1
_PARAM_PREFIX = "param/"


def save_checkpoint(path, params: Mapping[str, Tensor], meta: dict | None = None) -> None:
    """Write parameters and metadata to an ``.npz`` checkpoint.

    Layout: one float64 array per parameter under the key
    ``param/<name>``, plus a ``__checkpoint__`` JSON header carrying the
    format tag, version and caller metadata. Round-trips bit-exactly.
    """
    header = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION,
              "meta": meta or {}}
    arrays = {}
    for name in sorted(params):
        t = params[name]
        arrays[_PARAM_PREFIX + name] = t.data if isinstance(t, Tensor) else np.asarray(t, dtype=np.float64)
    with open(path, "wb") as fh:
        np.savez(fh, __checkpoint__=np.array(json.dumps(header, sort_keys=True)), **arrays)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a checkpoint written by :func:`save_checkpoint`."""
    with np.load(path, allow_pickle=False) as z:
        if "__checkpoint__" not in z.files:
            raise ValueError(f"{path}: not a motkit checkpoint")
        header = json.loads(str(z["__checkpoint__"][()]))
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: unexpected checkpoint format tag")
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
        arrays = {k[len(_PARAM_PREFIX):]: z[k].astype(np.float64)
                  for k in z.files if k.startswith(_PARAM_PREFIX)}
    return arrays, header["meta"]


def params_allclose(a: Mapping[str, Tensor], b: Mapping[str, np.ndarray]) -> bool:
    """Bit-exact equality of two parameter maps (used by round-trip tests)."""
    if set(a) != set(b):
        return False
    for k in a:
        av = a[k].data if isinstance(a[k], Tensor) else np.asarray(a[k])
        if not np.array_equal(av, b[k]):
            return False
    return True
