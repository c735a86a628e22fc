"""Encoder-only transformer over temporal feature tokens.

Sinusoidal positional encodings are added to the token sequence, then a
stack of pre-norm encoder layers (multi-head self-attention + position-
wise feed-forward, each wrapped in a residual) mixes context across the
whole window. No causal mask: every token is observed history and the
prediction target lies strictly after the window.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor


@dataclass(frozen=True)
class EncoderConfig:
    num_layers: int = 6
    num_heads: int = 8
    model_dim: int = 32
    ffn_dim: int = 64
    dropout_rate: float = 0.1

    def __post_init__(self):
        if self.model_dim % self.num_heads != 0:
            raise ValueError("model_dim must be divisible by num_heads")

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.num_heads

    def to_dict(self) -> dict:
        return {"num_layers": self.num_layers, "num_heads": self.num_heads,
                "model_dim": self.model_dim, "ffn_dim": self.ffn_dim,
                "dropout_rate": self.dropout_rate}

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(**d)


@lru_cache(maxsize=32)
def _pe_table(p: int, dim: int) -> np.ndarray:
    pos = np.arange(p, dtype=np.float64)[:, None]
    i = np.arange(dim // 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * i / dim)
    table = np.zeros((p, dim), dtype=np.float64)
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle)
    return table


def positional_encoding(p: int, dim: int) -> np.ndarray:
    """Sinusoidal position table [p, dim]: sin on even columns, cos on odd."""
    if dim % 2 != 0:
        raise ValueError("positional encoding needs an even dimension")
    return _pe_table(p, dim).copy()


def init_encoder_params(cfg: EncoderConfig, rng: np.random.Generator,
                        prefix: str = "enc") -> dict[str, Parameter]:
    d, f = cfg.model_dim, cfg.ffn_dim
    params: dict[str, Parameter] = {}

    def dense(name: str, fan_in: int, shape):
        params[name] = Parameter(rng.normal(0.0, np.sqrt(1.0 / fan_in), size=shape), name)

    for l in range(cfg.num_layers):
        base = f"{prefix}.layer{l}"
        for proj in ("wq", "wk", "wv", "wo"):
            dense(f"{base}.{proj}", d, (d, d))
            params[f"{base}.{proj[1]}b"] = Parameter(np.zeros(d), f"{base}.{proj[1]}b")
        dense(f"{base}.ffn1", d, (d, f))
        params[f"{base}.ffn1_b"] = Parameter(np.zeros(f), f"{base}.ffn1_b")
        dense(f"{base}.ffn2", f, (f, d))
        params[f"{base}.ffn2_b"] = Parameter(np.zeros(d), f"{base}.ffn2_b")
        for ln in ("ln1", "ln2"):
            params[f"{base}.{ln}.gain"] = Parameter(np.ones(d), f"{base}.{ln}.gain")
            params[f"{base}.{ln}.bias"] = Parameter(np.zeros(d), f"{base}.{ln}.bias")
    return params


def scaled_attention(q, k, v) -> Tensor:
    """softmax(q kT / sqrt(d_k)) v along the last two axes.

    Accepts [tokens, d_k] or any batched [..., tokens, d_k] layout; the
    scaling sits inside the softmax argument so large dot products cannot
    saturate it.
    """
    q, k, v = ad.as_tensor(q), ad.as_tensor(k), ad.as_tensor(v)
    dk = q.shape[-1]
    scores = ad.scale(ad.matmul(q, ad.swapaxes(k, -1, -2)), 1.0 / np.sqrt(dk))
    return ad.matmul(ad.softmax_rows(scores), v)


def attention_weights(q, k) -> np.ndarray:
    """Attention matrix alone (row-stochastic), for inspection and tests."""
    q, k = ad.as_tensor(q), ad.as_tensor(k)
    dk = q.shape[-1]
    with ad.no_grad():
        scores = ad.scale(ad.matmul(q, ad.swapaxes(k, -1, -2)), 1.0 / np.sqrt(dk))
        return ad.softmax_rows(scores).data


def multi_head_attention(tokens, params, num_heads: int, base: str) -> Tensor:
    """Project to per-head Q/K/V, attend, concatenate heads, project out."""
    x = ad.as_tensor(tokens)
    d = x.shape[-1]
    if d % num_heads != 0:
        raise ValueError("token dimension not divisible by head count")
    dk = d // num_heads
    squeeze = x.ndim == 2
    if squeeze:
        x = ad.reshape(x, (1,) + x.shape)
    b, t = x.shape[0], x.shape[1]

    def heads(name, bias):
        y = ad.add(ad.matmul(x, params[f"{base}.{name}"]), params[f"{base}.{bias}"])
        return ad.swapaxes(ad.reshape(y, (b, t, num_heads, dk)), 1, 2)

    q = heads("wq", "qb")
    k = heads("wk", "kb")
    v = heads("wv", "vb")
    att = scaled_attention(q, k, v)                       # [b, heads, t, dk]
    merged = ad.reshape(ad.swapaxes(att, 1, 2), (b, t, d))
    out = ad.add(ad.matmul(merged, params[f"{base}.wo"]), params[f"{base}.ob"])
    if squeeze:
        out = ad.reshape(out, (t, d))
    return out


def encoder_forward(tokens, cfg: EncoderConfig, params, training: bool = False,
                    rng: np.random.Generator | None = None,
                    prefix: str = "enc", add_positions: bool = True) -> Tensor:
    """Positional encoding plus the pre-norm encoder stack.

    tokens: [time, dim] or [batch, time, dim]; shape is preserved.
    """
    x = ad.as_tensor(tokens)
    t, d = x.shape[-2], x.shape[-1]
    if d != cfg.model_dim:
        raise ValueError(f"token dim {d} != model_dim {cfg.model_dim}")
    if add_positions:
        x = ad.add(x, positional_encoding(t, d))
    rate = cfg.dropout_rate
    for l in range(cfg.num_layers):
        base = f"{prefix}.layer{l}"
        h = ad.layer_norm(x, params[f"{base}.ln1.gain"], params[f"{base}.ln1.bias"])
        a = multi_head_attention(h, params, cfg.num_heads, base)
        x = ad.add(x, ad.dropout(a, rate, rng, training=training))
        h = ad.layer_norm(x, params[f"{base}.ln2.gain"], params[f"{base}.ln2.bias"])
        f = ad.add(ad.matmul(h, params[f"{base}.ffn1"]), params[f"{base}.ffn1_b"])
        f = ad.relu(f)
        f = ad.add(ad.matmul(f, params[f"{base}.ffn2"]), params[f"{base}.ffn2_b"])
        x = ad.add(x, ad.dropout(f, rate, rng, training=training))
    return x
