"""Dilated causal convolution stack.

A stack of residual blocks, each holding two weight-normalized dilated
causal convolutions with ReLU + dropout after each. Dilations grow per
block so the receptive field covers the whole observation window. The
first block lifts the input channels to the working width through a 1x1
convolution on its residual path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor


@dataclass(frozen=True)
class TcnConfig:
    num_blocks: int = 4
    kernel_size: int = 3
    channels: int = 32
    dilations: tuple[int, ...] = (1, 2, 4, 8)
    dropout_rate: float = 0.1

    def __post_init__(self):
        if self.num_blocks != len(self.dilations):
            raise ValueError("num_blocks must equal len(dilations)")
        if self.kernel_size < 1:
            raise ValueError("kernel_size must be >= 1")
        if any(d < 1 for d in self.dilations):
            raise ValueError("dilations must be >= 1")

    def to_dict(self) -> dict:
        return {"num_blocks": self.num_blocks, "kernel_size": self.kernel_size,
                "channels": self.channels, "dilations": list(self.dilations),
                "dropout_rate": self.dropout_rate}

    @classmethod
    def from_dict(cls, d: dict) -> "TcnConfig":
        d = dict(d)
        d["dilations"] = tuple(d["dilations"])
        return cls(**d)


def receptive_field(kernel_size: int, dilations) -> int:
    """Time span visible to the last output step: each block applies two
    convolutions, so 1 + 2*(kernel_size-1)*sum(dilations)."""
    return 1 + 2 * (kernel_size - 1) * int(sum(dilations))


def init_tcn_params(cfg: TcnConfig, in_dim: int, rng: np.random.Generator,
                    prefix: str = "tcn") -> dict[str, Parameter]:
    """Build the parameter map for the conv stack.

    Conv weights are drawn He-style and stored in weight-norm form (the
    gain starts at the direction's norm, so the initial effective weight
    equals the draw). The residual projection appears only where the
    block's input and output widths differ.
    """
    params: dict[str, Parameter] = {}
    c = cfg.channels
    ch_in = in_dim
    for j, _ in enumerate(cfg.dilations):
        for conv in ("conv1", "conv2"):
            cin = ch_in if conv == "conv1" else c
            v = rng.normal(0.0, np.sqrt(2.0 / (cfg.kernel_size * cin)),
                           size=(cfg.kernel_size, cin, c))
            g = np.sqrt((v * v).sum(axis=(0, 1)))
            base = f"{prefix}.block{j}.{conv}"
            params[f"{base}.v"] = Parameter(v, f"{base}.v")
            params[f"{base}.g"] = Parameter(g, f"{base}.g")
            params[f"{base}.b"] = Parameter(np.zeros(c), f"{base}.b")
        if ch_in != c:
            w = rng.normal(0.0, np.sqrt(1.0 / ch_in), size=(ch_in, c))
            params[f"{prefix}.block{j}.proj"] = Parameter(w, f"{prefix}.block{j}.proj")
        ch_in = c
    return params


def _conv_layer(x: Tensor, params, base: str, dilation: int, rate: float,
                training: bool, rng) -> Tensor:
    w = ad.weight_norm(params[f"{base}.v"], params[f"{base}.g"])
    h = ad.dilated_causal_conv(x, w, dilation)
    h = ad.add(h, params[f"{base}.b"])
    h = ad.relu(h)
    return ad.dropout(h, rate, rng, training=training)


def tcn_forward(x, cfg: TcnConfig, params, training: bool = False,
                rng: np.random.Generator | None = None,
                prefix: str = "tcn") -> Tensor:
    """Run the residual conv stack.

    x: [time, ch] or [batch, time, ch]. Output keeps the time length and
    carries ``cfg.channels`` channels; position t never sees inputs
    after t.
    """
    x = ad.as_tensor(x)
    h = x
    for j, dil in enumerate(cfg.dilations):
        base = f"{prefix}.block{j}"
        r = _conv_layer(h, params, f"{base}.conv1", dil, cfg.dropout_rate, training, rng)
        r = _conv_layer(r, params, f"{base}.conv2", dil, cfg.dropout_rate, training, rng)
        proj_key = f"{base}.proj"
        res = ad.matmul(h, params[proj_key]) if proj_key in params else h
        h = ad.add(res, r)
    return h
