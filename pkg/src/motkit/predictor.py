"""Motion predictor: conv stack -> transformer encoder -> linear head.

Maps a fixed-length window of box+velocity observations to the next
per-frame velocity, and from it the next box. Inputs are normalized by
the image size so the same model transfers across resolutions; the head
starts at zero so an untrained predictor degrades to "box stays put".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .geometry import BoundingBox, Velocity
from .tcn import TcnConfig, init_tcn_params, tcn_forward
from .transformer import EncoderConfig, init_encoder_params, encoder_forward

STATE_DIM = 8
VELOCITY_DIM = 4
DEFAULT_WINDOW = 10


@dataclass(frozen=True)
class ObservationWindow:
    """Normalized model input for one track.

    ``states`` is [p, 8], rows chronological, columns
    (cx, cy, w, h, dx, dy, dw, dh) normalized by image width (x-like) and
    height (y-like). ``last_box`` keeps the newest real box in pixels for
    de-normalizing predictions.
    """

    states: np.ndarray
    last_box: BoundingBox
    image_size: tuple[int, int]

    @property
    def length(self) -> int:
        return self.states.shape[0]


def build_window(history: Sequence[BoundingBox], p: int,
                 image_size: tuple[int, int]) -> ObservationWindow:
    """Assemble the most recent ``p`` observations into a model input.

    Velocities are differences of consecutive history boxes (the very
    first observation of a track has zero velocity). Histories shorter
    than ``p`` are left-padded by repeating the earliest box with zero
    velocity, so day-one tracks still produce a full window.
    """
    if len(history) == 0:
        raise ValueError("build_window needs a non-empty history")
    if p < 1:
        raise ValueError("window length must be >= 1")
    w_img, h_img = image_size
    if w_img <= 0 or h_img <= 0:
        raise ValueError("image size must be positive")

    boxes = [(b.cx, b.cy, b.w, b.h) for b in history]
    arr = np.asarray(boxes, dtype=np.float64)
    vel = np.zeros_like(arr)
    if len(arr) > 1:
        vel[1:] = arr[1:] - arr[:-1]

    states = np.concatenate([arr, vel], axis=1)[-p:]
    if states.shape[0] < p:
        pad = np.zeros((p - states.shape[0], STATE_DIM))
        pad[:, :4] = arr[0]
        states = np.concatenate([pad, states], axis=0)

    norm = np.array([w_img, h_img, w_img, h_img] * 2, dtype=np.float64)
    return ObservationWindow(states=states / norm, last_box=history[-1],
                             image_size=(w_img, h_img))


@dataclass
class PredictorModel:
    """Learnable pieces of the motion predictor plus their configuration."""

    tcn_cfg: TcnConfig
    enc_cfg: EncoderConfig
    params: dict[str, Parameter]
    in_dim: int = STATE_DIM

    def parameters(self) -> list[Parameter]:
        return [self.params[k] for k in sorted(self.params)]


def init_model(rng: np.random.Generator,
               tcn_cfg: TcnConfig | None = None,
               enc_cfg: EncoderConfig | None = None,
               in_dim: int = STATE_DIM) -> PredictorModel:
    tcn_cfg = tcn_cfg or TcnConfig()
    enc_cfg = enc_cfg or EncoderConfig()
    if tcn_cfg.channels != enc_cfg.model_dim:
        raise ValueError("conv channels must match encoder model_dim")
    params = init_tcn_params(tcn_cfg, in_dim, rng)
    params.update(init_encoder_params(enc_cfg, rng))
    d = enc_cfg.model_dim
    params["head.w"] = Parameter(np.zeros((d, VELOCITY_DIM)), "head.w")
    params["head.b"] = Parameter(np.zeros(VELOCITY_DIM), "head.b")
    return PredictorModel(tcn_cfg=tcn_cfg, enc_cfg=enc_cfg, params=params, in_dim=in_dim)


def forward_windows(x, model: PredictorModel, training: bool = False,
                    rng: np.random.Generator | None = None) -> Tensor:
    """Normalized velocity prediction for a batch of windows.

    x: [batch, p, 8] (or [p, 8] for a single window). Returns [batch, 4]
    (respectively [4]): the last encoder token pushed through the linear
    head.
    """
    x = ad.as_tensor(x)
    squeeze = x.ndim == 2
    if squeeze:
        x = ad.reshape(x, (1,) + x.shape)
    tokens = tcn_forward(x, model.tcn_cfg, model.params, training=training, rng=rng)
    ctx = encoder_forward(tokens, model.enc_cfg, model.params, training=training, rng=rng)
    last = ctx[:, -1, :]
    out = ad.add(ad.matmul(last, model.params["head.w"]), model.params["head.b"])
    if squeeze:
        out = ad.reshape(out, (VELOCITY_DIM,))
    return out


def predict_velocity(window: ObservationWindow, model: PredictorModel) -> Velocity:
    """De-normalized next-frame velocity for one window (eval mode)."""
    with ad.no_grad():
        v = forward_windows(Tensor(window.states), model, training=False).data
    w_img, h_img = window.image_size
    return Velocity(dx=v[0] * w_img, dy=v[1] * h_img,
                    dw=v[2] * w_img, dh=v[3] * h_img)


def predict_box(window: ObservationWindow, model: PredictorModel) -> BoundingBox:
    """Last real box advanced by the predicted velocity; w, h clamped >= 0."""
    v = predict_velocity(window, model)
    b = window.last_box
    return BoundingBox(cx=b.cx + v.dx, cy=b.cy + v.dy,
                       w=max(b.w + v.dw, 0.0), h=max(b.h + v.dh, 0.0))


def save_model(path, model: PredictorModel) -> None:
    meta = {"kind": "motion-predictor", "in_dim": model.in_dim,
            "tcn": model.tcn_cfg.to_dict(), "encoder": model.enc_cfg.to_dict()}
    ad.save_checkpoint(path, model.params, meta)


def load_model(path) -> PredictorModel:
    arrays, meta = ad.load_checkpoint(path)
    if meta.get("kind") != "motion-predictor":
        raise ValueError(f"{path}: checkpoint does not hold a motion predictor")
    params = {name: Parameter(arr, name) for name, arr in arrays.items()}
    return PredictorModel(tcn_cfg=TcnConfig.from_dict(meta["tcn"]),
                          enc_cfg=EncoderConfig.from_dict(meta["encoder"]),
                          params=params, in_dim=int(meta["in_dim"]))
