"""Losses, Adam optimization, dataset windowing and the training loop.

The objective is an L1 penalty on the predicted per-frame offset plus a
weighted direction-alignment term: the mean absolute angular difference,
at the box center and its four corners, between the predicted and true
displacement directions measured from the previous ground-truth box.
Direction terms are computed in pixel space (anisotropic normalization
would distort angles) and flow through the quadrant-aware arctangent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .geometry import (BoundingBox, Velocity, angular_diff, direction_angles,
                       DEGENERATE_EPS)
from .predictor import ObservationWindow, PredictorModel, build_window, forward_windows

# Anchor offsets (center, lt, rt, lb, rb) as multiples of (dw, dh): the
# displacement of anchor i under a box offset (dx, dy, dw, dh) is
# (dx + SX[i]*dw, dy + SY[i]*dh).
_SX = np.array([0.0, -0.5, 0.5, -0.5, 0.5])
_SY = np.array([0.0, -0.5, -0.5, 0.5, 0.5])


@dataclass(frozen=True)
class TrainConfig:
    seed: int
    learning_rate: float = 0.0015
    batch_size: int = 16
    epochs: int = 50
    beta: float = 0.3
    p: int = 10
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("seed", "learning_rate", "batch_size", "epochs", "beta", "p",
                 "adam_beta1", "adam_beta2", "adam_eps")}


@dataclass(frozen=True)
class TrainSample:
    """One supervised pair: a window ending at s-1 and the step to s."""

    window: ObservationWindow
    target_velocity: Velocity      # normalized, like the model output
    prev_box: BoundingBox          # ground truth at s-1, pixels
    target_box: BoundingBox        # ground truth at s, pixels


# --- losses ----------------------------------------------------------------


def prediction_loss(v_hat: Velocity, v: Velocity) -> float:
    """L1 distance between predicted and true offsets (sum over 4 dims)."""
    return (abs(v_hat.dx - v.dx) + abs(v_hat.dy - v.dy)
            + abs(v_hat.dw - v.dw) + abs(v_hat.dh - v.dh))


def momentum_correction_loss(pred_box: BoundingBox, gt_box: BoundingBox,
                             prev_box: BoundingBox) -> float:
    """Mean absolute angular error of the motion direction at the five
    anchors (center + corners), both directions measured from prev_box.
    Always in [0, pi]."""
    pred_angles = direction_angles(pred_box, prev_box).as_tuple()
    true_angles = direction_angles(gt_box, prev_box).as_tuple()
    return sum(angular_diff(a, b) for a, b in zip(pred_angles, true_angles)) / 5.0


def total_loss(pred_v: Velocity, target_v: Velocity, pred_box: BoundingBox,
               gt_box: BoundingBox, prev_box: BoundingBox, beta: float) -> float:
    """Offset loss plus beta-weighted direction loss (beta=0 disables it)."""
    if beta < 0:
        raise ValueError("beta must be >= 0")
    return (prediction_loss(pred_v, target_v)
            + beta * momentum_correction_loss(pred_box, gt_box, prev_box))


def anchor_angles(v_px: np.ndarray) -> np.ndarray:
    """Direction angles [n, 5] of the five anchor displacements for pixel
    offsets [n, 4]; degenerate displacements map to 0."""
    v_px = np.asarray(v_px, dtype=np.float64)
    dx = v_px[:, 0:1] + _SX[None, :] * v_px[:, 2:3]
    dy = v_px[:, 1:2] + _SY[None, :] * v_px[:, 3:4]
    theta = np.arctan2(dy, dx)
    theta[theta == -np.pi] = np.pi
    degenerate = (np.abs(dx) < DEGENERATE_EPS) & (np.abs(dy) < DEGENERATE_EPS)
    return np.where(degenerate, 0.0, theta)


def batch_objective(v_hat: Tensor, target_norm: np.ndarray, scale_px: np.ndarray,
                    true_angles: np.ndarray, beta: float):
    """Taped mean loss over a batch.

    v_hat: [n, 4] normalized predictions. ``scale_px`` de-normalizes each
    sample back to pixels for the direction term; ``true_angles`` are the
    precomputed anchor angles of the ground-truth offsets.

    Returns (total, pred_value, mcl_value) with only ``total`` taped.
    """
    err = ad.absolute(ad.sub(v_hat, target_norm))
    pred_mean = ad.mean(err.sum(axis=1))

    v_px = ad.mul(v_hat, scale_px)
    dx = ad.add(v_px[:, 0:1], ad.mul(v_px[:, 2:3], _SX[None, :]))
    dy = ad.add(v_px[:, 1:2], ad.mul(v_px[:, 3:4], _SY[None, :]))
    theta = ad.arctan2(dy, dx, zero_eps=DEGENERATE_EPS)
    diff = ad.absolute(ad.wrap_angle(ad.sub(theta, true_angles)))
    mcl_mean = ad.mean(diff.sum(axis=1) * (1.0 / 5.0))

    total = ad.add(pred_mean, ad.scale(mcl_mean, beta))
    return total, float(pred_mean.data), float(mcl_mean.data)


# --- Adam ------------------------------------------------------------------


@dataclass
class AdamState:
    """First/second moment estimates per parameter plus the step counter."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: Sequence[Parameter]) -> "AdamState":
        return cls(m=[np.zeros_like(p.data) for p in params],
                   v=[np.zeros_like(p.data) for p in params])


def adam_step(params: Sequence[Parameter], grads: Sequence[np.ndarray],
              state: AdamState, cfg: TrainConfig) -> None:
    """One bias-corrected Adam update, in place on the parameter values."""
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    state.step += 1
    t = state.step
    correct1 = 1.0 - b1 ** t
    correct2 = 1.0 - b2 ** t
    for i, (p, g) in enumerate(zip(params, grads)):
        if g.shape != p.data.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.data.shape}")
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * (g * g)
        m_hat = state.m[i] / correct1
        v_hat = state.v[i] / correct2
        p.data -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


# --- dataset ---------------------------------------------------------------


def make_dataset(scenarios, p: int, seed: int = 0) -> list[TrainSample]:
    """One sample per (track, frame-with-predecessor) across all scenarios.

    The window ends at s-1 and the target is the offset to s. Tracks of
    length 1 contribute nothing. The sample order is shuffled with the
    given seed so epoch batching starts from a scenario-independent order.
    """
    samples: list[TrainSample] = []
    for scenario in scenarios:
        w_img, h_img = scenario.image_size
        norm = np.array([w_img, h_img, w_img, h_img], dtype=np.float64)
        tracks = scenario.gt_tracks()
        for tid in sorted(tracks):
            boxes = [b for _, b in tracks[tid]]
            for s in range(1, len(boxes)):
                window = build_window(boxes[:s], p, scenario.image_size)
                dv = np.array([boxes[s].cx - boxes[s - 1].cx,
                               boxes[s].cy - boxes[s - 1].cy,
                               boxes[s].w - boxes[s - 1].w,
                               boxes[s].h - boxes[s - 1].h]) / norm
                samples.append(TrainSample(
                    window=window,
                    target_velocity=Velocity(*dv),
                    prev_box=boxes[s - 1],
                    target_box=boxes[s]))
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(samples))
    return [samples[i] for i in order]


# --- training loop ---------------------------------------------------------


@dataclass
class EpochStats:
    epoch: int
    loss: float
    pred_loss: float
    mcl: float


@dataclass
class Batches:
    """Stacked sample arrays; one slice per optimization step."""

    windows: np.ndarray       # [n, p, 8]
    targets: np.ndarray       # [n, 4] normalized
    scales: np.ndarray        # [n, 4] pixels-per-unit
    true_angles: np.ndarray   # [n, 5]

    @classmethod
    def from_samples(cls, dataset: Sequence[TrainSample]) -> "Batches":
        windows = np.stack([s.window.states for s in dataset])
        targets = np.array([[s.target_velocity.dx, s.target_velocity.dy,
                             s.target_velocity.dw, s.target_velocity.dh]
                            for s in dataset])
        scales = np.array([[s.window.image_size[0], s.window.image_size[1],
                            s.window.image_size[0], s.window.image_size[1]]
                           for s in dataset], dtype=np.float64)
        v_px = np.array([[s.target_box.cx - s.prev_box.cx,
                          s.target_box.cy - s.prev_box.cy,
                          s.target_box.w - s.prev_box.w,
                          s.target_box.h - s.prev_box.h] for s in dataset])
        return cls(windows=windows, targets=targets, scales=scales,
                   true_angles=anchor_angles(v_px))


def train(dataset: Sequence[TrainSample], model: PredictorModel,
          cfg: TrainConfig) -> tuple[PredictorModel, list[EpochStats]]:
    """Minimize the batched objective for cfg.epochs over the dataset.

    Deterministic given (dataset order, model init, cfg.seed): the same
    generator drives epoch shuffling and dropout.
    """
    if not dataset:
        raise ValueError("training needs a non-empty dataset")
    data = Batches.from_samples(dataset)
    n = data.windows.shape[0]
    params = model.parameters()
    state = AdamState.for_params(params)
    rng = np.random.default_rng(cfg.seed)
    history: list[EpochStats] = []

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        sums = np.zeros(3)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            ad.zero_grads(params)
            v_hat = forward_windows(Tensor(data.windows[idx]), model,
                                    training=True, rng=rng)
            loss, pred_val, mcl_val = batch_objective(
                v_hat, data.targets[idx], data.scales[idx],
                data.true_angles[idx], cfg.beta)
            ad.backward(loss)
            adam_step(params, [p.grad for p in params], state, cfg)
            sums += len(idx) * np.array([float(loss.data), pred_val, mcl_val])
        mean = sums / n
        history.append(EpochStats(epoch=epoch, loss=mean[0],
                                  pred_loss=mean[1], mcl=mean[2]))
    return model, history


def write_loss_curve(path, history: Sequence[EpochStats]) -> None:
    """CSV loss curve: epoch, mean_loss, mean_pred_loss, mean_mcl."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,mean_loss,mean_pred_loss,mean_mcl\n")
        for row in history:
            fh.write(f"{row.epoch},{row.loss!r},{row.pred_loss!r},{row.mcl!r}\n")

