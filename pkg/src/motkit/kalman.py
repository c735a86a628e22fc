"""Constant-velocity Kalman filter over (cx, cy, w, h) boxes.

The SORT-family baseline motion model: an 8-dim state (box plus per-frame
velocities for all four components, matching the learned predictor's
output space), process/measurement noise scaled by the current box size.
States are value objects; predict/update return new ones, so tracks can
run in parallel without shared mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BoundingBox

STATE_DIM = 8
MEAS_DIM = 4

# Noise scales, SORT-family defaults: standard deviations are these
# weights times the current box width/height (floored to avoid singular
# covariances on degenerate boxes).
STD_WEIGHT_POSITION = 1.0 / 20.0
STD_WEIGHT_VELOCITY = 1.0 / 160.0
_SIZE_FLOOR = 1e-3

_F = np.eye(STATE_DIM)
_F[:4, 4:] = np.eye(4)
_H = np.eye(MEAS_DIM, STATE_DIM)


@dataclass(frozen=True)
class KalmanState:
    mean: np.ndarray        # [8]
    covariance: np.ndarray  # [8, 8], symmetric PSD

    def box(self) -> BoundingBox:
        cx, cy, w, h = self.mean[:4]
        return BoundingBox(cx, cy, max(w, 0.0), max(h, 0.0))


def _size_scales(w: float, h: float) -> np.ndarray:
    w = max(abs(w), _SIZE_FLOOR)
    h = max(abs(h), _SIZE_FLOOR)
    return np.array([w, h, w, h], dtype=np.float64)


def kf_init(box: BoundingBox) -> KalmanState:
    """State centered on the box with zero velocity and inflated velocity
    uncertainty."""
    mean = np.zeros(STATE_DIM)
    mean[:4] = (box.cx, box.cy, box.w, box.h)
    sizes = _size_scales(box.w, box.h)
    std = np.concatenate([2.0 * STD_WEIGHT_POSITION * sizes,
                          10.0 * STD_WEIGHT_VELOCITY * sizes])
    return KalmanState(mean=mean, covariance=np.diag(std * std))


def kf_predict(state: KalmanState) -> KalmanState:
    """Advance one frame under the constant-velocity transition."""
    sizes = _size_scales(state.mean[2], state.mean[3])
    std = np.concatenate([STD_WEIGHT_POSITION * sizes,
                          STD_WEIGHT_VELOCITY * sizes])
    q = np.diag(std * std)
    mean = _F @ state.mean
    cov = _F @ state.covariance @ _F.T + q
    cov = (cov + cov.T) / 2.0
    return KalmanState(mean=mean, covariance=cov)


def kf_update(state: KalmanState, z: BoundingBox) -> KalmanState:
    """Gain-weighted correction of the four observed box components."""
    sizes = _size_scales(state.mean[2], state.mean[3])
    std = STD_WEIGHT_POSITION * sizes
    r = np.diag(std * std)

    s = _H @ state.covariance @ _H.T + r
    s = (s + s.T) / 2.0
    try:
        chol = np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        raise ValueError("innovation covariance is not positive definite") from None
    # K = P H^T S^-1 via two triangular solves
    pht = state.covariance @ _H.T
    gain = np.linalg.solve(chol.T, np.linalg.solve(chol, pht.T)).T

    innovation = np.array([z.cx, z.cy, z.w, z.h]) - _H @ state.mean
    mean = state.mean + gain @ innovation
    cov = state.covariance - gain @ s @ gain.T
    cov = (cov + cov.T) / 2.0
    return KalmanState(mean=mean, covariance=cov)
