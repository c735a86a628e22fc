"""Multi-object tracking toolkit.

A learned temporal motion predictor (dilated causal convolution stack +
transformer encoder trained with an L1 offset loss and a direction-
alignment loss) embedded in a two-stage detection-association tracker,
next to a constant-velocity Kalman baseline, synthetic scenario
generation, MOT-format I/O and CLEAR/IDF1 metrics.
"""

__version__ = "0.1.0"

from .geometry import BoundingBox, Velocity, StateVector, iou  # noqa: F401
