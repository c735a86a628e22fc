"""Core bounding-box geometry: center-format boxes, IoU, corners and
motion-direction angles.

All boxes live in pixel screen coordinates (y grows downward). Every
function here is pure, so they are safe to call from any thread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Displacements with both components below this are treated as "no motion"
# and map to angle 0 instead of an arbitrary arctangent.
DEGENERATE_EPS = 1e-9

Point = tuple[float, float]


@dataclass(frozen=True, slots=True)
class BoundingBox:
    """Axis-aligned box as (center x, center y, width, height) in pixels."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("cx", "cy", "w", "h"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"non-finite box field {name!r}")
        if self.w < 0 or self.h < 0:
            raise ValueError(f"negative box size w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True, slots=True)
class Velocity:
    """Per-frame box offset (dx, dy, dw, dh) in pixels/frame."""

    dx: float
    dy: float
    dw: float
    dh: float

    def __post_init__(self):
        for name in ("dx", "dy", "dw", "dh"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"non-finite velocity field {name!r}")


@dataclass(frozen=True, slots=True)
class StateVector:
    """One observation: a box plus its per-frame velocity (8 scalars)."""

    box: BoundingBox
    vel: Velocity

    def as_tuple(self) -> tuple[float, ...]:
        b, v = self.box, self.vel
        return (b.cx, b.cy, b.w, b.h, v.dx, v.dy, v.dw, v.dh)


@dataclass(frozen=True, slots=True)
class CornerSet:
    """Center plus the four box corners, the anchor points used when
    comparing motion directions."""

    c: Point
    lt: Point
    rt: Point
    lb: Point
    rb: Point

    def as_tuple(self) -> tuple[Point, ...]:
        return (self.c, self.lt, self.rt, self.lb, self.rb)


@dataclass(frozen=True, slots=True)
class AngleSet:
    """Motion direction at the center and four corners, radians in (-pi, pi]."""

    theta_c: float
    theta_lt: float
    theta_rt: float
    theta_lb: float
    theta_rb: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.theta_c, self.theta_lt, self.theta_rt, self.theta_lb, self.theta_rb)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes.

    Returns a value in [0, 1]; degenerate boxes with zero union area give 0
    by convention.
    """
    ax1, ay1 = a.cx - a.w / 2, a.cy - a.h / 2
    ax2, ay2 = a.cx + a.w / 2, a.cy + a.h / 2
    bx1, by1 = b.cx - b.w / 2, b.cy - b.h / 2
    bx2, by2 = b.cx + b.w / 2, b.cy + b.h / 2

    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def corners(b: BoundingBox) -> CornerSet:
    """Center and the four corners of a box (lt, rt, lb, rb; y grows down)."""
    hw, hh = b.w / 2, b.h / 2
    return CornerSet(
        c=(b.cx, b.cy),
        lt=(b.cx - hw, b.cy - hh),
        rt=(b.cx + hw, b.cy - hh),
        lb=(b.cx - hw, b.cy + hh),
        rb=(b.cx + hw, b.cy + hh),
    )


def motion_direction(p_to: Point, p_from: Point) -> float:
    """Quadrant-aware direction angle of the displacement p_to - p_from.

    Returns radians in (-pi, pi]. A displacement with both components
    below DEGENERATE_EPS maps to 0 (stationary target convention).
    """
    dx = p_to[0] - p_from[0]
    dy = p_to[1] - p_from[1]
    if abs(dx) < DEGENERATE_EPS and abs(dy) < DEGENERATE_EPS:
        return 0.0
    theta = math.atan2(dy, dx)
    if theta == -math.pi:
        theta = math.pi
    return theta


def angular_diff(a: float, b: float) -> float:
    """Smallest absolute difference between two angles on the circle, in [0, pi]."""
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("non-finite angle")
    return abs(wrap_angle(a - b))


def wrap_angle(x: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    return math.pi - (math.pi - x) % (2 * math.pi)


def direction_angles(b_to: BoundingBox, b_from: BoundingBox) -> AngleSet:
    """Motion direction at the center and four corners of b_from -> b_to."""
    to_pts = corners(b_to).as_tuple()
    from_pts = corners(b_from).as_tuple()
    angles = [motion_direction(p, q) for p, q in zip(to_pts, from_pts)]
    return AngleSet(*angles)


def box_to_tlwh(b: BoundingBox) -> tuple[float, float, float, float]:
    """Convert a center-format box to (top-left x, top-left y, w, h)."""
    return (b.cx - b.w / 2, b.cy - b.h / 2, b.w, b.h)


def tlwh_to_box(tlwh) -> BoundingBox:
    """Convert a (top-left x, top-left y, w, h) quadruple to a center-format box."""
    left, top, w, h = tlwh
    return BoundingBox(left + w / 2, top + h / 2, w, h)
