"""Minimum-cost assignment and IoU-gated matching between tracks and
detections."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .geometry import BoundingBox


@dataclass(frozen=True)
class Assignment:
    """Outcome of one matching stage. Every track index and detection
    index appears in exactly one of the three groups."""

    matches: tuple[tuple[int, int], ...]
    unmatched_tracks: tuple[int, ...]
    unmatched_detections: tuple[int, ...]


def hungarian(cost) -> list[tuple[int, int]]:
    """Minimum-total-cost one-to-one assignment on a cost matrix.

    Covers min(rows, cols) pairs; the solution is optimal among all such
    assignments. Pairs come back sorted by row index. Empty matrices give
    an empty assignment; non-finite costs are rejected.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError("cost must be a 2-D matrix")
    n, m = cost.shape
    if n == 0 or m == 0:
        return []
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix holds non-finite entries")
    if n <= m:
        row_to_col = kernels.solve_assignment(cost)
        return [(i, int(row_to_col[i])) for i in range(n)]
    col_to_row = kernels.solve_assignment(np.ascontiguousarray(cost.T))
    return sorted((int(col_to_row[j]), j) for j in range(m))


def boxes_to_array(boxes: Sequence[BoundingBox]) -> np.ndarray:
    arr = np.zeros((len(boxes), 4), dtype=np.float64)
    for i, b in enumerate(boxes):
        arr[i] = (b.cx, b.cy, b.w, b.h)
    return arr


def iou_matrix(a: Sequence[BoundingBox], b: Sequence[BoundingBox]) -> np.ndarray:
    return kernels.iou_matrix(boxes_to_array(a), boxes_to_array(b))


def match_stage(predicted_boxes: Sequence[BoundingBox],
                detection_boxes: Sequence[BoundingBox],
                iou_gate: float) -> Assignment:
    """Hungarian matching on 1 - IoU; pairs below the gate are demoted to
    unmatched on both sides."""
    n, m = len(predicted_boxes), len(detection_boxes)
    if n == 0 or m == 0:
        return Assignment(matches=(), unmatched_tracks=tuple(range(n)),
                          unmatched_detections=tuple(range(m)))
    overlap = iou_matrix(predicted_boxes, detection_boxes)
    pairs = hungarian(1.0 - overlap)
    matches = [(ti, di) for ti, di in pairs if overlap[ti, di] >= iou_gate]
    matched_t = {ti for ti, _ in matches}
    matched_d = {di for _, di in matches}
    return Assignment(
        matches=tuple(matches),
        unmatched_tracks=tuple(i for i in range(n) if i not in matched_t),
        unmatched_detections=tuple(j for j in range(m) if j not in matched_d))
