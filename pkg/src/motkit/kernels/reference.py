"""Fallback kernel implementations (numpy + pure Python).

These mirror the compiled kernels in ``_native.pyx`` operation for
operation. The assignment solver in particular uses the exact same scan
order so both backends break cost ties identically.
"""

from __future__ import annotations

import numpy as np

NAME = "reference"


def conv_causal_forward(x: np.ndarray, w: np.ndarray, dilation: int) -> np.ndarray:
    """Dilated causal 1-D convolution.

    x: [batch, time, ch_in], w: [taps, ch_in, ch_out]. Output [batch, time,
    ch_out] where out[t] sums w[i] @ x[t - i*dilation] with implicit zero
    padding on the left.
    """
    batch, time, _ = x.shape
    taps, _, ch_out = w.shape
    out = np.zeros((batch, time, ch_out), dtype=np.float64)
    for i in range(taps):
        off = i * dilation
        if off >= time:
            break
        if off == 0:
            out += x @ w[i]
        else:
            out[:, off:, :] += x[:, : time - off, :] @ w[i]
    return out


def conv_causal_backward(grad: np.ndarray, x: np.ndarray, w: np.ndarray,
                         dilation: int) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of conv_causal_forward w.r.t. input and weights."""
    batch, time, ch_in = x.shape
    taps = w.shape[0]
    gx = np.zeros_like(x)
    gw = np.zeros_like(w)
    for i in range(taps):
        off = i * dilation
        if off >= time:
            break
        if off == 0:
            gx += grad @ w[i].T
            gw[i] = np.einsum("bti,bto->io", x, grad)
        else:
            gx[:, : time - off, :] += grad[:, off:, :] @ w[i].T
            gw[i] = np.einsum("bti,bto->io", x[:, : time - off, :], grad[:, off:, :])
    return gx, gw


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU of two center-format box arrays ([n,4] and [m,4])."""
    n, m = a.shape[0], b.shape[0]
    if n == 0 or m == 0:
        return np.zeros((n, m), dtype=np.float64)
    ax1 = a[:, 0] - a[:, 2] / 2
    ay1 = a[:, 1] - a[:, 3] / 2
    ax2 = a[:, 0] + a[:, 2] / 2
    ay2 = a[:, 1] + a[:, 3] / 2
    bx1 = b[:, 0] - b[:, 2] / 2
    by1 = b[:, 1] - b[:, 3] / 2
    bx2 = b[:, 0] + b[:, 2] / 2
    by2 = b[:, 1] + b[:, 3] / 2

    iw = np.minimum(ax2[:, None], bx2[None, :]) - np.maximum(ax1[:, None], bx1[None, :])
    ih = np.minimum(ay2[:, None], by2[None, :]) - np.maximum(ay1[:, None], by1[None, :])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (a[:, 2] * a[:, 3])[:, None]
    area_b = (b[:, 2] * b[:, 3])[None, :]
    union = area_a + area_b - inter
    out = np.zeros((n, m), dtype=np.float64)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def solve_assignment(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost assignment of every row to a distinct column.

    Requires rows <= cols. Returns row_to_col, an int64 array of length
    rows. Shortest-augmenting-path method with dual potentials; columns
    are always scanned in ascending order, which fixes tie-breaking.
    """
    n, m = cost.shape
    if n > m:
        raise ValueError("solve_assignment requires rows <= cols")
    if n == 0:
        return np.zeros(0, dtype=np.int64)

    a = cost.tolist()
    inf = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)          # p[j]: row (1-based) assigned to column j
    way = [0] * (m + 1)

    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            row = a[i0 - 1]
            ui0 = u[i0]
            for j in range(1, m + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - ui0 - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1

    row_to_col = np.empty(n, dtype=np.int64)
    for j in range(1, m + 1):
        if p[j] != 0:
            row_to_col[p[j] - 1] = j - 1
    return row_to_col
