# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: dilated causal convolution, pairwise IoU and the
assignment solver. Mirrors ``reference.py`` operation for operation."""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()

NAME = "native"


def conv_causal_forward(double[:, :, ::1] x, double[:, :, ::1] w, int dilation):
    cdef Py_ssize_t batch = x.shape[0], time = x.shape[1], ch_in = x.shape[2]
    cdef Py_ssize_t taps = w.shape[0], ch_out = w.shape[2]
    out_arr = np.zeros((batch, time, ch_out), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t b, t, i, ci, co, ts
    cdef double xv
    with nogil:
        for b in range(batch):
            for t in range(time):
                for i in range(taps):
                    ts = t - i * dilation
                    if ts < 0:
                        break
                    for ci in range(ch_in):
                        xv = x[b, ts, ci]
                        if xv == 0.0:
                            continue
                        for co in range(ch_out):
                            out[b, t, co] += xv * w[i, ci, co]
    return out_arr


def conv_causal_backward(double[:, :, ::1] grad, double[:, :, ::1] x,
                         double[:, :, ::1] w, int dilation):
    cdef Py_ssize_t batch = x.shape[0], time = x.shape[1], ch_in = x.shape[2]
    cdef Py_ssize_t taps = w.shape[0], ch_out = w.shape[2]
    gx_arr = np.zeros((batch, time, ch_in), dtype=np.float64)
    gw_arr = np.zeros((taps, ch_in, ch_out), dtype=np.float64)
    cdef double[:, :, ::1] gx = gx_arr
    cdef double[:, :, ::1] gw = gw_arr
    cdef Py_ssize_t b, t, i, ci, co, ts
    cdef double g, acc
    with nogil:
        for b in range(batch):
            for t in range(time):
                for i in range(taps):
                    ts = t - i * dilation
                    if ts < 0:
                        break
                    for co in range(ch_out):
                        g = grad[b, t, co]
                        if g == 0.0:
                            continue
                        for ci in range(ch_in):
                            gx[b, ts, ci] += g * w[i, ci, co]
                            gw[i, ci, co] += g * x[b, ts, ci]
    return gx_arr, gw_arr


def iou_matrix(double[:, ::1] a, double[:, ::1] b):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0]
    out_arr = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double ax1, ay1, ax2, ay2, bx1, by1, bx2, by2
    cdef double iw, ih, inter, union, area_a
    with nogil:
        for i in range(n):
            ax1 = a[i, 0] - a[i, 2] / 2
            ay1 = a[i, 1] - a[i, 3] / 2
            ax2 = a[i, 0] + a[i, 2] / 2
            ay2 = a[i, 1] + a[i, 3] / 2
            area_a = a[i, 2] * a[i, 3]
            for j in range(m):
                bx1 = b[j, 0] - b[j, 2] / 2
                by1 = b[j, 1] - b[j, 3] / 2
                bx2 = b[j, 0] + b[j, 2] / 2
                by2 = b[j, 1] + b[j, 3] / 2
                iw = (ax2 if ax2 < bx2 else bx2) - (ax1 if ax1 > bx1 else bx1)
                ih = (ay2 if ay2 < by2 else by2) - (ay1 if ay1 > by1 else by1)
                if iw <= 0 or ih <= 0:
                    continue
                inter = iw * ih
                union = area_a + b[j, 2] * b[j, 3] - inter
                if union > 0:
                    out[i, j] = inter / union
    return out_arr


def solve_assignment(double[:, ::1] cost):
    """Shortest-augmenting-path assignment, rows <= cols. Same scan order
    (and therefore the same tie-breaking) as the reference implementation."""
    cdef Py_ssize_t n = cost.shape[0], m = cost.shape[1]
    if n > m:
        raise ValueError("solve_assignment requires rows <= cols")
    row_to_col = np.zeros(n, dtype=np.int64)
    if n == 0:
        return row_to_col

    u_arr = np.zeros(n + 1, dtype=np.float64)
    v_arr = np.zeros(m + 1, dtype=np.float64)
    p_arr = np.zeros(m + 1, dtype=np.int64)
    way_arr = np.zeros(m + 1, dtype=np.int64)
    minv_arr = np.zeros(m + 1, dtype=np.float64)
    used_arr = np.zeros(m + 1, dtype=np.uint8)

    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef long long[::1] p = p_arr
    cdef long long[::1] way = way_arr
    cdef double[::1] minv = minv_arr
    cdef cnp.uint8_t[::1] used = used_arr
    cdef long long[::1] out = row_to_col

    cdef double inf = float("inf")
    cdef Py_ssize_t i, j, j0, j1, i0
    cdef double delta, cur, ui0

    with nogil:
        for i in range(1, n + 1):
            p[0] = i
            j0 = 0
            for j in range(m + 1):
                minv[j] = inf
                used[j] = 0
            while True:
                used[j0] = 1
                i0 = p[j0]
                delta = inf
                j1 = 0
                ui0 = u[i0]
                for j in range(1, m + 1):
                    if used[j]:
                        continue
                    cur = cost[i0 - 1, j - 1] - ui0 - v[j]
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

        for j in range(1, m + 1):
            if p[j] != 0:
                out[p[j] - 1] = j - 1
    return row_to_col
