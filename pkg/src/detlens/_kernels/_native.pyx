# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled overlap kernels. Mirrors reference.py exactly."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

name = "native"


def box_iou_matrix(const cnp.float64_t[:, ::1] dets, const cnp.float64_t[:, ::1] gts,
                   const cnp.uint8_t[::1] crowd):
    cdef Py_ssize_t n = dets.shape[0]
    cdef Py_ssize_t m = gts.shape[0]
    out_arr = np.zeros((n, m), dtype=np.float64)
    cdef cnp.float64_t[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double dx1, dy1, dx2, dy2, darea
    cdef double ix, iy, inter, denom
    for i in range(n):
        dx1 = dets[i, 0]
        dy1 = dets[i, 1]
        dx2 = dx1 + dets[i, 2]
        dy2 = dy1 + dets[i, 3]
        darea = dets[i, 2] * dets[i, 3]
        for j in range(m):
            ix = min(dx2, gts[j, 0] + gts[j, 2]) - max(dx1, gts[j, 0])
            if ix <= 0:
                continue
            iy = min(dy2, gts[j, 1] + gts[j, 3]) - max(dy1, gts[j, 1])
            if iy <= 0:
                continue
            inter = ix * iy
            if crowd[j]:
                denom = darea
            else:
                denom = darea + gts[j, 2] * gts[j, 3] - inter
            if denom > 0:
                out[i, j] = inter / denom
    return out_arr


def rle_area(const cnp.int64_t[::1] counts):
    cdef Py_ssize_t i
    cdef long long total = 0
    for i in range(1, counts.shape[0], 2):
        total += counts[i]
    return total


def rle_intersection(const cnp.int64_t[::1] a, const cnp.int64_t[::1] b):
    """Two-pointer merge of run streams; both must span the same pixel count."""
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0]
    if na == 0 or nb == 0:
        return 0
    cdef Py_ssize_t i = 0, j = 0
    cdef long long ca = a[0], cb = b[0]
    cdef long long inter = 0, step
    cdef int va = 0, vb = 0
    while True:
        step = ca if ca < cb else cb
        if va and vb:
            inter += step
        ca -= step
        cb -= step
        if ca == 0:
            i += 1
            if i >= na:
                break
            ca = a[i]
            va ^= 1
        if cb == 0:
            j += 1
            if j >= nb:
                break
            cb = b[j]
            vb ^= 1
    return inter
