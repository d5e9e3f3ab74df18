"""Numba-compiled geometry kernels, the default backend.

Must stay bit-identical to the numpy fallback: same component order in the
distance arithmetic, first-occurrence argmax, stable mergesort ordering.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def fps(pts, k, seed):
    n = pts.shape[0]
    out = np.empty(k, np.int64)
    out[0] = seed
    d2 = np.empty(n, np.float64)
    sx, sy, sz = pts[seed, 0], pts[seed, 1], pts[seed, 2]
    for j in range(n):
        dx = pts[j, 0] - sx
        dy = pts[j, 1] - sy
        dz = pts[j, 2] - sz
        d2[j] = dx * dx + dy * dy + dz * dz
    for t in range(1, k):
        best = 0
        bestv = d2[0]
        for j in range(1, n):
            if d2[j] > bestv:
                bestv = d2[j]
                best = j
        out[t] = best
        bx, by, bz = pts[best, 0], pts[best, 1], pts[best, 2]
        for j in range(n):
            dx = pts[j, 0] - bx
            dy = pts[j, 1] - by
            dz = pts[j, 2] - bz
            nd = dx * dx + dy * dy + dz * dz
            if nd < d2[j]:
                d2[j] = nd
    return out


# ball and knn keep a sorted prefix of the best (distance, index) pairs
# instead of argsorting all n distances; candidates arrive in index order, so
# stopping the shift on equal distance reproduces mergesort's tie order.


@njit(cache=True)
def ball(pts, centers, r2, max_n):
    m = centers.shape[0]
    n = pts.shape[0]
    out = np.full((m, max_n), -1, np.int64)
    counts = np.zeros(m, np.int64)
    dbuf = np.empty(max_n, np.float64)
    for ci in range(m):
        c = centers[ci]
        cx, cy, cz = pts[c, 0], pts[c, 1], pts[c, 2]
        cnt = 0
        for j in range(n):
            dx = pts[j, 0] - cx
            dy = pts[j, 1] - cy
            dz = pts[j, 2] - cz
            d = dx * dx + dy * dy + dz * dz
            if d > r2:
                continue
            if cnt < max_n:
                i = cnt
                cnt += 1
            elif d < dbuf[max_n - 1]:
                i = max_n - 1
            else:
                continue
            while i > 0 and d < dbuf[i - 1]:
                dbuf[i] = dbuf[i - 1]
                out[ci, i] = out[ci, i - 1]
                i -= 1
            dbuf[i] = d
            out[ci, i] = j
        if cnt == 0:
            out[ci, 0] = c
            cnt = 1
        counts[ci] = cnt
    return out, counts


@njit(cache=True)
def knn(pts, centers, k):
    m = centers.shape[0]
    n = pts.shape[0]
    out = np.empty((m, k), np.int64)
    dbuf = np.empty(k, np.float64)
    for ci in range(m):
        c = centers[ci]
        cx, cy, cz = pts[c, 0], pts[c, 1], pts[c, 2]
        cnt = 0
        for j in range(n):
            dx = pts[j, 0] - cx
            dy = pts[j, 1] - cy
            dz = pts[j, 2] - cz
            d = dx * dx + dy * dy + dz * dz
            if cnt < k:
                i = cnt
                cnt += 1
            elif d < dbuf[k - 1]:
                i = k - 1
            else:
                continue
            while i > 0 and d < dbuf[i - 1]:
                dbuf[i] = dbuf[i - 1]
                out[ci, i] = out[ci, i - 1]
                i -= 1
            dbuf[i] = d
            out[ci, i] = j
    return out
