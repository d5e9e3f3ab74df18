"""Pure-numpy geometry kernels, the fallback for the numba backend.

Arithmetic here mirrors the numba kernels operation for operation (same
component order, same stable sorts) so both backends return bit-identical
results; the backend equivalence test asserts that.
"""

from __future__ import annotations

import numpy as np


def fps(pts: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Greedy farthest point sampling. Ties break to the lowest index."""
    out = np.empty(k, np.int64)
    out[0] = seed
    dx = pts[:, 0] - pts[seed, 0]
    dy = pts[:, 1] - pts[seed, 1]
    dz = pts[:, 2] - pts[seed, 2]
    d2 = dx * dx + dy * dy + dz * dz
    for t in range(1, k):
        best = int(np.argmax(d2))
        out[t] = best
        dx = pts[:, 0] - pts[best, 0]
        dy = pts[:, 1] - pts[best, 1]
        dz = pts[:, 2] - pts[best, 2]
        nd = dx * dx + dy * dy + dz * dz
        np.minimum(d2, nd, out=d2)
    return out


def ball(pts: np.ndarray, centers: np.ndarray, r2: float, max_n: int) -> tuple[np.ndarray, np.ndarray]:
    """Per center: up to max_n indices with squared distance <= r2, nearest first."""
    m = centers.shape[0]
    out = np.full((m, max_n), -1, np.int64)
    counts = np.zeros(m, np.int64)
    for ci in range(m):
        c = centers[ci]
        dx = pts[:, 0] - pts[c, 0]
        dy = pts[:, 1] - pts[c, 1]
        dz = pts[:, 2] - pts[c, 2]
        d2 = dx * dx + dy * dy + dz * dz
        order = np.argsort(d2, kind="mergesort")
        sel = order[d2[order] <= r2][:max_n]
        if sel.size == 0:
            out[ci, 0] = c
            counts[ci] = 1
        else:
            out[ci, : sel.size] = sel
            counts[ci] = sel.size
    return out, counts


def knn(pts: np.ndarray, centers: np.ndarray, k: int) -> np.ndarray:
    """Per center: the k nearest indices, distance ties to the lowest index."""
    m = centers.shape[0]
    out = np.empty((m, k), np.int64)
    for ci in range(m):
        c = centers[ci]
        dx = pts[:, 0] - pts[c, 0]
        dy = pts[:, 1] - pts[c, 1]
        dz = pts[:, 2] - pts[c, 2]
        d2 = dx * dx + dy * dy + dz * dz
        out[ci] = np.argsort(d2, kind="mergesort")[:k]
    return out
