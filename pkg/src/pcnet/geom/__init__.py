"""Point-set geometry: fixed-size resampling, normalization, farthest point
sampling, and neighborhood construction.

All operations are pure functions over (n, 3) float64 arrays and are safe to
call concurrently. The hot kernels (FPS and the neighbor queries) run on
numba by default; set ``PCNET_BACKEND=numpy`` to force the pure-numpy
fallback (``PCNET_BACKEND=numba`` insists on numba and fails if it is
missing). Both backends are bit-identical.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

_env = os.environ.get("PCNET_BACKEND", "").strip().lower()
if _env in ("", "auto"):
    try:
        from . import _numba_kernels as _kernels

        _BACKEND = "numba"
    except ImportError:
        from . import _numpy_kernels as _kernels

        _BACKEND = "numpy"
elif _env == "numpy":
    from . import _numpy_kernels as _kernels

    _BACKEND = "numpy"
elif _env == "numba":
    from . import _numba_kernels as _kernels

    _BACKEND = "numba"
else:
    raise ValueError(f"PCNET_BACKEND must be 'numba', 'numpy', or 'auto', got {_env!r}")

_COINCIDENT_RADIUS = 1e-12


def kernel_backend() -> str:
    """Name of the active kernel backend, 'numba' or 'numpy'."""
    return _BACKEND


@dataclass
class NeighborGraph:
    """Per-center neighbor lists over a source cloud.

    ``offsets[i][e]`` is ``points[neighbors[i][e]] - points[centers[i]]``,
    exactly as stored. Every neighbor list is non-empty.
    """

    centers: np.ndarray
    neighbors: list[np.ndarray]
    offsets: list[np.ndarray]


def as_cloud(points) -> np.ndarray:
    """Validate and return a cloud as a C-contiguous (n, 3) float64 array."""
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64))
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"a point cloud must have shape (n, 3), got {pts.shape}")
    if pts.shape[0] == 0:
        raise ValueError("empty point cloud")
    if not np.isfinite(pts).all():
        raise ValueError("point cloud contains non-finite coordinates")
    return pts


def resample_to_fixed_size(cloud, target: int, rng_seed: int) -> np.ndarray:
    """Return a cloud of exactly ``target`` points.

    Larger clouds are downsampled to a uniform random subset without
    replacement. Smaller clouds keep all original points and add points drawn
    uniformly with replacement, each perturbed by isotropic Gaussian jitter
    of 0.001 m so duplicates stay distinct.
    """
    pts = as_cloud(cloud)
    if target < 1:
        raise ValueError(f"target must be >= 1, got {target}")
    n = pts.shape[0]
    if n == target:
        return pts.copy()
    rng = np.random.default_rng(rng_seed)
    if n > target:
        idx = rng.choice(n, size=target, replace=False)
        return pts[idx].copy()
    extra = target - n
    idx = rng.integers(0, n, size=extra)
    jitter = rng.normal(0.0, 0.001, size=(extra, 3))
    return np.concatenate([pts, pts[idx] + jitter])


def normalize_unit_sphere(cloud) -> np.ndarray:
    """Center a cloud on its centroid and scale the farthest point to radius 1.

    An all-coincident cloud maps to all zeros instead of dividing by zero.
    """
    pts = as_cloud(cloud)
    centered = pts - pts.mean(axis=0)
    r = np.sqrt((centered * centered).sum(axis=1).max())
    if r < _COINCIDENT_RADIUS:
        return np.zeros_like(pts)
    return centered / r


def canonical_order(cloud) -> np.ndarray:
    """Sort points lexicographically by (x, y, z).

    Gives order-insensitive pipelines (such as prediction on an arbitrary
    file) a canonical starting point.
    """
    pts = as_cloud(cloud)
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0]))
    return pts[order].copy()


def canonical_seed_index(cloud) -> int:
    """Index of the lexicographically smallest (x, y, z) point."""
    pts = as_cloud(cloud)
    return int(np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0]))[0])


def farthest_point_sampling(cloud, k: int, seed_index: int = 0) -> np.ndarray:
    """Greedily select k distinct indices maximizing coverage.

    The first index is ``seed_index``; each subsequent index maximizes the
    minimum Euclidean distance to all previously selected points, ties broken
    by the lowest index.
    """
    pts = as_cloud(cloud)
    n = pts.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if not 0 <= seed_index < n:
        raise ValueError(f"seed_index must be in [0, {n}), got {seed_index}")
    return _kernels.fps(pts, k, seed_index)


def _check_centers(centers, n: int) -> np.ndarray:
    idx = np.asarray(centers, dtype=np.int64)
    if idx.ndim != 1 or idx.size == 0:
        raise ValueError("centers must be a non-empty 1-D index sequence")
    if idx.min() < 0 or idx.max() >= n:
        raise ValueError(f"center index out of range for cloud of {n} points")
    return idx


def _build_graph(pts: np.ndarray, centers: np.ndarray, padded: np.ndarray, counts: np.ndarray) -> NeighborGraph:
    neighbors = []
    offsets = []
    for ci in range(centers.shape[0]):
        nbr = padded[ci, : counts[ci]].copy()
        neighbors.append(nbr)
        offsets.append(pts[nbr] - pts[centers[ci]])
    return NeighborGraph(centers=centers, neighbors=neighbors, offsets=offsets)


def ball_query(cloud, centers, radius: float, max_neighbors: int) -> NeighborGraph:
    """Per center, up to ``max_neighbors`` points within ``radius``, nearest
    first. A center with no qualifying point keeps itself as sole neighbor."""
    pts = as_cloud(cloud)
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if max_neighbors < 1:
        raise ValueError(f"max_neighbors must be >= 1, got {max_neighbors}")
    idx = _check_centers(centers, pts.shape[0])
    padded, counts = _kernels.ball(pts, idx, float(radius) * float(radius), max_neighbors)
    return _build_graph(pts, idx, padded, counts)


def knn_query(cloud, centers, k: int) -> NeighborGraph:
    """Per center, the k nearest points including itself, distance ties broken
    by the lowest index."""
    pts = as_cloud(cloud)
    n = pts.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    idx = _check_centers(centers, n)
    nbrs = _kernels.knn(pts, idx, k)
    counts = np.full(idx.shape[0], k, np.int64)
    return _build_graph(pts, idx, nbrs, counts)
