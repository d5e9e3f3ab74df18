"""Hierarchical point cloud classifier.

Each set abstraction layer picks centers by farthest point sampling, groups
the cloud around them, and runs a shared MLP over edges (neighbor feature
concatenated with the neighbor's offset from the center) followed by a max
over each group:

    h'_i = max_{j in N(i)} mlp(h_j ; p_j - p_i)

Stacking layers coarsens the cloud while widening features; a final global
max and dense head produce logits.  Initial features are the raw positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import tensor as T
from .dataset import NUM_CLASSES
from .geom import (ball_query, canonical_seed_index, farthest_point_sampling,
                   knn_query, NeighborGraph)
from .nn import DenseLayer, apply_mlp, init_mlp, mlp_tensors
from .tensor import Tensor


@dataclass(frozen=True)
class SetAbstractionConfig:
    num_centers: int
    mlp_widths: tuple[int, ...]
    grouping: str = "ball"  # "ball" or "knn"
    radius: float = 0.25
    max_neighbors: int = 16
    k: int = 16

    def validate(self) -> None:
        if self.num_centers < 1:
            raise ValueError(f"num_centers must be >= 1, got {self.num_centers}")
        if len(self.mlp_widths) == 0 or any(int(w) <= 0 for w in self.mlp_widths):
            raise ValueError("mlp_widths must be a non-empty tuple of positive widths")
        if self.grouping not in ("ball", "knn"):
            raise ValueError(f"grouping must be 'ball' or 'knn', got {self.grouping!r}")
        if self.grouping == "ball":
            if not (self.radius > 0 and np.isfinite(self.radius)):
                raise ValueError(f"radius must be positive and finite, got {self.radius}")
            if self.max_neighbors < 1:
                raise ValueError(f"max_neighbors must be >= 1, got {self.max_neighbors}")
        elif self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


def default_sa_stack() -> tuple[SetAbstractionConfig, ...]:
    return (
        SetAbstractionConfig(num_centers=64, mlp_widths=(32, 64), radius=0.25, max_neighbors=16),
        SetAbstractionConfig(num_centers=16, mlp_widths=(64, 128), radius=0.5, max_neighbors=16),
    )


@dataclass(frozen=True)
class PointNetPPConfig:
    sa: tuple[SetAbstractionConfig, ...] = field(default_factory=default_sa_stack)
    head_hidden: tuple[int, ...] = (64,)
    initial_features: str = "positions"  # or "ones"

    def validate(self) -> None:
        if len(self.sa) == 0:
            raise ValueError("need at least one set abstraction layer")
        for sa in self.sa:
            sa.validate()
        for i in range(1, len(self.sa)):
            if self.sa[i].num_centers > self.sa[i - 1].num_centers:
                raise ValueError("num_centers must not grow across layers")
        if any(int(w) <= 0 for w in self.head_hidden):
            raise ValueError("head_hidden widths must be positive")
        if self.initial_features not in ("positions", "ones"):
            raise ValueError(f"initial_features must be 'positions' or 'ones', "
                             f"got {self.initial_features!r}")


@dataclass
class PointNetPPParams:
    config: PointNetPPConfig
    sa_mlps: list[list[DenseLayer]]
    head: list[DenseLayer]


def init_pointnetpp(rng: np.random.Generator,
                    config: PointNetPPConfig | None = None) -> PointNetPPParams:
    cfg = config if config is not None else PointNetPPConfig()
    cfg.validate()
    d_in = 3 if cfg.initial_features == "positions" else 1
    sa_mlps = []
    for sa in cfg.sa:
        # Edge rows are (feature ; offset), hence the +3 on the input width.
        sa_mlps.append(init_mlp(rng, (d_in + 3,) + sa.mlp_widths))
        d_in = sa.mlp_widths[-1]
    head = init_mlp(rng, (d_in,) + cfg.head_hidden + (NUM_CLASSES,))
    return PointNetPPParams(cfg, sa_mlps, head)


def param_tensors(params: PointNetPPParams) -> list[Tensor]:
    out: list[Tensor] = []
    for layers in params.sa_mlps:
        out += mlp_tensors(layers)
    out += mlp_tensors(params.head)
    return out


def _group(positions: np.ndarray, centers: np.ndarray, sa: SetAbstractionConfig) -> NeighborGraph:
    if sa.grouping == "ball":
        return ball_query(positions, centers, sa.radius, sa.max_neighbors)
    return knn_query(positions, centers, min(sa.k, positions.shape[0]))


def set_abstraction(layers: Sequence[DenseLayer], positions: np.ndarray, features: Tensor,
                    sa: SetAbstractionConfig) -> tuple[np.ndarray, Tensor, np.ndarray, NeighborGraph]:
    """One abstraction layer.

    Returns (center positions (m, 3), center features (m, d'), center
    indices into the input cloud, neighbor graph).  All edges go through the
    MLP in one batch; the per-center max is taken over each group's slice.
    """
    n = positions.shape[0]
    if features.data.shape[0] != n:
        raise ValueError(f"feature rows ({features.data.shape[0]}) != points ({n})")
    if n < sa.num_centers:
        raise ValueError(f"cannot pick {sa.num_centers} centers from {n} points")
    seed = canonical_seed_index(positions)
    center_idx = farthest_point_sampling(positions, sa.num_centers, seed_index=seed)
    graph = _group(positions, center_idx, sa)

    flat_nbrs = np.concatenate(graph.neighbors)
    flat_offs = np.concatenate(graph.offsets, axis=0)
    h = T.gather_rows(features, flat_nbrs)
    edges = T.concat_rows(h, Tensor(flat_offs))
    edges = apply_mlp(layers, edges)

    pooled = []
    start = 0
    for nbrs in graph.neighbors:
        stop = start + nbrs.shape[0]
        seg = T.gather_rows(edges, np.arange(start, stop))
        m, _ = T.max_over_rows(seg)
        pooled.append(m)
        start = stop
    out = T.stack_rows(pooled)
    return positions[center_idx].copy(), out, center_idx, graph


@dataclass
class LayerTrace:
    center_indices: np.ndarray
    center_positions: np.ndarray
    neighbor_lists: list[np.ndarray]
    feature_shape: tuple[int, int]


def _run_layers(params: PointNetPPParams, cloud,
                trace: list[LayerTrace] | None = None) -> Tensor:
    pts_t = cloud if isinstance(cloud, Tensor) else Tensor(np.asarray(cloud, dtype=np.float64))
    pts = pts_t.data
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 1:
        raise ValueError(f"expected a non-empty (n, 3) cloud, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("cloud contains non-finite coordinates")
    cfg = params.config
    if cfg.initial_features == "positions":
        features = pts_t
    else:
        features = Tensor(np.ones((pts.shape[0], 1)))
    positions = pts
    for sa, layers in zip(cfg.sa, params.sa_mlps):
        positions, features, center_idx, graph = set_abstraction(layers, positions, features, sa)
        if trace is not None:
            trace.append(LayerTrace(center_idx, positions.copy(), list(graph.neighbors),
                                    (features.data.shape[0], features.data.shape[1])))
    pooled, _ = T.max_over_rows(features)
    row = T.reshape(pooled, (1, pooled.data.shape[0]))
    logits = apply_mlp(params.head, row, relu_last=False)
    return T.reshape(logits, (NUM_CLASSES,))


def pointnetpp_forward(params: PointNetPPParams, cloud) -> Tensor:
    """One cloud -> logits (NUM_CLASSES,)."""
    return _run_layers(params, cloud)


def build_hierarchy_trace(params: PointNetPPParams, cloud) -> list[LayerTrace]:
    """Run the forward pass and record per-layer centers, neighborhoods, and
    feature shapes.  Shares the forward code path, so the trace is exactly
    what the classifier computed."""
    trace: list[LayerTrace] = []
    _run_layers(params, cloud, trace=trace)
    return trace
