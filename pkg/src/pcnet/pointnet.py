"""Point cloud classifier over unordered (n, 3) inputs.

A small alignment network predicts a 3x3 transform applied to the raw
coordinates, a shared per-point MLP lifts each point, a max pool over rows
collapses the cloud to one global feature, and a dense head maps that to
class logits.  Order invariance comes solely from the max pool.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tensor as T
from .dataset import NUM_CLASSES
from .nn import DenseLayer, apply_mlp, init_mlp, mlp_tensors
from .tensor import Tensor


@dataclass(frozen=True)
class PointNetConfig:
    tnet_mlp: tuple[int, ...] = (32, 64)
    shared_mlp: tuple[int, ...] = (64, 128, 256)
    head_hidden: tuple[int, ...] = (128,)
    # Reserved: alignment in feature space mirrors the input transform but is
    # not implemented; the flag exists so configs can name it.
    feature_tnet: bool = False

    def validate(self) -> None:
        for name in ("tnet_mlp", "shared_mlp", "head_hidden"):
            widths = getattr(self, name)
            if len(widths) == 0 or any(int(w) <= 0 for w in widths):
                raise ValueError(f"{name} must be a non-empty tuple of positive widths")
        if self.feature_tnet:
            raise ValueError("feature-space alignment is reserved but not implemented")


@dataclass
class TNetParams:
    mlp: list[DenseLayer]
    head_w: Tensor  # (d, 9), zero at init so the predicted transform starts at I
    head_b: Tensor  # (9,), flattened identity at init


@dataclass
class PointNetParams:
    tnet: TNetParams
    shared: list[DenseLayer]
    head: list[DenseLayer]


def init_pointnet(rng: np.random.Generator, config: PointNetConfig | None = None) -> PointNetParams:
    cfg = config if config is not None else PointNetConfig()
    cfg.validate()
    tnet_mlp = init_mlp(rng, (3,) + cfg.tnet_mlp)
    head_w = Tensor(np.zeros((cfg.tnet_mlp[-1], 9)))
    head_b = Tensor(np.eye(3).reshape(9))
    shared = init_mlp(rng, (3,) + cfg.shared_mlp)
    head = init_mlp(rng, (cfg.shared_mlp[-1],) + cfg.head_hidden + (NUM_CLASSES,))
    return PointNetParams(TNetParams(tnet_mlp, head_w, head_b), shared, head)


def param_tensors(params: PointNetParams) -> list[Tensor]:
    """All trainable tensors in a fixed order (optimizer state and
    checkpoints index into this)."""
    out = mlp_tensors(params.tnet.mlp)
    out += [params.tnet.head_w, params.tnet.head_b]
    out += mlp_tensors(params.shared)
    out += mlp_tensors(params.head)
    return out


def _as_cloud_tensor(cloud) -> Tensor:
    t = cloud if isinstance(cloud, Tensor) else Tensor(np.asarray(cloud, dtype=np.float64))
    if t.data.ndim != 2 or t.data.shape[1] != 3 or t.data.shape[0] < 1:
        raise ValueError(f"expected a non-empty (n, 3) cloud, got shape {t.data.shape}")
    if not np.all(np.isfinite(t.data)):
        raise ValueError("cloud contains non-finite coordinates")
    return t


def tnet_forward(params: TNetParams, cloud: Tensor) -> Tensor:
    """Predict a (3, 3) transform for one cloud.  With head weights at zero
    the output is exactly the identity regardless of input."""
    h = apply_mlp(params.mlp, cloud)
    pooled, _ = T.max_over_rows(h)
    row = T.reshape(pooled, (1, pooled.data.shape[0]))
    flat = T.add(T.matmul(row, params.head_w), params.head_b)
    return T.reshape(flat, (3, 3))


def orthogonality_penalty(transform: Tensor) -> Tensor:
    """|| I - A A^T ||_F^2 as a scalar tensor."""
    if transform.data.shape != (3, 3):
        raise ValueError(f"expected a (3, 3) transform, got {transform.data.shape}")
    eye = Tensor(np.eye(3))
    d = T.sub(eye, T.matmul(transform, T.transpose(transform)))
    return T.sum_all(T.mul(d, d))


def pointnet_forward(params: PointNetParams, cloud) -> tuple[Tensor, Tensor]:
    """One cloud -> (logits (NUM_CLASSES,), predicted transform (3, 3))."""
    pts = _as_cloud_tensor(cloud)
    transform = tnet_forward(params.tnet, pts)
    aligned = T.matmul(pts, transform)
    h = apply_mlp(params.shared, aligned)
    pooled, _ = T.max_over_rows(h)
    row = T.reshape(pooled, (1, pooled.data.shape[0]))
    logits = apply_mlp(params.head, row, relu_last=False)
    return T.reshape(logits, (NUM_CLASSES,)), transform


def pointnet_loss(logits: Tensor, labels: Sequence[int], transforms: Sequence[Tensor],
                  reg_weight: float) -> Tensor:
    """Cross entropy over a batch plus reg_weight * mean orthogonality
    penalty of the batch's transforms."""
    if reg_weight < 0:
        raise ValueError(f"reg_weight must be >= 0, got {reg_weight}")
    ce = T.softmax_cross_entropy(logits, labels)
    if reg_weight == 0 or len(transforms) == 0:
        return ce
    total = orthogonality_penalty(transforms[0])
    for tr in transforms[1:]:
        total = T.add(total, orthogonality_penalty(tr))
    return T.add(ce, T.scale(total, reg_weight / len(transforms)))


def penalty_value(transform: np.ndarray) -> float:
    """Tape-free || I - A A^T ||_F^2 for monitoring."""
    d = np.eye(3) - transform @ transform.T
    return float(np.sum(d * d))
