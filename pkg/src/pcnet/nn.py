"""Dense layer plumbing shared by both classifiers: no batch norm, no
dropout, plain affine + ReLU stacks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tensor as T
from .tensor import Tensor


@dataclass
class DenseLayer:
    w: Tensor
    b: Tensor


def he_uniform(rng: np.random.Generator, fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def init_mlp(rng: np.random.Generator, widths: Sequence[int]) -> list[DenseLayer]:
    """Build dense layers chaining widths[0] -> widths[1] -> ... -> widths[-1]."""
    layers = []
    for d_in, d_out in zip(widths[:-1], widths[1:]):
        w = Tensor(he_uniform(rng, d_in, (d_in, d_out)))
        b = Tensor(np.zeros(d_out))
        layers.append(DenseLayer(w, b))
    return layers


def apply_mlp(layers: Sequence[DenseLayer], x: Tensor, relu_last: bool = True) -> Tensor:
    """Apply the stack to (n, d) rows; relu_last=False leaves the final layer
    affine (logit heads)."""
    h = x
    last = len(layers) - 1
    for i, layer in enumerate(layers):
        h = T.add(T.matmul(h, layer.w), layer.b)
        if relu_last or i < last:
            h = T.relu(h)
    return h


def mlp_tensors(layers: Sequence[DenseLayer]) -> list[Tensor]:
    return [t for layer in layers for t in (layer.w, layer.b)]
