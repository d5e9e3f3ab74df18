"""Dense float64 arrays with reverse-mode automatic differentiation.

Operations record onto an explicit :class:`GradTape` while one is active
(inside a ``with GradTape() as tape:`` block). Outside a tape they are plain
numpy computations, which is the inference path. Gradients accumulate
additively into ``Tensor.grad``; callers zero them between backward passes.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class Tensor:
    """A dense float64 array, optionally carrying a gradient of equal shape."""

    __slots__ = ("data", "grad", "_tape", "_tid")

    def __init__(self, data) -> None:
        arr = np.asarray(data, dtype=np.float64)
        # ascontiguousarray would promote 0-d to (1,); scalars stay 0-d.
        self.data = np.ascontiguousarray(arr) if arr.ndim else arr
        self.grad: np.ndarray | None = None
        self._tape: GradTape | None = None
        self._tid: int | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


class GradTape:
    """Append-only record of operations, in topological order by construction.

    Only one tape may be active at a time; tape construction is
    single-threaded. Tensors first touched by an op while the tape is active
    are registered on it and receive gradients from :meth:`backward`.
    """

    _active: "GradTape | None" = None

    def __init__(self) -> None:
        self._tensors: list[Tensor] = []
        self._nodes: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []

    def __enter__(self) -> "GradTape":
        if GradTape._active is not None:
            raise RuntimeError("another GradTape is already active")
        GradTape._active = self
        return self

    def __exit__(self, *exc) -> None:
        GradTape._active = None

    def _register(self, t: Tensor) -> None:
        if t._tape is not self:
            t._tape = self
            t._tid = len(self._tensors)
            self._tensors.append(t)

    def _record(self, out: Tensor, inputs: tuple[Tensor, ...], backward_fn: Callable) -> None:
        for t in inputs:
            self._register(t)
        self._register(out)
        self._nodes.append((out, inputs, backward_fn))

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(tensor) into every tape tensor's ``grad``.

        The seed gradient is 1. Calling backward twice without
        :meth:`zero_grads` accumulates both passes.
        """
        if loss.shape != ():
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        if loss._tape is not self:
            raise ValueError("loss was not produced on this tape")
        flowing: dict[int, np.ndarray] = {loss._tid: np.ones(())}
        for out, inputs, backward_fn in reversed(self._nodes):
            g = flowing.get(out._tid)
            if g is None:
                continue
            for t, ig in zip(inputs, backward_fn(g)):
                if ig is None:
                    continue
                acc = flowing.get(t._tid)
                flowing[t._tid] = ig if acc is None else acc + ig
        for t in self._tensors:
            g = flowing.get(t._tid)
            if g is None:
                continue
            g = np.asarray(g, dtype=np.float64)
            t.grad = g.copy() if t.grad is None else t.grad + g

    def zero_grads(self) -> None:
        for t in self._tensors:
            t.grad = None


def backward(loss: Tensor) -> None:
    """Run reverse-mode accumulation from a scalar loss on its own tape."""
    if loss._tape is None:
        raise ValueError("loss is not attached to any tape")
    loss._tape.backward(loss)


def zero_grads(tensors: Sequence[Tensor]) -> None:
    for t in tensors:
        t.grad = None


def _tape() -> GradTape | None:
    return GradTape._active


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two 2-D tensors."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out = Tensor(a.data @ b.data)
    tape = _tape()
    if tape is not None:
        ad, bd = a.data, b.data

        def bwd(g):
            return g @ bd.T, ad.T @ g

        tape._record(out, (a, b), bwd)
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; also accepts a (d,) bias added to every row of (n, d)."""
    row_bias = a.data.ndim == 2 and b.data.ndim == 1 and a.shape[1] == b.shape[0]
    if not row_bias and a.shape != b.shape:
        raise ValueError(f"add shape mismatch: {a.shape} vs {b.shape}")
    out = Tensor(a.data + b.data)
    tape = _tape()
    if tape is not None:

        def bwd(g):
            return g, g.sum(axis=0) if row_bias else g

        tape._record(out, (a, b), bwd)
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"sub shape mismatch: {a.shape} vs {b.shape}")
    out = Tensor(a.data - b.data)
    tape = _tape()
    if tape is not None:

        def bwd(g):
            return g, -g

        tape._record(out, (a, b), bwd)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of same-shape tensors."""
    if a.shape != b.shape:
        raise ValueError(f"mul shape mismatch: {a.shape} vs {b.shape}")
    out = Tensor(a.data * b.data)
    tape = _tape()
    if tape is not None:
        ad, bd = a.data, b.data

        def bwd(g):
            return g * bd, g * ad

        tape._record(out, (a, b), bwd)
    return out


def scale(a: Tensor, s: float) -> Tensor:
    out = Tensor(a.data * s)
    tape = _tape()
    if tape is not None:

        def bwd(g):
            return (g * s,)

        tape._record(out, (a,), bwd)
    return out


def relu(x: Tensor) -> Tensor:
    """Elementwise max(x, 0). Subgradient at exactly 0 is 0."""
    mask = x.data > 0
    out = Tensor(np.where(mask, x.data, 0.0))
    tape = _tape()
    if tape is not None:

        def bwd(g):
            return (g * mask,)

        tape._record(out, (x,), bwd)
    return out


def max_over_rows(x: Tensor) -> tuple[Tensor, np.ndarray]:
    """Column-wise maximum of a (n, d) tensor.

    Returns the (d,) maxima and the argmax row per column. The backward pass
    routes each column's gradient solely to its argmax row; ties go to the
    lowest row index.
    """
    if x.data.ndim != 2:
        raise ValueError(f"max_over_rows needs a 2-D tensor, got shape {x.shape}")
    if x.shape[0] == 0:
        raise ValueError("max_over_rows of an empty set is undefined")
    idx = x.data.argmax(axis=0)
    out = Tensor(x.data.max(axis=0))
    tape = _tape()
    if tape is not None:
        n, d = x.shape

        def bwd(g):
            gx = np.zeros((n, d))
            gx[idx, np.arange(d)] = g
            return (gx,)

        tape._record(out, (x,), bwd)
    return out, idx


def concat_rows(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate two 2-D tensors along columns, a's columns first."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ValueError(f"concat_rows row-count mismatch: {a.shape} vs {b.shape}")
    out = Tensor(np.concatenate([a.data, b.data], axis=1))
    tape = _tape()
    if tape is not None:
        d1 = a.shape[1]

        def bwd(g):
            return g[:, :d1], g[:, d1:]

        tape._record(out, (a, b), bwd)
    return out


def stack_rows(parts: Sequence[Tensor]) -> Tensor:
    """Stack 1-D tensors of equal length into a (len(parts), d) tensor."""
    if len(parts) == 0:
        raise ValueError("stack_rows of an empty sequence")
    d = parts[0].shape
    for p in parts:
        if p.data.ndim != 1 or p.shape != d:
            raise ValueError(f"stack_rows needs equal 1-D shapes, got {p.shape} vs {d}")
    out = Tensor(np.stack([p.data for p in parts]))
    tape = _tape()
    if tape is not None:

        def bwd(g):
            return tuple(g[i] for i in range(len(parts)))

        tape._record(out, tuple(parts), bwd)
    return out


def gather_rows(x: Tensor, indices: np.ndarray) -> Tensor:
    """Select rows of a 2-D tensor by index; backward scatter-adds."""
    if x.data.ndim != 2:
        raise ValueError(f"gather_rows needs a 2-D tensor, got shape {x.shape}")
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ValueError("gather_rows indices must be 1-D")
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise ValueError(f"gather_rows index out of range for {x.shape[0]} rows")
    out = Tensor(x.data[idx])
    tape = _tape()
    if tape is not None:
        shape = x.shape

        def bwd(g):
            gx = np.zeros(shape)
            np.add.at(gx, idx, g)
            return (gx,)

        tape._record(out, (x,), bwd)
    return out


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    if int(np.prod(shape, dtype=np.int64)) != x.size:
        raise ValueError(f"cannot reshape {x.shape} to {shape}")
    out = Tensor(x.data.reshape(shape))
    tape = _tape()
    if tape is not None:
        orig = x.shape

        def bwd(g):
            return (g.reshape(orig),)

        tape._record(out, (x,), bwd)
    return out


def transpose(x: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise ValueError(f"transpose needs a 2-D tensor, got shape {x.shape}")
    out = Tensor(x.data.T)
    tape = _tape()
    if tape is not None:

        def bwd(g):
            return (g.T,)

        tape._record(out, (x,), bwd)
    return out


def sum_all(x: Tensor) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    out = Tensor(x.data.sum())
    tape = _tape()
    if tape is not None:
        shape = x.shape

        def bwd(g):
            return (np.full(shape, float(g)),)

        tape._record(out, (x,), bwd)
    return out


def softmax_cross_entropy(logits: Tensor, labels: Sequence[int]) -> Tensor:
    """Mean negative log softmax probability of the labelled class.

    Numerically stabilized by row-max subtraction, so logits of magnitude up
    to 1e6 stay finite.
    """
    if logits.data.ndim != 2:
        raise ValueError(f"softmax_cross_entropy needs (batch, classes) logits, got {logits.shape}")
    b, c = logits.shape
    lab = np.asarray(labels, dtype=np.int64)
    if lab.shape != (b,):
        raise ValueError(f"expected {b} labels, got shape {lab.shape}")
    if lab.size and (lab.min() < 0 or lab.max() >= c):
        raise ValueError(f"label out of range [0, {c})")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    out = Tensor(-logp[np.arange(b), lab].mean())
    tape = _tape()
    if tape is not None:
        probs = np.exp(logp)

        def bwd(g):
            gl = probs.copy()
            gl[np.arange(b), lab] -= 1.0
            return (gl * (float(g) / b),)

        tape._record(out, (logits,), bwd)
    return out


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, step: float = 1e-5) -> float:
    """Compare tape gradients of ``f`` at ``x`` against central differences.

    ``f`` must be scalar-valued and re-runnable; it is evaluated once under a
    fresh tape for the analytic gradient and twice per element of ``x`` for
    the numeric estimate (``x.data`` is perturbed in place and restored).
    Returns the max over elements of ``|analytic - numeric| /
    max(1e-8, |analytic| + |numeric|)``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x.grad = None
    with GradTape() as tape:
        loss = f(x)
    if loss.shape != ():
        raise ValueError("grad_check needs a scalar-valued function")
    tape.backward(loss)
    analytic = x.grad.copy() if x.grad is not None else np.zeros(x.shape)
    tape.zero_grads()

    flat = x.data.reshape(-1)
    numeric = np.empty_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = f(x).item()
        flat[i] = orig - step
        fm = f(x).item()
        flat[i] = orig
        numeric[i] = (fp - fm) / (2.0 * step)
    numeric = numeric.reshape(x.shape)

    denom = np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
    return float((np.abs(analytic - numeric) / denom).max()) if analytic.size else 0.0
