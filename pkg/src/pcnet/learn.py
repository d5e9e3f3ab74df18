"""Training loop and optimizers.

Minibatch loop over labeled clouds, one forward per cloud (models are
single-cloud functions), logits stacked for a batch loss, reverse pass on
the shared tape, in-place optimizer step.  Everything is seeded; two runs
with the same config and data are bit-identical on one platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import pointnet as pn
from . import pointnetpp as pnpp
from . import tensor as T
from .dataset import NUM_CLASSES
from .metrics import MetricsReport, confusion, derive_metrics, roc_auc_per_class
from .tensor import GradTape, Tensor

MODEL_KINDS = ("pointnet", "pointnetpp")


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 16
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    reg_weight: float = 1e-3
    rng_seed: int = 0
    points_per_cloud: int = 256  # carried for pipeline plumbing; train() takes clouds as given

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.points_per_cloud < 1:
            raise ValueError(f"points_per_cloud must be >= 1, got {self.points_per_cloud}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        # learning_rate 0 is allowed as the degenerate no-op step.
        if not (self.learning_rate >= 0 and np.isfinite(self.learning_rate)):
            raise ValueError(f"learning_rate must be finite and >= 0, got {self.learning_rate}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")
        if not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ValueError("adam betas must lie in [0, 1)")
        if self.eps <= 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if self.reg_weight < 0:
            raise ValueError(f"reg_weight must be >= 0, got {self.reg_weight}")


@dataclass
class EpochStats:
    epoch: int  # 1-based
    loss: float
    train_accuracy: float
    reg_penalty: float  # mean over the epoch's transforms; nan for pointnetpp


@dataclass
class TrainResult:
    params: object
    history: list[EpochStats]


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, history: list[EpochStats]):
        super().__init__(f"non-finite loss in epoch {epoch}")
        self.epoch = epoch
        self.history = history


@dataclass
class AdamState:
    step: int
    m: list[np.ndarray]
    v: list[np.ndarray]

    @classmethod
    def init(cls, params) -> "AdamState":
        return cls(0, [np.zeros_like(p.data) for p in params],
                   [np.zeros_like(p.data) for p in params])


def _check_shapes(params, grads) -> None:
    if len(params) != len(grads):
        raise ValueError(f"got {len(params)} params but {len(grads)} grads")
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.data.shape != g.shape:
            raise ValueError(f"param {i} shape {p.data.shape} != grad shape {g.shape}")


def adam_step(params, grads, state: AdamState, config: TrainConfig):
    """Bias-corrected Adam update, in place.  Returns (params, state)."""
    _check_shapes(params, grads)
    state.step += 1
    t = state.step
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.eps)
    return params, state


def sgd_step(params, grads, config: TrainConfig):
    _check_shapes(params, grads)
    for p, g in zip(params, grads):
        p.data -= config.learning_rate * g
    return params


def forward_logits(params, model_kind: str, points: np.ndarray):
    """Dispatch one cloud through the right model.  Returns (logits Tensor,
    transform Tensor or None)."""
    if model_kind == "pointnet":
        logits, transform = pn.pointnet_forward(params, Tensor(points))
        return logits, transform
    if model_kind == "pointnetpp":
        return pnpp.pointnetpp_forward(params, Tensor(points)), None
    raise ValueError(f"model_kind must be one of {MODEL_KINDS}, got {model_kind!r}")


def init_model(model_kind: str, rng: np.random.Generator, model_config=None):
    if model_kind == "pointnet":
        return pn.init_pointnet(rng, model_config)
    if model_kind == "pointnetpp":
        return pnpp.init_pointnetpp(rng, model_config)
    raise ValueError(f"model_kind must be one of {MODEL_KINDS}, got {model_kind!r}")


def model_param_tensors(model_kind: str, params):
    return pn.param_tensors(params) if model_kind == "pointnet" else pnpp.param_tensors(params)


def train(model_kind: str, data, config: TrainConfig, model_config=None) -> TrainResult:
    """Train from scratch on labeled clouds.  Raises TrainingDiverged (with
    partial history attached) on a non-finite loss."""
    config.validate()
    if len(data) == 0:
        raise ValueError("training data is empty")
    rng = np.random.default_rng(config.rng_seed)
    params = init_model(model_kind, rng, model_config)
    return train_params(model_kind, params, data, config, shuffle_rng=rng)


def train_params(model_kind: str, params, data, config: TrainConfig,
                 shuffle_rng: np.random.Generator | None = None) -> TrainResult:
    """Training loop over already-initialized params."""
    config.validate()
    if len(data) == 0:
        raise ValueError("training data is empty")
    rng = shuffle_rng if shuffle_rng is not None else np.random.default_rng(config.rng_seed)
    tensors = model_param_tensors(model_kind, params)
    state = AdamState.init(tensors) if config.optimizer == "adam" else None
    history: list[EpochStats] = []

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(data))
        loss_sum = 0.0
        correct = 0
        pen_sum = 0.0
        pen_count = 0
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            labels = [data[i].label for i in batch]
            with GradTape() as tape:
                logit_rows = []
                transforms = []
                for i in batch:
                    lg, tr = forward_logits(params, model_kind, data[i].points)
                    logit_rows.append(lg)
                    if tr is not None:
                        transforms.append(tr)
                logits = T.stack_rows(logit_rows)
                if model_kind == "pointnet":
                    loss = pn.pointnet_loss(logits, labels, transforms, config.reg_weight)
                else:
                    loss = T.softmax_cross_entropy(logits, labels)
                if not np.isfinite(loss.data):
                    raise TrainingDiverged(epoch, history)
                tape.backward(loss)
                grads = [t.grad if t.grad is not None else np.zeros_like(t.data)
                         for t in tensors]
                # params persist across batches; without this, backward would
                # accumulate every previous batch's gradient into the next.
                T.zero_grads(tensors)
            if config.optimizer == "adam":
                adam_step(tensors, grads, state, config)
            else:
                sgd_step(tensors, grads, config)
            loss_sum += float(loss.data) * len(batch)
            preds = np.argmax(logits.data, axis=1)
            correct += int(np.sum(preds == np.asarray(labels)))
            for tr in transforms:
                pen_sum += pn.penalty_value(tr.data)
                pen_count += 1
        history.append(EpochStats(
            epoch=epoch,
            loss=loss_sum / len(order),
            train_accuracy=correct / len(order),
            reg_penalty=pen_sum / pen_count if pen_count else float("nan"),
        ))
    return TrainResult(params, history)


def softmax_probs(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def evaluate(params, model_kind: str, test_data) -> MetricsReport:
    """Forward every sample, argmax for predictions (ties to the lowest
    class), softmax scores for AUC, full MetricsReport."""
    if len(test_data) == 0:
        raise ValueError("test data is empty")
    n = len(test_data)
    scores = np.empty((n, NUM_CLASSES))
    preds = np.empty(n, dtype=np.int64)
    labels = np.empty(n, dtype=np.int64)
    for i, lc in enumerate(test_data):
        logits, _ = forward_logits(params, model_kind, lc.points)
        scores[i] = softmax_probs(logits.data)
        preds[i] = int(np.argmax(logits.data))  # np.argmax ties -> lowest index
        labels[i] = lc.label
    report = derive_metrics(confusion(preds, labels))
    auc_values, skipped = roc_auc_per_class(scores, labels)
    good = auc_values[~np.isnan(auc_values)]
    report.auc = float(good.mean()) if good.size else float("nan")
    report.per_class["auc"] = auc_values
    if skipped:
        report.undefined["auc"] = skipped
    return report
