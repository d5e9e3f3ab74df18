import copy

import numpy as np
import pytest

from pcnet import learn as L
from pcnet import pointnet as pn
from pcnet import tensor as T
from pcnet.dataset import LabeledCloud
from pcnet.learn import AdamState, TrainConfig, TrainingDiverged
from pcnet.tensor import GradTape, Tensor

SMALL = pn.PointNetConfig(tnet_mlp=(8,), shared_mlp=(8, 16), head_hidden=(8,))


def tiny_dataset(seed, per_class=4, n_points=24):
    """Well-separated blobs, one per class, at distinct corners."""
    rng = np.random.default_rng(seed)
    corners = np.array([[1, 1, 1], [-1, -1, 1], [1, -1, -1], [-1, 1, -1]], dtype=float)
    out = []
    for c in range(4):
        for _ in range(per_class):
            pts = corners[c] + rng.normal(scale=0.15, size=(n_points, 3))
            out.append(LabeledCloud(pts, c))
    return out


def test_config_defaults_and_validation():
    cfg = TrainConfig()
    cfg.validate()
    assert cfg.epochs == 30
    assert cfg.batch_size == 16
    assert cfg.learning_rate == 1e-3
    assert cfg.optimizer == "adam"
    assert (cfg.beta1, cfg.beta2, cfg.eps) == (0.9, 0.999, 1e-8)
    assert cfg.reg_weight == 1e-3
    assert cfg.points_per_cloud == 256
    for bad in (TrainConfig(epochs=0), TrainConfig(batch_size=0),
                TrainConfig(learning_rate=-1.0), TrainConfig(optimizer="rmsprop"),
                TrainConfig(beta1=1.0), TrainConfig(eps=0.0),
                TrainConfig(reg_weight=-0.1), TrainConfig(points_per_cloud=0)):
        with pytest.raises(ValueError):
            bad.validate()


def test_adam_zero_grad_keeps_params():
    params = [Tensor(np.arange(6.0).reshape(2, 3)), Tensor([1.0, 2.0])]
    before = [p.data.copy() for p in params]
    state = AdamState.init(params)
    L.adam_step(params, [np.zeros((2, 3)), np.zeros(2)], state, TrainConfig())
    for p, b in zip(params, before):
        assert np.array_equal(p.data, b)


def test_adam_first_step_magnitude_is_lr():
    # constant gradient: bias-corrected ratio is g/|g|, so |step| == lr up to eps
    cfg = TrainConfig(learning_rate=0.37)
    for g0 in (1e-4, 3.0, -250.0):
        p = [Tensor([5.0])]
        state = AdamState.init(p)
        L.adam_step(p, [np.array([g0])], state, cfg)
        step = 5.0 - p[0].data[0]
        assert abs(abs(step) - cfg.learning_rate) < 1e-3 * cfg.learning_rate
        assert np.sign(step) == np.sign(g0)


def test_adam_rejects_shape_mismatch():
    p = [Tensor(np.zeros((2, 2)))]
    state = AdamState.init(p)
    with pytest.raises(ValueError):
        L.adam_step(p, [np.zeros(3)], state, TrainConfig())
    with pytest.raises(ValueError):
        L.adam_step(p, [], state, TrainConfig())


def test_sgd_step_exact():
    p = [Tensor([1.0, 2.0])]
    L.sgd_step(p, [np.array([10.0, -4.0])], TrainConfig(learning_rate=0.5, optimizer="sgd"))
    assert np.allclose(p.data if hasattr(p, "data") else p[0].data, [-4.0, 4.0])


def test_train_lr_zero_leaves_params_unchanged():
    data = tiny_dataset(0)
    cfg = TrainConfig(epochs=2, learning_rate=0.0, rng_seed=3)
    res = L.train("pointnet", data, cfg, model_config=SMALL)
    fresh = pn.init_pointnet(np.random.default_rng(3), SMALL)
    for a, b in zip(pn.param_tensors(res.params), pn.param_tensors(fresh)):
        assert np.array_equal(a.data, b.data)


def test_train_single_sample_overfits():
    data = tiny_dataset(1, per_class=1)[:1]
    cfg = TrainConfig(epochs=200, learning_rate=0.01, batch_size=1, rng_seed=0)
    res = L.train("pointnet", data, cfg, model_config=SMALL)
    assert res.history[-1].train_accuracy == 1.0


def test_train_deterministic():
    data = tiny_dataset(2)
    cfg = TrainConfig(epochs=3, rng_seed=7)
    r1 = L.train("pointnet", data, cfg, model_config=SMALL)
    r2 = L.train("pointnet", data, cfg, model_config=SMALL)
    assert r1.history[-1].loss == r2.history[-1].loss
    for a, b in zip(pn.param_tensors(r1.params), pn.param_tensors(r2.params)):
        assert np.array_equal(a.data, b.data)


def test_train_history_shape():
    data = tiny_dataset(3)
    res = L.train("pointnet", data, TrainConfig(epochs=4, rng_seed=1), model_config=SMALL)
    assert len(res.history) == 4
    assert [h.epoch for h in res.history] == [1, 2, 3, 4]
    for h in res.history:
        assert np.isfinite(h.loss)
        assert 0.0 <= h.train_accuracy <= 1.0
        assert np.isfinite(h.reg_penalty)


def test_train_loss_decreases_over_first_epochs():
    data = tiny_dataset(4, per_class=8)
    res = L.train("pointnet", data, TrainConfig(epochs=5, rng_seed=0), model_config=SMALL)
    losses = [h.loss for h in res.history]
    assert losses[-1] < losses[0]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_train_divergence_reports_epoch():
    data = tiny_dataset(5)
    cfg = TrainConfig(epochs=10, optimizer="sgd", learning_rate=1e12, rng_seed=0)
    with pytest.raises(TrainingDiverged) as exc_info:
        L.train("pointnet", data, cfg, model_config=SMALL)
    assert 1 <= exc_info.value.epoch <= 10
    assert len(exc_info.value.history) < 10


def test_train_zeroes_grads_between_batches():
    # oracle loop: identical math with explicit zeroing, batch by batch;
    # a loop that let grads accumulate across batches would diverge from it
    data = tiny_dataset(6, per_class=4)
    cfg = TrainConfig(epochs=2, batch_size=4, optimizer="sgd",
                      learning_rate=0.01, rng_seed=9)

    res = L.train("pointnet", data, cfg, model_config=SMALL)

    rng = np.random.default_rng(9)
    params = pn.init_pointnet(rng, SMALL)
    tensors = pn.param_tensors(params)
    for _ in range(cfg.epochs):
        order = rng.permutation(len(data))
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            labels = [data[i].label for i in batch]
            with GradTape() as tape:
                rows, trs = [], []
                for i in batch:
                    lg, tr = pn.pointnet_forward(params, Tensor(data[i].points))
                    rows.append(lg)
                    trs.append(tr)
                loss = pn.pointnet_loss(T.stack_rows(rows), labels, trs, cfg.reg_weight)
                tape.backward(loss)
                grads = [t.grad.copy() for t in tensors]
                T.zero_grads(tensors)
            L.sgd_step(tensors, grads, cfg)
    for a, b in zip(pn.param_tensors(res.params), tensors):
        assert np.array_equal(a.data, b.data)


def test_train_pointnetpp_runs():
    from pcnet.pointnetpp import PointNetPPConfig, SetAbstractionConfig
    small = PointNetPPConfig(
        sa=(SetAbstractionConfig(num_centers=4, mlp_widths=(8,), radius=0.8),
            SetAbstractionConfig(num_centers=2, mlp_widths=(8,), radius=1.5)),
        head_hidden=(8,))
    data = tiny_dataset(7, per_class=2, n_points=16)
    res = L.train("pointnetpp", data, TrainConfig(epochs=2, rng_seed=0), model_config=small)
    assert len(res.history) == 2
    assert np.isnan(res.history[0].reg_penalty)


def test_evaluate_overfit_reports_perfect():
    data = tiny_dataset(8, per_class=2)
    cfg = TrainConfig(epochs=60, learning_rate=0.01, batch_size=8, rng_seed=0)
    res = L.train("pointnet", data, cfg, model_config=SMALL)
    rep = L.evaluate(res.params, "pointnet", data)
    assert rep.accuracy == 1.0
    assert rep.auc == 1.0


def test_evaluate_accuracy_equals_trace_over_total():
    data = tiny_dataset(9)
    res = L.train("pointnet", data, TrainConfig(epochs=1, rng_seed=0), model_config=SMALL)
    rep = L.evaluate(res.params, "pointnet", data)
    assert rep.accuracy == np.trace(rep.confusion) / rep.confusion.sum()
    assert rep.confusion.sum() == len(data)


def test_evaluate_scores_are_probabilities():
    data = tiny_dataset(10, per_class=2)
    res = L.train("pointnet", data, TrainConfig(epochs=1, rng_seed=0), model_config=SMALL)
    for lc in data[:3]:
        logits, _ = L.forward_logits(res.params, "pointnet", lc.points)
        p = L.softmax_probs(logits.data)
        assert abs(p.sum() - 1.0) < 1e-12
        assert (p >= 0).all()


def test_train_rejects_bad_input():
    with pytest.raises(ValueError):
        L.train("pointnet", [], TrainConfig())
    with pytest.raises(ValueError):
        L.train("voxelnet", tiny_dataset(0), TrainConfig())
