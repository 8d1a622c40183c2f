"""Training objectives, optimizer, determinism, and checkpoint IO."""

import numpy as np
import pytest

import numreason.autodiff as ad
from numreason import gen, report, training
from numreason.autodiff import Tensor
from numreason.training import (
    CheckpointError, NonFiniteLoss, SGD, TrainConfig, load_checkpoint,
    reinforce_loss, save_checkpoint,
)


class _StubSpace:
    """Three-action bandit exposing the log-prob interface the losses use."""

    def __init__(self, theta: Tensor):
        self.theta = theta
        self.probs = ad.softmax(theta)

    def logp_node(self, action):
        return ad.log(self.probs[action])


class _StubOut:
    def __init__(self, theta):
        self.space = _StubSpace(theta)


def test_reinforce_single_positive_sample_pushes_up():
    theta = Tensor(np.zeros(3), requires_grad=True)
    out = _StubOut(theta)
    loss = reinforce_loss(out, [1], [1])       # one sample, reward +1
    loss.backward()
    probs = out.space.probs.data
    # d(-log p_1)/d theta = p - e_1: chosen action's logit must increase
    np.testing.assert_allclose(theta.grad, probs - np.eye(3)[1], atol=1e-12)
    assert theta.grad[1] < 0                   # SGD step raises logit 1


def test_reinforce_constant_rewards_zero_gradient():
    theta = Tensor(np.array([0.3, -0.2, 0.1]), requires_grad=True)
    out = _StubOut(theta)
    loss = reinforce_loss(out, [0, 1, 2, 1], [1, 1, 1, 1])
    assert loss.item() == pytest.approx(0.0, abs=1e-15)
    loss.backward()
    np.testing.assert_allclose(theta.grad, np.zeros(3), atol=1e-12)


def test_reinforce_estimator_unbiased_three_action_bandit():
    """Empirical REINFORCE gradient vs the analytic gradient of E[R]."""
    rng = np.random.default_rng(0)
    theta0 = np.array([0.2, -0.1, 0.4])
    rewards = np.array([1.0, -1.0, -1.0])
    e = np.exp(theta0 - theta0.max())
    p = e / e.sum()
    analytic = p * rewards - p * (p @ rewards)   # d E[R] / d theta
    n = 10000
    grads = np.zeros((n, 3))
    for t in range(n):
        a = int(rng.choice(3, p=p))
        theta = Tensor(theta0.copy(), requires_grad=True)
        loss = reinforce_loss(_StubOut(theta), [a], [rewards[a]])
        loss.backward()
        grads[t] = -theta.grad                   # estimator of +dE[R]/dtheta
    mean = grads.mean(axis=0)
    se = grads.std(axis=0, ddof=1) / np.sqrt(n)
    np.testing.assert_array_less(np.abs(mean - analytic), 2.0 * se + 1e-12)


def test_iml_loss_uses_best_and_worst():
    insts = gen.generate(7, seed=0)
    cfg = TrainConfig(d=16, n_layers=1)
    model = training.build_model(training.build_vocab(insts), cfg)
    trainer = training.Trainer(model, cfg)
    good = []
    for inst in insts:
        out = trainer._forward(inst, search=True)
        good = training.good_candidates(out, inst.gold_answer)
        if good:
            break
    assert good
    lam = 0.25
    loss = training.iml_loss(out, good, lam)
    expected = -((1 - lam) * out.space.logp_node(good[0]).item()
                 + lam * out.space.logp_node(good[-1]).item())
    assert loss.item() == pytest.approx(expected, abs=1e-9)


def test_sgd_applies_gradient_and_l2():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    p.grad = np.array([0.5, 0.5])
    SGD([p], lr=0.1, l2=0.01).step()
    np.testing.assert_allclose(p.data, [1.0 - 0.1 * (0.5 + 0.02),
                                        -2.0 - 0.1 * (0.5 - 0.04)])
    assert p.grad is None


def test_sgd_gradient_clipping():
    p = Tensor(np.zeros(2), requires_grad=True)
    p.grad = np.array([3.0, 4.0])              # norm 5
    SGD([p], lr=1.0, l2=0.0, grad_clip=1.0).step()
    np.testing.assert_allclose(p.data, [-0.6, -0.8])
    p2 = Tensor(np.zeros(2), requires_grad=True)
    p2.grad = np.array([0.3, 0.4])             # under the ceiling: untouched
    SGD([p2], lr=1.0, l2=0.0, grad_clip=1.0).step()
    np.testing.assert_allclose(p2.data, [-0.3, -0.4])


def test_nan_guard():
    with pytest.raises(NonFiniteLoss):
        training._check_finite(float("nan"), "unit test")


def _tiny_train(seed=0):
    insts = gen.generate(14, seed=1)
    cfg = TrainConfig(d=16, n_layers=1, n_iml=1, n_rl=1, seed=seed)
    return training.train(insts, cfg) + (cfg,)


def test_training_deterministic():
    m1, t1, _ = _tiny_train()
    m2, t2, _ = _tiny_train()
    for (n1, p1), (n2, p2) in zip(sorted(m1.named_parameters()),
                                  sorted(m2.named_parameters())):
        assert n1 == n2
        np.testing.assert_array_equal(p1.data, p2.data)
    assert t1.to_rows() == t2.to_rows()


def test_checkpoint_round_trip(tmp_path):
    model, _, cfg = _tiny_train()
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, model, cfg)
    back, cfg2 = load_checkpoint(path)
    assert cfg2 == cfg
    for (n1, p1), (n2, p2) in zip(sorted(model.named_parameters()),
                                  sorted(back.named_parameters())):
        assert n1 == n2
        np.testing.assert_array_equal(p1.data, p2.data)
    insts = gen.generate(4, seed=1)
    r1 = report.evaluate(model, insts)
    r2 = report.evaluate(back, insts)
    assert r1.csv() == r2.csv()


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"garbage")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_truncated(tmp_path):
    model, _, cfg = _tiny_train()
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, model, cfg)
    data = path.read_bytes()
    path.write_bytes(data[:-16])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(path)


def test_config_hash_stable_and_sensitive():
    assert TrainConfig().hash() == TrainConfig().hash()
    assert TrainConfig().hash() != TrainConfig(lr=0.02).hash()


def test_training_improves_over_initialization():
    insts = gen.generate(56, seed=7)
    cfg = TrainConfig(d=16, n_layers=1, n_iml=3, n_rl=6, seed=0)
    model0 = training.build_model(training.build_vocab(insts), cfg)
    em0 = report.evaluate(model0, insts).em()
    model, _ = training.train(insts, cfg)
    em1 = report.evaluate(model, insts).em()
    assert em1 > em0
