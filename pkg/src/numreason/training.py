"""Two-phase weakly supervised training and checkpoint IO.

Phase 1 (iterative hard search): enumerate the policy's top candidate
actions, keep the ones whose executed answer earns reward +1, and push a
mix of the best and worst of them — no gold programs involved. Phase 2:
score-function gradient over sampled actions with a leave-one-out reward
baseline, plus entropy regularization, the attention neighborhood loss,
and pseudo-label likelihood terms distilled from rewarded samples.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from . import executor
from .autodiff import Tensor
from .corpus import Instance
from .encoder import Vocab
from .model import ModelOutput, PolicyModel
from .sampler import Action, sample_action

CKPT_MAGIC = b"NRCK1\n"


@dataclass
class TrainConfig:
    d: int = 64
    n_layers: int = 2
    window: int = 3
    lr: float = 1e-2
    n_iml: int = 5
    n_rl: int = 30
    k_samples: int = 8
    lambda_mix: float = 1e-3
    entropy_weight: float = 1e-2
    l2: float = 1e-5
    dropout: float = 0.1
    aux_weight: float = 1.0
    pseudo_weight: float = 0.5
    k1: Optional[int] = None     # branch cap during candidate enumeration
    k2: Optional[int] = 5        # per-branch payload cap during search
    grad_clip: float = 5.0       # global gradient-norm ceiling per step
    seed: int = 0

    def hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class EpochStats:
    epoch: int
    phase: str
    loss: float
    mean_reward: float
    hit_rate: float       # fraction of instances with >= 1 rewarded candidate/sample


@dataclass
class TrainTrace:
    config_hash: str
    epochs: list[EpochStats] = field(default_factory=list)

    def to_rows(self) -> list[dict]:
        return [asdict(e) | {"config_hash": self.config_hash} for e in self.epochs]


class NonFiniteLoss(RuntimeError):
    pass


def _check_finite(value: float, where: str):
    if not np.isfinite(value):
        raise NonFiniteLoss(f"non-finite loss in {where}: {value!r}")


def good_candidates(out: ModelOutput, gold) -> list[Action]:
    """Reward +1 actions among the enumerated candidates, policy order."""
    return [a for a in out.space.actions
            if executor.reward(a.answer, gold) == 1]


def iml_loss(out: ModelOutput, good: list[Action], lam: float) -> Tensor:
    """-[(1-lam) * max log p + lam * min log p] over the rewarded candidates.

    The candidate list is sorted by policy probability, so the first/last
    rewarded entries are the arg-max/arg-min.
    """
    best = out.space.logp_node(good[0])
    worst = out.space.logp_node(good[-1])
    return -((1.0 - lam) * best + lam * worst)


def reinforce_loss(out: ModelOutput, samples: list[Action],
                   rewards: list[int]) -> Tensor:
    """Score-function estimator with a leave-one-out baseline (zero for a
    single sample), averaged over the K draws."""
    k = len(samples)
    total = None
    rsum = float(sum(rewards))
    for a, r in zip(samples, rewards):
        baseline = (rsum - r) / (k - 1) if k > 1 else 0.0
        term = out.space.logp_node(a) * (-(r - baseline))
        total = term if total is None else total + term
    return total * (1.0 / k)


def pseudo_label_loss(out: ModelOutput, samples: list[Action],
                      rewards: list[int]) -> Optional[Tensor]:
    """Negative log-likelihood of the entity-type and operator of rewarded
    samples — self-distilled supervision for the two classifier heads."""
    seen = set()
    total = None
    for a, r in zip(samples, rewards):
        if r != 1:
            continue
        key = (a.branch.type_idx, a.branch.op_idx)
        if key in seen:
            continue
        seen.add(key)
        term = -(ad.log(out.space.type_dist[a.branch.type_idx] + 1e-12)
                 + ad.log(out.space.op_dist[a.branch.op_idx] + 1e-12))
        total = term if total is None else total + term
    if total is None:
        return None
    return total * (1.0 / len(seen))


class SGD:
    """Plain stochastic gradient descent with decoupled L2 shrinkage and a
    global gradient-norm ceiling (sparse rewards make late-phase policy
    gradients spiky)."""

    def __init__(self, params: list[Tensor], lr: float, l2: float,
                 grad_clip: float = 0.0):
        self.params = params
        self.lr = lr
        self.l2 = l2
        self.grad_clip = grad_clip

    def step(self):
        scale = 1.0
        if self.grad_clip > 0.0:
            total = sum(float(np.sum(p.grad * p.grad))
                        for p in self.params if p.grad is not None)
            norm = np.sqrt(total)
            if norm > self.grad_clip:
                scale = self.grad_clip / norm
        for p in self.params:
            if p.grad is not None:
                p.data -= self.lr * (scale * p.grad + 2.0 * self.l2 * p.data)
            p.grad = None


class Trainer:
    def __init__(self, model: PolicyModel, config: TrainConfig):
        self.model = model
        self.config = config
        self.opt = SGD(list(model.parameters()), config.lr, config.l2,
                       config.grad_clip)
        self.rng = np.random.default_rng(config.seed + 1)
        self.trace = TrainTrace(config.hash())

    def _forward(self, inst: Instance, search: bool) -> ModelOutput:
        """Search mode caps the candidate enumeration (k1/k2); sampling mode
        keeps the full action space so every draw maps to a candidate."""
        cfg = self.config
        return self.model.forward(
            inst, k1=cfg.k1 if search else None, k2=cfg.k2 if search else None,
            dropout=cfg.dropout, rng=self.rng, training=True)

    def iml_epoch(self, instances: list[Instance], epoch: int) -> EpochStats:
        cfg = self.config
        order = self.rng.permutation(len(instances))
        losses, hits = [], 0
        for idx in order:
            inst = instances[idx]
            out = self._forward(inst, search=True)
            good = good_candidates(out, inst.gold_answer)
            if not good:
                continue
            hits += 1
            loss = iml_loss(out, good, cfg.lambda_mix)
            loss = loss + cfg.aux_weight * out.aux_total()
            loss = loss - cfg.entropy_weight * out.space.entropy
            _check_finite(loss.item(), f"iml epoch {epoch}")
            self.model.zero_grad()
            loss.backward()
            self.opt.step()
            losses.append(loss.item())
        stats = EpochStats(epoch, "iml", float(np.mean(losses)) if losses else 0.0,
                           0.0, hits / max(len(instances), 1))
        self.trace.epochs.append(stats)
        return stats

    def rl_epoch(self, instances: list[Instance], epoch: int) -> EpochStats:
        cfg = self.config
        order = self.rng.permutation(len(instances))
        losses, rewards_all, hits = [], [], 0
        for idx in order:
            inst = instances[idx]
            out = self._forward(inst, search=False)
            if not out.space.actions:
                continue
            samples, rewards = [], []
            for _ in range(cfg.k_samples):
                a = sample_action(out.space, self.rng)
                if a is None:
                    continue
                samples.append(a)
                rewards.append(executor.reward(a.answer, inst.gold_answer))
            if not samples:
                continue
            if any(r == 1 for r in rewards):
                hits += 1
            loss = reinforce_loss(out, samples, rewards)
            loss = loss + cfg.aux_weight * out.aux_total()
            loss = loss - cfg.entropy_weight * out.space.entropy
            pseudo = pseudo_label_loss(out, samples, rewards)
            if pseudo is not None:
                loss = loss + cfg.pseudo_weight * pseudo
            _check_finite(loss.item(), f"rl epoch {epoch}")
            self.model.zero_grad()
            loss.backward()
            self.opt.step()
            losses.append(loss.item())
            rewards_all.extend(rewards)
        stats = EpochStats(
            epoch, "rl", float(np.mean(losses)) if losses else 0.0,
            float(np.mean(rewards_all)) if rewards_all else -1.0,
            hits / max(len(instances), 1))
        self.trace.epochs.append(stats)
        return stats

    def fit(self, instances: list[Instance], log=None) -> TrainTrace:
        epoch = 0
        for _ in range(self.config.n_iml):
            stats = self.iml_epoch(instances, epoch)
            if log:
                log(stats)
            epoch += 1
        for _ in range(self.config.n_rl):
            stats = self.rl_epoch(instances, epoch)
            if log:
                log(stats)
            epoch += 1
        return self.trace


def build_vocab(instances: list[Instance]) -> Vocab:
    tokens = []
    for inst in instances:
        tokens.extend(inst.passage_tokens)
        tokens.extend(inst.query_tokens)
    return Vocab(tokens)


def build_model(vocab: Vocab, config: TrainConfig) -> PolicyModel:
    rng = np.random.default_rng(config.seed)
    return PolicyModel(vocab, config.d, config.n_layers, rng,
                       window=config.window)


def train(instances: list[Instance], config: TrainConfig,
          log=None) -> tuple[PolicyModel, TrainTrace]:
    vocab = build_vocab(instances)
    model = build_model(vocab, config)
    trainer = Trainer(model, config)
    trace = trainer.fit(instances, log=log)
    return model, trace


# -- checkpoint format -------------------------------------------------------
#
#   bytes 0..5   magic "NRCK1\n"
#   8-byte little-endian uint64: header length H
#   H bytes      JSON header: {"config": {...}, "config_hash": str,
#                "vocab": [...], "params": [[name, [shape...]], ...]}
#   then for each params entry, shape-product float64 values, little-endian,
#   in header order.


def save_checkpoint(path, model: PolicyModel, config: TrainConfig):
    named = sorted(model.named_parameters(), key=lambda kv: kv[0])
    header = {
        "config": asdict(config),
        "config_hash": config.hash(),
        "vocab": model.vocab.to_list(),
        "params": [[name, list(p.shape)] for name, p in named],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, p in named:
            fh.write(p.data.astype("<f8").tobytes())


class CheckpointError(ValueError):
    pass


def load_checkpoint(path) -> tuple[PolicyModel, TrainConfig]:
    with open(path, "rb") as fh:
        if fh.read(len(CKPT_MAGIC)) != CKPT_MAGIC:
            raise CheckpointError("bad checkpoint magic")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen))
        config = TrainConfig(**header["config"])
        if config.hash() != header["config_hash"]:
            raise CheckpointError("config hash mismatch")
        vocab = Vocab.from_list(header["vocab"])
        model = build_model(vocab, config)
        params = dict(model.named_parameters())
        if set(params) != {name for name, _ in header["params"]}:
            raise CheckpointError("parameter names do not match this build")
        for name, shape in header["params"]:
            p = params[name]
            if list(p.shape) != shape:
                raise CheckpointError(f"shape mismatch for {name}")
            n = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * n)
            if len(buf) != 8 * n:
                raise CheckpointError("truncated checkpoint payload")
            p.data = np.frombuffer(buf, dtype="<f8").reshape(shape).astype(np.float64)
    return model, config
