"""Factored stochastic policy: entity-type and operator predictors plus the
four argument networks, and the action enumeration that crosses them with
the executor's validity rules.

Action probability = P_type * P_op * P_arg, with P_arg geometric-mean
normalized over its sampling factors (log probs averaged over the number
of factors).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import autodiff as ad
from . import executor, nn
from .autodiff import Tensor
from .corpus import EntityTable

LOG_EPS = 1e-300   # softmax outputs are strictly positive; guard only

_subset_mask_cache: dict[tuple[int, int], tuple[np.ndarray, list[tuple]]] = {}


def subset_masks(n: int, c: int) -> tuple[np.ndarray, list[tuple]]:
    """0/1 matrix (n_subsets x n) selecting every c-subset, plus the subsets."""
    key = (n, c)
    cached = _subset_mask_cache.get(key)
    if cached is not None:
        return cached
    subsets = list(itertools.combinations(range(n), c))
    mask = np.zeros((len(subsets), n))
    for row, subset in enumerate(subsets):
        mask[row, subset] = 1.0
    _subset_mask_cache[key] = (mask, subsets)
    return mask, subsets


class PolicyHeads(nn.Module):
    """All sampling networks. The operator catalog is fixed and ordered."""

    def __init__(self, d: int, n_layers: int, rng: np.random.Generator):
        self.d = d
        self.type_head = nn.Linear(3 * d, 2, rng)
        self.op_proj = nn.Linear(3 * d, d, rng)
        self.op_emb = nn.uniform_init(rng, (len(executor.OPS), d), d)
        self.s12_net = nn.Transformer(10, d, n_layers, rng)
        self.s1_head = nn.Linear(d, 1, rng)
        self.s2_head = nn.Linear(d, 2, rng)
        self.counter_net = nn.Transformer(10, d, n_layers, rng)
        self.counter_conv = nn.Conv1d3(d, d, rng)
        self.count_head = nn.Linear(d, 10, rng)
        self.ranker_net = nn.Transformer(10, d, n_layers, rng)
        self.rank_head = nn.Linear(d, 1, rng)
        self.rank_slope = Tensor(np.array(0.25), requires_grad=True)

    # -- operator sampling network ------------------------------------------

    def predict_entity_type(self, joint: Tensor, root_enc: Tensor,
                            query_enc: Tensor, dropout=0.0, rng=None,
                            training=False) -> Tensor:
        x = ad.concat([joint, root_enc, query_enc])
        x = ad.dropout(x, dropout, rng, training)
        return ad.softmax(ad.elu(self.type_head(x)))

    def predict_operator(self, joint: Tensor, root_enc: Tensor,
                         query_enc: Tensor, dropout=0.0, rng=None,
                         training=False) -> Tensor:
        x = ad.concat([joint, root_enc, query_enc])
        x = ad.dropout(x, dropout, rng, training)
        h = ad.elu(self.op_proj(x))
        return ad.softmax(ad.matmul(self.op_emb, h))

    # -- argument networks ---------------------------------------------------

    def _s12_hidden(self, T_feat, dropout=0.0, rng=None, training=False):
        return self.s12_net(T_feat, dropout_rate=dropout, rng=rng, training=training)

    def sample_one(self, T_feat: Tensor, **kw) -> Tensor:
        h = self._s12_hidden(T_feat, **kw)
        return ad.softmax(ad.elu(self.s1_head(h).reshape(-1)))

    def sample_two(self, T_feat: Tensor, **kw) -> "tuple[Tensor, list[tuple]]":
        """Joint distribution over unordered distinct entity pairs: the two
        head columns give per-entity distributions; pair probability is the
        renormalized symmetrized product."""
        n = T_feat.shape[0]
        if n < 2:
            raise ValueError("sample_two needs at least 2 entities")
        h = self._s12_hidden(T_feat, **kw)
        logits = ad.elu(self.s2_head(h))
        p1 = ad.softmax(logits[:, 0])
        p2 = ad.softmax(logits[:, 1])
        outer = ad.matmul(p1.reshape(n, 1), p2.reshape(1, n))
        sym = outer + ad.swap_last(outer)
        iu, ju = np.triu_indices(n, k=1)
        vec = sym[iu, ju]
        dist = vec * ad.reciprocal(vec.sum())
        return dist, list(zip(iu.tolist(), ju.tolist()))

    def count_predict(self, T_feat: Tensor, dropout=0.0, rng=None,
                      training=False) -> Tensor:
        h = self.counter_net(T_feat, dropout_rate=dropout, rng=rng,
                             training=training)
        pooled = ad.tmax(self.counter_conv(h), axis=0)
        return ad.softmax(ad.elu(self.count_head(pooled)))

    def rank_entities(self, T_feat: Tensor, dropout=0.0, rng=None,
                      training=False) -> Tensor:
        h = self.ranker_net(T_feat, dropout_rate=dropout, rng=rng,
                            training=training)
        scores = ad.prelu(self.rank_head(h).reshape(-1), self.rank_slope)
        return ad.softmax(scores)


def subset_log_probs(log_rank: Tensor, n: int, c: int) -> tuple[Tensor, list[tuple]]:
    """Log P(S | c) for every c-subset under the product-of-ranks model,
    normalized exactly over all c-subsets."""
    mask, subsets = subset_masks(n, c)
    raw = ad.matmul(Tensor(mask), log_rank)
    z = ad.log(ad.exp(raw).sum() + LOG_EPS)
    return raw - z, subsets


def sample_arbitrary(rank_dist: np.ndarray, count_dist: np.ndarray,
                     mode: str = "enumerate", rng: np.random.Generator = None,
                     max_count: int = executor.MAX_COUNT):
    """Multinomial(entity-ranked distribution, counter prediction).

    mode="enumerate": list every (subset, c) with its exact probability,
    P(S, c) = count(c) * prod(rank[e]) / Z_c, for c up to min(max_count, E).
    mode="stochastic": draw one (subset, c) from that exact distribution.
    """
    n = len(rank_dist)
    log_rank = np.log(rank_dist + LOG_EPS)
    items = []
    cmax = min(max_count, n)
    ccond = count_dist[:cmax] / count_dist[:cmax].sum() if count_dist[:cmax].sum() > 0 \
        else np.full(cmax, 1.0 / cmax)
    for c in range(1, cmax + 1):
        mask, subsets = subset_masks(n, c)
        raw = np.exp(mask @ log_rank)
        cond = raw / raw.sum()
        for subset, p in zip(subsets, cond):
            items.append((subset, c, ccond[c - 1] * p))
    if mode == "enumerate":
        return sorted(items, key=lambda it: -it[2])
    probs = np.array([p for _, _, p in items])
    idx = rng.choice(len(items), p=probs / probs.sum())
    return items[idx]


@dataclass
class Branch:
    """One (etype, op) slice of the action space with its payload log-prob
    vector as a graph tensor."""
    etype: str
    op: str
    payloads: list[tuple]
    arg_logp: Tensor           # len(payloads); sums of factor log probs
    n_factors: int
    prior_logp: float          # log P_type + log P_op (detached value)
    type_idx: int
    op_idx: int

    def arg_probs(self) -> np.ndarray:
        return np.exp(self.arg_logp.data)


@dataclass
class Action:
    etype: str
    op: str
    payload: tuple
    logp: float
    answer: Fraction
    branch: Branch = None
    payload_idx: int = -1

    def key(self) -> tuple:
        return (self.etype, self.op, self.payload)


@dataclass
class ActionSpace:
    type_dist: Tensor
    op_dist: Tensor
    branches: list[Branch] = field(default_factory=list)
    actions: list[Action] = field(default_factory=list)
    entropy: Tensor = None      # sum of argument-distribution entropies

    def logp_node(self, action: Action) -> Tensor:
        """Differentiable log probability of one enumerated action."""
        b = action.branch
        lt = ad.log(self.type_dist[b.type_idx] + LOG_EPS)
        lo = ad.log(self.op_dist[b.op_idx] + LOG_EPS)
        return lt + lo + b.arg_logp[action.payload_idx] * (1.0 / b.n_factors)

    def ranked(self) -> list[Action]:
        return self.actions

    def universe_keys(self) -> set[tuple]:
        return {a.key() for a in self.actions}


def _entropy(dist: Tensor) -> Tensor:
    return -(dist * ad.log(dist + LOG_EPS)).sum()


def enumerate_actions(heads: PolicyHeads, table: EntityTable,
                      type_dist: Tensor, op_dist: Tensor,
                      T_num: list[Tensor], T_date: list[Tensor],
                      n_refs: int, k1: Optional[int] = None,
                      k2: Optional[int] = None, max_set: int = executor.MAX_COUNT,
                      dropout=0.0, rng=None, training=False) -> ActionSpace:
    """Build every valid (etype, op) branch and rank the action candidates.

    k1 caps the number of (etype, op) branches kept (by prior probability),
    k2 caps argument candidates per branch; None means no cap. With both
    None the ranked list is the policy's full action universe.
    """
    space = ActionSpace(type_dist=type_dist, op_dist=op_dist)
    entropies = []
    kw = dict(dropout=dropout, rng=rng, training=training)

    per_type: dict[str, dict] = {}
    for ti, etype in enumerate(executor.ENTITY_TYPES):
        n_ent = table.size(etype)
        if n_ent == 0:
            continue
        Ts = T_num if etype == "number" else T_date
        feats = [ad.swap_last(t) for t in Ts]          # (E, 10) each
        T_sum = feats[0]
        for extra in feats[1:]:
            T_sum = T_sum + extra
        ctx = {"n": n_ent, "feats": feats, "sum": T_sum, "ti": ti}
        per_type[etype] = ctx

    branches = []
    for etype, ctx in per_type.items():
        n_ent, ti = ctx["n"], ctx["ti"]
        rank_dist = count_dist = None
        for oi, op in enumerate(executor.OPS):
            if not executor.valid(etype, op, 2 if op == "diff" else 1):
                continue
            prior = (math.log(type_dist.data[ti] + LOG_EPS)
                     + math.log(op_dist.data[oi] + LOG_EPS))
            if op == "count":
                if count_dist is None:
                    count_dist = heads.count_predict(ctx["sum"], **kw)
                    entropies.append(_entropy(count_dist))
                payloads = [("count", c) for c in range(1, executor.MAX_COUNT + 1)]
                arg_logp = ad.log(count_dist + LOG_EPS)
                branches.append(Branch(etype, op, payloads, arg_logp, 1, prior, ti, oi))
            elif op == "diff":
                if n_ent < 2 and n_refs != 2:
                    continue
                if n_refs == 2:
                    d1 = heads.sample_one(ctx["feats"][0], **kw)
                    d2 = heads.sample_one(ctx["feats"][min(1, len(ctx["feats"]) - 1)], **kw)
                    entropies.extend([_entropy(d1), _entropy(d2)])
                    lp = ad.log(d1 + LOG_EPS).reshape(n_ent, 1) \
                        + ad.log(d2 + LOG_EPS).reshape(1, n_ent)
                    payloads = [("pair", tuple(sorted((i, j))))
                                for i in range(n_ent) for j in range(n_ent)]
                    branches.append(Branch(etype, op, payloads,
                                           lp.reshape(n_ent * n_ent), 2, prior, ti, oi))
                else:
                    dist, pairs = heads.sample_two(ctx["sum"], **kw)
                    entropies.append(_entropy(dist))
                    payloads = [("pair", p) for p in pairs]
                    branches.append(Branch(etype, op, payloads,
                                           ad.log(dist + LOG_EPS), 1, prior, ti, oi))
            else:
                if rank_dist is None:
                    rank_dist = heads.rank_entities(ctx["sum"], **kw)
                    entropies.append(_entropy(rank_dist))
                log_rank = ad.log(rank_dist + LOG_EPS)
                if op == "negate":
                    payloads = [("set", (i,)) for i in range(n_ent)]
                    branches.append(Branch(etype, op, payloads, log_rank, 1,
                                           prior, ti, oi))
                else:
                    if count_dist is None:
                        count_dist = heads.count_predict(ctx["sum"], **kw)
                        entropies.append(_entropy(count_dist))
                    log_count = ad.log(count_dist + LOG_EPS)
                    parts, payloads = [], []
                    for c in range(1, min(max_set, n_ent) + 1):
                        cond, subsets = subset_log_probs(log_rank, n_ent, c)
                        parts.append(cond + log_count[c - 1])
                        payloads.extend(("set", s) for s in subsets)
                    branches.append(Branch(etype, op, payloads,
                                           ad.concat(parts), 2, prior, ti, oi))

    if k1 is not None and len(branches) > k1:
        branches = sorted(branches, key=lambda b: -b.prior_logp)[:k1]
    space.branches = branches

    actions = []
    for b in branches:
        arg = b.arg_logp.data / b.n_factors
        order = np.argsort(-arg, kind="stable")
        if k2 is not None:
            order = order[:k2]
        for idx in order:
            payload = b.payloads[idx]
            answer = executor.execute(b.etype, b.op, payload, table)
            actions.append(Action(b.etype, b.op, payload,
                                  b.prior_logp + float(arg[idx]), answer,
                                  branch=b, payload_idx=int(idx)))
    actions.sort(key=lambda a: (-a.logp, a.key()))
    space.actions = actions
    total = None
    for e in entropies:
        total = e if total is None else total + e
    space.entropy = total if total is not None else Tensor(0.0)
    return space


def sample_action(space: ActionSpace, rng: np.random.Generator) -> Optional[Action]:
    """Ancestral draw: (etype, op) branch by prior probability, then a
    payload from the branch's conditional distribution. Returns the matching
    enumerated Action (full enumeration assumed)."""
    if not space.branches:
        return None
    priors = np.exp(np.array([b.prior_logp for b in space.branches]))
    priors = priors / priors.sum()
    b = space.branches[rng.choice(len(space.branches), p=priors)]
    probs = b.arg_probs()
    probs = probs / probs.sum()
    idx = int(rng.choice(len(probs), p=probs))
    payload = b.payloads[idx]
    for a in space.actions:
        if a.branch is b and a.payload_idx == idx:
            return a
    return None
