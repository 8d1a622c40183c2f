"""Entity-specific cross attention.

Per program step: program-to-passage attention, sliding-window smoothing,
multi-scaled span logits with additive reference combination, passage-to-
entity attention with mention aggregation, and the stacked entity maps the
argument samplers consume. Also the auxiliary neighborhood loss that pulls
passage attention toward entity mentions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import Tensor

WINDOWS = tuple(range(1, 11))
SCALES = np.array([1.0, 2.0, 5.0, 10.0])
EPS = 1e-12

_smooth_cache: dict[int, np.ndarray] = {}


def smoothing_stack(m: int) -> np.ndarray:
    """(10, m, m) row matrices: truncated centered window averaging.

    Window omega covers offsets [-(omega-1)//2, omega//2]; out-of-bounds
    positions are dropped and the divisor shrinks accordingly, so omega=1
    is the identity and uniform inputs are fixed points.
    """
    stack = _smooth_cache.get(m)
    if stack is not None:
        return stack
    stack = np.zeros((len(WINDOWS), m, m))
    for wi, omega in enumerate(WINDOWS):
        lo, hi = -((omega - 1) // 2), omega // 2
        for i in range(m):
            a, b = max(0, i + lo), min(m - 1, i + hi)
            stack[wi, i, a:b + 1] = 1.0 / (b - a + 1)
    _smooth_cache[m] = stack
    return stack


def program_passage_attention(Q: Tensor, P: Tensor, w: Tensor) -> Tensor:
    """Expected passage attention for one program step.

    Similarity S(i,j) = w^T [Q_i ; P_j ; Q_i * P_j]; row-softmax gives the
    per-span-token attention map, the row weights are the softmax of row
    sums, and the output is their convex combination over span tokens.
    """
    n, d = Q.shape
    if n == 0:
        raise ValueError("empty span argument (parser bug)")
    wq, wp, wx = w[:d], w[d:2 * d], w[2 * d:]
    S = (ad.matmul(Q, wq).reshape(n, 1) + ad.matmul(P, wp).reshape(1, -1)
         + ad.matmul(Q * wx, ad.swap_last(P)))
    A = ad.softmax(S, axis=1)
    a = ad.softmax(S.sum(axis=1), axis=0)
    return ad.matmul(a, A)


def smooth(alpha_bar: Tensor) -> Tensor:
    """All 10 window-averaged attention maps, stacked to (10, m)."""
    m = alpha_bar.shape[0]
    return ad.matmul(Tensor(smoothing_stack(m)), alpha_bar)


class SpanLogitNet(nn.Module):
    """Multi-scaling + stacked self-attention + linear head, shared across
    steps and windows (windows ride along as a batch axis)."""

    def __init__(self, d: int, n_layers: int, rng: np.random.Generator):
        self.net = nn.Transformer(len(SCALES), d, n_layers, rng)
        self.out = nn.Linear(d, 1, rng)

    def __call__(self, smoothed: Tensor, ref_logits: list[Tensor],
                 dropout=0.0, rng=None, training=False) -> Tensor:
        n_win, m = smoothed.shape
        feat = smoothed.reshape(n_win, m, 1) * SCALES
        h = self.net(feat, dropout, rng, training)
        logits = self.out(h).reshape(n_win, m)
        for ref in ref_logits:
            logits = logits + ref
        return logits


def mention_matrix(mentions: list[list[int]]) -> tuple[np.ndarray, np.ndarray]:
    """Flat mention index array and the 0/1 aggregation matrix mapping
    mention columns to their entity."""
    flat, agg_cols = [], []
    for j, locs in enumerate(mentions):
        for loc in locs:
            flat.append(loc)
            agg_cols.append(j)
    agg = np.zeros((len(flat), len(mentions)))
    agg[np.arange(len(flat)), agg_cols] = 1.0
    return np.array(flat, dtype=np.int64), agg


def entity_attention(P: Tensor, mentions: list[list[int]], W: Tensor,
                     span_logits: Tensor) -> tuple[Tensor, Tensor]:
    """Passage-to-entity attention map A (m x E, row-stochastic after
    additive mention aggregation) and the stacked entity distributions
    T (10 x E), one row per smoothing window."""
    flat, agg = mention_matrix(mentions)
    PW = ad.matmul(P, W)
    scores = ad.matmul(PW, ad.swap_last(P[flat]))
    S_ent = ad.matmul(scores, Tensor(agg))
    A = ad.softmax(S_ent, axis=1)
    T = ad.softmax(ad.matmul(span_logits, A), axis=-1)
    return A, T


def window_mask(m: int, mentions: list[list[int]], window: int) -> np.ndarray:
    """(m, E) indicator: entity j lies within +-window of passage token i."""
    mask = np.zeros((m, len(mentions)))
    idx = np.arange(m)
    for j, locs in enumerate(mentions):
        for loc in locs:
            mask[np.abs(idx - loc) <= window, j] = 1.0
    return mask


def aux_loss(attention_maps: list[Tensor], mask: np.ndarray) -> Tensor:
    """Neighborhood inductive bias, averaged over program steps.

    Per passage token: negative log of the in-window attention mass
    (floored at 1e-12) plus the out-of-window mass times the KL divergence
    of the conditional out-of-window distribution from uniform. Zero
    exactly when every row keeps its whole mass on in-window entities;
    the KL form leaves the outside distribution unbiased beyond pushing
    it toward uniform.
    """
    out_mask = 1.0 - mask
    k_out = out_mask.sum(axis=1)
    log_k = np.log(np.maximum(k_out, 1.0))
    total = None
    for A in attention_maps:
        in_mass = (A * mask).sum(axis=1)
        term_like = -ad.log(in_mass + EPS)
        a_out = A * out_mask
        out_mass = a_out.sum(axis=1)
        plogp = (a_out * ad.log(A + EPS)).sum(axis=1)
        term_out = plogp - out_mass * ad.log(out_mass + EPS) + out_mass * log_k
        contrib = (term_like + term_out).mean()
        total = contrib if total is None else total + contrib
    if total is None:
        return Tensor(0.0)
    return total * (1.0 / len(attention_maps))


@dataclass
class StepAttention:
    alpha_bar: Tensor                    # m
    span_logits: Tensor                  # 10 x m
    A_num: Optional[Tensor] = None       # m x N
    T_num: Optional[Tensor] = None       # 10 x N
    A_date: Optional[Tensor] = None      # m x D
    T_date: Optional[Tensor] = None      # 10 x D


@dataclass
class AttentionState:
    steps: list[StepAttention] = field(default_factory=list)
    aux_num: Tensor = None
    aux_date: Tensor = None

    def aux_total(self) -> Tensor:
        return self.aux_num + self.aux_date


class CrossAttention(nn.Module):
    def __init__(self, d: int, n_layers: int, rng: np.random.Generator):
        self.w = nn.uniform_init(rng, (3 * d,), 3 * d)
        self.W_num = nn.uniform_init(rng, (d, d), d)
        self.W_date = nn.uniform_init(rng, (d, d), d)
        self.span_net = SpanLogitNet(d, n_layers, rng)

    def run(self, P_steps: list[Tensor], Q_steps: list[Tensor],
            refs: list[list[int]], num_mentions: list[list[int]],
            date_mentions: list[list[int]], window: int,
            dropout=0.0, rng=None, training=False) -> AttentionState:
        """Full attention pipeline over all program steps."""
        m = P_steps[0].shape[0]
        state = AttentionState()
        num_mask = window_mask(m, num_mentions, window) if num_mentions else None
        date_mask = window_mask(m, date_mentions, window) if date_mentions else None
        for k, (P, Q) in enumerate(zip(P_steps, Q_steps)):
            alpha_bar = program_passage_attention(Q, P, self.w)
            logits = self.span_net(smooth(alpha_bar),
                                   [state.steps[r].span_logits for r in refs[k]],
                                   dropout, rng, training)
            step = StepAttention(alpha_bar, logits)
            if num_mentions:
                step.A_num, step.T_num = entity_attention(P, num_mentions,
                                                          self.W_num, logits)
            if date_mentions:
                step.A_date, step.T_date = entity_attention(P, date_mentions,
                                                            self.W_date, logits)
            state.steps.append(step)
        state.aux_num = (aux_loss([s.A_num for s in state.steps], num_mask)
                         if num_mentions else Tensor(0.0))
        state.aux_date = (aux_loss([s.A_date for s in state.steps], date_mask)
                          if date_mentions else Tensor(0.0))
        return state
