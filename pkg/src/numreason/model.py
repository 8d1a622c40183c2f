"""End-to-end policy model: tokens -> program -> attention -> action space."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import nn, sampler
from .attention import CrossAttention
from .autodiff import Tensor
from .corpus import EntityTable, Instance
from .encoder import Encoder, Vocab
from .parsing import Program, parse_to_program
from .sampler import ActionSpace, PolicyHeads


@dataclass
class ModelOutput:
    program: Program
    table: EntityTable
    space: ActionSpace
    aux_num: Tensor
    aux_date: Tensor
    n_refs: int

    def aux_total(self) -> Tensor:
        return self.aux_num + self.aux_date


class PolicyModel(nn.Module):
    """Shared encoder, cross attention, and policy heads over one instance."""

    def __init__(self, vocab: Vocab, d: int, n_layers: int,
                 rng: np.random.Generator, window: int = 3):
        self.vocab = vocab
        self.d = d
        self.n_layers = n_layers
        self.window = window
        self.encoder = Encoder(len(vocab), d, rng)
        self.attn = CrossAttention(d, n_layers, rng)
        self.heads = PolicyHeads(d, n_layers, rng)

    def forward(self, inst: Instance, k1: Optional[int] = None,
                k2: Optional[int] = None, dropout: float = 0.0,
                rng: Optional[np.random.Generator] = None,
                training: bool = False) -> ModelOutput:
        program = parse_to_program(inst.dep_parse, inst.query_tokens)
        table = inst.entity_table()
        p_ids = self.vocab.encode(inst.passage_tokens)
        q_ids = self.vocab.encode(inst.query_tokens)
        Hp, Hq = self.encoder.encode_pair(p_ids, q_ids, self.vocab.sep_id,
                                          dropout, rng, training)
        Q_steps = [Hq[np.array(step.span, dtype=np.int64)] for step in program.steps]
        P_steps = [Hp] * len(program.steps)
        refs = [step.refs for step in program.steps]
        num_mentions = [e.mentions for e in table.numbers]
        date_mentions = [e.mentions for e in table.dates]
        state = self.attn.run(P_steps, Q_steps, refs, num_mentions,
                              date_mentions, self.window, dropout, rng, training)

        joint = Hp.mean(axis=0) + Hq.mean(axis=0)
        query_enc = Hq.mean(axis=0)
        root_span = np.array(program.final.root_clause, dtype=np.int64)
        root_enc = Hq[root_span].mean(axis=0)
        type_dist = self.heads.predict_entity_type(joint, root_enc, query_enc,
                                                   dropout, rng, training)
        op_dist = self.heads.predict_operator(joint, root_enc, query_enc,
                                              dropout, rng, training)

        final_refs = program.final.refs
        T_num = [state.steps[r].T_num for r in final_refs] if table.numbers else []
        T_date = [state.steps[r].T_date for r in final_refs] if table.dates else []
        space = sampler.enumerate_actions(
            self.heads, table, type_dist, op_dist, T_num, T_date,
            n_refs=len(final_refs), k1=k1, k2=k2,
            dropout=dropout, rng=rng, training=training)
        return ModelOutput(program, table, space, state.aux_num,
                           state.aux_date, len(final_refs))

    def predict(self, inst: Instance):
        """Greedy: the highest-probability enumerated action, or None."""
        out = self.forward(inst)
        return out.space.actions[0] if out.space.actions else None
