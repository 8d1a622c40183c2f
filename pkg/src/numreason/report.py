"""Evaluation metrics and deterministic report emission.

Exact match scores the policy's top-ranked action; recall@k asks whether
any of the top k distinct actions earns reward +1; recall@all asks
whether the answer is reachable anywhere in the enumerated action space.
Pseudo-accuracies compare the top action's entity type, operator, and
argument payload against the gold trace when one is available.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import executor
from .corpus import GOLD_OPS, Instance
from .model import PolicyModel
from .sampler import Action

RECALL_KS = (1, 2, 3, 4, 5, 10, 20)
BUCKET_WIDTH = 5


def dedup_ranked(actions: list[Action]) -> list[Action]:
    """Policy-ordered actions with duplicate (etype, op, payload) keys
    dropped (diff over two references enumerates both argument orders)."""
    seen, out = set(), []
    for a in actions:
        key = a.key()
        if key in seen:
            continue
        seen.add(key)
        out.append(a)
    return out


@dataclass
class InstanceEval:
    id: str
    em: bool
    recall: dict[int, bool]
    recall_all: bool
    n_entities: int
    n_actions: int
    type_match: bool | None = None
    op_match: bool | None = None
    arg_match: bool | None = None
    top: tuple | None = None


@dataclass
class EvalReport:
    per_instance: list[InstanceEval] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.per_instance)

    def em(self) -> float:
        return sum(e.em for e in self.per_instance) / max(self.n, 1)

    def recall_at(self, k: int) -> float:
        return sum(e.recall[k] for e in self.per_instance) / max(self.n, 1)

    def recall_all(self) -> float:
        return sum(e.recall_all for e in self.per_instance) / max(self.n, 1)

    def _pseudo(self, attr: str) -> float | None:
        vals = [getattr(e, attr) for e in self.per_instance
                if getattr(e, attr) is not None]
        if not vals:
            return None
        return sum(vals) / len(vals)

    def type_accuracy(self):
        return self._pseudo("type_match")

    def op_accuracy(self):
        return self._pseudo("op_match")

    def arg_accuracy(self):
        return self._pseudo("arg_match")

    def buckets(self) -> dict[str, tuple[int, float]]:
        """EM by entity-count bucket of width 5: label -> (n, em)."""
        groups: dict[int, list[InstanceEval]] = {}
        for e in self.per_instance:
            groups.setdefault(e.n_entities // BUCKET_WIDTH, []).append(e)
        out = {}
        for b in sorted(groups):
            rows = groups[b]
            label = f"{b * BUCKET_WIDTH}-{(b + 1) * BUCKET_WIDTH - 1}"
            out[label] = (len(rows), sum(r.em for r in rows) / len(rows))
        return out

    def action_space_stats(self) -> tuple[float, int]:
        sizes = [e.n_actions for e in self.per_instance]
        if not sizes:
            return 0.0, 0
        return sum(sizes) / len(sizes), max(sizes)

    def text(self) -> str:
        lines = [f"instances            {self.n}",
                 f"exact_match          {self.em():.4f}"]
        for k in RECALL_KS:
            lines.append(f"recall@{k:<13}{self.recall_at(k):.4f}")
        lines.append(f"recall@all           {self.recall_all():.4f}")
        for name, fn in (("type_accuracy", self.type_accuracy),
                         ("op_accuracy", self.op_accuracy),
                         ("arg_accuracy", self.arg_accuracy)):
            v = fn()
            lines.append(f"{name:<21}{'n/a' if v is None else f'{v:.4f}'}")
        mean_sz, max_sz = self.action_space_stats()
        lines.append(f"actions_mean         {mean_sz:.1f}")
        lines.append(f"actions_max          {max_sz}")
        for label, (n, em) in self.buckets().items():
            lines.append(f"em[entities {label:<7}] {em:.4f}  (n={n})")
        return "\n".join(lines) + "\n"

    def csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["id", "em", "recall_all", "n_entities", "n_actions",
                         "type_match", "op_match", "arg_match"]
                        + [f"recall@{k}" for k in RECALL_KS])
        for e in self.per_instance:
            writer.writerow(
                [e.id, int(e.em), int(e.recall_all), e.n_entities, e.n_actions,
                 "" if e.type_match is None else int(e.type_match),
                 "" if e.op_match is None else int(e.op_match),
                 "" if e.arg_match is None else int(e.arg_match)]
                + [int(e.recall[k]) for k in RECALL_KS])
        return buf.getvalue()


def _module_matches(out, gold) -> tuple[bool, bool, bool]:
    """Per-module pseudo-accuracy: each head's argmax against the gold trace,
    judged independently so one module's error cannot mask another's."""
    type_idx = int(np.argmax(out.space.type_dist.data))
    op_idx = int(np.argmax(out.space.op_dist.data))
    type_ok = executor.ENTITY_TYPES[type_idx] == gold.etype
    op_ok = GOLD_OPS[op_idx] == gold.op
    arg_ok = False
    for b in out.space.branches:
        if b.etype == gold.etype and b.op == gold.op:
            top = b.payloads[int(np.argmax(b.arg_logp.data))]
            arg_ok = top == gold.payload
            break
    return type_ok, op_ok, arg_ok


def evaluate(model: PolicyModel, instances: list[Instance]) -> EvalReport:
    report = EvalReport()
    for inst in instances:
        out = model.forward(inst)
        ranked = dedup_ranked(out.space.actions)
        rewards = [executor.reward(a.answer, inst.gold_answer) == 1
                   for a in ranked]
        row = InstanceEval(
            id=inst.id,
            em=bool(rewards and rewards[0]),
            recall={k: any(rewards[:k]) for k in RECALL_KS},
            recall_all=any(rewards),
            n_entities=len(out.table.numbers) + len(out.table.dates),
            n_actions=len(ranked),
        )
        if ranked:
            row.top = ranked[0].key()
            if inst.gold_trace is not None:
                row.type_match, row.op_match, row.arg_match = \
                    _module_matches(out, inst.gold_trace)
        report.per_instance.append(row)
    return report
