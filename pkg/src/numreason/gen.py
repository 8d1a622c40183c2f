"""Synthetic passage/query generator with verifiable gold traces.

Seven templates, one per discrete operation family. Queries carry a
distinctive surface cue per operation (total / longest / shortest / more
... than / not / years ... last) and route through the built-in
mini-parser, so every instance has a 2-node program with a single
terminal reference. Gold traces live in a strippable sidecar.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .corpus import GoldTrace, Instance, build_entity_table
from .executor import execute
from .parsing import mini_parse

NAMES = ["Smith", "Jones", "Carpenter", "Walker", "Turner",
         "Brady", "Rivers", "Allen"]

TEMPLATES = ("count", "sum", "max", "min", "diff_num", "diff_date", "negate")


def _distinct(rng: np.random.Generator, n: int, lo: int, hi: int) -> list[int]:
    return [int(v) for v in rng.choice(np.arange(lo, hi), size=n, replace=False)]


def _pick_names(rng: np.random.Generator, n: int) -> list[str]:
    return [NAMES[i] for i in rng.choice(len(NAMES), size=n, replace=False)]


def _scoring_passage(rng, values, names):
    toks = []
    for name, v in zip(names, values):
        toks += [name, "kicked", "a", str(v), "yard", "field", "goal", "."]
    return toks


def _count(rng, distractor_rate):
    n = int(rng.integers(2, 5))
    values = _distinct(rng, n, 2, 60)
    passage = _scoring_passage(rng, values, _pick_names(rng, n))
    query = "how many field goals were kicked in the game".split()
    return passage, query, "number", "count", ("count", n)


def _run_passage(rng, values, name, distractor_rate):
    """Run sentences plus an optional distractor number (the attendance)."""
    toks = []
    for v in values[:-1]:
        toks += [name, "ran", "for", str(v), "yards", "in", "the", "quarter", "."]
    if rng.random() < distractor_rate:
        toks += ["the", "attendance", "was", str(values[-1]), "strong", "."]
    return toks


def _sum(rng, distractor_rate):
    n = int(rng.integers(2, 4))
    values = _distinct(rng, n + 1, 2, 60)
    name = _pick_names(rng, 1)[0]
    passage = _run_passage(rng, values, name, distractor_rate)
    query = f"how many total yards did {name} have".split()
    return passage, query, "number", "sum", ("set", tuple(range(n)))


def _max(rng, distractor_rate):
    n = int(rng.integers(2, 4))
    values = _distinct(rng, n + 1, 2, 60)
    passage = _run_passage(rng, values, _pick_names(rng, 1)[0], distractor_rate)
    query = "how many yards was the longest run".split()
    return passage, query, "number", "max", ("set", tuple(range(n)))


def _min(rng, distractor_rate):
    n = int(rng.integers(2, 4))
    values = _distinct(rng, n + 1, 2, 60)
    passage = _run_passage(rng, values, _pick_names(rng, 1)[0], distractor_rate)
    query = "how many yards was the shortest run".split()
    return passage, query, "number", "min", ("set", tuple(range(n)))


def _diff_num(rng, distractor_rate):
    a, b, crowd = _distinct(rng, 3, 2, 60)
    n1, n2 = _pick_names(rng, 2)
    passage = ([n1, "scored", str(a), "points", "."]
               + [n2, "scored", str(b), "points", "."])
    if rng.random() < distractor_rate:
        passage += ["the", "crowd", "was", str(crowd), "strong", "."]
    query = f"how many more points did {n1} score than {n2}".split()
    return passage, query, "number", "diff", ("pair", (0, 1))


def _diff_date(rng, distractor_rate):
    if rng.random() < 0.5:
        # same-year month span: the year appears once in the number table,
        # so only the date reading can reach the answer
        year = int(rng.integers(1900, 1995))
        m1, m2 = sorted(rng.choice(12, size=2, replace=False) + 1)
        months = [m.capitalize() for m in
                  ["january", "february", "march", "april", "may", "june",
                   "july", "august", "september", "october", "november",
                   "december"]]
        passage = ["the", "war", "began", "in", months[m1 - 1], str(year),
                   "and", "ended", "in", months[m2 - 1], str(year), "."]
        query = "how many months did the war last".split()
    else:
        y1 = int(rng.integers(1900, 1995))
        y2 = y1 + int(rng.integers(1, 9))
        passage = ["the", "war", "began", "in", str(y1), "and",
                   "ended", "in", str(y2), "."]
        query = "how many years did the war last".split()
    if rng.random() < distractor_rate:
        passage += ["it", "cost", str(int(rng.integers(2, 60))),
                    "million", "dollars", "."]
    return passage, query, "date", "diff", ("pair", (0, 1))


def _negate(rng, distractor_rate):
    p = int(rng.integers(5, 96))
    shops = int(rng.integers(2, 60))
    while shops == p or shops == 100 - p:
        shops = int(rng.integers(2, 60))
    passage = ["in", "the", "city", ",", str(p), "percent", "of",
               "people", "were", "urban", "."]
    if rng.random() < distractor_rate:
        passage += ["the", "town", "had", str(shops), "shops", "."]
    query = "how many percent of people were not urban".split()
    return passage, query, "number", "negate", ("set", (0,))


_BUILDERS = {
    "count": _count, "sum": _sum, "max": _max, "min": _min,
    "diff_num": _diff_num, "diff_date": _diff_date, "negate": _negate,
}


def make_instance(template: str, rng: np.random.Generator, idx: int,
                  distractor_rate: float = 0.5) -> Instance:
    passage, query, etype, op, payload = _BUILDERS[template](rng, distractor_rate)
    table = build_entity_table(passage)
    answer = execute(etype, op, payload, table)
    trace = GoldTrace(etype, op, payload, answer)
    return Instance(
        id=f"syn-{template}-{idx:05d}",
        passage_tokens=passage,
        query_tokens=query,
        dep_parse=mini_parse(query),
        gold_answer=answer,
        gold_trace=trace,
    )


def generate(n: int, seed: int, distractor_rate: float = 0.5,
             templates: tuple[str, ...] = TEMPLATES) -> list[Instance]:
    """Deterministic synthetic corpus: templates cycle round-robin."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        template = templates[i % len(templates)]
        out.append(make_instance(template, rng, i, distractor_rate))
    return out
