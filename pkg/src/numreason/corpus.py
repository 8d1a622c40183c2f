"""Data model, number/date extraction, and line-delimited dataset IO.

Numbers are kept as exact ``Fraction`` values so discrete execution and
answer matching never suffer float formatting drift.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

WORD_NUMBERS = {
    "one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
    "six": 6, "seven": 7, "eight": 8, "nine": 9, "ten": 10,
    "eleven": 11, "twelve": 12, "thirteen": 13, "fourteen": 14,
    "fifteen": 15, "sixteen": 16, "seventeen": 17, "eighteen": 18,
    "nineteen": 19, "twenty": 20,
    "thirty": 30, "forty": 40, "fifty": 50, "sixty": 60,
    "seventy": 70, "eighty": 80, "ninety": 90,
}

MONTHS = {
    "january": 1, "february": 2, "march": 3, "april": 4, "may": 5,
    "june": 6, "july": 7, "august": 8, "september": 9, "october": 10,
    "november": 11, "december": 12,
}

YEAR_MIN, YEAR_MAX = 1000, 2100


class DatasetError(ValueError):
    """Raised for malformed dataset records or invalid dependency trees."""


def parse_number_token(tok: str) -> Optional[Fraction]:
    """Parse one surface token into an exact rational, or None."""
    low = tok.lower()
    if low in WORD_NUMBERS:
        return Fraction(WORD_NUMBERS[low])
    cleaned = tok.replace(",", "")
    if not cleaned or cleaned.count(".") > 1:
        return None
    if cleaned.replace(".", "").isdigit():
        try:
            return Fraction(cleaned)
        except (ValueError, ZeroDivisionError):
            return None
    return None


@dataclass(frozen=True, order=True)
class DateValue:
    """Canonical date; missing day/month stay absent, never default to 1."""
    year: int
    month: Optional[int] = None
    day: Optional[int] = None

    def sort_key(self):
        return (self.year, self.month or 0, self.day or 0)


@dataclass
class NumberEntity:
    value: Fraction
    mentions: list[int] = field(default_factory=list)


@dataclass
class DateEntity:
    value: DateValue
    mentions: list[int] = field(default_factory=list)


@dataclass
class EntityTable:
    numbers: list[NumberEntity] = field(default_factory=list)
    dates: list[DateEntity] = field(default_factory=list)

    def size(self, etype: str) -> int:
        return len(self.numbers) if etype == "number" else len(self.dates)


def extract_numbers(tokens: list[str]) -> list[NumberEntity]:
    """Unique number entities with all mention locations, first-seen order."""
    by_value: dict[Fraction, NumberEntity] = {}
    for i, tok in enumerate(tokens):
        value = parse_number_token(tok)
        if value is None:
            continue
        ent = by_value.get(value)
        if ent is None:
            ent = NumberEntity(value)
            by_value[value] = ent
        ent.mentions.append(i)
    return list(by_value.values())


def _is_year_token(tok: str) -> bool:
    return tok.isdigit() and len(tok) == 4 and YEAR_MIN <= int(tok) <= YEAR_MAX


def extract_dates(tokens: list[str]) -> list[DateEntity]:
    """Date entities from '<Month> <day> , <year>', '<Month> <year>' and bare years.

    The mention index is the first token of the matched pattern. 4-digit
    year tokens also appear in the number table; the entity-type predictor
    decides which table an action reads.
    """
    by_value: dict[DateValue, DateEntity] = {}
    i, n = 0, len(tokens)
    while i < n:
        tok = tokens[i]
        month = MONTHS.get(tok.lower())
        value = None
        width = 1
        if month is not None:
            # Month day , year
            if (i + 3 < n and tokens[i + 1].isdigit() and 1 <= int(tokens[i + 1]) <= 31
                    and tokens[i + 2] == "," and _is_year_token(tokens[i + 3])):
                value = DateValue(int(tokens[i + 3]), month, int(tokens[i + 1]))
                width = 4
            elif i + 1 < n and _is_year_token(tokens[i + 1]):
                value = DateValue(int(tokens[i + 1]), month)
                width = 2
        elif _is_year_token(tok):
            value = DateValue(int(tok))
        if value is not None:
            ent = by_value.get(value)
            if ent is None:
                ent = DateEntity(value)
                by_value[value] = ent
            ent.mentions.append(i)
            i += width
        else:
            i += 1
    return list(by_value.values())


def build_entity_table(tokens: list[str]) -> EntityTable:
    return EntityTable(extract_numbers(tokens), extract_dates(tokens))


@dataclass
class DepTree:
    """Dependency tree as 1-based head indices; head 0 marks the root."""
    heads: list[int]
    labels: list[str]

    def __post_init__(self):
        self.validate()

    def validate(self):
        n = len(self.heads)
        if n == 0:
            raise DatasetError("dep tree must be nonempty")
        if len(self.labels) != n:
            raise DatasetError("dep labels length must match heads")
        roots = [i for i, h in enumerate(self.heads) if h == 0]
        if len(roots) != 1:
            raise DatasetError(f"dep tree must have exactly one root, got {len(roots)}")
        for h in self.heads:
            if not 0 <= h <= n:
                raise DatasetError(f"head index {h} out of range for {n} tokens")
        # walking to the root must terminate: otherwise the tree is not acyclic
        for start in range(n):
            seen = set()
            node = start
            while self.heads[node] != 0:
                if node in seen:
                    raise DatasetError("dep tree violates acyclic invariant")
                seen.add(node)
                node = self.heads[node] - 1

    @property
    def root(self) -> int:
        return self.heads.index(0)

    def children(self, idx: int) -> list[int]:
        return [i for i, h in enumerate(self.heads) if h == idx + 1]


GOLD_OPS = ("count", "max", "min", "sum", "diff", "negate")


@dataclass
class GoldTrace:
    """Oracle action for evaluation only; never visible to training."""
    etype: str
    op: str
    payload: tuple
    answer: Fraction


@dataclass
class Instance:
    id: str
    passage_tokens: list[str]
    query_tokens: list[str]
    dep_parse: DepTree
    gold_answer: Fraction
    gold_trace: Optional[GoldTrace] = None

    def entity_table(self) -> EntityTable:
        return build_entity_table(self.passage_tokens)


def _fraction_to_json(x: Fraction):
    f = float(x)
    if Fraction(str(f)) == x:
        return f
    return {"num": x.numerator, "den": x.denominator}


def _fraction_from_json(x) -> Fraction:
    if isinstance(x, dict):
        return Fraction(x["num"], x["den"])
    return Fraction(str(x))


def _payload_to_json(payload: tuple):
    kind, value = payload
    if kind == "count":
        return [kind, value]
    return [kind, list(value)]


def _payload_from_json(raw) -> tuple:
    kind, value = raw
    if kind == "count":
        return (kind, int(value))
    return (kind, tuple(int(v) for v in value))


def instance_to_record(inst: Instance, with_gold: bool = True) -> dict:
    rec = {
        "id": inst.id,
        "passage_tokens": inst.passage_tokens,
        "query_tokens": inst.query_tokens,
        "dep_heads": inst.dep_parse.heads,
        "dep_labels": inst.dep_parse.labels,
        "answer": _fraction_to_json(inst.gold_answer),
    }
    if with_gold and inst.gold_trace is not None:
        rec["gold"] = {
            "etype": inst.gold_trace.etype,
            "op": inst.gold_trace.op,
            "payload": _payload_to_json(inst.gold_trace.payload),
            "answer": _fraction_to_json(inst.gold_trace.answer),
        }
    return rec


def instance_from_record(rec: dict, with_gold: bool = False) -> Instance:
    for key in ("id", "passage_tokens", "query_tokens", "dep_heads", "dep_labels", "answer"):
        if key not in rec:
            raise DatasetError(f"record missing field {key!r}")
    tree = DepTree([int(h) for h in rec["dep_heads"]], list(rec["dep_labels"]))
    gold = None
    if with_gold and "gold" in rec:
        raw = rec["gold"]
        gold = GoldTrace(raw["etype"], raw["op"], _payload_from_json(raw["payload"]),
                         _fraction_from_json(raw["answer"]))
    return Instance(
        id=str(rec["id"]),
        passage_tokens=list(rec["passage_tokens"]),
        query_tokens=list(rec["query_tokens"]),
        dep_parse=tree,
        gold_answer=_fraction_from_json(rec["answer"]),
        gold_trace=gold,
    )


def save_dataset(instances: list[Instance], path, with_gold: bool = True):
    with open(path, "w") as fh:
        for inst in instances:
            fh.write(json.dumps(instance_to_record(inst, with_gold=with_gold)) + "\n")


def load_dataset(path, with_gold: bool = False) -> list[Instance]:
    """Parse a line-delimited dataset. Gold sidecars are stripped unless
    `with_gold` is set, so a training run can provably never read them."""
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {lineno}: malformed JSON record: {exc}") from exc
            try:
                out.append(instance_from_record(rec, with_gold=with_gold))
            except DatasetError as exc:
                raise DatasetError(f"line {lineno}: {exc}") from exc
    return out
