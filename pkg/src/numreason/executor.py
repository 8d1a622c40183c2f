"""Deterministic discrete-operation semantics, rewards, and the brute-force
good-action oracle.

Payloads are canonical tuples:
  ("count", c)       count value c in [1, 10]
  ("pair", (i, j))   two distinct entity indices, sorted
  ("set", (i, ...))  entity index subset, sorted ascending

Execution is exact over Fractions; dates execute through their year (or
month difference when the years agree and both months are present).
"""

from __future__ import annotations

import itertools
from fractions import Fraction

from .corpus import DateEntity, EntityTable

OPS = ("count", "max", "min", "sum", "diff", "negate")
ENTITY_TYPES = ("number", "date")

# (etype, op) validity: sum and negate act on numbers only
_VALID = {
    ("number", op): True for op in OPS
} | {
    ("date", "count"): True,
    ("date", "max"): True,
    ("date", "min"): True,
    ("date", "diff"): True,
    ("date", "sum"): False,
    ("date", "negate"): False,
}

MAX_COUNT = 10
REWARD_TOL = 1e-4


class InvalidAction(ValueError):
    pass


def valid(etype: str, op: str, n_args: int) -> bool:
    if not _VALID.get((etype, op), False):
        return False
    if op == "negate" and n_args != 1:
        return False
    if op == "diff" and n_args != 2:
        return False
    return True


def _date_scalar(ent: DateEntity) -> Fraction:
    return Fraction(ent.value.year)


def _values(etype: str, indices, table: EntityTable):
    ents = table.numbers if etype == "number" else table.dates
    try:
        return [ents[i] for i in indices]
    except IndexError as exc:
        raise InvalidAction(f"entity index out of range for {etype} table") from exc


def execute(etype: str, op: str, payload: tuple, table: EntityTable) -> Fraction:
    """Execute one discrete operation; pure and exact.

    Single-argument sum/max/min is a NO-OP returning the argument's value.
    """
    if not _VALID.get((etype, op), False):
        raise InvalidAction(f"({etype}, {op}) is not a valid combination")
    kind, arg = payload

    if op == "count":
        if kind != "count" or not 1 <= arg <= MAX_COUNT:
            raise InvalidAction(f"count needs a count payload in [1, {MAX_COUNT}]")
        return Fraction(arg)

    if op == "diff":
        if kind != "pair" or len(arg) != 2:
            raise InvalidAction("diff needs a pair payload")
        a, b = _values(etype, arg, table)
        if etype == "number":
            return abs(a.value - b.value)
        ya, yb = a.value.year, b.value.year
        if ya != yb:
            return Fraction(abs(ya - yb))
        if a.value.month is not None and b.value.month is not None:
            return Fraction(abs(a.value.month - b.value.month))
        return Fraction(0)

    if kind != "set" or not arg:
        raise InvalidAction(f"{op} needs a nonempty set payload")
    if op == "negate":
        if len(arg) != 1:
            raise InvalidAction("negate takes exactly one argument")
        (ent,) = _values(etype, arg, table)
        return Fraction(100) - ent.value

    ents = _values(etype, arg, table)
    if etype == "number":
        vals = [e.value for e in ents]
    else:
        vals = [_date_scalar(e) for e in ents]
    if len(vals) == 1:          # NO-OP rule
        return vals[0]
    if op == "sum":
        return sum(vals, Fraction(0))
    if op == "max":
        if etype == "date":
            return Fraction(max(ents, key=lambda e: e.value.sort_key()).value.year)
        return max(vals)
    if op == "min":
        if etype == "date":
            return Fraction(min(ents, key=lambda e: e.value.sort_key()).value.year)
        return min(vals)
    raise InvalidAction(f"unknown operator {op!r}")


def reward(pred: Fraction, gold: Fraction) -> int:
    """+1 iff the prediction matches the gold answer within a small absolute
    tolerance that absorbs float formatting, else -1."""
    return 1 if abs(float(pred) - float(gold)) <= REWARD_TOL else -1


def enumerate_payloads(etype: str, op: str, n_entities: int, n_refs: int = 1,
                       max_set: int = MAX_COUNT):
    """All legal payloads for one (etype, op) branch.

    `n_refs` mirrors the final program step: diff over 2 references samples
    one entity per reference (self-pairs allowed); over 1 reference it
    samples a distinct unordered pair.
    """
    if op == "count":
        for c in range(1, MAX_COUNT + 1):
            yield ("count", c)
        return
    if n_entities == 0:
        return
    if op == "diff":
        if n_entities >= 2:
            for i, j in itertools.combinations(range(n_entities), 2):
                yield ("pair", (i, j))
        if n_refs == 2:
            for i in range(n_entities):
                yield ("pair", (i, i))
        return
    if op == "negate":
        for i in range(n_entities):
            yield ("set", (i,))
        return
    for size in range(1, min(max_set, n_entities) + 1):
        for subset in itertools.combinations(range(n_entities), size):
            yield ("set", subset)


def action_universe(table: EntityTable, n_refs: int = 1) -> set[tuple]:
    """Every valid (etype, op, payload) action for a passage."""
    out = set()
    for etype in ENTITY_TYPES:
        n = table.size(etype)
        if n == 0:
            continue
        for op in OPS:
            if not _VALID[(etype, op)]:
                continue
            for payload in enumerate_payloads(etype, op, n, n_refs):
                out.add((etype, op, payload))
    return out


def oracle_good_actions(table: EntityTable, gold: Fraction, n_refs: int = 1,
                        cap: int = 8) -> set[tuple]:
    """Exhaustively execute every valid action and keep the reward +1 ones.

    Policy-independent; refuses above the desk-scale entity caps because the
    subset enumeration grows exponentially.
    """
    if len(table.numbers) > cap or len(table.dates) > cap:
        raise ValueError(
            f"oracle refuses: entity counts ({len(table.numbers)} numbers, "
            f"{len(table.dates)} dates) exceed cap {cap}")
    good = set()
    for action in action_universe(table, n_refs):
        etype, op, payload = action
        if reward(execute(etype, op, payload, table), gold) == 1:
            good.add(action)
    return good
