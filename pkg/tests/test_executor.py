"""Golden suite and properties for the symbolic executor and oracle."""

from fractions import Fraction

import pytest

from numreason import executor
from numreason.corpus import (
    DateEntity, DateValue, EntityTable, NumberEntity, build_entity_table,
)


def num_table(*values) -> EntityTable:
    return EntityTable(numbers=[NumberEntity(Fraction(str(v))) for v in values])


def date_table(*dates) -> EntityTable:
    return EntityTable(dates=[DateEntity(DateValue(*d)) for d in dates])


# -- golden execution examples ----------------------------------------------

def test_negate_golden():
    assert executor.execute("number", "negate", ("set", (0,)),
                            num_table("80.7")) == Fraction("19.3")


def test_date_diff_golden():
    table = date_table((1991,), (1994,))
    assert executor.execute("date", "diff", ("pair", (0, 1)), table) == 3


def test_sum_golden():
    assert executor.execute("number", "sum", ("set", (0, 1)),
                            num_table(10000, 30000)) == 40000


def test_float_diff_exact_golden():
    result = executor.execute("number", "diff", ("pair", (0, 1)),
                              num_table("50.2", "49.8"))
    assert result == Fraction(2, 5)          # exactly 0.4, no float drift


def test_noop_single_arg_golden():
    table = num_table(40)
    for op in ("sum", "max", "min"):
        assert executor.execute("number", op, ("set", (0,)), table) == 40


# -- remaining semantics -----------------------------------------------------

def test_count_returns_payload_value():
    assert executor.execute("number", "count", ("count", 7), num_table(1)) == 7
    with pytest.raises(executor.InvalidAction):
        executor.execute("number", "count", ("count", 11), num_table(1))


def test_number_max_min():
    table = num_table(3, 9, 5)
    assert executor.execute("number", "max", ("set", (0, 1, 2)), table) == 9
    assert executor.execute("number", "min", ("set", (0, 2)), table) == 3


def test_date_max_min_return_year():
    table = date_table((1990, 7), (1990, 2), (1971,))
    assert executor.execute("date", "max", ("set", (0, 1, 2)), table) == 1990
    assert executor.execute("date", "min", ("set", (0, 1, 2)), table) == 1971


def test_date_diff_same_year_uses_months():
    table = date_table((1990, 7), (1990, 2))
    assert executor.execute("date", "diff", ("pair", (0, 1)), table) == 5
    table = date_table((1990, 7), (1990,))
    assert executor.execute("date", "diff", ("pair", (0, 1)), table) == 0


def test_validity_matrix():
    assert not executor.valid("date", "sum", 2)
    assert not executor.valid("date", "negate", 1)
    assert not executor.valid("number", "negate", 2)
    assert not executor.valid("number", "diff", 1)
    assert executor.valid("date", "diff", 2)
    with pytest.raises(executor.InvalidAction):
        executor.execute("date", "sum", ("set", (0,)), date_table((1990,)))


def test_invalid_payloads():
    with pytest.raises(executor.InvalidAction):
        executor.execute("number", "negate", ("set", (0, 1)), num_table(1, 2))
    with pytest.raises(executor.InvalidAction):
        executor.execute("number", "sum", ("set", ()), num_table(1))
    with pytest.raises(executor.InvalidAction):
        executor.execute("number", "sum", ("set", (5,)), num_table(1))


def test_reward_tolerance():
    assert executor.reward(Fraction("0.4"), Fraction(2, 5)) == 1
    assert executor.reward(Fraction(40001, 100000), Fraction(2, 5)) == 1
    assert executor.reward(Fraction("0.5"), Fraction(2, 5)) == -1


def test_enumerate_payloads_diff_refs():
    one_ref = set(executor.enumerate_payloads("number", "diff", 3, n_refs=1))
    assert one_ref == {("pair", (0, 1)), ("pair", (0, 2)), ("pair", (1, 2))}
    two_ref = set(executor.enumerate_payloads("number", "diff", 3, n_refs=2))
    assert two_ref == one_ref | {("pair", (0, 0)), ("pair", (1, 1)),
                                 ("pair", (2, 2))}


def test_action_universe_counts():
    table = num_table(1, 2)
    universe = executor.action_universe(table)
    # count: 10, diff: 1, negate: 2, sum/max/min: 3 subsets each
    assert len(universe) == 10 + 1 + 2 + 3 * 3


def test_oracle_finds_expected_good_set():
    table = num_table(3, 9)
    good = executor.oracle_good_actions(table, Fraction(12))
    assert ("number", "sum", ("set", (0, 1))) in good
    assert all(executor.reward(
        executor.execute(*a[:2], a[2], table), Fraction(12)) == 1 for a in good)
    assert executor.oracle_good_actions(table, Fraction(1000)) == set()


def test_oracle_refuses_above_cap():
    table = num_table(*range(1, 10))
    with pytest.raises(ValueError, match="refuses"):
        executor.oracle_good_actions(table, Fraction(1))


def test_oracle_on_extracted_passage():
    table = build_entity_table("Smith ran 7 then 12 yards".split())
    good = executor.oracle_good_actions(table, Fraction(5))
    assert ("number", "diff", ("pair", (0, 1))) in good
