"""Entity extraction, dependency-tree validation, and dataset IO."""

from fractions import Fraction

import pytest

from numreason.corpus import (
    DatasetError, DateValue, DepTree, GoldTrace, Instance, build_entity_table,
    extract_dates, extract_numbers, instance_from_record, instance_to_record,
    load_dataset, parse_number_token, save_dataset,
)


@pytest.mark.parametrize("tok,expected", [
    ("42", Fraction(42)),
    ("50.2", Fraction("50.2")),
    ("3,000", Fraction(3000)),
    ("seven", Fraction(7)),
    ("Twenty", Fraction(20)),
    ("ninety", Fraction(90)),
    ("yards", None),
    ("", None),
    ("1.2.3", None),
    ("-", None),
])
def test_parse_number_token(tok, expected):
    assert parse_number_token(tok) == expected


def test_extract_numbers_dedup_and_mentions():
    ents = extract_numbers("he ran 7 yards then 7 more then 12".split())
    assert [e.value for e in ents] == [Fraction(7), Fraction(12)]
    assert ents[0].mentions == [2, 5]
    assert ents[1].mentions == [8]


def test_extract_dates_patterns():
    toks = "born March 4 , 1986 he died in March 1990 before 1994 .".split()
    ents = extract_dates(toks)
    values = [e.value for e in ents]
    assert DateValue(1986, 3, 4) in values
    assert DateValue(1990, 3) in values
    assert DateValue(1994) in values
    by_val = {e.value: e for e in ents}
    assert by_val[DateValue(1986, 3, 4)].mentions == [1]


def test_year_tokens_live_in_both_tables():
    table = build_entity_table("the war began in 1943 and ended in 1951".split())
    assert {e.value for e in table.numbers} == {Fraction(1943), Fraction(1951)}
    assert {e.value.year for e in table.dates} == {1943, 1951}


def test_date_missing_fields_stay_absent():
    (ent,) = extract_dates("in 1875 .".split())
    assert ent.value.month is None and ent.value.day is None


def test_deptree_validation_errors():
    with pytest.raises(DatasetError):
        DepTree([], [])
    with pytest.raises(DatasetError):
        DepTree([0, 0], ["root", "root"])          # two roots
    with pytest.raises(DatasetError):
        DepTree([2, 1], ["a", "b"])                # no root
    with pytest.raises(DatasetError):
        DepTree([0, 5], ["root", "dep"])           # head out of range
    tree = DepTree([2, 0, 2], ["dep", "root", "dep"])
    assert tree.root == 1
    assert tree.children(1) == [0, 2]


def _instance():
    return Instance(
        id="t1",
        passage_tokens="Smith ran 7 yards .".split(),
        query_tokens="how many yards did Smith run".split(),
        dep_parse=DepTree([4, 1, 1, 0, 6, 4], ["dep"] * 6),
        gold_answer=Fraction(7),
        gold_trace=GoldTrace("number", "sum", ("set", (0,)), Fraction(7)),
    )


def test_dataset_round_trip(tmp_path):
    path = tmp_path / "data.jsonl"
    save_dataset([_instance()], path, with_gold=True)
    (back,) = load_dataset(path, with_gold=True)
    assert back.id == "t1"
    assert back.gold_answer == Fraction(7)
    assert back.gold_trace.payload == ("set", (0,))
    assert back.dep_parse.heads == [4, 1, 1, 0, 6, 4]


def test_gold_stripped_by_default(tmp_path):
    path = tmp_path / "data.jsonl"
    save_dataset([_instance()], path, with_gold=True)
    (back,) = load_dataset(path)
    assert back.gold_trace is None


def test_gold_never_written_when_disabled(tmp_path):
    path = tmp_path / "data.jsonl"
    save_dataset([_instance()], path, with_gold=False)
    assert "gold" not in path.read_text()


def test_malformed_json_reports_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id": "a"}\nnot json\n')
    with pytest.raises(DatasetError, match="line 1"):
        load_dataset(path)


def test_missing_field_reports_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id": "a", "passage_tokens": []}\n')
    with pytest.raises(DatasetError, match="line 1.*query_tokens"):
        load_dataset(path)


def test_fraction_json_exactness(tmp_path):
    inst = _instance()
    inst.gold_answer = Fraction(1, 3)
    path = tmp_path / "data.jsonl"
    save_dataset([inst], path)
    (back,) = load_dataset(path)
    assert back.gold_answer == Fraction(1, 3)
    inst.gold_answer = Fraction("0.4")
    save_dataset([inst], path)
    (back,) = load_dataset(path)
    assert back.gold_answer == Fraction(2, 5)
