import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ingtag.corpus import Label, phrase_from_tokens
from ingtag.metrics import (
    GRID_NAMES,
    confusion_matrix,
    evaluate,
    evaluate_predictor,
    f1_score,
    format_grid,
    grid_evaluate,
)

from conftest import tiny_set

L = Label


def all_labels_fixture():
    return [
        phrase_from_tokens(["1", "cup", "warm", "milk"], gold=[L.QUANTITY, L.UNIT, L.TEMPERATURE, L.NAME]),
        phrase_from_tokens(["2", "large", "dried", "figs", ",", "chopped"],
                           gold=[L.QUANTITY, L.SIZE, L.DRY_FRESH, L.NAME, L.OTHERS, L.STATE]),
    ]


def test_perfect_prediction():
    data = all_labels_fixture()
    rep = evaluate(data, [ph.gold for ph in data])
    for lab in Label:
        assert rep.per_label[lab] == (100.0, 100.0, 100.0)
    assert rep.micro == (100.0, 100.0, 100.0)
    assert rep.macro == (100.0, 100.0, 100.0)


def test_disjoint_prediction():
    data = all_labels_fixture()
    pred = [[Label((int(g) + 1) % 8) for g in ph.gold] for ph in data]
    rep = evaluate(data, pred)
    assert all(f == 0.0 for _, _, f in rep.per_label.values())
    assert rep.micro_f1 == 0.0


def test_four_token_fixture():
    ph = phrase_from_tokens(["a", "b", "c", "d"], gold=[L.NAME, L.NAME, L.UNIT, L.OTHERS])
    rep = evaluate([ph], [[L.NAME, L.UNIT, L.UNIT, L.OTHERS]])
    r, p, f = rep.per_label[L.NAME]
    assert (p, r) == (100.0, 50.0) and round(f, 2) == 66.67
    r, p, f = rep.per_label[L.UNIT]
    assert (p, r) == (50.0, 100.0) and round(f, 2) == 66.67
    assert rep.micro_f1 == 75.0
    # absent labels score zero rather than dividing by zero
    assert rep.per_label[L.SIZE] == (0.0, 0.0, 0.0)
    assert rep.support[L.NAME] == 2 and rep.support[L.SIZE] == 0


def test_f1_zero_denominator():
    assert f1_score(0.0, 0.0) == 0.0


label_lists = st.lists(st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7)), min_size=1, max_size=6),
                       min_size=1, max_size=8)


@given(label_lists)
@settings(max_examples=100)
def test_report_invariants(pairs):
    gold = [phrase_from_tokens([f"t{i}" for i in range(len(p))], gold=[Label(g) for g, _ in p]) for p in pairs]
    pred = [[Label(q) for _, q in p] for p in pairs]
    rep = evaluate(gold, pred)
    r, p, f = rep.micro
    assert r == p == pytest.approx(f, abs=1e-12)
    assert rep.n_tokens == sum(len(x) for x in pairs)
    assert [rep.support[lab] for lab in Label] == rep.confusion.sum(axis=1).tolist()
    for lab, (r, p, f) in rep.per_label.items():
        assert 0 <= r <= 100 and 0 <= p <= 100
        assert f == pytest.approx(f1_score(p, r), abs=1e-12)
    # phrase order does not matter
    rev = evaluate(gold[::-1], pred[::-1])
    assert rev.to_dict() == rep.to_dict()


def test_alignment_error_names_phrase():
    data = tiny_set()
    pred = [ph.gold for ph in data]
    pred[3] = pred[3][:-1]
    with pytest.raises(ValueError, match="phrase 3"):
        confusion_matrix(data, pred)
    with pytest.raises(ValueError):
        confusion_matrix(data, pred[:2])


def test_table_rows_in_label_order():
    data = all_labels_fixture()
    lines = evaluate(data, [ph.gold for ph in data]).table().splitlines()
    titles = [ln.split()[0] for ln in lines[1:9]]
    assert titles == ["Name", "State", "Unit", "Quantity", "Size", "Temperature", "Dry/Fresh", "Others"]


class Memorizer:
    def __init__(self, phrases):
        self.table = {ph.raw: list(ph.gold) for ph in phrases}

    def __call__(self, ph):
        return self.table.get(ph.raw, [L.OTHERS] * len(ph))


def test_grid_memorizer_and_composition():
    data = tiny_set()
    parts = {"AllRecipes": data[:5], "FOOD.com": data[5:], "Both": data}
    preds = {k: Memorizer(v) for k, v in parts.items()}
    grid = grid_evaluate(preds, parts)
    for name in GRID_NAMES:
        assert grid[name][name] == 100.0
        for tr in GRID_NAMES:
            assert grid[name][tr] == evaluate_predictor(preds[tr], parts[name]).micro_f1
    assert grid["Both"]["Both"] == 100.0 and grid["FOOD.com"]["AllRecipes"] < 100.0
    text = format_grid(grid)
    assert "Testing" in text and text.count("100.00") >= 3


def test_grid_missing_dataset():
    data = tiny_set()
    with pytest.raises(ValueError, match="FOOD.com"):
        grid_evaluate({"AllRecipes": Memorizer(data), "Both": Memorizer(data)},
                      {n: data for n in GRID_NAMES})
