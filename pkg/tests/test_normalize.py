import pytest

from dualcbf.stl import NonCompactError, parse_inner


def clauses(f):
    return {frozenset(str(p) for p in c) for c in f.clauses}


def test_negation_of_mixed_formula():
    f = parse_inner("!(x<=0 | (y<=0 & z<=0))")
    assert clauses(f) == {frozenset({"x >= 0", "y >= 0"}), frozenset({"x >= 0", "z >= 0"})}


def test_dnf_input_is_unchanged():
    text = "x >= 1 & y <= 2 | x <= 0"
    assert str(parse_inner(text)) == text


def test_distributivity():
    f = parse_inner("(x >= 1 | x <= 0) & y >= 2")
    assert clauses(f) == {frozenset({"x >= 1", "y >= 2"}), frozenset({"x <= 0", "y >= 2"})}


def test_double_negation():
    assert str(parse_inner("!!(x >= 1)")) == "x >= 1"


def test_negated_box_needs_bounds():
    with pytest.raises(NonCompactError):
        parse_inner("!box(x,1,2)")


def test_negated_box_within_bounds():
    f = parse_inner("!box(x,1,2)", bounds={"x": (0, 5)})
    assert str(f) == "box(x,0,1) | box(x,2,5)"
