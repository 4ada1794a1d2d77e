import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given

from causal_icc import expr as E
from causal_icc.expr import (
    Binary,
    Call,
    DivisionByZero,
    ExprTypeError,
    Num,
    ParseError,
    Str,
    Sym,
    Unary,
    UnknownSymbol,
    eval_array,
    eval_expr,
    parse,
    referenced_parents,
    rename_parent,
    to_source,
)

PARENTS = ("A", "B", "C")

leaves = st.one_of(
    st.integers(0, 20).map(Num),
    st.sampled_from(["n"] + [f"pa.{p}" for p in PARENTS]).map(Sym),
)
arith_ops = st.sampled_from(["+", "-", "*", "mod", "==", "!=", "<", "<=", ">", ">=", "xor"])


def _trees(children):
    return st.one_of(
        st.builds(Binary, arith_ops, children, children),
        st.builds(Unary, st.just("-"), children),
        st.builds(lambda a, b: Call("max", (a, b)), children, children),
        st.builds(lambda a: Call("abs", (a,)), children),
        st.builds(lambda a, b, c: Call("if", (Binary("<", a, b), b, c)), children, children, children),
    )


exprs = st.recursive(leaves, _trees, max_leaves=12)
row = st.fixed_dictionaries({p: st.integers(-5, 5) for p in PARENTS})


def _safe_eval(e, parents, noise):
    try:
        return eval_expr(e, parents, noise)
    except (DivisionByZero, ExprTypeError):
        return "error"


@given(exprs)
def test_print_parse_round_trip(e):
    assert parse(to_source(e)) == e


@given(exprs, row, st.integers(-5, 5))
def test_round_trip_preserves_value(e, parents, noise):
    assert _safe_eval(parse(to_source(e)), parents, noise) == _safe_eval(e, parents, noise)


@given(exprs, st.lists(st.tuples(row, st.integers(-3, 3)), min_size=1, max_size=6))
def test_column_eval_matches_scalar(e, rows):
    scalar = [_safe_eval(e, p, n) for p, n in rows]
    if "error" in scalar:
        return
    cols = {p: np.array([r[0][p] for r in rows], dtype=np.int64) for p in PARENTS}
    noise = np.array([r[1] for r in rows], dtype=np.int64)
    assert eval_array(e, cols, noise).tolist() == scalar


def test_precedence():
    assert eval_expr(parse("1 + 2 * 3"), {}, 0) == 7
    assert eval_expr(parse("(1 + 2) * 3"), {}, 0) == 9
    assert eval_expr(parse("-2 * 3"), {}, 0) == -6
    assert eval_expr(parse("7 mod 3 + 1"), {}, 0) == 2
    assert eval_expr(parse("1 xor 1 or 1"), {}, 0) == 1
    assert eval_expr(parse("not 0 and 0"), {}, 0) == 0
    assert eval_expr(parse("1 < 2 == 1"), {}, 0) == 1


def test_builtins_and_symbols():
    parents = {"X": 3, "Y": -4}
    assert eval_expr(parse("max(pa.X, pa.Y, n)"), parents, 9) == 9
    assert eval_expr(parse("min(pa.X, pa.Y)"), parents, 0) == -4
    assert eval_expr(parse("abs(pa.Y)"), parents, 0) == 4
    assert eval_expr(parse("floor(7 / 2)"), parents, 0) == 3
    assert eval_expr(parse('if(pa.X > 0, "hi", "lo")'), parents, 0) == "hi"
    assert eval_expr(parse('pa.L == "a"'), {"L": "a"}, 0) == 1


def test_if_is_lazy():
    assert eval_expr(parse("if(1, 5, 1 / 0)"), {}, 0) == 5


def test_eval_errors():
    with pytest.raises(DivisionByZero):
        eval_expr(parse("1 / n"), {}, 0)
    with pytest.raises(DivisionByZero):
        eval_expr(parse("1 mod n"), {}, 0)
    with pytest.raises(ExprTypeError):
        eval_expr(parse('"a" + 1'), {}, 0)
    with pytest.raises(ExprTypeError):
        eval_expr(parse("2 and 1"), {}, 0)
    with pytest.raises(ExprTypeError):
        eval_expr(parse("1.5 xor 1"), {}, 0)
    with pytest.raises(UnknownSymbol):
        eval_expr(parse("pa.Q"), {}, 0)


@pytest.mark.parametrize(
    "src",
    ["", "1 +", "(1", "pa.", "foo(1)", "max()", "abs(1, 2)", "1 2", "pa X", '"open', "if(1, 2)", "@"],
)
def test_parse_errors_carry_location(src):
    with pytest.raises(ParseError) as info:
        parse(src)
    assert info.value.line >= 1 and info.value.column >= 1


def test_parse_error_position():
    with pytest.raises(ParseError) as info:
        parse("1 +\n  * 2")
    assert (info.value.line, info.value.column) == (2, 3)


def test_parents_and_rename():
    e = parse("pa.X + max(pa.Y, n)")
    assert referenced_parents(e) == {"X", "Y"}
    renamed = rename_parent(e, "X", "X_to_Z")
    assert referenced_parents(renamed) == {"X_to_Z", "Y"}
    assert eval_expr(renamed, {"X_to_Z": 2, "Y": 0}, 5) == 7


def test_string_literals_round_trip():
    e = parse('if(n == 1, "a\\"b", "ü")')
    assert parse(to_source(e)) == e
    assert isinstance(e.args[1], Str)


def test_value_array_packing():
    assert E.as_value_array([1, 2]).dtype == np.int64
    assert E.as_value_array([1.0, 2.5]).dtype == np.float64
    assert E.as_value_array(["a", 1]).dtype == object
    # mixed int and float keeps exact ints
    assert E.as_value_array([1, 2.5]).dtype == object
