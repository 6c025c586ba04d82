import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contraverify.ast import Binary, Count, Index, IntLit, Quant, Type, Unary, Var
from contraverify.parser import ParseError, parse_expr, parse_program
from contraverify.printer import format_expr, format_program
from contraverify.typecheck import TypeCheckError, typecheck
from support import corpus_files, load

ints = st.builds(IntLit, st.integers(0, 50))
int_vars = st.sampled_from([Var("x"), Var("y"), Count(Var("a")), Index(Var("a"), Var("i"))])


def _int_exprs():
    return st.recursive(
        st.one_of(ints, int_vars),
        lambda sub: st.one_of(
            st.builds(Binary, st.sampled_from(["+", "-", "*", "//", "\\\\"]), sub, sub),
            st.builds(Unary, st.just("-"), sub),
        ),
        max_leaves=8,
    )


def _bool_exprs():
    rel = st.builds(Binary, st.sampled_from(["=", "/=", "<", "<=", ">", ">="]), _int_exprs(), _int_exprs())
    return st.recursive(
        rel,
        lambda sub: st.one_of(
            st.builds(Binary, st.sampled_from(["and", "or", "implies"]), sub, sub),
            st.builds(Unary, st.just("not"), sub),
        ),
        max_leaves=6,
    )


@settings(max_examples=300, deadline=None)
@given(_bool_exprs())
def test_printed_expressions_parse_back_to_the_same_tree(e):
    assert parse_expr(format_expr(e)) == e


@pytest.mark.parametrize("path", corpus_files("sc", "mcdc", "loops", "verify", "faults", "mutants", "minimize"),
                         ids=lambda p: f"{p.parent.name}/{p.name}")
def test_corpus_programs_print_and_reparse(path):
    p = load(path).program
    again = parse_program(format_program(p), p.name)
    assert format_program(again) == format_program(p)
    assert again.routines == p.routines


def test_precedence_of_implies_and_relations():
    e = parse_expr("x < 1 and y > 2 implies x = y or not (y = 3)")
    assert e.op == "implies"
    assert e.left.op == "and" and e.right.op == "or"


def test_quantifier_parses_with_bounds():
    e = parse_expr("for_all k in 1 .. a.count : a[k] <= Result")
    assert isinstance(e, Quant) and e.kind == "for_all" and e.var == "k"
    assert e.hi == Count(Var("a"))


def test_parse_error_reports_position_and_expected_tokens():
    with pytest.raises(ParseError) as info:
        parse_program("class X\nfeature\n  f (x: INTEGER)\n    do\n      x := \n    end\nend\n")
    err = info.value
    assert (err.line, err.col) == (6, 5)
    assert "<integer>" in err.expected


@pytest.mark.parametrize("body, fragment", [
    ("Result := True", "BOOLEAN"),
    ("Result := y", "y"),
    ("Result := x // (x > 1)", "INTEGER"),
])
def test_type_errors_are_reported(body, fragment):
    src = f"class X\nfeature\n  f (x: INTEGER): INTEGER\n    do\n      {body}\n    end\nend\n"
    with pytest.raises(TypeCheckError) as info:
        typecheck(parse_program(src))
    assert fragment in str(info.value)


def test_old_is_only_allowed_in_postconditions():
    src = "class X\nfeature\n  f (x: INTEGER)\n    require\n      r: old x > 0\n    do\n    end\nend\n"
    with pytest.raises(TypeCheckError):
        typecheck(parse_program(src))


def test_parameter_types_are_recorded():
    p = load("verify/max.ec")
    r = p.routine("max")
    assert r.params == (("a", Type.ARRAY),)
    assert r.result_type is Type.INTEGER
    assert [c.label for c in r.ensure] == ["is_max", "result_in_array"]
