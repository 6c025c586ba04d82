import itertools

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from contraverify.ast import Binary, IntLit, Type, Unary, Var
from contraverify.logic import ArrayVal, evaluate
from contraverify.sexpr import Sym, parse_all, tokenize
from contraverify.smt import (MATERIALIZE_CAP, Falsified, ModelIncomplete, SmtScript, SolverConfig,
                              SolverProcessError, SolverSession, Unknown, Valid, declarations, encode,
                              encode_assertion, extract_counterexample, parse_model, solve, solve_distinct)
from contraverify.vcgen import generate_vcs
from support import load

TYPES = {"x": Type.INTEGER, "y": Type.INTEGER}
leaf = st.one_of(st.builds(IntLit, st.integers(-5, 5)), st.sampled_from([Var("x"), Var("y")]))
ints = st.recursive(
    leaf,
    lambda sub: st.one_of(
        st.builds(Binary, st.sampled_from(["+", "-"]), sub, sub),
        st.builds(Binary, st.just("*"), sub, st.builds(IntLit, st.integers(-3, 3))),
        st.builds(Binary, st.sampled_from(["//", "\\\\"]), sub,
                  st.builds(IntLit, st.integers(-4, 4).filter(bool))),
        st.builds(Unary, st.just("-"), sub),
    ),
    max_leaves=5,
)
bools = st.recursive(
    st.builds(Binary, st.sampled_from(["=", "/=", "<", "<=", ">", ">="]), ints, ints),
    lambda sub: st.one_of(st.builds(Binary, st.sampled_from(["and", "or", "implies"]), sub, sub),
                          st.builds(Unary, st.just("not"), sub)),
    max_leaves=4,
)


def _script(e) -> SmtScript:
    decls, bounds = declarations(TYPES)
    return SmtScript(tuple(decls), tuple(bounds), encode_assertion(e, TYPES), dict(TYPES))


@settings(max_examples=80, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(bools)
def test_encoding_agrees_with_evaluation(e):
    verdict = solve(_script(e))
    if isinstance(verdict, Falsified):
        assert evaluate(e, verdict.model.env()) is True
    elif isinstance(verdict, Valid):
        # unsat: no small witness may exist
        for x, y in itertools.product(range(-6, 7), repeat=2):
            assert evaluate(e, {"x": x, "y": y}) is False
    else:
        assert isinstance(verdict, Unknown)


def test_sexpr_reader_handles_quoted_symbols_and_comments():
    toks = tokenize("(define-fun |a.count| () Int 3) ; trailing\n(x \"s\"\"q\")")
    assert Sym("a.count") in toks and 's"q' in toks
    assert parse_all("(a (b 1) ())") == [[Sym("a"), [Sym("b"), 1], []]]


def test_model_parser_reads_scalars_negatives_and_arrays():
    text = """(model
      (define-fun x () Int (- 4))
      (define-fun b () Bool true)
      (define-fun |a.count| () Int 3)
      (define-fun a () (Array Int Int) (store ((as const (Array Int Int)) 0) 2 5))
      (define-fun c () (Array Int Int) (_ as-array k!0))
      (define-fun |c.count| () Int 2)
      (define-fun k!0 ((x!0 Int)) Int (ite (= x!0 1) 7 (- 1)))
    )"""
    types = {"x": Type.INTEGER, "b": Type.BOOLEAN, "a": Type.ARRAY, "c": Type.ARRAY}
    m = parse_model(text, types)
    assert m["x"] == -4 and m["b"] is True
    assert m["a"].values() == (0, 5, 0)
    assert m["c"].values() == (7, -1)


def test_model_parser_prefers_get_value_answers():
    m = parse_model("(model (define-fun x () Int 1)) ((x 9))", {"x": Type.INTEGER})
    assert m["x"] == 9


def test_session_matches_one_shot_solving():
    p = load("verify/max.ec")
    for vc in generate_vcs(p, "max")[:6] + generate_vcs(p, "max")[-3:]:
        script = encode(vc)
        with SolverSession(script) as s:
            a = s.check()
            b = s.check("(assert false)")
            c = s.check()
        assert type(a) is type(solve(script)) is type(c)
        assert isinstance(b, Valid)


def test_distinct_models_differ_on_inputs():
    vc = [v for v in generate_vcs(load("faults/a07_next.ec"), "next")][0]
    models = solve_distinct(encode(vc), 5, vc=vc)
    assert len(models) == 5
    assert len({m["x"] for m in models}) == 5


def test_huge_arrays_stay_lazy_until_minimized():
    vc = generate_vcs(load("verify/max.ec"), "max")[14]
    model = parse_model(f"(model (define-fun |a.count| () Int {MATERIALIZE_CAP + 1}))", vc.var_types)
    cex = extract_counterexample(model, vc)
    assert cex.oversized
    assert cex.magnitudes()["a.count"] == MATERIALIZE_CAP + 1
    with pytest.raises(ModelIncomplete):
        cex.binding


def test_missing_solver_is_an_infrastructure_error():
    vc = generate_vcs(load("faults/a07_next.ec"), "next")[0]
    with pytest.raises(SolverProcessError):
        solve(encode(vc), SolverConfig(path="/nonexistent/z3"))


def test_solver_path_comes_from_environment(monkeypatch):
    monkeypatch.setenv("CONTRAVERIFY_SOLVER", "/opt/other/z3")
    assert SolverConfig().executable() == "/opt/other/z3"
    assert SolverConfig(path="/usr/bin/z3x").executable() == "/usr/bin/z3x"


def test_array_values_compare_by_contents():
    assert ArrayVal.of((1, 2)) == ArrayVal.of([1, 2])
    assert ArrayVal.of((1, 2)).store(1, 5).values() == (5, 2)
