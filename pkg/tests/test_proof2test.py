import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contraverify.evaluator import PASSES_UNEXPECTEDLY, REPRODUCES, run_test
from contraverify.parser import parse_expr, parse_program
from contraverify.proof2test import (SPEC_GAP, NotACounterexample, counterexample_to_test, diagnose,
                                     emit_test_source, minimize, one_minimality_violations,
                                     proof_to_test, read_test_header, run_test_source)
from contraverify import proof2test
from contraverify.smt import Falsified, encode, extract_counterexample, solve
from contraverify.typecheck import typecheck
from contraverify.vcgen import FALSIFIED, UNKNOWN, ProofFailure, assume_context, generate_vcs
from support import load


def _failing(p, label):
    for r in p.program.routines:
        for vc in generate_vcs(p, r.name):
            if vc.label == label:
                v = solve(encode(vc))
                if isinstance(v, Falsified):
                    return r, vc, v.model
    raise AssertionError(label)


def _large(p, label, assume):
    r, vc, _ = _failing(p, label)
    v = solve(encode(assume_context(vc, parse_expr(assume))))
    return r, vc, extract_counterexample(v.model, vc, r)


@pytest.fixture(scope="module")
def max_prog():
    return load("verify/max.ec")


def test_max_minimizes_to_the_two_cell_shape(max_prog):
    r, vc, cex = _large(max_prog, "is_max", "a.count >= 50")
    rep = minimize(cex, vc)
    a = rep.minimized.binding["a"]
    assert len(a) == 2 and all(-2 <= x <= 2 for x in a) and a[1] > a[0]
    assert rep.magnitude_reduction > 0.9
    assert rep.reverification_runs <= 8
    assert one_minimality_violations(rep, vc) == []


def test_valid_binding_is_not_a_counterexample(max_prog):
    r, vc, cex = _large(max_prog, "is_max", "a.count >= 3")
    fixed_vc = [v for v in generate_vcs(load("verify/max_fixed.ec"), "max") if v.label == "is_max"][0]
    with pytest.raises(NotACounterexample):
        minimize(cex, fixed_vc)


def test_exhausted_budget_still_yields_a_counterexample(max_prog):
    r, vc, cex = _large(max_prog, "is_max", "a.count >= 40")
    rep = minimize(cex, vc, budget=2)
    assert rep.budget_exhausted
    t = counterexample_to_test(rep.minimized, r, "MAX", minimized=True)
    assert run_test(max_prog, t).status == REPRODUCES


@settings(max_examples=15, deadline=None)
@given(st.integers(10, 10**9), st.integers(-10**9, -10))
def test_minimized_inputs_still_fail(big, small):
    p = load("minimize/sum3.ec")
    r, vc, cex = _large(p, "total", f"x >= {big} and y <= {small} and z >= {big}")
    rep = minimize(cex, vc)
    t = counterexample_to_test(rep.minimized, r, "SUM3", minimized=True)
    assert run_test(p, t).status == REPRODUCES
    assert sorted(abs(v) for v in rep.minimized.binding.values()) == [0, 0, 1]


def test_emitted_test_round_trips(max_prog):
    r, vc, model = _failing(max_prog, "is_max")
    res = proof_to_test(max_prog, vc, model)
    src = emit_test_source(res.test, r)
    assert read_test_header(src) == ("is_max", "MAX", "max")
    assert run_test_source(max_prog, src).status == REPRODUCES
    assert run_test_source(load("verify/max_fixed.ec"), src).status == PASSES_UNEXPECTEDLY
    assert proof2test.test_file_name(res.test, 1) == "t_max_proof_1.ec"
    assert parse_program(src).routines[0].name == "__test"


def test_diagnosis_names_clause_location_and_inputs(max_prog):
    r, vc, model = _failing(max_prog, "is_max")
    res = proof_to_test(max_prog, vc, model)
    assert res.reproduces
    text = res.diagnosis.text
    assert text.startswith("postcondition is_max violated in max at ")
    assert "a.count = 2" in text


def test_undecided_failure_is_explained_without_inputs(max_prog):
    vc = generate_vcs(max_prog, "max")[14]
    d = diagnose(ProofFailure(vc, UNKNOWN))
    assert "could not decide" in d.text and d.record["inputs"] is None
    assert diagnose(ProofFailure(vc, FALSIFIED)).record["verdict"] == FALSIFIED


WEAK_LOOP = """class W
feature
  double (n: INTEGER): INTEGER
    require
      natural: n >= 0
    local
      i: INTEGER
    do
      from
        i := 1
      invariant
        bounded: 1 <= i and i <= n + 1
      until
        i > n
      loop
        Result := Result + 2
        i := i + 1
      variant
        n - i + 1
      end
    ensure
      doubled: Result = 2 * n
    end
end
"""


def test_weak_invariant_produces_a_specification_gap():
    p = typecheck(parse_program(WEAK_LOOP))
    r, vc, model = _failing(p, "doubled")
    res = proof_to_test(p, vc, model)
    assert not res.reproduces
    assert res.diagnosis.text.startswith(SPEC_GAP)
    assert "terminates normally" in res.diagnosis.text


def test_weak_callee_contract_produces_a_specification_gap():
    p = load("faults/weak_contract.ec")
    r, vc, model = _failing(p, "exact")
    res = proof_to_test(p, vc, model)
    assert not res.reproduces and res.diagnosis.record["diagnostic"] == SPEC_GAP
