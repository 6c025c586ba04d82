import pytest
from hypothesis import given
from hypothesis import strategies as st

from contraverify.evaluator import (ContractViolation, Divergence, Normal, RunRecord, euclid_div,
                                    euclid_mod, run_routine)
from contraverify.parser import parse_program
from contraverify.typecheck import typecheck
from support import load

SOURCE = """class E
feature
  idx (a: ARRAY [INTEGER]): INTEGER
    do
      Result := a[a.count + 1]
    end
  div (x, y: INTEGER): INTEGER
    do
      Result := x // y
    end
  rem (x, y: INTEGER): INTEGER
    require
      nonzero: y /= 0
    do
      Result := x \\\\ y
    end
  spin (n: INTEGER): INTEGER
    do
      from Result := 0 until False loop Result := Result + 1 end
    end
  bad_variant (n: INTEGER): INTEGER
    local i: INTEGER
    do
      from i := 0 until i >= n loop i := i + 1 variant n + i end
    end
  bad_inv (n: INTEGER): INTEGER
    require small: n >= 0
    local i: INTEGER
    do
      from i := 0 invariant low: i <= 2 until i >= n loop i := i + 1 end
    end
  bump (x: INTEGER): INTEGER
    do
      x := x + 1
      Result := x
    ensure
      grew: Result = old x + 1
    end
  needs_pos (x: INTEGER): INTEGER
    require pos: x > 0
    do
      Result := x
    end
  caller (x: INTEGER): INTEGER
    do
      Result := needs_pos (x)
    end
  make (n: INTEGER): INTEGER
    local a: ARRAY [INTEGER]
    do
      create a.make (n)
      a[n] := 7
      Result := a[n] + a.count
    end
end
"""


@pytest.fixture(scope="module")
def prog():
    return typecheck(parse_program(SOURCE))


@given(st.integers(-10**6, 10**6), st.integers(-1000, 1000).filter(bool))
def test_euclidean_division_matches_its_definition(a, b):
    q, r = euclid_div(a, b), euclid_mod(a, b)
    assert a == b * q + r
    assert 0 <= r < abs(b)


@pytest.mark.parametrize("x, y, q", [(7, 2, 3), (-7, 2, -4), (7, -2, -3), (-7, -2, 4)])
def test_division_in_programs_is_euclidean(prog, x, y, q):
    assert run_routine(prog, "div", {"x": x, "y": y}) == Normal(q)
    assert run_routine(prog, "rem", {"x": x, "y": y}).result == x - y * q


@pytest.mark.parametrize("routine, args, kind, label", [
    ("idx", {"a": (1, 2)}, "bounds", "index_range"),
    ("div", {"x": 7, "y": 0}, "bounds", "nonzero_divisor"),
    ("rem", {"x": 7, "y": 0}, "precondition", "nonzero"),
    ("bad_variant", {"n": 3}, "loop_variant", "variant_decrease"),
    ("bad_inv", {"n": 5}, "loop_invariant", "low"),
    ("make", {"n": -1}, "bounds", "array_size"),
])
def test_runtime_checks_report_kind_and_label(prog, routine, args, kind, label):
    out = run_routine(prog, routine, args)
    assert isinstance(out, ContractViolation)
    assert (out.kind, out.label, out.routine) == (kind, label, routine)


def test_callee_precondition_carries_the_call_site(prog):
    out = run_routine(prog, "caller", {"x": 0})
    assert out.routine == "needs_pos" and out.label == "pos"
    assert out.call_site is not None and out.call_site.line > out.span.line


def test_old_refers_to_entry_values(prog):
    assert run_routine(prog, "bump", {"x": 4}) == Normal(5)


def test_fresh_arrays_are_zero_filled_and_writable(prog):
    assert run_routine(prog, "make", {"n": 3}) == Normal(10)


def test_step_budget_turns_nontermination_into_divergence(prog):
    out = run_routine(prog, "spin", {"n": 0}, step_budget=500)
    assert isinstance(out, Divergence) and out.steps > 500


def test_run_record_counts_branches_and_iterations(prog):
    rec = RunRecord()
    run_routine(prog, "bad_inv", {"n": 2}, record=rec)
    assert rec.loop_iterations == [("bad_inv", 1, 2)]
    assert [v for *_, v in rec.decision_evals] == [False, False, True]
    assert rec.branch_hits[("bad_inv", 1)] == 2


def test_max_fault_fails_on_the_small_witness():
    buggy, fixed = load("verify/max.ec"), load("verify/max_fixed.ec")
    out = run_routine(buggy, "max", {"a": (0, 1)})
    assert isinstance(out, ContractViolation) and out.label == "is_max"
    assert run_routine(fixed, "max", {"a": (0, 1)}) == Normal(1)
    assert run_routine(buggy, "max", {"a": ()}).label == "a_not_empty"


def test_runs_are_deterministic(prog):
    a = [run_routine(prog, r, {"n": 4}) for r in ("bad_inv", "bad_variant", "make")]
    b = [run_routine(prog, r, {"n": 4}) for r in ("bad_inv", "bad_variant", "make")]
    assert a == b
