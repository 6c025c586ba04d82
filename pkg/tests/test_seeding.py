import itertools

import pytest

from contraverify.evaluator import ContractViolation, Normal, RunRecord, run_routine, run_test
from contraverify.printer import format_program
from contraverify.seeding import (BRANCH, INFEASIBLE, LOOP_ITER, MCDC, SELECTOR, CoverageGoal,
                                  generate_suite, independence_predicate, instrument, is_unate,
                                  seed_branches, seed_mcdc, strip, unroll_loops)
from contraverify.structure import analyze
from support import (corpus_files, input_space, load, masking_pair_exists, min_mcdc_suite,
                     non_degenerate, reachable_branches, truth)

PROGRAMS = corpus_files("sc", "mcdc", "loops")
MODES = {
    "branch": dict(branch=True),
    "mcdc": dict(branch=False, mcdc=True),
    "unroll0": dict(branch=False, unroll=0),
    "unroll3": dict(branch=False, unroll=3),
    "everything": dict(branch=True, mcdc=True, unroll=2),
}


def _ids(p):
    return f"{p.parent.name}/{p.stem}"


@pytest.mark.parametrize("mode", sorted(MODES))
@pytest.mark.parametrize("path", PROGRAMS, ids=_ids)
def test_strip_restores_the_original(path, mode):
    p = load(path)
    inst = instrument(p, **MODES[mode])
    assert format_program(strip(inst.program)) == format_program(p.program)


def _observable(out):
    if isinstance(out, Normal):
        return ("normal", out.result)
    if isinstance(out, ContractViolation):
        return ("violation", out.kind, out.label, out.routine)
    return ("diverges",)


@pytest.mark.parametrize("path", PROGRAMS, ids=_ids)
def test_switched_off_selector_preserves_behaviour(path):
    p = load(path)
    inst = instrument(p, branch=True, mcdc=True, unroll=3).program
    for r in p.program.routines:
        for b in itertools.islice(input_space(r, lo=-2, hi=2, max_count=2), 400):
            want = _observable(run_routine(p, r.name, b, 10**5))
            got = _observable(run_routine(inst, r.name, {**b, SELECTOR: -1}, 10**6))
            assert got == want, (r.name, b)


def test_branch_traps_sit_at_branch_heads():
    inst = seed_branches(load("sc/two_branch.ec"))
    text = format_program(inst.program.program)
    assert "check __trap_1: __sc /= 1 end" in text
    assert [o.kind for o in inst.for_routine("simple")] == [BRANCH, BRANCH]


@pytest.mark.parametrize("path", ["sc/infeasible.ec", "sc/two_branch.ec", "sc/abs_value.ec",
                                  "sc/sign_nested.ec", "sc/flags.ec", "mcdc/three_way.ec"])
def test_infeasible_branches_match_exhaustive_search(path):
    p = load(path)
    suite, cov, report = generate_suite(p)
    for r in p.program.routines:
        every = {b.id for b in analyze(r).branches}
        reachable = reachable_branches(p, r.name)
        claimed = {bid for name, bid in report.infeasible_branches() if name == r.name}
        assert claimed == every - reachable
    assert cov.branch_coverage_ratio == 1.0


def test_infeasible_fixture_reports_both_dead_branches():
    suite, cov, report = generate_suite(load("sc/infeasible.ec"))
    assert report.infeasible_branches() == {("guarded", 1), ("guarded", 3)}
    assert all(e["verdict"] == INFEASIBLE for e in report.entries)


def _decisions(dirs=("mcdc", "sc")):
    for path in corpus_files(*dirs):
        p = load(path)
        for r in p.program.routines:
            for d in analyze(r).decisions:
                yield path, r, d


@pytest.mark.parametrize("path, r, d", list(_decisions()),
                         ids=lambda x: getattr(x, "name", None) or getattr(x, "stem", None) or "")
def test_independence_predicate_matches_truth_table(path, r, d):
    n = len(d.conditions)
    for j in range(n):
        pred = independence_predicate(d, j)
        unate = True
        for bits in itertools.product((False, True), repeat=n):
            flipped = tuple((not b) if i == j else b for i, b in enumerate(bits))
            flips = truth(d.expr, d.conditions, bits) != truth(d.expr, d.conditions, flipped)
            assert truth(pred, d.conditions, bits) == flips
        rows = list(itertools.product((False, True), repeat=n))
        ups = downs = True
        for bits in rows:
            lo = truth(d.expr, d.conditions, bits[:j] + (False,) + bits[j + 1:])
            hi = truth(d.expr, d.conditions, bits[:j] + (True,) + bits[j + 1:])
            ups &= (not lo) or hi
            downs &= (not hi) or lo
        unate = ups or downs
        assert is_unate(d, j) == unate


@pytest.mark.parametrize("path", corpus_files("mcdc"), ids=_ids)
def test_mcdc_suite_satisfies_masking_oracle(path):
    p = load(path)
    suite, cov, report = generate_suite(p, CoverageGoal(mcdc=True))
    evals: dict = {}
    for t in suite:
        rec = RunRecord()
        run_test(p, t, record=rec)
        for routine, did, values, _ in rec.decision_evals:
            evals.setdefault((routine, did), []).append(values)
    for r in p.program.routines:
        for d in analyze(r).decisions:
            rows = evals.get((r.name, d.id), [])
            for j in non_degenerate(d.expr, d.conditions):
                assert masking_pair_exists(d.expr, d.conditions, rows, j), (r.name, d.id, j)


def test_three_condition_decision_meets_the_lower_bound():
    p = load("mcdc/three_way.ec")
    d = analyze(p.routine("admit")).decisions[0]
    assert len(d.conditions) == 3
    assert min_mcdc_suite(d.expr, d.conditions) == 4
    suite, _, _ = generate_suite(p, CoverageGoal(mcdc=True))
    assert len(suite) >= 4


def test_degenerate_condition_is_reported_not_trapped():
    inst = seed_mcdc(load("mcdc/degenerate.ec"))
    assert [(w.decision, w.condition) for w in inst.degenerate] == [(1, 1)]
    conds = {o.condition for o in inst.for_routine("odd_guard") if o.kind == MCDC}
    assert 1 not in conds


def test_non_unate_condition_gets_outcome_specific_obligations():
    inst = seed_mcdc(load("mcdc/selector.ec"))
    obs = [o for o in inst.for_routine("route") if o.kind == MCDC]
    assert any(o.outcome is not None for o in obs)


@pytest.mark.parametrize("k", range(0, 4))
@pytest.mark.parametrize("path", ["loops/double.ec", "loops/countdown.ec", "loops/sum_array.ec"], ids=str)
def test_unrolled_suite_drives_every_iteration_count(path, k):
    p = load(path)
    suite, cov, report = generate_suite(p, CoverageGoal(unroll_depth=k))
    for (routine, lid), ks in cov.loop_profiles.items():
        assert set(range(k + 1)) <= ks, (routine, lid, ks)


def test_unroll_obligations_count_exits():
    inst = unroll_loops(load("loops/double.ec"), 3)
    its = sorted(o.iterations for o in inst.for_routine("double") if o.kind == LOOP_ITER)
    assert its == [0, 1, 2, 3]
    with pytest.raises(ValueError):
        unroll_loops(load("loops/double.ec"), -1)


def test_goal_rejects_depth_beyond_maximum():
    with pytest.raises(ValueError):
        CoverageGoal(unroll_depth=9)


def test_contract_free_program_gets_one_test_per_branch():
    suite, cov, _ = generate_suite(load("sc/two_branch.ec"))
    assert len(suite) == 2 and cov.branch_coverage_ratio == 1.0
    assert all(t.expected is None for t in suite)
    assert suite.provenance["generator"] == "seeding"
