"""Branch, masking MC/DC, and loop-iteration coverage of a test suite."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .evaluator import (
    DEFAULT_STEP_BUDGET,
    PRECONDITION,
    ContractViolation,
    RunRecord,
    run_test,
)
from .structure import analyze, eval_decision
from .suite import TestSuite
from .typecheck import TypedProgram


@dataclass
class CoverageReport:
    branch_hits: dict = field(default_factory=dict)  # (routine, branch id) -> count
    branches: list = field(default_factory=list)  # all (routine, branch id) measured
    infeasible: set = field(default_factory=set)
    mcdc_satisfied: dict = field(default_factory=dict)  # (routine, decision id, cond index) -> bool
    degenerate: set = field(default_factory=set)  # conditions that can never be independent
    loop_profiles: dict = field(default_factory=dict)  # (routine, loop id) -> set of k
    excluded_tests: list = field(default_factory=list)  # names of precondition-violating tests

    @property
    def feasible_branches(self) -> list:
        return [b for b in self.branches if b not in self.infeasible]

    @property
    def branch_coverage_ratio(self) -> float:
        feasible = self.feasible_branches
        if not feasible:
            return 0.0
        hit = sum(1 for b in feasible if self.branch_hits.get(b, 0) > 0)
        return hit / len(feasible)

    @property
    def mcdc_ratio(self) -> float:
        relevant = [k for k in self.mcdc_satisfied if k not in self.degenerate]
        if not relevant:
            return 0.0
        return sum(1 for k in relevant if self.mcdc_satisfied[k]) / len(relevant)

    def merge(self, other: CoverageReport) -> CoverageReport:
        out = CoverageReport()
        out.branches = sorted(set(self.branches) | set(other.branches))
        out.infeasible = self.infeasible | other.infeasible
        for src in (self.branch_hits, other.branch_hits):
            for k, v in src.items():
                out.branch_hits[k] = out.branch_hits.get(k, 0) + v
        for k in set(self.mcdc_satisfied) | set(other.mcdc_satisfied):
            out.mcdc_satisfied[k] = self.mcdc_satisfied.get(k, False) or other.mcdc_satisfied.get(k, False)
        out.degenerate = self.degenerate | other.degenerate
        for src in (self.loop_profiles, other.loop_profiles):
            for k, v in src.items():
                out.loop_profiles.setdefault(k, set()).update(v)
        out.excluded_tests = self.excluded_tests + other.excluded_tests
        return out

    def to_json(self) -> dict:
        return {
            "branch_coverage_ratio": round(self.branch_coverage_ratio, 6),
            "branches": [
                {"routine": r, "id": b, "hits": self.branch_hits.get((r, b), 0),
                 "infeasible": (r, b) in self.infeasible}
                for r, b in sorted(self.branches)
            ],
            "mcdc": [
                {"routine": r, "decision": d, "condition": c, "satisfied": v,
                 "degenerate": (r, d, c) in self.degenerate}
                for (r, d, c), v in sorted(self.mcdc_satisfied.items())
            ],
            "loop_profiles": [
                {"routine": r, "loop": lid, "iterations": sorted(ks)}
                for (r, lid), ks in sorted(self.loop_profiles.items())
            ],
            "excluded_tests": list(self.excluded_tests),
        }


def independent(d_expr, conds: tuple, values: tuple, j: int) -> bool:
    """Whether flipping condition ``j`` flips the decision at this evaluation."""
    if any(v is None for v in values):
        return False
    base = dict(zip(conds, values))
    flipped = dict(base)
    flipped[conds[j]] = not values[j]
    return eval_decision(d_expr, base) != eval_decision(d_expr, flipped)


def mcdc_pairs(d_expr, conds: tuple, evals: list, j: int) -> list[tuple[int, int]]:
    """Index pairs of evaluations witnessing masking MC/DC for condition ``j``."""
    usable = [i for i, (vals, _) in enumerate(evals) if independent(d_expr, conds, vals, j)]
    pairs = []
    for a in usable:
        for b in usable:
            if a < b:
                va, oa = evals[a]
                vb, ob = evals[b]
                if va[j] != vb[j] and oa != ob:
                    pairs.append((a, b))
    return pairs


def is_degenerate(d_expr, conds: tuple, j: int) -> bool:
    for bits in itertools.product((False, True), repeat=len(conds)):
        if independent(d_expr, conds, bits, j):
            return False
    return True


def measure_coverage(p: TypedProgram, suite: TestSuite, infeasible: set | None = None,
                     routines: list[str] | None = None,
                     step_budget: int = DEFAULT_STEP_BUDGET) -> CoverageReport:
    """Run every test and aggregate coverage over the targeted routines.

    Tests whose inputs violate the target's own precondition are excluded from
    the statistics and listed in ``excluded_tests``.
    """
    report = CoverageReport(infeasible=set(infeasible or ()))
    targets = routines if routines is not None else sorted({t.routine for t in suite})
    structures = {name: analyze(p.routine(name)) for name in targets}
    for name, st in structures.items():
        report.branches.extend((name, b.id) for b in st.branches)
        for lp in st.loops:
            report.loop_profiles[(name, lp.id)] = set()
    evals: dict = {}
    for t in suite:
        record = RunRecord()
        verdict = run_test(p, t, step_budget, record)
        out = verdict.outcome
        if (isinstance(out, ContractViolation) and out.kind == PRECONDITION
                and out.routine == t.routine and out.call_site is None):
            report.excluded_tests.append(t.name or t.routine)
            continue
        for key, n in record.branch_hits.items():
            if key[0] in structures:
                report.branch_hits[key] = report.branch_hits.get(key, 0) + n
        for routine, lid, k in record.loop_iterations:
            if routine in structures:
                report.loop_profiles.setdefault((routine, lid), set()).add(k)
        for routine, did, values, outcome in record.decision_evals:
            evals.setdefault((routine, did), []).append((values, outcome))
    for name, st in structures.items():
        for d in st.decisions:
            ev = evals.get((name, d.id), [])
            for j in range(len(d.conditions)):
                key = (name, d.id, j)
                if is_degenerate(d.expr, d.conditions, j):
                    report.degenerate.add(key)
                report.mcdc_satisfied[key] = bool(mcdc_pairs(d.expr, d.conditions, ev, j))
    return report
