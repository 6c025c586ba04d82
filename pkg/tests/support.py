"""Shared fixtures and brute-force oracles for the test suite.

The oracles here deliberately avoid the package's own analysis code: input
spaces are enumerated directly, reachability comes from concrete runs, and
MC/DC is checked against a separate truth-table evaluator.
"""

from __future__ import annotations

import itertools
from pathlib import Path

from contraverify.ast import Binary, BoolLit, Type, Unary
from contraverify.evaluator import PRECONDITION, ContractViolation, RunRecord, run_routine
from contraverify.parser import parse_program
from contraverify.smt import Falsified, SolverSession, binding_assertions, encode
from contraverify.structure import analyze
from contraverify.typecheck import typecheck
from contraverify.vcgen import generate_vcs

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"

# criterion number -> "criterion N: PASS|FAIL ..." line, reported at session end
ACCEPTANCE: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE[n] = line
    print(line)
    assert ok, line


def load(path) -> object:
    path = Path(path)
    if not path.is_absolute():
        path = CORPUS / path
    return typecheck(parse_program(path.read_text(encoding="utf-8"), path.stem.upper()))


def corpus_files(*dirs: str) -> list[Path]:
    return sorted(p for d in dirs for p in (CORPUS / d).glob("*.ec"))


def has_loop(r) -> bool:
    return bool(analyze(r).loops)


def input_space(r, lo: int = -3, hi: int = 3, max_count: int = 3):
    """Every binding of ``r``'s parameters over the small-scope domain."""
    domains = []
    ints = range(lo, hi + 1)
    for _, ty in r.params:
        if ty is Type.BOOLEAN:
            domains.append((False, True))
        elif ty is Type.ARRAY:
            arrays = []
            for n in range(max_count + 1):
                arrays.extend(tuple(c) for c in itertools.product(ints, repeat=n))
            domains.append(arrays)
        else:
            domains.append(tuple(ints))
    names = [name for name, _ in r.params]
    for combo in itertools.product(*domains):
        yield dict(zip(names, combo))


def excluded_by_own_precondition(outcome, routine: str) -> bool:
    return (isinstance(outcome, ContractViolation) and outcome.kind == PRECONDITION
            and outcome.routine == routine and outcome.call_site is None)


def reachable_branches(p, routine: str, **space) -> set[int]:
    """Branch ids some admissible small-scope input reaches."""
    r = p.routine(routine)
    hit: set[int] = set()
    for b in input_space(r, **space):
        rec = RunRecord()
        out = run_routine(p, routine, b, 10**5, rec)
        if excluded_by_own_precondition(out, routine):
            continue
        hit |= {bid for (name, bid), n in rec.branch_hits.items() if name == routine and n}
    return hit


# -- MC/DC -------------------------------------------------------------------------------------


def truth(d, conds: tuple, bits: tuple) -> bool:
    """Evaluate decision ``d`` treating each expression in ``conds`` as an opaque atom."""
    for c, v in zip(conds, bits):
        if d == c:
            return v
    if isinstance(d, BoolLit):
        return d.value
    if isinstance(d, Unary) and d.op == "not":
        return not truth(d.operand, conds, bits)
    if isinstance(d, Binary):
        a = truth(d.left, conds, bits)
        if d.op == "and":
            return a and truth(d.right, conds, bits)
        if d.op == "or":
            return a or truth(d.right, conds, bits)
        if d.op == "implies":
            return (not a) or truth(d.right, conds, bits)
        if d.op in ("=", "/="):
            b = truth(d.right, conds, bits)
            return (a == b) if d.op == "=" else (a != b)
    raise ValueError(f"not a boolean combination of the given conditions: {d!r}")


def _flips(d, conds, bits, j) -> bool:
    other = tuple((not b) if i == j else b for i, b in enumerate(bits))
    return truth(d, conds, bits) != truth(d, conds, other)


def non_degenerate(d, conds) -> list[int]:
    return [j for j in range(len(conds))
            if any(_flips(d, conds, bits, j) for bits in itertools.product((False, True), repeat=len(conds)))]


def masking_pair_exists(d, conds, rows: list[tuple], j: int) -> bool:
    """Masking MC/DC for condition ``j`` over observed condition vectors."""
    full = [r for r in rows if None not in r]
    for a, b in itertools.combinations(full, 2):
        if a[j] == b[j] or truth(d, conds, a) == truth(d, conds, b):
            continue
        if _flips(d, conds, a, j) and _flips(d, conds, b, j):
            return True
    return False


def min_mcdc_suite(d, conds) -> int:
    """Smallest set of truth-table rows giving masking MC/DC for every
    non-degenerate condition."""
    rows = list(itertools.product((False, True), repeat=len(conds)))
    need = non_degenerate(d, conds)
    for size in range(1, len(rows) + 1):
        for subset in itertools.combinations(rows, size):
            if all(masking_pair_exists(d, conds, list(subset), j) for j in need):
                return size
    raise AssertionError("no MC/DC suite exists")


# -- logic/execution agreement ------------------------------------------------------------------


def agreement_mismatches(p, routine: str, cfg=None, **space) -> list[tuple]:
    """Bindings where the run's violation and the falsified VCs disagree.

    A binding falsifies a VC when the VC's negation is satisfiable with the
    inputs pinned to it. The run must violate exactly the clause of the
    falsified VC, or none at all when every VC holds.
    """
    r = p.routine(routine)
    vcs = generate_vcs(p, routine)
    bad = []
    sessions = [SolverSession(encode(vc), cfg) for vc in vcs]
    try:
        for b in input_space(r, **space):
            out = run_routine(p, routine, b, 10**5)
            if excluded_by_own_precondition(out, routine):
                continue
            pins = [f"(assert {a})" for a in binding_assertions(b, tuple(r.params))]
            falsified = {vc.id for vc, s in zip(vcs, sessions) if isinstance(s.check(*pins), Falsified)}
            if isinstance(out, ContractViolation):
                expected = {vc.id for vc in vcs if vc.matches(out) and vc.span == out.span
                            and vc.call_site == out.call_site}
                ok = len(expected) == 1 and falsified == expected
            else:
                ok = not falsified
            if not ok:
                bad.append((b, out, sorted(falsified)))
    finally:
        for s in sessions:
            s.close()
    return bad
