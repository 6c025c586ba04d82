"""Proof2Fix: counterexample invariants, candidate fixes, and validation by
complete re-verification."""

from __future__ import annotations

import difflib
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from .ast import (
    TRUE,
    Assign,
    Binary,
    Clause,
    Count,
    Expr,
    If,
    Index,
    IntLit,
    Loop,
    Old,
    Program,
    Routine,
    Type,
    Unary,
    Var,
    assigned_vars,
    expr_size,
    free_vars,
    neg,
)
from .evaluator import (
    DEFAULT_STEP_BUDGET,
    PRECONDITION,
    REPRODUCES,
    ContractViolation,
    Interpreter,
    Normal,
    _coerce,
    run_routine,
    run_test,
)
from .logic import evaluate
from .printer import format_expr, format_program
from .proof2test import DEFAULT_MIN_BUDGET, NotACounterexample, counterexample_to_test, minimize
from .smt import (
    Falsified,
    SolverConfig,
    Unknown,
    Valid,
    blocking_clause,
    encode,
    extract_counterexample,
    solve,
)
from .suite import format_binding
from .typecheck import TypeCheckError, TypedProgram, typecheck
from .vcgen import FALSIFIED, ProofFailure, VcGenError, generate_vcs

DEFAULT_CEX_COUNT = 8
DEFAULT_CANDIDATE_CAP = 50
GUARD_INVARIANTS = 6

CONST, EQUAL, LINEAR, OLD_LINEAR, ORDER, RANGE = (
    "const", "equal", "linear", "old_linear", "order", "range",
)
_SIMPLICITY = {CONST: 0, EQUAL: 1, LINEAR: 2, OLD_LINEAR: 3, ORDER: 4, RANGE: 5}

CONDITION_REPLACE = "condition_replace"
ASSIGNMENT_REPLACE = "assignment_replace"
PRECONDITION_STRENGTHEN = "precondition_strengthen"
POSTCONDITION_WEAKEN = "postcondition_weaken"  # defined for completeness; no template emits it
CONTRACT_KINDS = (PRECONDITION_STRENGTHEN, POSTCONDITION_WEAKEN)

VALID = "valid"
BREAKS_OTHER = "removes_failure_but_breaks_other"
STILL_FAILS = "still_fails"
UNKNOWN = "unknown"


class NoCandidates(Exception):
    pass


# -- observation --------------------------------------------------------------------


class _Capture(Interpreter):
    """Interpreter that keeps the frame of the first activation of ``target``."""

    def __init__(self, program, target: str, step_budget: int):
        super().__init__(program, step_budget)
        self.target = target
        self.frame = None

    def invoke(self, r, frame, caller_site):
        if self.frame is None and r.name == self.target:
            self.frame = frame
        return super().invoke(r, frame, caller_site)


@dataclass(frozen=True)
class Term:
    name: str  # printed form
    expr: Expr
    entry: bool  # value taken at routine entry
    ty: Type


def _terms(r: Routine, observations: list[dict]) -> list[Term]:
    assigned = set(assigned_vars(r.body))
    out: list[Term] = []
    for name, ty in r.params:
        if ty is Type.ARRAY:
            continue
        e = Old(Var(name)) if name in assigned else Var(name)
        out.append(Term(format_expr(e), e, True, ty))
    finals = [(n, t) for n, t in r.params if n in assigned] + list(r.locals)
    if r.result_type is not None:
        finals.append(("Result", r.result_type))
    for name, ty in finals:
        if ty is not Type.ARRAY:
            out.append(Term(name, Var(name), False, ty))
    for name, ty in list(r.params) + list(r.locals):
        if ty is not Type.ARRAY:
            continue
        a = Var(name)
        out.append(Term(f"{name}.count", Count(a), name not in assigned, Type.INTEGER))
        for e in (Index(a, IntLit(1)), Index(a, Count(a))):
            out.append(Term(format_expr(e), e, name not in assigned, Type.INTEGER))
    return [t for t in out if all(t.name in o for o in observations)]


def observe(p: TypedProgram, r: Routine, binding: dict,
            step_budget: int = DEFAULT_STEP_BUDGET) -> dict:
    """Term values for one counterexample: inputs at entry and the state at failure."""
    interp = _Capture(p, r.name, step_budget)
    interp.run(r.name, binding)
    frame = interp.frame or {}
    values: dict = {}
    assigned = set(assigned_vars(r.body))
    for name, ty in r.params:
        if ty is not Type.ARRAY:
            values[f"old {name}" if name in assigned else name] = _coerce(binding[name], ty)
    for name, v in frame.items():
        if isinstance(v, list):
            values[f"{name}.count"] = len(v)
            if v:
                values[f"{name}[1]"] = v[0]
                values[f"{name}[{name}.count]"] = v[-1]
        elif name in assigned or name not in binding:
            values[name] = v
    return values


# -- invariants ------------------------------------------------------------------------


@dataclass(frozen=True)
class CexInvariant:
    pattern: str
    expr: Expr
    terms: tuple  # term names involved
    coefficients: tuple
    support: int

    @property
    def text(self) -> str:
        return format_expr(self.expr)

    @property
    def uses_old(self) -> bool:
        return any(isinstance(e, Old) for e in self.expr.walk())

    def holds(self, values: dict) -> bool:
        return bool(evaluate(_term_vars(self.expr), {name: values[name] for name in self.terms}))

    def to_json(self) -> dict:
        return {"pattern": self.pattern, "invariant": self.text, "support": self.support,
                "coefficients": list(self.coefficients)}


def _term_vars(e: Expr) -> Expr:
    """Rewrite every term occurrence into a variable named after the term."""
    if isinstance(e, (Old, Count, Index)):
        return Var(format_expr(e))
    if isinstance(e, Var):
        return e
    return e.map_children(_term_vars)


def _linear(a: int, e2: Expr, b: int) -> Expr:
    if a == 1:
        out = e2
    elif a == -1:
        out = Unary("-", e2)
    else:
        out = Binary("*", IntLit(a), e2)
    if b > 0:
        out = Binary("+", out, IntLit(b))
    elif b < 0:
        out = Binary("-", out, IntLit(-b))
    return out


def _shift(e: Expr, d: int) -> Expr:
    """``e + d`` with the trailing constant folded, so ``x + 1`` shifted by -1 is ``x``."""
    if isinstance(e, IntLit):
        return IntLit(e.value + d)
    if isinstance(e, Binary) and e.op in ("+", "-") and isinstance(e.right, IntLit):
        c = (e.right.value if e.op == "+" else -e.right.value) + d
        return _linear(1, e.left, c)
    return _linear(1, e, d)


def infer_invariants(cexs: list, scope: Routine, program: TypedProgram | None = None,
                     observations: list[dict] | None = None) -> list[CexInvariant]:
    """Exact-fit invariants of the counterexample set, simplest first.

    Patterns: ``t = c``, ``t1 = t2``, ``t1 = a * t2 + b`` (with ``old`` on the
    right for assigned inputs), ``t1 < t2`` and ``lo <= t <= hi``. Terms are
    scalar inputs, array counts and end cells, and (with ``program``) the
    state where the failing run stopped.
    """
    if observations is None:
        if program is not None:
            observations = [observe(program, scope, c.binding) for c in cexs]
        else:
            observations = [dict(c.binding) for c in cexs]
            for o in observations:
                for name, v in list(o.items()):
                    if isinstance(v, tuple):
                        del o[name]
                        o[f"{name}.count"] = len(v)
                        if v:
                            o[f"{name}[1]"] = v[0]
                            o[f"{name}[{name}.count]"] = v[-1]
    if not observations:
        return []
    terms = _terms(scope, observations)
    n = len(observations)
    col = {t.name: [o[t.name] for o in observations] for t in terms}
    out: list[CexInvariant] = []
    const = set()
    for t in terms:
        vals = col[t.name]
        if all(v == vals[0] for v in vals):
            const.add(t.name)
            v = vals[0]
            if t.ty is Type.BOOLEAN:
                e = t.expr if v else neg(t.expr)
            else:
                e = Binary("=", t.expr, IntLit(v))
            out.append(CexInvariant(CONST, e, (t.name,), (v,), n))
    ints = [t for t in terms if t.ty is Type.INTEGER]
    related = set()
    for t1, t2 in itertools.combinations(ints, 2):
        if t1.name in const or t2.name in const:
            continue
        if col[t1.name] == col[t2.name]:
            lhs, rhs = (t2, t1) if t1.entry and not t2.entry else (t1, t2)
            out.append(CexInvariant(EQUAL, Binary("=", lhs.expr, rhs.expr), (lhs.name, rhs.name), (), n))
            related.add((t1.name, t2.name))
    for t1 in ints:
        if t1.name in const:
            continue
        for t2 in ints:
            if t2 is t1 or t2.name in const or (t1.entry and not t2.entry):
                continue
            fit = _fit_linear(col[t1.name], col[t2.name])
            if fit is None or fit == (1, 0):
                continue
            a, b = fit
            pattern = OLD_LINEAR if isinstance(t2.expr, Old) else LINEAR
            out.append(CexInvariant(pattern, Binary("=", t1.expr, _linear(a, t2.expr, b)),
                                    (t1.name, t2.name), (a, b), n))
            related.add((t1.name, t2.name))
            related.add((t2.name, t1.name))
    for t1, t2 in itertools.permutations(ints, 2):
        if t1.name in const or t2.name in const:
            continue
        if (t1.name, t2.name) in related or (t2.name, t1.name) in related:
            continue
        if all(x < y for x, y in zip(col[t1.name], col[t2.name])):
            out.append(CexInvariant(ORDER, Binary("<", t1.expr, t2.expr), (t1.name, t2.name), (), n))
    for t in ints:
        if t.name in const:
            continue
        lo, hi = min(col[t.name]), max(col[t.name])
        e = Binary("and", Binary("<=", IntLit(lo), t.expr), Binary("<=", t.expr, IntLit(hi)))
        out.append(CexInvariant(RANGE, e, (t.name,), (lo, hi), n))
    order = {t.name: i for i, t in enumerate(terms)}
    out.sort(key=lambda inv: (-inv.support, _SIMPLICITY[inv.pattern],
                              [order[x] for x in inv.terms]))
    return out


def _fit_linear(ys: list, xs: list) -> tuple[int, int] | None:
    """Integer ``(a, b)`` with ``y = a * x + b`` on every point, if any."""
    pts = list(zip(xs, ys))
    base = pts[0]
    other = next((q for q in pts[1:] if q[0] != base[0]), None)
    if other is None:
        return None
    dx, dy = other[0] - base[0], other[1] - base[1]
    if dy % dx != 0:
        return None
    a = dy // dx
    if a == 0:
        return None
    b = base[1] - a * base[0]
    if all(y == a * x + b for x, y in pts):
        return a, b
    return None


# -- candidates ------------------------------------------------------------------------------


@dataclass(frozen=True)
class FixCandidate:
    kind: str
    location: object  # Span of the edited statement or clause
    original: Expr
    replacement: Expr
    rationale: str
    routine: str
    site: int | None = None  # edit point index; None for contract additions

    @property
    def is_contract(self) -> bool:
        return self.kind in CONTRACT_KINDS

    @property
    def edit_distance(self) -> int:
        if self.kind == PRECONDITION_STRENGTHEN:
            return 1 + expr_size(self.replacement)
        return tree_distance(self.original, self.replacement)

    def describe(self) -> str:
        where = f" at {self.location}" if self.location else ""
        if self.kind == PRECONDITION_STRENGTHEN:
            return f"strengthen precondition of {self.routine} with {format_expr(self.replacement)}"
        what = "condition" if self.kind == CONDITION_REPLACE else "assigned expression"
        return (f"replace {what} {format_expr(self.original)} with "
                f"{format_expr(self.replacement)}{where}")

    def to_json(self) -> dict:
        return {"kind": self.kind, "routine": self.routine,
                "location": str(self.location) if self.location else None,
                "original": format_expr(self.original), "replacement": format_expr(self.replacement),
                "rationale": self.rationale, "edit_distance": self.edit_distance}


def tree_distance(a: Expr, b: Expr) -> int:
    """Small AST edit distance: relabels cost 1, wrapping costs the added nodes."""
    if a == b:
        return 0
    if type(a) is type(b):
        ca, cb = a.children(), b.children()
        if len(ca) == len(cb):
            relabel = 0 if _label(a) == _label(b) else 1
            return relabel + sum(tree_distance(x, y) for x, y in zip(ca, cb))
    if any(c == a for c in b.walk()):
        return expr_size(b) - expr_size(a)
    return expr_size(a) + expr_size(b)


def _label(e: Expr):
    return tuple((k, v) for k, v in vars(e).items() if not isinstance(v, Expr) and k != "span")


def _map_points(block: tuple, fn, counter) -> tuple:
    out = []
    for s in block:
        if isinstance(s, If):
            arms = []
            for cond, arm in s.arms:
                new = fn(next(counter), CONDITION_REPLACE, cond, s)
                arms.append((new, _map_points(arm, fn, counter)))
            eb = _map_points(s.else_body, fn, counter) if s.else_body is not None else None
            out.append(replace(s, arms=tuple(arms), else_body=eb))
        elif isinstance(s, Loop):
            init = _map_points(s.init, fn, counter)
            ex = fn(next(counter), CONDITION_REPLACE, s.exit, s)
            body = _map_points(s.body, fn, counter)
            out.append(replace(s, init=init, exit=ex, body=body))
        elif isinstance(s, Assign):
            out.append(replace(s, value=fn(next(counter), ASSIGNMENT_REPLACE, s.value, s)))
        else:
            out.append(s)
    return tuple(out)


def edit_points(r: Routine) -> list[tuple]:
    """``(site, kind, expr, stmt)`` for every condition and assignment, in source order."""
    pts: list = []

    def record(site, kind, e, s):
        pts.append((site, kind, e, s))
        return e

    _map_points(r.body, record, itertools.count())
    return pts


def apply_fix(p: TypedProgram | Program, f: FixCandidate) -> Program:
    program = p.program if isinstance(p, TypedProgram) else p
    r = program.routine(f.routine)
    if f.kind == PRECONDITION_STRENGTHEN:
        new = replace(r, require=tuple(r.require) + (Clause("fix_pre", f.replacement),))
    else:
        def edit(site, kind, e, s):
            return f.replacement if site == f.site else e

        new = replace(r, body=_map_points(r.body, edit, itertools.count()))
    return program.with_routine(new)


_SWAP = {">=": ">", ">": ">=", "<=": "<", "<": "<=", "=": "/=", "/=": "="}


def _subpaths(e: Expr, path: tuple = ()):
    yield path, e
    for i, c in enumerate(e.children()):
        yield from _subpaths(c, path + (i,))


def _replace_at(e: Expr, path: tuple, new: Expr) -> Expr:
    if not path:
        return new
    kids = e.children()
    target = kids[path[0]]
    updated = _replace_at(target, path[1:], new)
    return e.map_children(lambda c: updated if c is target else c)


def _condition_edits(cond: Expr) -> list[tuple[Expr, str]]:
    out = []
    for path, sub in _subpaths(cond):
        if isinstance(sub, Binary) and sub.op in _SWAP:
            out.append((_replace_at(cond, path, replace(sub, op=_SWAP[sub.op])),
                        f"relational operator {sub.op} -> {_SWAP[sub.op]}"))
    for path, sub in _subpaths(cond):
        if isinstance(sub, Binary) and sub.op in _SWAP:
            for d in (1, -1):
                shifted = _shift(sub.right, d)
                out.append((_replace_at(cond, path, replace(sub, right=shifted)),
                            f"bound shift {'+' if d > 0 else '-'}1"))
    return out


def _code_usable(inv: CexInvariant, scope: set) -> bool:
    return not inv.uses_old and free_vars(inv.expr) <= scope


def synthesize_fixes(r: Routine, failure: ProofFailure, invs: list[CexInvariant],
                     cap: int = DEFAULT_CANDIDATE_CAP, program: Program | None = None) -> list[FixCandidate]:
    """Template-generated single-edit candidates, deduplicated and capped.

    Templates: relational operator swaps and +/-1 bound shifts in conditions,
    guards ``c and not I`` / ``c or not I`` from the best invariants, ``e +/- 1``
    and invariant-implied right-hand sides for assignments, and precondition
    strengthening with ``not I``. Candidates that do not typecheck are dropped.
    """
    if failure.verdict != FALSIFIED:
        raise ValueError("fixes are synthesized for falsified VCs only")
    scope = set(r.var_types())
    guards = [i for i in invs if _code_usable(i, scope)][:GUARD_INVARIANTS]
    out: list[FixCandidate] = []
    seen: set = set()

    def add(kind, site, span, original, replacement, why):
        key = (kind, site, replacement)
        if replacement == original or key in seen:
            return
        seen.add(key)
        out.append(FixCandidate(kind, span, original, replacement, why, r.name, site))

    points = edit_points(r)
    for site, kind, e, s in points:
        if kind != CONDITION_REPLACE:
            continue
        for new, why in _condition_edits(e):
            add(kind, site, s.span, e, new, why)
        for inv in guards:
            add(kind, site, s.span, e, Binary("and", e, neg(inv.expr)), f"guard excludes {inv.text}")
            add(kind, site, s.span, e, Binary("or", e, neg(inv.expr)), f"guard admits not {inv.text}")
    for site, kind, e, s in points:
        if kind != ASSIGNMENT_REPLACE:
            continue
        for d in (1, -1):
            new = _shift(e, d)
            add(kind, site, s.span, e, new, f"off by {'+' if d > 0 else '-'}1")
        target = s.target.name if isinstance(s.target, Var) else None
        for inv in invs:
            if inv.pattern not in (LINEAR, OLD_LINEAR, EQUAL) or target is None:
                continue
            lhs, rhs = inv.expr.left, inv.expr.right
            lhs_name = lhs.expr.name if isinstance(lhs, Old) and isinstance(lhs.expr, Var) else (
                lhs.name if isinstance(lhs, Var) else None)
            if lhs_name != target:
                continue
            rhs = _strip_old(rhs)
            if free_vars(rhs) <= scope:
                add(kind, site, s.span, e, rhs, f"invariant {inv.text}")
    entry_scope = set(r.param_names)
    for inv in invs:
        e = _strip_old(inv.expr)
        if free_vars(e) <= entry_scope:
            add(PRECONDITION_STRENGTHEN, None, r.span, TRUE, neg(e), f"exclude inputs with {inv.text}")
    if program is not None:
        out = [f for f in out if _typechecks(apply_fix(program, f))]
    if not out:
        raise NoCandidates(f"no fix template applies to {r.name}")
    return out[:cap]


def _strip_old(e: Expr) -> Expr:
    if isinstance(e, Old):
        return _strip_old(e.expr)
    return e.map_children(_strip_old)


def _typechecks(p: Program) -> bool:
    try:
        typecheck(p)
        return True
    except TypeCheckError:
        return False


# -- validation -------------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationVerdict:
    status: str  # valid | removes_failure_but_breaks_other | still_fails | unknown
    new_failures: tuple = ()
    detail: str = ""

    def to_json(self) -> dict:
        return {"status": self.status, "new_failures": list(self.new_failures), "detail": self.detail}


def regression_green(p: TypedProgram, t, step_budget: int = DEFAULT_STEP_BUDGET) -> bool:
    """A regression test is green when the run ends without a contract
    violation; inputs rejected by the target's own precondition are out of
    the routine's domain and do not count against it."""
    out = run_routine(p, t.routine, t.binding, step_budget)
    if isinstance(out, Normal):
        return True
    return (isinstance(out, ContractViolation) and out.kind == PRECONDITION
            and out.routine == t.routine and out.call_site is None)


class _VerdictCache:
    def __init__(self, cfg: SolverConfig):
        self.cfg = cfg
        self.cache: dict = {}

    def solve(self, vc):
        script = encode(vc, seed=self.cfg.seeds[0] if self.cfg.seeds else 0, timeout=self.cfg.timeout)
        key = script.render()
        if key not in self.cache:
            self.cache[key] = solve(script, self.cfg)
        return self.cache[key]


def validate_fix(p: TypedProgram, f: FixCandidate, cfg: SolverConfig | None = None,
                 failure: ProofFailure | None = None, tests: tuple = (), regression: tuple = (),
                 step_budget: int = DEFAULT_STEP_BUDGET, _cache: _VerdictCache | None = None) -> ValidationVerdict:
    """Apply ``f``, re-run the failing tests, then re-verify every routine."""
    cache = _cache or _VerdictCache(cfg or SolverConfig())
    try:
        patched = typecheck(apply_fix(p, f))
    except TypeCheckError as exc:
        return ValidationVerdict(STILL_FAILS, detail=f"ill-typed: {exc}")
    for t in tests:
        if run_test(patched, t, step_budget).status == REPRODUCES:
            return ValidationVerdict(STILL_FAILS, detail=f"test {t.name or t.routine} still fails")
    target = None
    if failure is not None:
        target = (failure.vc.routine, failure.vc.kind, failure.vc.label)
    failing, unknown = [], []
    for r in patched.program.routines:
        if r.name.startswith("__"):
            continue
        try:
            vcs = generate_vcs(patched, r.name)
        except VcGenError as exc:
            unknown.append(f"{r.name}: {exc}")
            continue
        if target is not None:
            vcs.sort(key=lambda v: (v.routine, v.kind, v.label) != target)
        for vc in vcs:
            verdict = cache.solve(vc)
            if isinstance(verdict, Valid):
                continue
            name = f"{vc.routine}.{vc.label} ({vc.kind})"
            if isinstance(verdict, Falsified):
                if (vc.routine, vc.kind, vc.label) == target:
                    return ValidationVerdict(STILL_FAILS, (name,), "original failure remains")
                failing.append(name)
            else:
                unknown.append(name)
    if failing:
        return ValidationVerdict(BREAKS_OTHER, tuple(failing))
    if unknown:
        return ValidationVerdict(UNKNOWN, tuple(unknown), "prover could not decide")
    red = [t.name or t.routine for t in tuple(tests) + tuple(regression)
           if not regression_green(patched, t, step_budget)]
    if red:
        return ValidationVerdict(BREAKS_OTHER, tuple(f"test {n}" for n in red), "regression tests fail")
    return ValidationVerdict(VALID)


def rank_fixes(validated: list) -> list[FixCandidate]:
    """Valid candidates: implementation before contract, then smaller edits,
    then earlier locations."""
    valid = [f for f, v in validated if v.status == VALID]

    def key(f: FixCandidate):
        loc = (f.location.line, f.location.col) if f.location else (0, 0)
        return (f.is_contract, f.edit_distance, loc, format_expr(f.replacement))

    return sorted(valid, key=key)


# -- sessions ---------------------------------------------------------------------------------


@dataclass
class FixReport:
    failure: ProofFailure
    counterexamples: list = field(default_factory=list)
    invariants: list = field(default_factory=list)
    candidates: list = field(default_factory=list)  # (FixCandidate, ValidationVerdict)
    ranked: list = field(default_factory=list)
    diagnostic: str | None = None
    metrics: dict = field(default_factory=dict)
    diffs: dict = field(default_factory=dict)  # rank -> unified diff text

    def to_json(self) -> dict:
        vc = self.failure.vc
        rank = {id(f): i for i, f in enumerate(self.ranked, start=1)}
        return {
            "routine": vc.routine, "vc": vc.id, "kind": vc.kind, "label": vc.label,
            "counterexamples": [format_binding(c.binding) for c in self.counterexamples],
            "invariants": [i.to_json() for i in self.invariants],
            "candidates": [
                {**f.to_json(), "verdict": v.to_json(), "rank": rank.get(id(f))}
                for f, v in self.candidates
            ],
            "valid_fixes": [
                {"rank": i, "fix": f.describe(), "diff": self.diffs.get(i, "")}
                for i, f in enumerate(self.ranked, start=1)
            ],
            "diagnostic": self.diagnostic,
            "metrics": self.metrics,
            "policy": "implementation fixes are ranked before contract fixes",
        }

    def text(self) -> str:
        vc = self.failure.vc
        lines = [f"{vc.routine}: {vc.runtime_kind.replace('_', ' ')} {vc.label} fails"]
        lines.append(f"  {len(self.counterexamples)} counterexamples, {len(self.invariants)} invariants, "
                     f"{len(self.candidates)} candidates, {len(self.ranked)} valid")
        for i, f in enumerate(self.ranked, start=1):
            lines.append(f"  {i}. {f.describe()}")
            for d in self.diffs.get(i, "").splitlines():
                lines.append(f"     {d}")
        if self.diagnostic:
            lines.append(f"  {self.diagnostic}")
        return "\n".join(lines)


def distinct_counterexamples(p: TypedProgram, vc, n: int = DEFAULT_CEX_COUNT,
                             cfg: SolverConfig | None = None, budget: int = DEFAULT_MIN_BUDGET) -> list:
    """Up to ``n`` minimized counterexamples, pairwise distinct.

    Each round blocks every earlier minimized input so minimization cannot
    collapse two models onto the same small witness.
    """
    cfg = cfg or SolverConfig()
    r = p.routine(vc.routine)
    seeds = list(cfg.seeds) or [0]
    blocks: list[str] = []
    out = []
    for i in range(n):
        seed = seeds[i % len(seeds)] + (i // len(seeds)) * 1000
        verdict = solve(encode(vc, seed=seed, timeout=cfg.timeout).with_assertions(*blocks), cfg)
        if not isinstance(verdict, Falsified):
            break
        cex = extract_counterexample(verdict.model, vc, r, seed=seed)
        if budget > 0:
            try:
                cex = minimize(cex, vc, budget, cfg, extra=tuple(blocks)).minimized
            except NotACounterexample:
                pass
        if cex.oversized:
            break
        out.append(cex)
        blocks.append(blocking_clause(cex))
    return out


def diversity_metrics(invs: list[CexInvariant], observations: list[dict], terms: list[Term]) -> dict:
    n = len(observations)
    structural = [i for i in invs if i.pattern != RANGE]
    inputs = [t.name for t in terms if t.entry]
    ratios = [len({repr(o[t]) for o in observations}) / n for t in inputs] if n else []
    return {
        "counterexamples": n,
        "structural_invariants": len(structural),
        "range_invariants": len(invs) - len(structural),
        "input_diversity": round(sum(ratios) / len(ratios), 6) if ratios else 0.0,
    }


def fix_failure(p: TypedProgram, failure: ProofFailure, cfg: SolverConfig | None = None,
                n_cex: int = DEFAULT_CEX_COUNT, budget: int = DEFAULT_MIN_BUDGET,
                cap: int = DEFAULT_CANDIDATE_CAP, jobs: int = 1, regression: tuple = (),
                step_budget: int = DEFAULT_STEP_BUDGET) -> FixReport:
    """Counterexamples, invariants, candidates, validation and ranking for one failure."""
    cfg = cfg or SolverConfig()
    vc = failure.vc
    r = p.routine(vc.routine)
    report = FixReport(failure)
    cexs = distinct_counterexamples(p, vc, n_cex, cfg, budget)
    report.counterexamples = cexs
    tests = []
    for c in cexs:
        t = counterexample_to_test(c, r, p.program.name, minimized=True)
        if run_test(p, t, step_budget).status == REPRODUCES:
            tests.append(t)
    observations = [observe(p, r, c.binding, step_budget) for c in cexs]
    invs = infer_invariants(cexs, r, observations=observations)
    report.invariants = invs
    report.metrics = diversity_metrics(invs, observations, _terms(r, observations)) if observations else {}
    try:
        candidates = synthesize_fixes(r, failure, invs, cap, program=p.program)
    except NoCandidates:
        candidates = []
    cache = _VerdictCache(cfg)

    def check(f):
        return validate_fix(p, f, cfg, failure, tuple(tests), tuple(regression), step_budget, cache)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            verdicts = list(pool.map(check, candidates))
    else:
        verdicts = [check(f) for f in candidates]
    report.candidates = list(zip(candidates, verdicts))
    report.ranked = rank_fixes(report.candidates)
    before = format_program(p.program).splitlines(keepends=True)
    for i, f in enumerate(report.ranked, start=1):
        after = format_program(apply_fix(p, f)).splitlines(keepends=True)
        report.diffs[i] = "".join(difflib.unified_diff(before, after, "original", f"fix {i}", n=1))
    if not report.ranked:
        m = report.metrics
        report.diagnostic = (
            f"no valid fix among {len(candidates)} candidates. The {m.get('counterexamples', 0)} "
            f"counterexamples share {m.get('structural_invariants', 0)} structural invariants and "
            f"have input diversity {m.get('input_diversity', 0.0)}; diverse counterexamples usually "
            "mean the contracts involved are too weak rather than the code being wrong")
    return report


def failures_of(p: TypedProgram, cfg: SolverConfig | None = None, routines: list[str] | None = None) -> list[ProofFailure]:
    """Proof failures of every (selected) routine, in program order."""
    cfg = cfg or SolverConfig()
    cache = _VerdictCache(cfg)
    out = []
    for r in p.program.routines:
        if routines is not None and r.name not in routines:
            continue
        for vc in generate_vcs(p, r.name):
            verdict = cache.solve(vc)
            if isinstance(verdict, Falsified):
                out.append(ProofFailure(vc, FALSIFIED, verdict.model))
            elif isinstance(verdict, Unknown):
                out.append(ProofFailure(vc, UNKNOWN, None))
    return out


__all__ = [
    "CexInvariant", "FixCandidate", "FixReport", "NoCandidates", "ValidationVerdict",
    "apply_fix", "distinct_counterexamples", "edit_points", "fix_failure", "infer_invariants",
    "rank_fixes", "regression_green", "synthesize_fixes", "tree_distance", "validate_fix",
]
