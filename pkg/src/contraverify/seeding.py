"""Seeding contradictions: trap properties whose counterexamples are test inputs.

Every coverage obligation (a branch, one polarity of an MC/DC condition, an
exact loop iteration count) becomes a deliberately failing ``check`` guarded
by a selector input ``__sc``. A counterexample to trap ``i`` sets ``__sc = i``
and drives execution to the trap, so after stripping the instrumentation it is
a test covering obligation ``i``.

Two instrumentation modes share one builder. Execution mode keeps every loop
(unrolled copies are followed by the residual loop) and preserves semantics
for any selector value that names no obligation. Solving mode replaces the
residual loop by a ``check`` that the loop has exited, which makes every trap
VC loop-free over a bounded number of iterations.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from .ast import (
    FALSE,
    TRUE,
    Assign,
    Binary,
    Call,
    Check,
    Clause,
    Expr,
    If,
    IntLit,
    Loop,
    Program,
    Routine,
    Type,
    Unary,
    Var,
    conj,
    disj,
    implies,
    neg,
)
from .coverage import CoverageReport, independent, is_degenerate, measure_coverage
from .evaluator import (
    CHECK,
    DEFAULT_STEP_BUDGET,
    ContractViolation,
    Divergence,
    RunRecord,
    run_routine,
)
from .logic import wd
from .printer import format_expr
from .proof2test import DEFAULT_MIN_BUDGET, NotACounterexample, minimize
from .smt import (
    Falsified,
    SolverConfig,
    Unknown,
    Valid,
    encode,
    extract_counterexample,
    solve,
)
from .structure import Decision, RoutineStructure, analyze, eval_decision, substitute_conditions
from .suite import Origin, TestCase, TestSuite
from .typecheck import TypedProgram, typecheck
from .vcgen import SiteKey, generate_vcs

SELECTOR = "__sc"
TRAP_PREFIX = "__trap_"
IMPLICIT_ELSE_SUFFIX = "_i"
COUNTER_PREFIX = "__it_"
CUT_PREFIX = "__cut_"
RESERVED_PREFIX = "__"

DEFAULT_UNROLL_DEPTH = 3
MAX_UNROLL_DEPTH = 8
COPY_CAP = 64
CUT_DEPTHS = (2, 4, 8)
_UNATE_LIMIT = 10

BRANCH, MCDC, LOOP_ITER = "branch", "mcdc", "loop_iter"
INFEASIBLE, UNKNOWN = "infeasible", "unknown"


class DegenerateCondition(Exception):
    """A condition that can never independently affect its decision."""

    def __init__(self, routine: str, decision: int, condition: int, text: str):
        super().__init__(f"{routine}: condition {condition + 1} ({text}) of decision {decision} "
                         "can never independently affect the outcome")
        self.routine = routine
        self.decision = decision
        self.condition = condition


# -- obligations ----------------------------------------------------------------


@dataclass(frozen=True)
class Obligation:
    id: int
    routine: str
    kind: str  # branch | mcdc | loop_iter
    branch: object = None  # BranchPoint
    decision: Decision | None = None
    condition: int | None = None
    polarity: bool | None = None
    outcome: bool | None = None  # constrained decision outcome (non-unate conditions only)
    loop: int | None = None
    iterations: int | None = None

    @property
    def label(self) -> str:
        return f"{TRAP_PREFIX}{self.id}"

    def origin(self) -> Origin:
        if self.kind == BRANCH:
            return Origin("seeded_branch", branch=self.branch.id)
        if self.kind == MCDC:
            return Origin("mcdc", decision=self.decision.id, condition=self.condition,
                          polarity=self.polarity)
        return Origin("loop_unroll", loop=self.loop, iterations=self.iterations)

    def describe(self) -> str:
        if self.kind == BRANCH:
            where = f" at {self.branch.span}" if self.branch.span else ""
            return f"branch {self.branch.id} ({self.branch.kind}){where}"
        if self.kind == MCDC:
            pol = "true" if self.polarity else "false"
            out = "" if self.outcome is None else f", decision {'true' if self.outcome else 'false'}"
            return f"decision {self.decision.id} condition {self.condition + 1} {pol}{out}"
        return f"loop {self.loop} exits after exactly {self.iterations} iterations"

    def hit_by(self, record: RunRecord) -> bool:
        """Whether a run of the original routine discharged this obligation."""
        if self.kind == BRANCH:
            return record.branch_hits.get((self.routine, self.branch.id), 0) > 0
        if self.kind == LOOP_ITER:
            return (self.routine, self.loop, self.iterations) in record.loop_iterations
        d = self.decision
        for routine, did, values, outcome in record.decision_evals:
            if routine != self.routine or did != d.id:
                continue
            if values[self.condition] != self.polarity:
                continue
            if self.outcome is not None and outcome != self.outcome:
                continue
            if independent(d.expr, d.conditions, values, self.condition):
                return True
        return False


@dataclass(frozen=True)
class CoverageGoal:
    """Branch coverage is always on; MC/DC and loop unrolling are optional."""

    mcdc: bool = False
    unroll_depth: int | None = None
    max_unroll: int = MAX_UNROLL_DEPTH

    def __post_init__(self):
        if self.unroll_depth is not None and not 0 <= self.unroll_depth <= self.max_unroll:
            raise ValueError(f"unroll depth must be in 0..{self.max_unroll}")

    def to_json(self) -> dict:
        return {"branch": True, "mcdc": self.mcdc, "unroll_depth": self.unroll_depth}


@dataclass
class InstrumentedProgram:
    program: TypedProgram
    original: TypedProgram
    selector: str
    obligations: dict  # (routine, obligation id) -> Obligation
    degenerate: list = field(default_factory=list)  # DegenerateCondition

    def for_routine(self, routine: str) -> list[Obligation]:
        return [o for (r, _), o in sorted(self.obligations.items()) if r == routine]


# -- boolean helpers -----------------------------------------------------------------


def simplify_bool(e: Expr) -> Expr:
    """Fold boolean literals through ``and``/``or``/``implies``/``not``."""
    if isinstance(e, Binary) and e.op in ("and", "or", "implies"):
        a, b = simplify_bool(e.left), simplify_bool(e.right)
        if e.op == "and":
            return conj(a, b)
        if e.op == "or":
            return disj(a, b)
        if b == FALSE:
            return neg(a)
        return implies(a, b)
    if isinstance(e, Unary) and e.op == "not":
        return neg(simplify_bool(e.operand))
    return e


def _xor(a: Expr, b: Expr) -> Expr:
    return simplify_bool(disj(conj(a, neg(b)), conj(neg(a), b)))


def independence_predicate(d: Decision, j: int) -> Expr:
    """``d[c_j := True] xor d[c_j := False]`` over the remaining conditions."""
    c = d.conditions[j]
    return _xor(simplify_bool(substitute_conditions(d.expr, {c: TRUE})),
                simplify_bool(substitute_conditions(d.expr, {c: FALSE})))


def is_unate(d: Decision, j: int) -> bool:
    """Whether ``d`` is monotone (in either direction) in condition ``j``."""
    n = len(d.conditions)
    if n > _UNATE_LIMIT:
        return False
    up = down = True
    for bits in itertools.product((False, True), repeat=n - 1):
        vals = dict(zip([c for k, c in enumerate(d.conditions) if k != j], bits))
        lo = eval_decision(d.expr, {**vals, d.conditions[j]: False})
        hi = eval_decision(d.expr, {**vals, d.conditions[j]: True})
        up = up and (not lo or hi)
        down = down and (not hi or lo)
    return up or down


def _literal(e: Expr, value: bool) -> Expr:
    return e if value else neg(e)


def _sc_is(oid: int) -> Expr:
    return Binary("=", Var(SELECTOR), IntLit(oid))


def _trap(oid: int, guard: Expr | None = None, implicit_else: bool = False) -> Check:
    label = f"{TRAP_PREFIX}{oid}" + (IMPLICIT_ELSE_SUFFIX if implicit_else else "")
    if guard is None:
        expr = Binary("/=", Var(SELECTOR), IntLit(oid))
    else:
        # the selector test comes first so other selector values never evaluate the guard
        expr = neg(Binary("and", _sc_is(oid), guard) if guard != TRUE else _sc_is(oid))
    return Check((Clause(label, expr),))


def _is_trap(s) -> bool:
    return isinstance(s, Check) and all((c.label or "").startswith(RESERVED_PREFIX) for c in s.clauses)


def _is_counter_assign(s) -> bool:
    return isinstance(s, Assign) and isinstance(s.target, Var) and s.target.name.startswith(COUNTER_PREFIX)


def _is_unrolled_copy(s) -> bool:
    return (isinstance(s, If) and s.else_body is None and len(s.arms) == 1
            and bool(s.arms[0][1]) and _is_counter_assign(s.arms[0][1][-1]))


# -- instrumentation -------------------------------------------------------------------


@dataclass
class _Plan:
    obligations: list
    mcdc: dict  # decision id -> [Obligation]
    loops: dict  # loop id -> [Obligation]
    copies: dict  # loop id -> number of unrolled copies
    degenerate: list


def _copy_plan(r: Routine, st: RoutineStructure, target: int) -> dict:
    """Unrolled copies per loop, shrinking inner loops so nested copies stay under the cap."""
    out: dict = {}

    def visit(stmts: tuple, outer: int) -> None:
        for s in stmts:
            if isinstance(s, If):
                for _, arm in s.arms:
                    visit(arm, outer)
                if s.else_body:
                    visit(s.else_body, outer)
            elif isinstance(s, Loop):
                visit(s.init, outer)
                n = min(target, COPY_CAP // outer) if target > 0 else 0
                out[st.loop_ids[id(s)]] = n
                visit(s.body, outer * max(n, 1))

    visit(r.body, 1)
    return out


def _plan(r: Routine, st: RoutineStructure, branch: bool, mcdc: bool, unroll: int | None) -> _Plan:
    obligations: list[Obligation] = []
    counter = itertools.count(len(st.branches) + 1)
    if branch:
        obligations += [Obligation(b.id, r.name, BRANCH, branch=b) for b in st.branches]
    by_decision: dict = {}
    degenerate: list = []
    if mcdc:
        for d in st.decisions:
            group = []
            for j, c in enumerate(d.conditions):
                if is_degenerate(d.expr, d.conditions, j):
                    degenerate.append(DegenerateCondition(r.name, d.id, j, format_expr(c)))
                    continue
                if is_unate(d, j):
                    cases = [(True, None), (False, None)]
                else:
                    cases = [(p, o) for p in (True, False) for o in (True, False)]
                for p, o in cases:
                    group.append(Obligation(next(counter), r.name, MCDC, decision=d, condition=j,
                                            polarity=p, outcome=o))
            by_decision[d.id] = group
            obligations += group
    by_loop: dict = {}
    copies = _copy_plan(r, st, unroll) if unroll is not None else {}
    if unroll is not None:
        for lp in st.loops:
            group = [Obligation(next(counter), r.name, LOOP_ITER, loop=lp.id, iterations=j)
                     for j in range(copies.get(lp.id, 0) + 1)]
            by_loop[lp.id] = group
            obligations += group
    return _Plan(obligations, by_decision, by_loop, copies, degenerate)


class _Builder:
    def __init__(self, r: Routine, st: RoutineStructure, plan: _Plan, branch: bool,
                 cut: dict | None, instrumented: set):
        self.r = r
        self.st = st
        self.plan = plan
        self.branch = branch
        self.cut = cut  # loop id -> copies in solving mode; None in execution mode
        self.instrumented = instrumented
        self.counters: list[str] = []

    def routine(self) -> Routine:
        body = self.block(self.r.body)
        if self.branch and self.st.entry is not None:
            body = (_trap(self.st.entry),) + body
        locals_ = tuple(self.r.locals) + tuple((n, Type.INTEGER) for n in self.counters)
        return replace(self.r, params=tuple(self.r.params) + ((SELECTOR, Type.INTEGER),),
                       locals=locals_, body=body)

    def block(self, stmts: tuple) -> tuple:
        out: list = []
        for s in stmts:
            if isinstance(s, If):
                out += self.if_(s)
            elif isinstance(s, Loop):
                out += self.loop(s)
            else:
                out.append(_rewrite_call(s, self.instrumented))
        return tuple(out)

    def mcdc_traps(self, did: int, earlier: list) -> list:
        group = self.plan.mcdc.get(did, [])
        if not group:
            return []
        d = self.st.decision(did)
        reach = conj(*(conj(wd(c), neg(c)) for c in earlier))
        defined = conj(*(wd(c) for c in d.conditions))
        out = []
        for o in group:
            c = d.conditions[o.condition]
            guard = conj(reach, defined, _literal(c, o.polarity), independence_predicate(d, o.condition))
            if o.outcome is not None:
                guard = conj(guard, _literal(d.expr, o.outcome))
            out.append(_trap(o.id, guard))
        return out

    def if_(self, s: If) -> list:
        arm_ids = self.st.if_arms[id(s)]
        dec_ids = self.st.if_decisions[id(s)]
        pre: list = []
        earlier: list = []
        for k, (cond, _) in enumerate(s.arms):
            pre += self.mcdc_traps(dec_ids[k], earlier)
            earlier.append(cond)
        arms = []
        for k, (cond, arm) in enumerate(s.arms):
            body = self.block(arm)
            if self.branch:
                body = (_trap(arm_ids[k]),) + body
            arms.append((cond, body))
        else_body = self.block(s.else_body) if s.else_body is not None else None
        if self.branch:
            if else_body is None:
                else_body = (_trap(arm_ids[-1], implicit_else=True),)
            else:
                else_body = (_trap(arm_ids[-1]),) + else_body
        return pre + [replace(s, arms=tuple(arms), else_body=else_body)]

    def loop(self, s: Loop) -> list:
        lid = self.st.loop_ids[id(s)]
        body_id, skip_id = self.st.loop_faces[id(s)]
        did = self.st.loop_decisions[id(s)]
        init = list(self.block(s.init))
        body = list(self.block(s.body))
        e = s.exit
        if self.branch:
            init.append(_trap(skip_id, conj(wd(e), e)))
            body.insert(0, _trap(body_id))
        exit_traps = self.mcdc_traps(did, [])
        init += exit_traps
        body += exit_traps
        iteration_traps = self.plan.loops.get(lid)
        if self.cut is not None:
            n = self.cut.get(lid, 0)
        else:
            n = self.plan.copies.get(lid, 0)
        if iteration_traps is None and n == 0 and self.cut is None:
            return [replace(s, init=tuple(init), body=tuple(body))]
        counter = f"{COUNTER_PREFIX}{lid}"
        if counter not in self.counters:
            self.counters.append(counter)
        step = Assign(Var(counter), Binary("+", Var(counter), IntLit(1)))
        copy = If(((neg(e), tuple(body) + (step,)),))
        init.append(Assign(Var(counter), IntLit(0)))
        init += [copy] * n
        for o in iteration_traps or ():
            at_j = Binary("=", Var(counter), IntLit(o.iterations))
            init.append(_trap(o.id, conj(at_j, wd(e), e)))
        if self.cut is not None:
            return init + [Check((Clause(f"{CUT_PREFIX}{lid}", e),))]
        return [replace(s, init=tuple(init), body=tuple(body))]


def _rewrite_call(s, instrumented: set):
    if isinstance(s, Call) and s.routine in instrumented:
        return replace(s, args=tuple(s.args) + (IntLit(0),))
    return s


def _rewrite_calls(stmts: tuple, instrumented: set) -> tuple:
    out = []
    for s in stmts:
        if isinstance(s, If):
            arms = tuple((c, _rewrite_calls(a, instrumented)) for c, a in s.arms)
            eb = _rewrite_calls(s.else_body, instrumented) if s.else_body is not None else None
            out.append(replace(s, arms=arms, else_body=eb))
        elif isinstance(s, Loop):
            out.append(replace(s, init=_rewrite_calls(s.init, instrumented),
                               body=_rewrite_calls(s.body, instrumented)))
        else:
            out.append(_rewrite_call(s, instrumented))
    return tuple(out)


def instrument(p: TypedProgram, branch: bool = True, mcdc: bool = False,
               unroll: int | None = None, routines: list[str] | None = None,
               cut_depth: int | None = None) -> InstrumentedProgram:
    """Insert trap properties into the selected routines.

    With ``cut_depth`` set, loops are unrolled ``max(unroll, cut_depth)``
    times and their residual loop is replaced by an exit check (solving mode).
    """
    targets = [r.name for r in p.program.routines] if routines is None else list(routines)
    targets = [t for t in targets if not t.startswith(RESERVED_PREFIX)]
    instrumented = set(targets)
    obligations: dict = {}
    degenerate: list = []
    new_routines = []
    for r in p.program.routines:
        if r.name not in instrumented:
            new_routines.append(replace(r, body=_rewrite_calls(r.body, instrumented)))
            continue
        st = analyze(r)
        plan = _plan(r, st, branch, mcdc, unroll)
        cut = None
        if cut_depth is not None:
            cut = _copy_plan(r, st, max(unroll or 0, cut_depth))
        builder = _Builder(r, st, plan, branch, cut, instrumented)
        new_routines.append(builder.routine())
        for o in plan.obligations:
            obligations[(r.name, o.id)] = o
        degenerate += plan.degenerate
    program = typecheck(replace(p.program, routines=tuple(new_routines)))
    return InstrumentedProgram(program, p, SELECTOR, obligations, degenerate)


def seed_branches(p: TypedProgram, routines: list[str] | None = None) -> InstrumentedProgram:
    """One trap per branch point: ``check __sc /= i end`` at the head of the branch."""
    return instrument(p, branch=True, routines=routines)


def seed_mcdc(p: TypedProgram, routines: list[str] | None = None) -> InstrumentedProgram:
    """Traps demanding each condition with each polarity while it independently
    determines its decision, placed just before the decision is evaluated.
    Degenerate conditions are listed in ``degenerate``, not raised."""
    return instrument(p, branch=False, mcdc=True, routines=routines)


def unroll_loops(p: TypedProgram, depth: int, routines: list[str] | None = None) -> InstrumentedProgram:
    """Unroll each loop ``depth`` times ahead of its residual loop and trap every
    exact exit count ``0..depth``."""
    if depth < 0:
        raise ValueError("unroll depth must be non-negative")
    return instrument(p, branch=False, unroll=depth, routines=routines)


# -- stripping ------------------------------------------------------------------------------


def _strip_block(stmts: tuple, instrumented: set) -> tuple:
    out = []
    for s in stmts:
        if _is_trap(s) or _is_counter_assign(s) or _is_unrolled_copy(s):
            continue
        if isinstance(s, If):
            arms = tuple((c, _strip_block(a, instrumented)) for c, a in s.arms)
            eb = s.else_body
            if eb is not None:
                implicit = (len(eb) == 1 and _is_trap(eb[0])
                            and eb[0].clauses[0].label.endswith(IMPLICIT_ELSE_SUFFIX))
                eb = None if implicit else _strip_block(eb, instrumented)
            out.append(replace(s, arms=arms, else_body=eb))
        elif isinstance(s, Loop):
            out.append(replace(s, init=_strip_block(s.init, instrumented),
                               body=_strip_block(s.body, instrumented)))
        elif isinstance(s, Call) and s.routine in instrumented:
            out.append(replace(s, args=tuple(s.args)[:-1]))
        else:
            out.append(s)
    return tuple(out)


def strip(p: Program | TypedProgram) -> Program:
    """Remove every trap, iteration counter, unrolled copy and selector input."""
    program = p.program if isinstance(p, TypedProgram) else p
    instrumented = {r.name for r in program.routines if SELECTOR in r.param_names}
    routines = []
    for r in program.routines:
        params = tuple((n, t) for n, t in r.params if n != SELECTOR)
        locals_ = tuple((n, t) for n, t in r.locals if not n.startswith(COUNTER_PREFIX))
        routines.append(replace(r, params=params, locals=locals_,
                                body=_strip_block(r.body, instrumented)))
    return replace(program, routines=tuple(routines))


# -- suite generation ---------------------------------------------------------------------------


@dataclass
class InfeasibilityReport:
    entries: list = field(default_factory=list)  # dicts: routine, obligation, kind, description, verdict
    warnings: list = field(default_factory=list)

    def infeasible_branches(self) -> set:
        return {(e["routine"], e["branch"]) for e in self.entries
                if e["verdict"] == INFEASIBLE and e.get("branch") is not None}

    def to_json(self) -> dict:
        return {"obligations": list(self.entries), "warnings": list(self.warnings)}


@dataclass
class _Outcome:
    obligation: Obligation
    verdict: str  # covered | infeasible | unknown | unconfirmed
    test: TestCase | None = None
    reason: str = ""


def _trap_id(label: str) -> int | None:
    if not label.startswith(TRAP_PREFIX):
        return None
    rest = label[len(TRAP_PREFIX):]
    if rest.endswith(IMPLICIT_ELSE_SUFFIX):
        rest = rest[: -len(IMPLICIT_ELSE_SUFFIX)]
    return int(rest) if rest.isdigit() else None


def _is_trap_site(key: SiteKey) -> bool:
    return key.kind == CHECK and _trap_id(key.label) is not None


def _trap_vcs(p: InstrumentedProgram, routine: str, allow_loops: bool) -> dict:
    out: dict = {}
    for vc in generate_vcs(p.program, routine, allow_missing_invariant=allow_loops, select=_is_trap_site):
        out.setdefault(_trap_id(vc.label), []).append(vc)
    return out


def _solve(vc, cfg: SolverConfig):
    verdict = None
    for seed in cfg.seeds or (0,):
        verdict = solve(encode(vc, seed=seed, timeout=cfg.timeout), cfg)
        if not isinstance(verdict, Unknown):
            return verdict, seed
    return verdict, None


def _harvest(p: TypedProgram, o: Obligation, vc, model, seed, cfg: SolverConfig, budget: int,
             step_budget: int) -> _Outcome:
    r = p.routine(o.routine)
    cex = extract_counterexample(model, vc, seed=seed)
    candidates = []
    if budget > 0:
        try:
            candidates.append(minimize(cex, vc, budget, cfg, fixed=(SELECTOR,)).minimized)
        except NotACounterexample:
            pass
    if not cex.oversized:
        candidates.append(cex)
    for c in candidates:
        if c.oversized:
            continue
        binding = {name: c.binding[name] for name, _ in r.params}
        record = RunRecord()
        outcome = run_routine(p, r.name, binding, step_budget, record)
        if isinstance(outcome, Divergence) or not o.hit_by(record):
            continue
        expected = outcome.label if isinstance(outcome, ContractViolation) else None
        t = TestCase(p.program.name, r.name, binding, expected, o.origin(),
                     minimized=c is not cex, name=f"{r.name}_{o.origin().tag()}")
        return _Outcome(o, "covered", t)
    return _Outcome(o, "unconfirmed", reason="counterexample does not reach the obligation at run time")


def _cut_depths(unroll: int | None, loopy: bool) -> list[int]:
    if not loopy:
        return [1]
    base = max(unroll or 0, 1)
    return sorted({base, *(d for d in CUT_DEPTHS if d >= base)})


def generate_suite(p: TypedProgram, goal: CoverageGoal | None = None, cfg: SolverConfig | None = None,
                   routines: list[str] | None = None, budget: int = DEFAULT_MIN_BUDGET,
                   jobs: int = 1, step_budget: int = DEFAULT_STEP_BUDGET,
                   ) -> tuple[TestSuite, CoverageReport, InfeasibilityReport]:
    """Instrument, solve every trap, and harvest tests against the original program."""
    goal = goal or CoverageGoal()
    cfg = cfg or SolverConfig()
    targets = [r.name for r in p.program.routines] if routines is None else list(routines)
    targets = [t for t in targets if not t.startswith(RESERVED_PREFIX)]
    suite = TestSuite(provenance={"generator": "seeding", "goal": goal.to_json(),
                                  "seeds": list(cfg.seeds)})
    report = InfeasibilityReport()
    names: set = set()
    outcomes: list[_Outcome] = []
    for routine in targets:
        outcomes += _routine_outcomes(p, routine, goal, cfg, budget, jobs, step_budget, report)
    for out in sorted(outcomes, key=lambda x: (targets.index(x.obligation.routine), x.obligation.id)):
        o = out.obligation
        if out.test is not None:
            t = out.test
            name, n = t.name, 2
            while name in names:
                name, n = f"{t.name}_{n}", n + 1
            if suite.add(replace(t, name=name)):
                names.add(name)
            continue
        entry = {"routine": o.routine, "obligation": o.id, "kind": o.kind,
                 "description": o.describe(),
                 "verdict": INFEASIBLE if out.verdict == INFEASIBLE else UNKNOWN}
        if o.kind == BRANCH:
            entry["branch"] = o.branch.id
        if out.reason:
            entry["reason"] = out.reason
        report.entries.append(entry)
        if entry["verdict"] == UNKNOWN:
            report.warnings.append(f"{o.routine}: obligation {o.id} ({o.describe()}) not covered: "
                                   f"{out.reason or 'solver could not decide'}")
    coverage = measure_coverage(p, suite, report.infeasible_branches(), targets, step_budget)
    return suite, coverage, report


def _routine_outcomes(p: TypedProgram, routine: str, goal: CoverageGoal, cfg: SolverConfig,
                      budget: int, jobs: int, step_budget: int, report: InfeasibilityReport) -> list:
    r = p.routine(routine)
    st = analyze(r)
    plain = instrument(p, mcdc=goal.mcdc, unroll=goal.unroll_depth, routines=[routine])
    for dc in plain.degenerate:
        report.warnings.append(str(dc))
    pending = plain.for_routine(routine)
    done: dict = {}
    unknown_reason: dict = {}
    for depth in _cut_depths(goal.unroll_depth, bool(st.loops)):
        if not pending:
            break
        if st.loops:
            solving = instrument(p, mcdc=goal.mcdc, unroll=goal.unroll_depth, routines=[routine],
                                 cut_depth=depth)
        else:
            solving = plain
        vcs = _trap_vcs(solving, routine, allow_loops=True)

        def attempt(o: Obligation):
            for vc in vcs.get(o.id, []):
                verdict, seed = _solve(vc, cfg)
                if isinstance(verdict, Falsified):
                    return _harvest(p, o, vc, verdict.model, seed, cfg, budget, step_budget)
                if isinstance(verdict, Unknown):
                    return _Outcome(o, UNKNOWN, reason=verdict.reason)
            return _Outcome(o, INFEASIBLE)

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(attempt, pending))
        else:
            results = [attempt(o) for o in pending]
        still = []
        for o, res in zip(pending, results):
            if res.verdict == "covered":
                done[o.id] = res
            else:
                if res.verdict != INFEASIBLE:
                    unknown_reason[o.id] = res.reason
                still.append(o)
        pending = still
    if pending and st.loops:
        # bounded unrolling found nothing; only the loop abstraction can prove unreachability
        havoc = _trap_vcs(plain, routine, allow_loops=True)
        for o in pending:
            proven = True
            for vc in havoc.get(o.id, []):
                verdict, _ = _solve(vc, cfg)
                if not isinstance(verdict, Valid):
                    proven = False
            if proven:
                done[o.id] = _Outcome(o, INFEASIBLE)
            else:
                reason = unknown_reason.get(o.id) or f"no counterexample within {max(CUT_DEPTHS)} iterations"
                done[o.id] = _Outcome(o, UNKNOWN, reason=reason)
    else:
        for o in pending:
            reason = unknown_reason.get(o.id)
            done[o.id] = _Outcome(o, UNKNOWN, reason=reason) if reason else _Outcome(o, INFEASIBLE)
    return [done[k] for k in sorted(done)]
