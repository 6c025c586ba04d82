"""Interpreter with full runtime contract checking.

Integers are 64-bit at run time; leaving that range halts the run with an
``overflow`` violation. Integer division and remainder follow the Euclidean
convention used by SMT-LIB (remainder always non-negative), so the logic and
the interpreter agree on every non-overflowing input.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

from .ast import (
    Assign,
    Binary,
    BoolLit,
    Call,
    Check,
    Clause,
    Count,
    Create,
    Expr,
    If,
    Index,
    IntLit,
    Loop,
    Old,
    Program,
    Quant,
    RESULT,
    Routine,
    Span,
    Type,
    Unary,
    Var,
)
from .structure import RoutineStructure, analyze
from .suite import TestCase
from .typecheck import TypedProgram

DEFAULT_STEP_BUDGET = 10**6
INT_MIN, INT_MAX = -(2**63), 2**63 - 1

PRECONDITION = "precondition"
POSTCONDITION = "postcondition"
CHECK = "check"
LOOP_INVARIANT = "loop_invariant"
LOOP_VARIANT = "loop_variant"
BOUNDS = "bounds"
OVERFLOW = "overflow"

INDEX_RANGE = "index_range"
NONZERO_DIVISOR = "nonzero_divisor"
ARRAY_SIZE = "array_size"
QUANTIFIER_BODY = "quantifier_body"
VARIANT_NONNEG = "variant_nonneg"
VARIANT_DECREASE = "variant_decrease"


def clause_label(c: Clause, kind: str) -> str:
    """The clause's own label, or a position-derived stand-in for unlabeled ones."""
    if c.label:
        return c.label
    if c.span is not None:
        return f"{kind}_l{c.span.line}c{c.span.col}"
    return kind


# -- outcomes --------------------------------------------------------------


@dataclass(frozen=True)
class Normal:
    result: object = None


@dataclass(frozen=True)
class ContractViolation:
    kind: str
    label: str
    span: Span | None
    routine: str
    call_site: Span | None = None

    def describe(self) -> str:
        where = f" at {self.span}" if self.span else ""
        return f"{self.kind} {self.label} violated in {self.routine}{where}"


@dataclass(frozen=True)
class Divergence:
    steps: int


Outcome = Union[Normal, ContractViolation, Divergence]


class _Violation(Exception):
    def __init__(self, v: ContractViolation):
        self.v = v


class _OutOfSteps(Exception):
    pass


# -- observation hooks ------------------------------------------------------


@dataclass
class RunRecord:
    """Everything coverage measurement needs from one run."""

    branch_hits: dict = field(default_factory=dict)  # (routine, branch id) -> count
    decision_evals: list = field(default_factory=list)  # (routine, did, cond values, outcome)
    loop_iterations: list = field(default_factory=list)  # (routine, loop id, k)
    trace: list = field(default_factory=list)


def euclid_div(a: int, b: int) -> int:
    q = a // abs(b)
    return q if b > 0 else -q


def euclid_mod(a: int, b: int) -> int:
    return a - b * euclid_div(a, b)


class Interpreter:
    def __init__(self, program: Program | TypedProgram, step_budget: int = DEFAULT_STEP_BUDGET,
                 record: RunRecord | None = None, trace: Callable[[str], None] | None = None):
        self.program = program.program if isinstance(program, TypedProgram) else program
        self.budget = step_budget
        self.steps = 0
        self.record = record
        self.trace = trace
        self._structures: dict[str, RoutineStructure] = {}

    # -- bookkeeping -------------------------------------------------------

    def structure(self, r: Routine) -> RoutineStructure:
        st = self._structures.get(r.name)
        if st is None:
            st = self._structures[r.name] = analyze(r)
        return st

    def _log(self, line: str) -> None:
        if self.trace is not None:
            self.trace(line)
        if self.record is not None:
            self.record.trace.append(line)

    def _hit(self, routine: str, bid: int) -> None:
        self._log(f"BRANCH {bid}")
        if self.record is not None:
            key = (routine, bid)
            self.record.branch_hits[key] = self.record.branch_hits.get(key, 0) + 1

    def _step(self) -> None:
        self.steps += 1
        if self.steps > self.budget:
            raise _OutOfSteps()

    # -- entry points --------------------------------------------------------

    def run(self, routine: str, args: dict) -> Outcome:
        r = self.program.routine(routine)
        frame = {}
        for name, ty in r.params:
            frame[name] = _coerce(args[name], ty)
        try:
            return Normal(self.invoke(r, frame, caller_site=None))
        except _Violation as exc:
            v = exc.v
            self._log(f"VIOLATION {v.kind} {v.label} {v.span or '-'}")
            return v
        except _OutOfSteps:
            return Divergence(self.steps)

    def invoke(self, r: Routine, frame: dict, caller_site: Span | None):
        self._log(f"ENTER {r.name}")
        for name, ty in r.locals:
            frame[name] = _default(ty)
        if r.result_type is not None:
            frame[RESULT] = _default(r.result_type)
        olds = self._snapshot_olds(r, frame)
        for c in r.require:
            if not self._assertion(c.expr, frame, r, PRECONDITION, clause_label(c, PRECONDITION),
                                   c.span, caller_site, blame_kind=PRECONDITION):
                raise _Violation(ContractViolation(PRECONDITION, clause_label(c, PRECONDITION),
                                                   c.span, r.name, caller_site))
        st = self.structure(r)
        if st.entry is not None:
            self._hit(r.name, st.entry)
        self.block(r.body, frame, r)
        for c in r.ensure:
            label = clause_label(c, POSTCONDITION)
            if not self._assertion(c.expr, frame, r, POSTCONDITION, label, c.span, None, olds=olds):
                raise _Violation(ContractViolation(POSTCONDITION, label, c.span, r.name))
        return frame.get(RESULT)

    def _snapshot_olds(self, r: Routine, frame: dict) -> dict:
        olds: dict = {}
        for c in r.ensure:
            for e in c.expr.walk():
                if isinstance(e, Old) and e not in olds:
                    try:
                        olds[e] = ("ok", _copy(self.eval(e.expr, frame, r)))
                    except _Violation as exc:
                        olds[e] = ("err", exc)
        return olds

    def _assertion(self, e: Expr, frame: dict, r: Routine, kind: str, label: str,
                   span: Span | None, caller_site: Span | None, olds: dict | None = None,
                   blame_kind: str | None = None) -> bool:
        if blame_kind is None:
            return self.eval(e, frame, r, olds)
        # precondition evaluation failures blame the caller
        try:
            return self.eval(e, frame, r, olds)
        except _Violation as exc:
            if exc.v.kind == OVERFLOW:
                raise
            raise _Violation(ContractViolation(blame_kind, label, span, r.name, caller_site))

    # -- statements ----------------------------------------------------------

    def block(self, stmts: tuple, frame: dict, r: Routine) -> None:
        for s in stmts:
            self.stmt(s, frame, r)

    def stmt(self, s, frame: dict, r: Routine) -> None:
        self._step()
        if isinstance(s, Assign):
            if isinstance(s.target, Index):
                name = s.target.array.name
                idx = self.eval(s.target.index, frame, r)
                value = self.eval(s.value, frame, r)
                arr = frame[name]
                if not 1 <= idx <= len(arr):
                    raise _Violation(ContractViolation(BOUNDS, INDEX_RANGE, s.target.span, r.name))
                arr[idx - 1] = value
            else:
                frame[s.target.name] = _copy(self.eval(s.value, frame, r))
        elif isinstance(s, Create):
            n = self.eval(s.size, frame, r)
            if n < 0:
                raise _Violation(ContractViolation(BOUNDS, ARRAY_SIZE, s.span, r.name))
            if n > 10**7:
                raise _Violation(ContractViolation(OVERFLOW, "overflow", s.span, r.name))
            frame[s.target] = [0] * n
        elif isinstance(s, If):
            st = self.structure(r)
            arm_ids = st.if_arms.get(id(s))
            dec_ids = st.if_decisions.get(id(s))
            for k, (cond, arm) in enumerate(s.arms):
                value = self.eval(cond, frame, r)
                if dec_ids is not None:
                    self._record_decision(r, dec_ids[k], cond, frame, value)
                if value:
                    if arm_ids is not None:
                        self._hit(r.name, arm_ids[k])
                    self.block(arm, frame, r)
                    return
            if arm_ids is not None:
                self._hit(r.name, arm_ids[-1])
            if s.else_body is not None:
                self.block(s.else_body, frame, r)
        elif isinstance(s, Loop):
            self.loop(s, frame, r)
        elif isinstance(s, Check):
            for c in s.clauses:
                label = clause_label(c, CHECK)
                if not self.eval(c.expr, frame, r):
                    raise _Violation(ContractViolation(CHECK, label, c.span, r.name))
        elif isinstance(s, Call):
            callee = self.program.routine(s.routine)
            values = [_copy(self.eval(a, frame, r)) for a in s.args]
            callee_frame = {name: v for (name, _), v in zip(callee.params, values)}
            result = self.invoke(callee, callee_frame, caller_site=s.span)
            self._log(f"ENTER {r.name}")
            if s.target is not None:
                frame[s.target] = _copy(result)
        else:
            raise TypeError(f"unknown statement {s!r}")

    def loop(self, s: Loop, frame: dict, r: Routine) -> None:
        st = self.structure(r)
        faces = st.loop_faces.get(id(s))
        loop_id = st.loop_ids.get(id(s))
        did = st.loop_decisions.get(id(s))
        self.block(s.init, frame, r)
        k = 0
        previous = None
        while True:
            self._step()
            for c in s.invariant:
                label = clause_label(c, LOOP_INVARIANT)
                if not self.eval(c.expr, frame, r):
                    raise _Violation(ContractViolation(LOOP_INVARIANT, label, c.span, r.name))
            if s.variant is not None:
                v = self.eval(s.variant, frame, r)
                if v < 0:
                    raise _Violation(ContractViolation(LOOP_VARIANT, VARIANT_NONNEG, s.variant.span, r.name))
                if previous is not None and not v < previous:
                    raise _Violation(ContractViolation(LOOP_VARIANT, VARIANT_DECREASE, s.variant.span, r.name))
                previous = v
            done = self.eval(s.exit, frame, r)
            if did is not None:
                self._record_decision(r, did, s.exit, frame, done)
            if done:
                if faces is not None and k == 0:
                    self._hit(r.name, faces[1])
                self._log(f"LOOP-ITER {s.span or '-'} {k}")
                if self.record is not None and loop_id is not None:
                    self.record.loop_iterations.append((r.name, loop_id, k))
                return
            if faces is not None:
                self._hit(r.name, faces[0])
            self.block(s.body, frame, r)
            k += 1

    def _record_decision(self, r: Routine, did: int, cond: Expr, frame: dict, outcome: bool) -> None:
        if self.record is None:
            return
        d = self.structure(r).decision(did)
        values = []
        for c in d.conditions:
            try:
                values.append(bool(self.eval(c, frame, r)))
            except _Violation:
                values.append(None)
        self.record.decision_evals.append((r.name, did, tuple(values), bool(outcome)))

    # -- expressions ---------------------------------------------------------

    def eval(self, e: Expr, frame: dict, r: Routine, olds: dict | None = None):
        if isinstance(e, IntLit):
            return e.value
        if isinstance(e, BoolLit):
            return e.value
        if isinstance(e, Var):
            return frame[e.name]
        if isinstance(e, Index):
            arr = self.eval(e.array, frame, r, olds)
            idx = self.eval(e.index, frame, r, olds)
            if not 1 <= idx <= len(arr):
                raise _Violation(ContractViolation(BOUNDS, INDEX_RANGE, e.span, r.name))
            return arr[idx - 1]
        if isinstance(e, Count):
            return len(self.eval(e.array, frame, r, olds))
        if isinstance(e, Unary):
            v = self.eval(e.operand, frame, r, olds)
            if e.op == "not":
                return not v
            return self._int(-v, e, r)
        if isinstance(e, Old):
            status, value = olds[e]
            if status == "err":
                raise value
            return value
        if isinstance(e, Binary):
            op = e.op
            if op == "and":
                return bool(self.eval(e.left, frame, r, olds)) and bool(self.eval(e.right, frame, r, olds))
            if op == "or":
                return bool(self.eval(e.left, frame, r, olds)) or bool(self.eval(e.right, frame, r, olds))
            if op == "implies":
                return (not self.eval(e.left, frame, r, olds)) or bool(self.eval(e.right, frame, r, olds))
            a = self.eval(e.left, frame, r, olds)
            b = self.eval(e.right, frame, r, olds)
            if op == "+":
                return self._int(a + b, e, r)
            if op == "-":
                return self._int(a - b, e, r)
            if op == "*":
                return self._int(a * b, e, r)
            if op in ("//", "\\\\"):
                if b == 0:
                    raise _Violation(ContractViolation(BOUNDS, NONZERO_DIVISOR, e.span, r.name))
                return self._int(euclid_div(a, b) if op == "//" else euclid_mod(a, b), e, r)
            if op == "=":
                return a == b
            if op == "/=":
                return a != b
            if op == "<":
                return a < b
            if op == "<=":
                return a <= b
            if op == ">":
                return a > b
            if op == ">=":
                return a >= b
            raise ValueError(op)
        if isinstance(e, Quant):
            lo = self.eval(e.lo, frame, r, olds)
            hi = self.eval(e.hi, frame, r, olds)
            inner = dict(frame)
            outcome = e.kind == "for_all"
            # every index is evaluated so that well-definedness failures are
            # reported regardless of where the truth value is decided
            for k in range(lo, hi + 1):
                self._step()
                inner[e.var] = k
                try:
                    v = bool(self.eval(e.body, inner, r, olds))
                except _Violation as exc:
                    if exc.v.kind == OVERFLOW:
                        raise
                    raise _Violation(ContractViolation(BOUNDS, QUANTIFIER_BODY, e.span, r.name))
                if e.kind == "for_all":
                    outcome = outcome and v
                else:
                    outcome = outcome or v
            return outcome
        raise TypeError(f"cannot evaluate {e!r}")

    def _int(self, v: int, e: Expr, r: Routine) -> int:
        if not INT_MIN <= v <= INT_MAX:
            raise _Violation(ContractViolation(OVERFLOW, "overflow", e.span, r.name))
        return v


def _default(ty: Type):
    if ty is Type.INTEGER:
        return 0
    if ty is Type.BOOLEAN:
        return False
    return []


def _copy(v):
    return list(v) if isinstance(v, list) else v


def _coerce(v, ty: Type):
    if ty is Type.ARRAY:
        return [int(x) for x in v]
    if ty is Type.BOOLEAN:
        return bool(v)
    return int(v)


def run_routine(p: Program | TypedProgram, routine: str, args: dict,
                step_budget: int = DEFAULT_STEP_BUDGET, record: RunRecord | None = None,
                trace: Callable[[str], None] | None = None) -> Outcome:
    """Run ``routine`` on ``args``; deterministic for a given budget."""
    return Interpreter(p, step_budget, record, trace).run(routine, args)


# -- test verdicts ---------------------------------------------------------------


@dataclass(frozen=True)
class TestVerdict:
    __test__ = False

    status: str  # reproduces_expected_violation | passes_unexpectedly | other_violation | passes
    outcome: object

    @property
    def ok(self) -> bool:
        """Whether the test met its recorded expectation."""
        return self.status in (REPRODUCES, PASSES)


REPRODUCES = "reproduces_expected_violation"
PASSES_UNEXPECTEDLY = "passes_unexpectedly"
OTHER_VIOLATION = "other_violation"
PASSES = "passes"


def run_test(p: Program | TypedProgram, t: TestCase, step_budget: int = DEFAULT_STEP_BUDGET,
             record: RunRecord | None = None) -> TestVerdict:
    outcome = run_routine(p, t.routine, t.binding, step_budget, record)
    if isinstance(outcome, ContractViolation):
        if t.expected is not None and outcome.label == t.expected:
            return TestVerdict(REPRODUCES, outcome)
        return TestVerdict(OTHER_VIOLATION, outcome)
    if isinstance(outcome, Divergence):
        return TestVerdict(OTHER_VIOLATION, outcome)
    if t.expected is not None:
        return TestVerdict(PASSES_UNEXPECTEDLY, outcome)
    return TestVerdict(PASSES, outcome)
