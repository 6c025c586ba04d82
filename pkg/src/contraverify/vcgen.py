"""Verification conditions.

Every runtime assertion point of a routine (postcondition clause, check,
loop invariant, variant, callee precondition, array/divisor well-definedness)
is a *site*. A routine yields one VC per site: the site is asserted and every
other site is assumed where it is reached. A binding therefore falsifies the
VC of site ``L`` exactly when ``L`` is the first assertion that fails on the
run, which is what makes proof failures and test outcomes line up.

The generator executes the routine symbolically in the forward direction,
recording each site occurrence together with its path guard. Loops are cut
with their invariant (assert on entry, havoc the frame, assume, check one
arbitrary iteration). :func:`wp` offers the classic backward transformer.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

from .ast import (
    Assign,
    Binary,
    Call,
    Check,
    Count,
    Create,
    Expr,
    If,
    Index,
    IntLit,
    Ite,
    Loop,
    NewArray,
    Old,
    Program,
    Quant,
    RESULT,
    Routine,
    Span,
    Store,
    TRUE,
    Type,
    Var,
    assigned_vars,
    conj,
    default_value_expr,
    disj,
    expr_size,
    free_vars,
    implies,
    iter_statements,
    neg,
)
from .evaluator import (
    ARRAY_SIZE,
    BOUNDS,
    CHECK,
    INDEX_RANGE,
    LOOP_INVARIANT,
    LOOP_VARIANT,
    POSTCONDITION,
    PRECONDITION,
    VARIANT_DECREASE,
    VARIANT_NONNEG,
    ContractViolation,
    clause_label,
)
from .logic import fresh_name, subst, wd, wd_sites
from .printer import format_expr
from .typecheck import TypedProgram

POSTCONDITION_CLAUSE = "postcondition_clause"
PRECONDITION_OF_CALLEE = "precondition_of_callee"
CHECK_VC = "check"
LOOP_INVARIANT_INIT = "loop_invariant_init"
LOOP_INVARIANT_MAINTAIN = "loop_invariant_maintain"
LOOP_VARIANT_NONNEG = "loop_variant_nonneg"
LOOP_VARIANT_DECREASE = "loop_variant_decrease"
BOUNDS_VC = "bounds"

VC_KINDS = (
    POSTCONDITION_CLAUSE, PRECONDITION_OF_CALLEE, CHECK_VC, LOOP_INVARIANT_INIT,
    LOOP_INVARIANT_MAINTAIN, LOOP_VARIANT_NONNEG, LOOP_VARIANT_DECREASE, BOUNDS_VC,
)

RUNTIME_KIND = {
    POSTCONDITION_CLAUSE: POSTCONDITION,
    PRECONDITION_OF_CALLEE: PRECONDITION,
    CHECK_VC: CHECK,
    LOOP_INVARIANT_INIT: LOOP_INVARIANT,
    LOOP_INVARIANT_MAINTAIN: LOOP_INVARIANT,
    LOOP_VARIANT_NONNEG: LOOP_VARIANT,
    LOOP_VARIANT_DECREASE: LOOP_VARIANT,
    BOUNDS_VC: BOUNDS,
}

# symbolic values larger than this are named by a fresh defined symbol
_INLINE_LIMIT = 48


class VcGenError(Exception):
    pass


class MissingInvariant(VcGenError):
    def __init__(self, routine: str, span: Span | None):
        self.routine = routine
        self.span = span
        super().__init__(f"loop at {span or '?'} in {routine} has no invariant")


class UnsupportedConstruct(VcGenError):
    pass


class ScopeError(VcGenError):
    pass


@dataclass(frozen=True)
class SiteKey:
    """Identity of an assertion point. ``owner`` is the routine a runtime
    violation of this site is reported in (the callee, for preconditions)."""

    kind: str
    label: str
    span: Span | None
    owner: str
    call_site: Span | None = None


@dataclass(frozen=True)
class VerificationCondition:
    id: str
    routine: str
    kind: str
    label: str
    span: Span | None
    obligation: Expr
    assumptions: tuple = ()
    definitions: tuple = ()  # equations naming auxiliary symbols; always satisfiable
    path_context: str = ""
    owner: str = ""
    call_site: Span | None = None
    var_types: dict = field(default_factory=dict, hash=False, compare=False)
    inputs: tuple = ()  # routine parameters, ((name, Type), ...)

    @property
    def runtime_kind(self) -> str:
        return RUNTIME_KIND[self.kind]

    @property
    def source(self) -> tuple:
        return (self.routine, self.label, self.span)

    def matches(self, v: ContractViolation) -> bool:
        """Whether a runtime violation is the failure this VC describes."""
        return (v.kind == self.runtime_kind and v.label == self.label
                and v.routine == (self.owner or self.routine))

    def formula(self) -> Expr:
        """The closed validity target ``definitions ∧ assumptions ⟹ obligation``."""
        return implies(conj(*self.definitions, *self.assumptions), self.obligation)

    def symbols(self) -> set[str]:
        out: set[str] = set()
        for e in (self.obligation, *self.assumptions, *self.definitions):
            out |= free_vars(e)
        return out


FALSIFIED, UNKNOWN, TIMEOUT = "falsified", "unknown", "timeout"


@dataclass(frozen=True)
class ProofFailure:
    """A VC the prover could not establish; ``model`` is present iff falsified."""

    vc: VerificationCondition
    verdict: str
    model: object = field(default=None, compare=False)


def assume_context(vc: VerificationCondition, extra: Expr) -> VerificationCondition:
    """Conjoin ``extra`` to the assumption side of ``vc``."""
    unknown = free_vars(extra) - set(vc.var_types)
    if unknown:
        raise ScopeError(f"unknown symbols in assumption: {', '.join(sorted(unknown))}")
    return VerificationCondition(
        vc.id, vc.routine, vc.kind, vc.label, vc.span, vc.obligation,
        vc.assumptions + (extra,), vc.definitions, vc.path_context, vc.owner,
        vc.call_site, vc.var_types, vc.inputs,
    )


def format_vc(vc: VerificationCondition) -> str:
    """Diagnostic rendering, one stanza per obligation."""
    lines = [f"VC {vc.routine}.{vc.id} [{vc.kind}] {vc.label} at {vc.span or '-'}"]
    if vc.path_context:
        lines.append(f"  path: {vc.path_context}")
    for d in vc.definitions:
        lines.append(f"  define: {format_expr(d)}")
    for a in vc.assumptions:
        lines.append(f"  assume: {format_expr(a)}")
    lines.append(f"  prove:  {format_expr(vc.obligation)}")
    return "\n".join(lines)


# -- instantiation ---------------------------------------------------------------


def instantiate(e: Expr, state: dict, entry: dict) -> Expr:
    """Evaluate ``e`` symbolically: variables read ``state``, ``old`` reads ``entry``."""
    if isinstance(e, Var):
        return state.get(e.name, e)
    if isinstance(e, Old):
        return instantiate(e.expr, entry, entry)
    if isinstance(e, Quant):
        s2 = {k: v for k, v in state.items() if k != e.var}
        e2 = {k: v for k, v in entry.items() if k != e.var}
        var, body = e.var, e.body
        clash: set = set()
        for v in itertools.chain(s2.values(), e2.values()):
            clash |= free_vars(v)
        if var in clash:
            new = fresh_name(var)
            body = subst(body, {var: Var(new)}, into_old=True)
            var = new
        return Quant(e.kind, var, instantiate(e.lo, state, entry), instantiate(e.hi, state, entry),
                     instantiate(body, s2, e2), span=e.span)
    return e.map_children(lambda c: instantiate(c, state, entry))


def count_of(t: Expr) -> Expr:
    """Count of a symbolic array term."""
    if isinstance(t, Store):
        return count_of(t.array)
    if isinstance(t, NewArray):
        return t.count
    if isinstance(t, Ite):
        return Ite(t.cond, count_of(t.then), count_of(t.other))
    return Count(t)


def _in_range(arr: Expr, idx: Expr) -> Expr:
    return conj(Binary("<=", IntLit(1), idx), Binary("<=", idx, Count(arr)))


# -- forward symbolic execution -----------------------------------------------------


@dataclass
class _Event:
    key: SiteKey | None  # None: a plain assumption
    guard: Expr
    formula: Expr
    trail: str


class _Exec:
    def __init__(self, program: Program, r: Routine, allow_missing_invariant: bool):
        self.program = program
        self.r = r
        self.allow_missing = allow_missing_invariant
        self.events: list[_Event] = []
        self.definitions: list[Expr] = []
        self.types: dict[str, Type] = {n: t for n, t in r.params}
        self.trail: list[str] = []
        self._counter = itertools.count(1)
        self.entry: dict = {}
        self.var_types = r.var_types()

    # -- helpers ---------------------------------------------------------------

    def fresh(self, base: str, ty: Type) -> Var:
        name = f"{base}@{next(self._counter)}"
        self.types[name] = ty
        return Var(name)

    def name_value(self, base: str, ty: Type, term: Expr) -> Expr:
        if expr_size(term) <= _INLINE_LIMIT:
            return term
        v = self.fresh(base, ty)
        self.definitions.append(Binary("=", v, term))
        return v

    def site(self, key: SiteKey, formula: Expr, state: dict, pc: Expr) -> None:
        self.events.append(_Event(key, pc, instantiate(formula, state, self.entry), " > ".join(self.trail)))

    def assume(self, formula: Expr, state: dict, pc: Expr) -> None:
        self.events.append(_Event(None, pc, instantiate(formula, state, self.entry), " > ".join(self.trail)))

    def wd(self, e: Expr, state: dict, pc: Expr) -> None:
        for s in wd_sites(e):
            self.site(SiteKey(BOUNDS_VC, s.label, s.span, self.r.name), s.formula, state, pc)

    def clause_sites(self, clauses: tuple, kind: str, runtime_kind: str, state: dict, pc: Expr) -> None:
        for c in clauses:
            self.wd(c.expr, state, pc)
            key = SiteKey(kind, clause_label(c, runtime_kind), c.span, self.r.name)
            self.site(key, c.expr, state, pc)

    # -- routine -----------------------------------------------------------------

    def run(self) -> None:
        r = self.r
        state: dict = {name: Var(name) for name in r.param_names}
        for name, ty in r.locals:
            state[name] = default_value_expr(ty)
        if r.result_type is not None:
            state[RESULT] = default_value_expr(r.result_type)
        self.entry = dict(state)
        state, pc = self.block(r.body, state, TRUE)
        self.trail = ["postcondition"]
        self.clause_sites(r.ensure, POSTCONDITION_CLAUSE, POSTCONDITION, state, pc)

    def block(self, stmts: tuple, state: dict, pc: Expr) -> tuple[dict, Expr]:
        for s in stmts:
            state, pc = self.stmt(s, state, pc)
        return state, pc

    def stmt(self, s, state: dict, pc: Expr) -> tuple[dict, Expr]:
        if isinstance(s, Assign):
            if isinstance(s.target, Index):
                name = s.target.array.name
                self.wd(s.target.index, state, pc)
                self.wd(s.value, state, pc)
                self.site(SiteKey(BOUNDS_VC, INDEX_RANGE, s.target.span, self.r.name),
                          _in_range(Var(name), s.target.index), state, pc)
                term = Store(state[name], instantiate(s.target.index, state, self.entry),
                             instantiate(s.value, state, self.entry))
                out = dict(state)
                out[name] = self.name_value(name, Type.ARRAY, term)
                return out, pc
            name = s.target.name
            self.wd(s.value, state, pc)
            out = dict(state)
            out[name] = self.name_value(name, self.var_types[name],
                                        instantiate(s.value, state, self.entry))
            return out, pc
        if isinstance(s, Create):
            self.wd(s.size, state, pc)
            self.site(SiteKey(BOUNDS_VC, ARRAY_SIZE, s.span, self.r.name),
                      Binary(">=", s.size, IntLit(0)), state, pc)
            out = dict(state)
            out[s.target] = NewArray(instantiate(s.size, state, self.entry))
            return out, pc
        if isinstance(s, Check):
            self.clause_sites(s.clauses, CHECK_VC, CHECK, state, pc)
            return state, pc
        if isinstance(s, If):
            return self.if_(s, state, pc)
        if isinstance(s, Loop):
            return self.loop(s, state, pc)
        if isinstance(s, Call):
            return self.call(s, state, pc)
        raise UnsupportedConstruct(f"unsupported statement {type(s).__name__}")

    def if_(self, s: If, state: dict, pc: Expr) -> tuple[dict, Expr]:
        where = f"if@{s.span or '?'}"
        conds: list[Expr] = []
        outs: list[dict] = []
        pcs: list[tuple[Expr, Expr]] = []
        cur = pc
        for k, (cond, arm) in enumerate(s.arms):
            self.trail.append(f"{where} guard {k + 1}")
            self.wd(cond, state, cur)
            self.trail.pop()
            c = instantiate(cond, state, self.entry)
            self.trail.append(f"{where} {'then' if k == 0 else f'elseif {k}'}")
            arm_state, arm_pc = self.block(arm, dict(state), conj(cur, c))
            outs.append(arm_state)
            pcs.append((conj(cur, c), arm_pc))
            self.trail.pop()
            conds.append(c)
            cur = conj(cur, neg(c))
        self.trail.append(f"{where} else")
        other, other_pc = self.block(s.else_body or (), dict(state), cur)
        pcs.append((cur, other_pc))
        self.trail.pop()
        merged = dict(other)
        for name in set().union(*(o.keys() for o in outs), other.keys()):
            val = other.get(name, state.get(name))
            for c, o in zip(reversed(conds), reversed(outs)):
                v = o.get(name, state.get(name))
                if v != val:
                    val = Ite(c, v, val)
            if val != state.get(name):
                val = self.name_value(name, self._type(name), val)
            merged[name] = val
        if all(a == b for a, b in pcs):
            return merged, pc
        # some arm ends in a loop exit: later code runs under the union of arm exits
        return merged, disj(*(b for _, b in pcs))

    def _type(self, name: str) -> Type:
        return self.var_types.get(name) or self.types[name]

    def loop(self, s: Loop, state: dict, pc: Expr) -> tuple[dict, Expr]:
        if not s.has_invariant and not s.invariant and not self.allow_missing:
            raise MissingInvariant(self.r.name, s.span)
        where = f"loop@{s.span or '?'}"
        state, pc = self.block(s.init, state, pc)
        self.trail.append(f"{where} entry")
        self.clause_sites(s.invariant, LOOP_INVARIANT_INIT, LOOP_INVARIANT, state, pc)
        self.trail.pop()
        head = dict(state)
        for name in assigned_vars(s.body):
            head[name] = self.fresh(name, self._type(name))
        self.trail.append(f"{where} head")
        inv = conj(*(conj(wd(c.expr), c.expr) for c in s.invariant))
        self.assume(inv, head, pc)
        if s.variant is not None:
            self.wd(s.variant, head, pc)
            self.site(SiteKey(LOOP_VARIANT_NONNEG, VARIANT_NONNEG, s.variant.span, self.r.name),
                      Binary(">=", s.variant, IntLit(0)), head, pc)
        self.wd(s.exit, head, pc)
        self.trail.pop()
        done = instantiate(s.exit, head, self.entry)
        self.trail.append(f"{where} iteration")
        body_pc = conj(pc, neg(done))
        after, body_pc = self.block(s.body, dict(head), body_pc)
        self.clause_sites(s.invariant, LOOP_INVARIANT_MAINTAIN, LOOP_INVARIANT, after, body_pc)
        if s.variant is not None:
            self.wd(s.variant, after, body_pc)
            self.site(SiteKey(LOOP_VARIANT_NONNEG, VARIANT_NONNEG, s.variant.span, self.r.name),
                      Binary(">=", s.variant, IntLit(0)), after, body_pc)
            before = instantiate(s.variant, head, self.entry)
            self.events.append(_Event(
                SiteKey(LOOP_VARIANT_DECREASE, VARIANT_DECREASE, s.variant.span, self.r.name),
                body_pc, Binary("<", instantiate(s.variant, after, self.entry), before),
                " > ".join(self.trail)))
        self.trail.pop()
        # the body path is cut here; execution continues on the exit path
        return head, conj(pc, done)

    def call(self, s: Call, state: dict, pc: Expr) -> tuple[dict, Expr]:
        callee = self.program.routine(s.routine)
        for a in s.args:
            self.wd(a, state, pc)
        args = [instantiate(a, state, self.entry) for a in s.args]
        callee_entry = {name: v for (name, _), v in zip(callee.params, args)}
        self.trail.append(f"call {callee.name}@{s.span or '?'}")
        for c in callee.require:
            key = SiteKey(PRECONDITION_OF_CALLEE, clause_label(c, PRECONDITION), c.span,
                          callee.name, s.span)
            self.events.append(_Event(key, pc, instantiate(conj(wd(c.expr), c.expr), callee_entry, {}),
                                      " > ".join(self.trail)))
        ctypes = callee.var_types()
        final: dict = {}
        post = conj(*(conj(wd(c.expr), c.expr) for c in callee.ensure))
        reassigned = set(assigned_vars(callee.body))
        for name in sorted(free_vars(post)):
            if name in callee_entry and name not in reassigned:
                # an argument the callee never assigns still holds its value
                final[name] = callee_entry[name]
            elif name in ctypes:
                final[name] = self.fresh(f"{callee.name}.{name}", ctypes[name])
        out = dict(state)
        if s.target is not None:
            if RESULT not in final:
                final[RESULT] = self.fresh(f"{callee.name}.{RESULT}", ctypes[RESULT])
            out[s.target] = final[RESULT]
        self.events.append(_Event(None, pc, instantiate(post, final, callee_entry), " > ".join(self.trail)))
        self.trail.pop()
        return out, pc


def _check_recursion(program: Program) -> None:
    graph = {r.name: {s.routine for s in _calls(r)} for r in program.routines}
    state: dict = {}

    def visit(n: str) -> None:
        state[n] = 1
        for m in graph.get(n, ()):
            if state.get(m) == 1:
                raise UnsupportedConstruct(f"recursion through {m!r} is not supported")
            if m not in state:
                visit(m)
        state[n] = 2

    for n in graph:
        if n not in state:
            visit(n)


def _calls(r: Routine):
    return [s for s in iter_statements(r.body) if isinstance(s, Call)]


def generate_vcs(p: Program | TypedProgram, routine: str | Routine,
                 allow_missing_invariant: bool = False,
                 select: Callable[[SiteKey], bool] | None = None) -> list[VerificationCondition]:
    """One VC per assertion site of ``routine``, in execution order.

    ``select`` restricts the output to the sites it accepts; numbering of the
    selected VCs is unaffected by the filter.
    """
    program = p.program if isinstance(p, TypedProgram) else p
    r = routine if isinstance(routine, Routine) else program.routine(routine)
    _check_recursion(program)
    ex = _Exec(program, r, allow_missing_invariant)
    ex.run()
    entry = {name: Var(name) for name in r.param_names}
    assumptions = tuple(
        instantiate(conj(wd(c.expr), c.expr), entry, entry) for c in r.require
    )
    assumptions = tuple(a for a in assumptions if a != TRUE)
    events = ex.events
    order: list[SiteKey] = []
    for ev in events:
        if ev.key is not None and ev.key not in order:
            order.append(ev.key)
    vcs = []
    for n, key in enumerate(order, start=1):
        if select is not None and not select(key):
            continue
        parts = []
        before: list[Expr] = []
        trail = ""
        for ev in events:
            fact = implies(ev.guard, ev.formula)
            if ev.key == key:
                if not trail:
                    trail = ev.trail
                parts.append(implies(conj(*before), fact))
            before.append(fact)
        obligation = conj(*parts)
        vcs.append(VerificationCondition(
            id=f"vc{n}", routine=r.name, kind=key.kind, label=key.label, span=key.span,
            obligation=obligation, assumptions=assumptions,
            definitions=tuple(ex.definitions), path_context=trail, owner=key.owner,
            call_site=key.call_site, var_types=dict(ex.types), inputs=tuple(r.params),
        ))
    return vcs


# -- backward predicate transformer -------------------------------------------------


def wp(s, q: Expr, program: Program | None = None) -> Expr:
    """Weakest precondition of a statement or block for postcondition ``q``.

    Well-definedness conditions of evaluated expressions are conjoined. A
    loop contributes its invariant's entry condition; its remaining
    obligations are separate VCs produced by :func:`generate_vcs`.
    """
    if isinstance(s, tuple):
        for stmt in reversed(s):
            q = wp(stmt, q, program)
        return q
    if isinstance(s, Assign):
        if isinstance(s.target, Index):
            name = s.target.array.name
            ok = conj(wd(s.target.index), wd(s.value), _in_range(Var(name), s.target.index))
            return conj(ok, subst(q, {name: Store(Var(name), s.target.index, s.value)}))
        return conj(wd(s.value), subst(q, {s.target.name: s.value}))
    if isinstance(s, Create):
        ok = conj(wd(s.size), Binary(">=", s.size, IntLit(0)))
        return conj(ok, subst(q, {s.target: NewArray(s.size)}))
    if isinstance(s, Check):
        return conj(*(conj(wd(c.expr), c.expr) for c in s.clauses), q)
    if isinstance(s, If):
        acc = wp(s.else_body or (), q, program)
        for cond, arm in reversed(s.arms):
            acc = conj(wd(cond), implies(cond, wp(arm, q, program)), implies(neg(cond), acc))
        return acc
    if isinstance(s, Loop):
        inv = conj(*(conj(wd(c.expr), c.expr) for c in s.invariant))
        return wp(s.init, inv, program)
    if isinstance(s, Call):
        if program is None:
            raise UnsupportedConstruct("wp of a call needs the enclosing program")
        callee = program.routine(s.routine)
        mapping = {name: a for (name, _), a in zip(callee.params, s.args)}
        pre = conj(*(conj(wd(c.expr), c.expr) for c in callee.require))
        post = conj(*(conj(wd(c.expr), c.expr) for c in callee.ensure))
        final = {}
        reassigned = set(assigned_vars(callee.body))
        for name in free_vars(post):
            if name in mapping and name not in reassigned:
                final[name] = mapping[name]
            else:
                final[name] = Var(fresh_name(f"{callee.name}.{name}"))
        post_now = instantiate(post, final, mapping)
        after = q
        if s.target is not None:
            result = final.get(RESULT) or Var(fresh_name(f"{callee.name}.{RESULT}"))
            after = subst(q, {s.target: result})
        args_ok = conj(*(wd(a) for a in s.args))
        return conj(args_ok, subst(pre, mapping), implies(post_now, after))
    raise UnsupportedConstruct(f"unsupported statement {type(s).__name__}")


__all__ = [
    "VerificationCondition", "SiteKey", "ProofFailure", "generate_vcs", "wp", "assume_context", "format_vc",
    "MissingInvariant", "UnsupportedConstruct", "ScopeError", "VcGenError", "instantiate",
    "count_of", "VC_KINDS", "RUNTIME_KIND",
]
