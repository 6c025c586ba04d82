"""Static typing for the contract language.

All problems are collected; :func:`typecheck` raises once with the full list.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ast import (
    ARITH_OPS,
    Assign,
    Binary,
    BoolLit,
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
    REL_OPS,
    Routine,
    Span,
    Store,
    Type,
    Unary,
    Var,
    iter_statements,
)


@dataclass(frozen=True)
class TypingError:
    message: str
    span: Span | None = None
    routine: str | None = None

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span else ""
        scope = f"[{self.routine}] " if self.routine else ""
        return f"{where}{scope}{self.message}"


class TypeCheckError(Exception):
    def __init__(self, errors: list[TypingError]):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in self.errors))


@dataclass(frozen=True)
class TypedProgram:
    """A program that passed type checking, with per-routine typing environments."""

    program: Program
    envs: dict = field(compare=False, hash=False, repr=False)

    def routine(self, name: str) -> Routine:
        return self.program.routine(name)

    def env(self, routine: str) -> dict[str, Type]:
        return self.envs[routine]

    def type_of(self, routine: str, e: Expr, bound: dict | None = None) -> Type:
        env = dict(self.envs[routine])
        if bound:
            env.update(bound)
        ty = _Checker(self.program).expr(e, env, routine, in_post=True)
        assert ty is not None
        return ty


class _Checker:
    def __init__(self, program: Program):
        self.program = program
        self.errors: list[TypingError] = []

    def err(self, message: str, span: Span | None, routine: str | None) -> None:
        self.errors.append(TypingError(message, span, routine))

    def expr(self, e: Expr, env: dict, routine: str, in_post: bool) -> Type | None:
        """Type of ``e``; ``None`` once an error has been reported for it."""
        if isinstance(e, IntLit):
            return Type.INTEGER
        if isinstance(e, BoolLit):
            return Type.BOOLEAN
        if isinstance(e, Var):
            if e.name not in env:
                if e.name == RESULT:
                    self.err("'Result' used in a routine without a result type", e.span, routine)
                else:
                    self.err(f"undeclared identifier {e.name!r}", e.span, routine)
                return None
            return env[e.name]
        if isinstance(e, Index):
            at = self.expr(e.array, env, routine, in_post)
            it = self.expr(e.index, env, routine, in_post)
            if at is not None and at is not Type.ARRAY:
                self.err(f"indexing a value of type {at}", e.span, routine)
            if it is not None and it is not Type.INTEGER:
                self.err(f"array index must be INTEGER, got {it}", e.span, routine)
            return Type.INTEGER
        if isinstance(e, Count):
            at = self.expr(e.array, env, routine, in_post)
            if at is not None and at is not Type.ARRAY:
                self.err(f"'count' applied to a value of type {at}", e.span, routine)
            return Type.INTEGER
        if isinstance(e, Unary):
            t = self.expr(e.operand, env, routine, in_post)
            want = Type.BOOLEAN if e.op == "not" else Type.INTEGER
            if t is not None and t is not want:
                self.err(f"operator {e.op!r} expects {want}, got {t}", e.span, routine)
            return want
        if isinstance(e, Old):
            if not in_post:
                self.err("'old' is only allowed in postconditions", e.span, routine)
            return self.expr(e.expr, env, routine, in_post)
        if isinstance(e, Binary):
            lt = self.expr(e.left, env, routine, in_post)
            rt = self.expr(e.right, env, routine, in_post)
            if e.op in ARITH_OPS:
                for t in (lt, rt):
                    if t is not None and t is not Type.INTEGER:
                        self.err(f"operator {e.op!r} expects INTEGER, got {t}", e.span, routine)
                return Type.INTEGER
            if e.op in ("=", "/="):
                if lt is Type.ARRAY or rt is Type.ARRAY:
                    self.err("arrays cannot be compared", e.span, routine)
                elif lt is not None and rt is not None and lt is not rt:
                    self.err(f"comparing {lt} with {rt}", e.span, routine)
                return Type.BOOLEAN
            if e.op in REL_OPS:
                for t in (lt, rt):
                    if t is not None and t is not Type.INTEGER:
                        self.err(f"operator {e.op!r} expects INTEGER, got {t}", e.span, routine)
                return Type.BOOLEAN
            for t in (lt, rt):
                if t is not None and t is not Type.BOOLEAN:
                    self.err(f"operator {e.op!r} expects BOOLEAN, got {t}", e.span, routine)
            return Type.BOOLEAN
        if isinstance(e, Quant):
            for bound in (e.lo, e.hi):
                t = self.expr(bound, env, routine, in_post)
                if t is not None and t is not Type.INTEGER:
                    self.err("quantifier bounds must be INTEGER", e.span, routine)
            inner = dict(env)
            inner[e.var] = Type.INTEGER
            t = self.expr(e.body, inner, routine, in_post)
            if t is not None and t is not Type.BOOLEAN:
                self.err("quantifier body must be BOOLEAN", e.span, routine)
            return Type.BOOLEAN
        if isinstance(e, Store):
            self.expr(e.index, env, routine, in_post)
            self.expr(e.value, env, routine, in_post)
            return self.expr(e.array, env, routine, in_post)
        if isinstance(e, NewArray):
            self.expr(e.count, env, routine, in_post)
            return Type.ARRAY
        if isinstance(e, Ite):
            self.expr(e.cond, env, routine, in_post)
            self.expr(e.other, env, routine, in_post)
            return self.expr(e.then, env, routine, in_post)
        raise TypeError(f"unknown expression node {e!r}")

    def boolean(self, e: Expr, env: dict, routine: str, what: str, in_post: bool = False) -> None:
        t = self.expr(e, env, routine, in_post)
        if t is not None and t is not Type.BOOLEAN:
            self.err(f"{what} must be BOOLEAN, got {t}", e.span, routine)

    def clauses(self, clauses: tuple, env: dict, routine: str, what: str, in_post: bool = False) -> None:
        seen = set()
        for c in clauses:
            if c.label is not None:
                if c.label in seen:
                    self.err(f"duplicate label {c.label!r} in {what}", c.span, routine)
                seen.add(c.label)
            self.boolean(c.expr, env, routine, f"{what} clause", in_post)

    def block(self, block: tuple, env: dict, r: Routine) -> None:
        for s in block:
            self.stmt(s, env, r)

    def stmt(self, s, env: dict, r: Routine) -> None:
        name = r.name
        if isinstance(s, Assign):
            vt = self.expr(s.value, env, name, False)
            if isinstance(s.target, Index):
                tt = self.expr(s.target, env, name, False)
            else:
                tt = self.expr(s.target, env, name, False)
            if tt is not None and vt is not None and tt is not vt:
                self.err(f"{vt} assigned to {tt}", s.span, name)
        elif isinstance(s, Create):
            if env.get(s.target) is not Type.ARRAY:
                self.err(f"'create' target {s.target!r} is not an ARRAY variable", s.span, name)
            t = self.expr(s.size, env, name, False)
            if t is not None and t is not Type.INTEGER:
                self.err("array size must be INTEGER", s.span, name)
        elif isinstance(s, If):
            for cond, arm in s.arms:
                self.boolean(cond, env, name, "condition")
                self.block(arm, env, r)
            if s.else_body is not None:
                self.block(s.else_body, env, r)
        elif isinstance(s, Loop):
            self.block(s.init, env, r)
            self.clauses(s.invariant, env, name, "loop invariant")
            self.boolean(s.exit, env, name, "exit condition")
            if s.variant is not None:
                t = self.expr(s.variant, env, name, False)
                if t is not None and t is not Type.INTEGER:
                    self.err(f"loop variant must be INTEGER, got {t}", s.variant.span, name)
            self.block(s.body, env, r)
        elif isinstance(s, Check):
            self.clauses(s.clauses, env, name, "check")
        elif isinstance(s, Call):
            if not self.program.has_routine(s.routine):
                self.err(f"call to unknown routine {s.routine!r}", s.span, name)
                return
            callee = self.program.routine(s.routine)
            if len(s.args) != len(callee.params):
                self.err(f"{s.routine!r} expects {len(callee.params)} arguments, got {len(s.args)}",
                         s.span, name)
            for arg, (pname, pty) in zip(s.args, callee.params):
                t = self.expr(arg, env, name, False)
                if t is not None and t is not pty:
                    self.err(f"argument {pname!r} of {s.routine!r} expects {pty}, got {t}", s.span, name)
            if s.target is not None:
                if callee.result_type is None:
                    self.err(f"{s.routine!r} returns no value", s.span, name)
                elif s.target not in env:
                    self.err(f"undeclared identifier {s.target!r}", s.span, name)
                elif env[s.target] is not callee.result_type:
                    self.err(f"{callee.result_type} assigned to {env[s.target]}", s.span, name)
        else:
            raise TypeError(f"unknown statement {s!r}")

    def routine(self, r: Routine) -> dict[str, Type]:
        env: dict[str, Type] = {}
        for vname, ty in list(r.params) + list(r.locals):
            if vname in env:
                self.err(f"duplicate declaration of {vname!r}", r.span, r.name)
            if vname == RESULT:
                self.err("'Result' cannot be declared", r.span, r.name)
            env[vname] = ty
        pre_env = {k: v for k, v in env.items() if k in r.param_names}
        if r.result_type is not None:
            env[RESULT] = r.result_type
        self.clauses(r.require, pre_env, r.name, "precondition")
        self.block(r.body, env, r)
        self.clauses(r.ensure, env, r.name, "postcondition", in_post=True)
        return env

    def call_graph_cycles(self) -> None:
        graph = {
            r.name: {s.routine for s in iter_statements(r.body) if isinstance(s, Call)}
            for r in self.program.routines
        }
        state: dict[str, int] = {}

        def visit(n: str, stack: list[str]) -> None:
            state[n] = 1
            for m in sorted(graph.get(n, ())):
                if m not in graph:
                    continue
                if state.get(m) == 1:
                    cycle = stack[stack.index(m):] + [m] if m in stack else [n, m]
                    r = self.program.routine(n)
                    self.err(f"recursive call chain {' -> '.join(cycle)} is not supported", r.span, n)
                elif m not in state:
                    visit(m, stack + [m])
            state[n] = 2

        for r in self.program.routines:
            if r.name not in state:
                visit(r.name, [r.name])


def check_types(program: Program) -> tuple[list[TypingError], dict]:
    c = _Checker(program)
    names = set()
    envs = {}
    for r in program.routines:
        if r.name in names:
            c.err(f"duplicate routine {r.name!r}", r.span, None)
        names.add(r.name)
        envs[r.name] = c.routine(r)
    c.call_graph_cycles()
    return c.errors, envs


def typecheck(program: Program) -> TypedProgram:
    """Type-check ``program``; raises :class:`TypeCheckError` listing every problem."""
    errors, envs = check_types(program)
    if errors:
        raise TypeCheckError(errors)
    return TypedProgram(program, envs)
