"""Abstract syntax for the contract language.

Nodes are frozen dataclasses. Source spans are carried on every node but are
excluded from equality, so two parses of the same text (or a parse of a
pretty-printed AST) compare equal.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields, replace
from typing import Iterator, Union


@dataclass(frozen=True, order=True)
class Span:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


class Type(enum.Enum):
    INTEGER = "INTEGER"
    BOOLEAN = "BOOLEAN"
    ARRAY = "ARRAY [INTEGER]"

    def __str__(self) -> str:
        return self.value


RESULT = "Result"


def _span() -> Span | None:
    return field(default=None, compare=False, repr=False, kw_only=True)


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Expr:
    span: Span | None = _span()

    def children(self) -> tuple[Expr, ...]:
        out = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Expr):
                out.append(value)
        return tuple(out)

    def map_children(self, fn) -> Expr:
        changes = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Expr):
                new = fn(value)
                if new is not value:
                    changes[f.name] = new
        return replace(self, **changes) if changes else self

    def walk(self) -> Iterator[Expr]:
        """Pre-order traversal of this expression and all subexpressions."""
        yield self
        for child in self.children():
            yield from child.walk()


@dataclass(frozen=True)
class IntLit(Expr):
    value: int


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Index(Expr):
    array: Expr
    index: Expr


@dataclass(frozen=True)
class Count(Expr):
    array: Expr


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # "not" | "-"
    operand: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Old(Expr):
    expr: Expr


@dataclass(frozen=True)
class Quant(Expr):
    """Bounded quantification ``for_all k in lo .. hi : body`` (or ``exists``)."""

    kind: str  # "for_all" | "exists"
    var: str
    lo: Expr
    hi: Expr
    body: Expr


# Logic-only nodes: produced by the VC generator, never by the parser.


@dataclass(frozen=True)
class Store(Expr):
    array: Expr
    index: Expr
    value: Expr


@dataclass(frozen=True)
class NewArray(Expr):
    count: Expr


@dataclass(frozen=True)
class Ite(Expr):
    cond: Expr
    then: Expr
    other: Expr


ARITH_OPS = ("+", "-", "*", "//", "\\\\")
REL_OPS = ("=", "/=", "<", "<=", ">", ">=")
BOOL_OPS = ("and", "or", "implies")

TRUE = BoolLit(True)
FALSE = BoolLit(False)


def conj(*parts: Expr) -> Expr:
    """Conjunction with trivial simplification of literal operands."""
    items = [p for p in parts if p != TRUE]
    if any(p == FALSE for p in items):
        return FALSE
    if not items:
        return TRUE
    out = items[0]
    for p in items[1:]:
        out = Binary("and", out, p)
    return out


def disj(*parts: Expr) -> Expr:
    items = [p for p in parts if p != FALSE]
    if any(p == TRUE for p in items):
        return TRUE
    if not items:
        return FALSE
    out = items[0]
    for p in items[1:]:
        out = Binary("or", out, p)
    return out


def implies(a: Expr, b: Expr) -> Expr:
    if a == TRUE or b == TRUE:
        return b
    if a == FALSE:
        return TRUE
    return Binary("implies", a, b)


def neg(e: Expr) -> Expr:
    if isinstance(e, BoolLit):
        return BoolLit(not e.value)
    if isinstance(e, Unary) and e.op == "not":
        return e.operand
    return Unary("not", e)


# ---------------------------------------------------------------------------
# Statements and declarations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Clause:
    """A labeled assertion; the label may be omitted in source."""

    label: str | None
    expr: Expr
    span: Span | None = _span()


@dataclass(frozen=True)
class Stmt:
    span: Span | None = _span()


Block = tuple  # tuple[Stmt, ...]


@dataclass(frozen=True)
class Assign(Stmt):
    target: Expr  # Var or Index(Var, ...)
    value: Expr


@dataclass(frozen=True)
class Create(Stmt):
    """``create a.make (n)``: a fresh zero-filled array of ``n`` cells."""

    target: str
    size: Expr


@dataclass(frozen=True)
class If(Stmt):
    arms: tuple  # tuple[tuple[Expr, Block], ...]
    else_body: tuple | None = None


@dataclass(frozen=True)
class Loop(Stmt):
    init: tuple
    invariant: tuple  # tuple[Clause, ...]
    exit: Expr
    body: tuple
    variant: Expr | None = None
    has_invariant: bool = field(default=False, compare=False)


@dataclass(frozen=True)
class Check(Stmt):
    clauses: tuple  # tuple[Clause, ...]


@dataclass(frozen=True)
class Call(Stmt):
    routine: str
    args: tuple  # tuple[Expr, ...]
    target: str | None = None


Statement = Union[Assign, Create, If, Loop, Check, Call]


@dataclass(frozen=True)
class Routine:
    name: str
    params: tuple = ()  # tuple[tuple[str, Type], ...]
    locals: tuple = ()
    result_type: Type | None = None
    require: tuple = ()
    ensure: tuple = ()
    body: tuple = ()
    span: Span | None = _span()

    def var_types(self) -> dict[str, Type]:
        env = {name: ty for name, ty in self.params}
        env.update({name: ty for name, ty in self.locals})
        if self.result_type is not None:
            env[RESULT] = self.result_type
        return env

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.params)


@dataclass(frozen=True)
class Program:
    name: str
    routines: tuple  # tuple[Routine, ...]

    def routine(self, name: str) -> Routine:
        for r in self.routines:
            if r.name == name:
                return r
        raise KeyError(name)

    def has_routine(self, name: str) -> bool:
        return any(r.name == name for r in self.routines)

    def with_routine(self, routine: Routine) -> Program:
        """Replace the routine of the same name (or append it)."""
        out = []
        found = False
        for r in self.routines:
            if r.name == routine.name:
                out.append(routine)
                found = True
            else:
                out.append(r)
        if not found:
            out.append(routine)
        return replace(self, routines=tuple(out))


def default_value_expr(ty: Type) -> Expr:
    if ty is Type.INTEGER:
        return IntLit(0)
    if ty is Type.BOOLEAN:
        return FALSE
    return NewArray(IntLit(0))


def iter_statements(block: tuple) -> Iterator[Stmt]:
    """Every statement in ``block``, nested ones included, in source order."""
    for s in block:
        yield s
        if isinstance(s, If):
            for _, arm in s.arms:
                yield from iter_statements(arm)
            if s.else_body is not None:
                yield from iter_statements(s.else_body)
        elif isinstance(s, Loop):
            yield from iter_statements(s.init)
            yield from iter_statements(s.body)


def assigned_vars(block: tuple) -> list[str]:
    """Variables syntactically assigned in ``block`` (array writes included)."""
    seen: list[str] = []

    def add(name: str) -> None:
        if name not in seen:
            seen.append(name)

    for s in iter_statements(block):
        if isinstance(s, Assign):
            t = s.target
            add(t.name if isinstance(t, Var) else t.array.name)
        elif isinstance(s, Create):
            add(s.target)
        elif isinstance(s, Call) and s.target is not None:
            add(s.target)
    return seen


def free_vars(e: Expr, bound: frozenset = frozenset()) -> set[str]:
    if isinstance(e, Var):
        return set() if e.name in bound else {e.name}
    if isinstance(e, Quant):
        inner = bound | {e.var}
        return free_vars(e.lo, bound) | free_vars(e.hi, bound) | free_vars(e.body, inner)
    out: set[str] = set()
    for c in e.children():
        out |= free_vars(c, bound)
    return out


def expr_size(e: Expr) -> int:
    return sum(1 for _ in e.walk())
