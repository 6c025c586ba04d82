"""Logic-level helpers shared by the VC generator and the SMT encoder:
capture-avoiding substitution, well-definedness sites, and direct evaluation
of formulas under a concrete valuation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .ast import (
    Binary,
    BoolLit,
    Count,
    Expr,
    Index,
    IntLit,
    Ite,
    NewArray,
    Old,
    Quant,
    Store,
    TRUE,
    Unary,
    Var,
    conj,
    free_vars,
    implies,
    neg,
)
from .evaluator import INDEX_RANGE, NONZERO_DIVISOR, QUANTIFIER_BODY, euclid_div, euclid_mod

_fresh = itertools.count(1)


def fresh_name(base: str) -> str:
    return f"{base}@{next(_fresh)}"


def subst(e: Expr, mapping: dict[str, Expr], into_old: bool = False) -> Expr:
    """Replace free variables by expressions.

    ``old`` subterms are left untouched unless ``into_old`` is set: they denote
    entry values and must not see assignments made by the body.
    """
    if not mapping:
        return e
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Old) and not into_old:
        return e
    if isinstance(e, Quant):
        inner = {k: v for k, v in mapping.items() if k != e.var}
        var, body = e.var, e.body
        clash = set()
        for v in inner.values():
            clash |= free_vars(v)
        if var in clash:
            new_var = fresh_name(var)
            body = subst(body, {var: Var(new_var)}, into_old=True)
            var = new_var
        return Quant(e.kind, var, subst(e.lo, mapping, into_old), subst(e.hi, mapping, into_old),
                     subst(body, inner, into_old), span=e.span)
    return e.map_children(lambda c: subst(c, mapping, into_old))


def resolve_old(e: Expr, entry: dict[str, Expr] | None = None) -> Expr:
    """Replace ``old x`` by ``x`` evaluated in the entry state."""
    if isinstance(e, Old):
        inner = resolve_old(e.expr, entry)
        return subst(inner, entry or {}, into_old=True)
    return e.map_children(lambda c: resolve_old(c, entry))


@dataclass(frozen=True)
class WdSite:
    """A well-definedness obligation arising while evaluating an expression."""

    label: str
    span: object
    formula: Expr


def wd_sites(e: Expr, guard: Expr = TRUE) -> list[WdSite]:
    """Well-definedness sites of ``e`` in evaluation order.

    Short-circuit operators guard the sites of their right operand; a
    quantifier contributes one site covering its whole body.
    """
    out: list[WdSite] = []

    def visit(x: Expr, g: Expr) -> None:
        if isinstance(x, Index):
            visit(x.array, g)
            visit(x.index, g)
            in_range = conj(Binary("<=", IntLit(1), x.index), Binary("<=", x.index, Count(x.array)))
            out.append(WdSite(INDEX_RANGE, x.span, implies(g, in_range)))
        elif isinstance(x, Binary) and x.op in ("and", "or", "implies"):
            visit(x.left, g)
            right_guard = neg(x.left) if x.op == "or" else x.left
            visit(x.right, conj(g, right_guard))
        elif isinstance(x, Binary) and x.op in ("//", "\\\\"):
            visit(x.left, g)
            visit(x.right, g)
            out.append(WdSite(NONZERO_DIVISOR, x.span, implies(g, Binary("/=", x.right, IntLit(0)))))
        elif isinstance(x, Quant):
            visit(x.lo, g)
            visit(x.hi, g)
            body = [s.formula for s in wd_sites(x.body)]
            if body:
                inner = Quant("for_all", x.var, x.lo, x.hi, conj(*body))
                out.append(WdSite(QUANTIFIER_BODY, x.span, implies(g, inner)))
        elif isinstance(x, Old):
            for s in wd_sites(x.expr):
                out.append(WdSite(s.label, s.span, implies(g, Old(s.formula))))
        else:
            for c in x.children():
                visit(c, g)

    visit(e, guard)
    return out


def wd(e: Expr) -> Expr:
    """Conjunction of all well-definedness conditions of ``e``."""
    return conj(*(s.formula for s in wd_sites(e)))


# -- direct evaluation ----------------------------------------------------------


class ArrayVal:
    """A logic-level array: ``count`` plus a total index function.

    Cells not stored explicitly read from ``base`` (a callable, e.g. a solver
    model's function) or else from ``default``.
    """

    __slots__ = ("count", "cells", "default", "base")

    def __init__(self, count: int, cells: dict[int, int] | None = None, default: int = 0,
                 base=None):
        self.count = count
        self.cells = dict(cells or {})
        self.default = default
        self.base = base

    @classmethod
    def of(cls, values) -> ArrayVal:
        return cls(len(values), {i: v for i, v in enumerate(values, start=1)})

    def read(self, i: int) -> int:
        if i in self.cells:
            return self.cells[i]
        if self.base is not None:
            return self.base(i)
        return self.default

    def store(self, i: int, v: int) -> ArrayVal:
        out = ArrayVal(self.count, self.cells, self.default, self.base)
        out.cells[i] = v
        return out

    def with_count(self, n: int) -> ArrayVal:
        return ArrayVal(n, self.cells, self.default, self.base)

    def values(self) -> tuple:
        return tuple(self.read(i) for i in range(1, self.count + 1))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ArrayVal):
            return NotImplemented
        if self.count != other.count:
            return False
        keys = set(self.cells) | set(other.cells) | set(range(1, max(self.count, 0) + 1))
        return all(self.read(i) == other.read(i) for i in keys)

    __hash__ = None


def evaluate(e: Expr, env: dict):
    """Evaluate a (possibly logic-only) formula over unbounded integers.

    Arrays in ``env`` may be Python sequences or :class:`ArrayVal`. Reads
    outside ``1..count`` return the array's default cell. ``old`` must have
    been resolved already.
    """
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, Var):
        v = env[e.name]
        return ArrayVal.of(v) if isinstance(v, (list, tuple)) else v
    if isinstance(e, Index):
        return evaluate(e.array, env).read(evaluate(e.index, env))
    if isinstance(e, Count):
        return evaluate(e.array, env).count
    if isinstance(e, Store):
        return evaluate(e.array, env).store(evaluate(e.index, env), evaluate(e.value, env))
    if isinstance(e, NewArray):
        return ArrayVal(evaluate(e.count, env))
    if isinstance(e, Ite):
        return evaluate(e.then, env) if evaluate(e.cond, env) else evaluate(e.other, env)
    if isinstance(e, Unary):
        v = evaluate(e.operand, env)
        return (not v) if e.op == "not" else -v
    if isinstance(e, Old):
        raise ValueError("unresolved 'old' in formula")
    if isinstance(e, Binary):
        op = e.op
        if op == "and":
            return bool(evaluate(e.left, env)) and bool(evaluate(e.right, env))
        if op == "or":
            return bool(evaluate(e.left, env)) or bool(evaluate(e.right, env))
        if op == "implies":
            return (not evaluate(e.left, env)) or bool(evaluate(e.right, env))
        a, b = evaluate(e.left, env), evaluate(e.right, env)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op in ("//", "\\\\"):
            if b == 0:
                return 0  # unconstrained in the logic; guarded by well-definedness sites
            return euclid_div(a, b) if op == "//" else euclid_mod(a, b)
        return {"=": a == b, "/=": a != b, "<": a < b, "<=": a <= b,
                ">": a > b, ">=": a >= b}[op]
    if isinstance(e, Quant):
        lo, hi = evaluate(e.lo, env), evaluate(e.hi, env)
        inner = dict(env)
        results = []
        for k in range(lo, hi + 1):
            inner[e.var] = k
            results.append(bool(evaluate(e.body, inner)))
        return all(results) if e.kind == "for_all" else any(results)
    raise TypeError(f"cannot evaluate {e!r}")
