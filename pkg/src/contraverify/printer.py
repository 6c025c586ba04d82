"""Pretty-printer producing source text that reparses to an equal AST."""

from __future__ import annotations

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
    Ite,
    Loop,
    NewArray,
    Old,
    Program,
    Quant,
    Routine,
    Store,
    Unary,
    Var,
)

# binding strength; larger binds tighter
_PREC = {
    "implies": 1,
    "or": 2,
    "and": 3,
    "=": 4, "/=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5,
    "*": 6, "//": 6, "\\\\": 6,
}
_UNARY = 7
_ATOM = 8


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Quant):
        return 0
    if isinstance(e, (Unary, Old)):
        return _UNARY
    if isinstance(e, IntLit) and e.value < 0:
        return _UNARY
    return _ATOM


def format_expr(e: Expr) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "True" if e.value else "False"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Index):
        return f"{_wrap(e.array, _ATOM)}[{format_expr(e.index)}]"
    if isinstance(e, Count):
        return f"{_wrap(e.array, _ATOM)}.count"
    if isinstance(e, Unary):
        inner = e.operand
        if e.op == "-" and isinstance(inner, IntLit):
            # "-3" would reparse as a literal
            return f"-({format_expr(inner)})"
        sep = " " if e.op == "not" else ""
        text = _wrap(inner, _UNARY)
        if e.op == "-" and text.startswith("-"):
            # "--" starts a comment
            text = f"({text})"
        return f"{e.op}{sep}{text}"
    if isinstance(e, Old):
        return f"old {_wrap(e.expr, _UNARY)}"
    if isinstance(e, Binary):
        p = _PREC[e.op]
        if e.op == "implies":
            # right associative
            left = _wrap(e.left, p + 1)
            right = _wrap(e.right, p)
        elif p == 4:
            left = _wrap(e.left, p + 1)
            right = _wrap(e.right, p + 1)
        else:
            left = _wrap(e.left, p)
            right = _wrap(e.right, p + 1)
        return f"{left} {e.op} {right}"
    if isinstance(e, Quant):
        return (f"{e.kind} {e.var} in {_wrap(e.lo, 5)} .. {_wrap(e.hi, 5)} : "
                f"{format_expr(e.body)}")
    # logic-only nodes, for diagnostics
    if isinstance(e, Store):
        return f"store({format_expr(e.array)}, {format_expr(e.index)}, {format_expr(e.value)})"
    if isinstance(e, NewArray):
        return f"new_array({format_expr(e.count)})"
    if isinstance(e, Ite):
        return f"ite({format_expr(e.cond)}, {format_expr(e.then)}, {format_expr(e.other)})"
    raise TypeError(f"cannot format {e!r}")


def _wrap(e: Expr, min_prec: int) -> str:
    s = format_expr(e)
    return f"({s})" if _prec(e) < min_prec else s


def _clause(c: Clause) -> str:
    body = format_expr(c.expr)
    return f"{c.label}: {body}" if c.label else body


def format_block(block: tuple, indent: int) -> list[str]:
    lines: list[str] = []
    for s in block:
        lines.extend(format_stmt(s, indent))
    return lines


def format_stmt(s, indent: int) -> list[str]:
    pad = "  " * indent
    if isinstance(s, Assign):
        return [f"{pad}{format_expr(s.target)} := {format_expr(s.value)}"]
    if isinstance(s, Create):
        return [f"{pad}create {s.target}.make ({format_expr(s.size)})"]
    if isinstance(s, Call):
        args = f" ({', '.join(format_expr(a) for a in s.args)})" if s.args else ""
        if s.target is not None:
            return [f"{pad}{s.target} := {s.routine}{args or ' ()'}"]
        return [f"{pad}{s.routine}{args}"]
    if isinstance(s, Check):
        if len(s.clauses) == 1:
            return [f"{pad}check {_clause(s.clauses[0])} end"]
        return ([f"{pad}check"] + [f"{pad}  {_clause(c)}" for c in s.clauses] + [f"{pad}end"])
    if isinstance(s, If):
        lines = []
        for i, (cond, arm) in enumerate(s.arms):
            kw = "if" if i == 0 else "elseif"
            lines.append(f"{pad}{kw} {format_expr(cond)} then")
            lines.extend(format_block(arm, indent + 1))
        if s.else_body is not None:
            lines.append(f"{pad}else")
            lines.extend(format_block(s.else_body, indent + 1))
        lines.append(f"{pad}end")
        return lines
    if isinstance(s, Loop):
        lines = [f"{pad}from"]
        lines.extend(format_block(s.init, indent + 1))
        if s.invariant or s.has_invariant:
            lines.append(f"{pad}invariant")
            lines.extend(f"{pad}  {_clause(c)}" for c in s.invariant)
        lines.append(f"{pad}until")
        lines.append(f"{pad}  {format_expr(s.exit)}")
        lines.append(f"{pad}loop")
        lines.extend(format_block(s.body, indent + 1))
        if s.variant is not None:
            lines.append(f"{pad}variant")
            lines.append(f"{pad}  {format_expr(s.variant)}")
        lines.append(f"{pad}end")
        return lines
    raise TypeError(f"cannot format {s!r}")


def format_routine(r: Routine, indent: int = 1) -> list[str]:
    pad = "  " * indent
    head = r.name
    if r.params:
        head += " (" + "; ".join(f"{n}: {t}" for n, t in r.params) + ")"
    if r.result_type is not None:
        head += f": {r.result_type}"
    lines = [pad + head]
    if r.require:
        lines.append(f"{pad}  require")
        lines.extend(f"{pad}    {_clause(c)}" for c in r.require)
    if r.locals:
        lines.append(f"{pad}  local")
        lines.extend(f"{pad}    {n}: {t}" for n, t in r.locals)
    lines.append(f"{pad}  do")
    lines.extend(format_block(r.body, indent + 2))
    if r.ensure:
        lines.append(f"{pad}  ensure")
        lines.extend(f"{pad}    {_clause(c)}" for c in r.ensure)
    lines.append(f"{pad}  end")
    return lines


def format_program(p: Program) -> str:
    lines = [f"class {p.name}", "", "feature", ""]
    for r in p.routines:
        lines.extend(format_routine(r))
        lines.append("")
    lines.append("end")
    return "\n".join(lines) + "\n"
