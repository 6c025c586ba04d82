"""Structural queries over routines: branch points, decisions, conditions, loops.

Numbering is a deterministic source-order traversal, so ids are stable across
reparses of the same text. Lookups from AST node to id go through object
identity because structurally equal statements can occur at different places.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .ast import Binary, BoolLit, Expr, If, Loop, Routine, Span, Unary

THEN, ELSEIF, ELSE, LOOP_BODY, LOOP_SKIP, ENTRY = (
    "then-branch", "elseif-branch", "else-branch", "loop-body", "loop-skip", "entry",
)


@dataclass(frozen=True)
class BranchPoint:
    id: int
    span: Span | None
    kind: str


@dataclass(frozen=True)
class Decision:
    id: int
    span: Span | None
    expr: Expr
    conditions: tuple  # tuple[Expr, ...]
    origin: str  # "if" | "exit"


@dataclass(frozen=True)
class LoopInfo:
    id: int
    span: Span | None
    depth: int  # nesting depth, 1 for an outermost loop


@dataclass
class RoutineStructure:
    """Branch points, decisions and loops of one routine plus node->id lookups."""

    branches: list[BranchPoint] = field(default_factory=list)
    decisions: list[Decision] = field(default_factory=list)
    loops: list[LoopInfo] = field(default_factory=list)
    if_arms: dict = field(default_factory=dict)  # id(If) -> [arm branch ids..., else id]
    if_decisions: dict = field(default_factory=dict)  # id(If) -> [decision ids per arm]
    loop_faces: dict = field(default_factory=dict)  # id(Loop) -> (body id, skip id)
    loop_ids: dict = field(default_factory=dict)  # id(Loop) -> loop id
    loop_decisions: dict = field(default_factory=dict)  # id(Loop) -> decision id
    entry: int | None = None

    def branch(self, bid: int) -> BranchPoint:
        return self.branches[bid - 1]

    def decision(self, did: int) -> Decision:
        return self.decisions[did - 1]


def analyze(r: Routine) -> RoutineStructure:
    st = RoutineStructure()
    bid = itertools.count(1)
    did = itertools.count(1)
    lid = itertools.count(1)

    def new_branch(span, kind) -> int:
        i = next(bid)
        st.branches.append(BranchPoint(i, span, kind))
        return i

    def new_decision(expr: Expr, origin: str) -> int:
        i = next(did)
        st.decisions.append(Decision(i, expr.span, expr, tuple(atomic_conditions(expr)), origin))
        return i

    def block(stmts: tuple, depth: int) -> None:
        for s in stmts:
            if isinstance(s, If):
                ids = []
                dids = []
                for k, (cond, arm) in enumerate(s.arms):
                    dids.append(new_decision(cond, "if"))
                    span = arm[0].span if arm else cond.span
                    ids.append(new_branch(span, THEN if k == 0 else ELSEIF))
                    block(arm, depth)
                if s.else_body:
                    span = s.else_body[0].span
                else:
                    span = s.span
                ids.append(new_branch(span, ELSE))
                if s.else_body:
                    block(s.else_body, depth)
                st.if_arms[id(s)] = ids
                st.if_decisions[id(s)] = dids
            elif isinstance(s, Loop):
                block(s.init, depth)
                li = next(lid)
                st.loops.append(LoopInfo(li, s.span, depth + 1))
                st.loop_ids[id(s)] = li
                st.loop_decisions[id(s)] = new_decision(s.exit, "exit")
                body_id = new_branch(s.body[0].span if s.body else s.span, LOOP_BODY)
                block(s.body, depth + 1)
                skip_id = new_branch(s.span, LOOP_SKIP)
                st.loop_faces[id(s)] = (body_id, skip_id)

    block(r.body, 0)
    if not st.branches:
        st.entry = new_branch(r.span, ENTRY)
    return st


def enumerate_branches(r: Routine) -> list[BranchPoint]:
    """One branch point per control branch (implicit else and both loop faces
    included); a routine without control structure has a single entry point."""
    return list(analyze(r).branches)


def decisions(r: Routine) -> list[Decision]:
    return list(analyze(r).decisions)


def loops(r: Routine) -> list[LoopInfo]:
    return list(analyze(r).loops)


_BOOL_CONNECTIVES = ("and", "or", "implies")


def atomic_conditions(d: Expr) -> list[Expr]:
    """Maximal subexpressions free of boolean connectives, left to right,
    with syntactic duplicates collapsed."""
    out: list[Expr] = []

    def visit(e: Expr) -> None:
        if isinstance(e, Binary) and e.op in _BOOL_CONNECTIVES:
            visit(e.left)
            visit(e.right)
        elif isinstance(e, Unary) and e.op == "not":
            visit(e.operand)
        elif e not in out:
            out.append(e)

    visit(d)
    return out


def substitute_conditions(d: Expr, values: dict) -> Expr:
    """Replace each atomic condition occurring in ``values`` by a literal."""

    def go(e: Expr) -> Expr:
        if isinstance(e, Binary) and e.op in _BOOL_CONNECTIVES:
            return Binary(e.op, go(e.left), go(e.right))
        if isinstance(e, Unary) and e.op == "not":
            return Unary("not", go(e.operand))
        if e in values:
            v = values[e]
            return v if isinstance(v, Expr) else BoolLit(bool(v))
        return e

    return go(d)


def eval_decision(d: Expr, values: dict) -> bool:
    """Truth value of decision ``d`` given a truth value for each of its conditions."""

    def go(e: Expr) -> bool:
        if isinstance(e, Binary) and e.op in _BOOL_CONNECTIVES:
            left = go(e.left)
            if e.op == "and":
                return left and go(e.right)
            if e.op == "or":
                return left or go(e.right)
            return (not left) or go(e.right)
        if isinstance(e, Unary) and e.op == "not":
            return not go(e.operand)
        if isinstance(e, BoolLit) and e not in values:
            return e.value
        return bool(values[e])

    return go(d)


def independence_table(d: Expr, conds: tuple, j: int) -> list[tuple[tuple[bool, ...], bool]]:
    """Rows of the truth table where flipping condition ``j`` flips ``d``."""
    rows = []
    for bits in itertools.product((False, True), repeat=len(conds)):
        values = dict(zip(conds, bits))
        flipped = dict(values)
        flipped[conds[j]] = not bits[j]
        if eval_decision(d, values) != eval_decision(d, flipped):
            rows.append((bits, eval_decision(d, values)))
    return rows
