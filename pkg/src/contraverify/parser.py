"""Lexer and recursive-descent parser for ``.ec`` sources.

Grammar sketch::

    program  ::= ["class" NAME ["feature"]] routine* ["end"]
    routine  ::= NAME ["(" decls ")"] [":" type] ["require" clauses]
                 ["local" decls] "do" stmts ["ensure" clauses] "end"
    stmt     ::= target ":=" expr | target ":=" NAME "(" args ")" | NAME ["(" args ")"]
               | "create" NAME "." "make" "(" expr ")"
               | "if" expr "then" stmts {"elseif" expr "then" stmts} ["else" stmts] "end"
               | "from" stmts ["invariant" clauses] "until" expr "loop" stmts
                 ["variant" expr] "end"
               | "check" clauses "end"

Expression precedence, loosest first: quantifiers, ``implies`` (right
associative), ``or``, ``and``, relations (non-associative), ``+ -``,
``* // \\``, prefix ``not - old``, postfix ``[i]`` and ``.count``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

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

KEYWORDS = frozenset(
    """class feature end do require ensure local if then elseif else from until
    loop invariant variant check create old not and or implies True False
    Result for_all exists in""".split()
)


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int, expected: frozenset = frozenset()):
        self.message = message
        self.line = line
        self.col = col
        self.expected = frozenset(expected)
        detail = f"; expected one of {sorted(self.expected)}" if self.expected else ""
        super().__init__(f"{line}:{col}: {message}{detail}")


@dataclass(frozen=True)
class Token:
    kind: str  # "int", "ident", "kw", "op", "eof"
    text: str
    line: int
    col: int

    @property
    def span(self) -> Span:
        return Span(self.line, self.col)


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>--[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|\.\.|//|\\\\|/=|<=|>=|<<|>>|[-+*=<>:;,()\[\].])
    """,
    re.VERBOSE,
)


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "ident":
            tokens.append(Token("kw" if text in KEYWORDS else "ident", text, line, col))
        elif kind in ("int", "op"):
            tokens.append(Token(kind, text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "<end of input>", line, pos - line_start + 1))
    return tokens


_REL = ("=", "/=", "<", "<=", ">", ">=")
_EXPR_START = frozenset({"(", "-", "not", "old", "True", "False", "Result", "for_all", "exists"})


class _Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.pos = 0

    # -- token helpers ------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def at(self, *texts: str) -> bool:
        t = self.tok
        return t.kind in ("kw", "op") and t.text in texts

    def advance(self) -> Token:
        t = self.tok
        self.pos += 1
        return t

    def error(self, message: str, expected=()) -> ParseError:
        t = self.tok
        return ParseError(f"{message}, found {t.text!r}", t.line, t.col, frozenset(expected))

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error("unexpected token", {text})
        return self.advance()

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            raise self.error("expected identifier", {"<identifier>"})
        return self.advance()

    def skip_semis(self) -> None:
        while self.at(";"):
            self.advance()

    def starts_expr(self) -> bool:
        t = self.tok
        return t.kind in ("int", "ident") or (t.kind in ("kw", "op") and t.text in _EXPR_START)

    # -- declarations -------------------------------------------------------

    def program(self, default_name: str) -> Program:
        name = default_name
        wrapped = False
        if self.at("class"):
            self.advance()
            name = self.ident().text
            wrapped = True
        routines = []
        while True:
            if self.at("feature"):
                self.advance()
                continue
            if self.tok.kind == "ident":
                routines.append(self.routine())
                continue
            break
        if wrapped:
            self.expect("end")
        if self.tok.kind != "eof":
            raise self.error("expected routine declaration", {"<identifier>", "<end of input>"})
        return Program(name, tuple(routines))

    def type_(self) -> Type:
        t = self.ident()
        if t.text == "INTEGER":
            return Type.INTEGER
        if t.text == "BOOLEAN":
            return Type.BOOLEAN
        if t.text == "ARRAY":
            self.expect("[")
            inner = self.ident()
            if inner.text != "INTEGER":
                raise ParseError("only ARRAY [INTEGER] is supported", inner.line, inner.col)
            self.expect("]")
            return Type.ARRAY
        raise ParseError(f"unknown type {t.text!r}", t.line, t.col,
                         frozenset({"INTEGER", "BOOLEAN", "ARRAY"}))

    def decl_group(self) -> list[tuple[str, Type]]:
        names = [self.ident().text]
        while self.at(","):
            self.advance()
            names.append(self.ident().text)
        self.expect(":")
        ty = self.type_()
        return [(n, ty) for n in names]

    def routine(self) -> Routine:
        head = self.ident()
        params: list = []
        if self.at("("):
            self.advance()
            if not self.at(")"):
                params.extend(self.decl_group())
                while self.at(";"):
                    self.advance()
                    params.extend(self.decl_group())
            self.expect(")")
        result_type = None
        if self.at(":"):
            self.advance()
            result_type = self.type_()
        require: tuple = ()
        if self.at("require"):
            self.advance()
            require = self.clauses()
        local_decls: list = []
        if self.at("local"):
            self.advance()
            while self.tok.kind == "ident":
                local_decls.extend(self.decl_group())
                self.skip_semis()
        self.expect("do")
        body = self.stmts()
        ensure: tuple = ()
        if self.at("ensure"):
            self.advance()
            ensure = self.clauses()
        self.expect("end")
        return Routine(head.text, tuple(params), tuple(local_decls), result_type,
                       require, ensure, body, span=head.span)

    def clauses(self) -> tuple:
        out = []
        while self.starts_expr():
            start = self.tok
            label = None
            if start.kind == "ident" and self.peek().text == ":" and self.peek().kind == "op":
                label = self.advance().text
                self.advance()
            expr = self.expr()
            out.append(Clause(label, expr, span=start.span))
            self.skip_semis()
        return tuple(out)

    # -- statements ---------------------------------------------------------

    def stmts(self) -> tuple:
        out = []
        self.skip_semis()
        while self.tok.kind == "ident" or self.at("if", "from", "check", "create", "Result"):
            out.append(self.stmt())
            self.skip_semis()
        return tuple(out)

    def stmt(self):
        t = self.tok
        if self.at("if"):
            return self.if_stmt()
        if self.at("from"):
            return self.loop_stmt()
        if self.at("check"):
            self.advance()
            clauses = self.clauses()
            self.expect("end")
            return Check(clauses, span=t.span)
        if self.at("create"):
            self.advance()
            name = self.ident().text
            self.expect(".")
            make = self.ident()
            if make.text != "make":
                raise ParseError("expected 'make'", make.line, make.col, frozenset({"make"}))
            self.expect("(")
            size = self.expr()
            self.expect(")")
            return Create(name, size, span=t.span)
        # assignment or call
        name_tok = self.advance()
        name = RESULT if name_tok.text == RESULT else name_tok.text
        if self.at("["):
            self.advance()
            idx = self.expr()
            self.expect("]")
            target: Expr = Index(Var(name, span=name_tok.span), idx, span=name_tok.span)
            self.expect(":=")
            return Assign(target, self.expr(), span=t.span)
        if self.at(":="):
            self.advance()
            if self.tok.kind == "ident" and self.peek().text == "(" and self.peek().kind == "op":
                callee = self.advance().text
                args = self.call_args()
                return Call(callee, args, name, span=t.span)
            return Assign(Var(name, span=name_tok.span), self.expr(), span=t.span)
        if name == RESULT:
            raise self.error("expected ':='", {":="})
        args = self.call_args() if self.at("(") else ()
        return Call(name, args, None, span=t.span)

    def call_args(self) -> tuple:
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.expr())
            while self.at(","):
                self.advance()
                args.append(self.expr())
        self.expect(")")
        return tuple(args)

    def if_stmt(self) -> If:
        t = self.expect("if")
        arms = []
        cond = self.expr()
        self.expect("then")
        arms.append((cond, self.stmts()))
        else_body = None
        while self.at("elseif"):
            self.advance()
            cond = self.expr()
            self.expect("then")
            arms.append((cond, self.stmts()))
        if self.at("else"):
            self.advance()
            else_body = self.stmts()
        if not self.at("end"):
            raise self.error("unterminated conditional", {"end", "else", "elseif"})
        self.advance()
        return If(tuple(arms), else_body, span=t.span)

    def loop_stmt(self) -> Loop:
        t = self.expect("from")
        init = self.stmts()
        invariant: tuple = ()
        has_inv = False
        if self.at("invariant"):
            self.advance()
            has_inv = True
            invariant = self.clauses()
        self.expect("until")
        exit_ = self.expr()
        self.expect("loop")
        body = self.stmts()
        variant = None
        if self.at("variant"):
            self.advance()
            variant = self.expr()
        self.expect("end")
        return Loop(init, invariant, exit_, body, variant, has_inv, span=t.span)

    # -- expressions --------------------------------------------------------

    def expr(self) -> Expr:
        if self.at("for_all", "exists"):
            t = self.advance()
            var = self.ident().text
            self.expect("in")
            lo = self.additive()
            self.expect("..")
            hi = self.additive()
            self.expect(":")
            body = self.expr()
            return Quant(t.text, var, lo, hi, body, span=t.span)
        return self.implication()

    def implication(self) -> Expr:
        left = self.disjunction()
        if self.at("implies"):
            t = self.advance()
            right = self.expr()
            return Binary("implies", left, right, span=t.span)
        return left

    def disjunction(self) -> Expr:
        left = self.conjunction()
        while self.at("or"):
            t = self.advance()
            left = Binary("or", left, self.conjunction(), span=t.span)
        return left

    def conjunction(self) -> Expr:
        left = self.relation()
        while self.at("and"):
            t = self.advance()
            left = Binary("and", left, self.relation(), span=t.span)
        return left

    def relation(self) -> Expr:
        left = self.additive()
        if self.at(*_REL):
            t = self.advance()
            right = self.additive()
            if self.at(*_REL):
                raise self.error("relational operators do not chain")
            return Binary(t.text, left, right, span=t.span)
        return left

    def additive(self) -> Expr:
        left = self.multiplicative()
        while self.at("+", "-"):
            t = self.advance()
            left = Binary(t.text, left, self.multiplicative(), span=t.span)
        return left

    def multiplicative(self) -> Expr:
        left = self.unary()
        while self.at("*", "//", "\\\\"):
            t = self.advance()
            left = Binary(t.text, left, self.unary(), span=t.span)
        return left

    def unary(self) -> Expr:
        t = self.tok
        if self.at("not"):
            self.advance()
            return Unary("not", self.unary(), span=t.span)
        if self.at("-"):
            self.advance()
            if self.tok.kind == "int":
                lit = self.advance()
                return self.postfix(IntLit(-int(lit.text), span=t.span))
            return Unary("-", self.unary(), span=t.span)
        if self.at("old"):
            self.advance()
            return Old(self.unary(), span=t.span)
        return self.postfix(self.primary())

    def postfix(self, e: Expr) -> Expr:
        while True:
            if self.at("["):
                t = self.advance()
                idx = self.expr()
                self.expect("]")
                e = Index(e, idx, span=t.span)
            elif self.at(".") and self.peek().kind == "ident" and self.peek().text == "count":
                t = self.advance()
                self.advance()
                e = Count(e, span=t.span)
            else:
                return e

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "int":
            self.advance()
            return IntLit(int(t.text), span=t.span)
        if self.at("True", "False"):
            self.advance()
            return BoolLit(t.text == "True", span=t.span)
        if self.at("Result"):
            self.advance()
            return Var(RESULT, span=t.span)
        if t.kind == "ident":
            self.advance()
            return Var(t.text, span=t.span)
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        raise self.error("expected expression",
                         {"<integer>", "<identifier>", "(", "-", "not", "old", "True", "False",
                          "Result", "for_all", "exists"})


def parse_program(source: str, name: str = "main") -> Program:
    """Parse one ``.ec`` source text into a :class:`Program`.

    Raises :class:`ParseError` carrying the line, column and the set of tokens
    that would have been accepted at the failure point.
    """
    return _Parser(source).program(name)


def parse_expr(source: str) -> Expr:
    p = _Parser(source)
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error("trailing input after expression", {"<end of input>"})
    return e
