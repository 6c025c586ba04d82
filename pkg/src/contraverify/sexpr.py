"""Minimal S-expression reader for solver output."""

from __future__ import annotations

import re


class SexprError(ValueError):
    pass


class Sym(str):
    """A symbol (quoted symbols are unquoted on read)."""

    __slots__ = ()


_TOKEN = re.compile(r'\s*(?:(;[^\n]*)|(\()|(\))|(\|[^|]*\|)|("(?:[^"]|"")*")|([^\s()|";]+))')


def tokenize(text: str) -> list:
    out = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise SexprError(f"unexpected character {text[pos]!r} at offset {pos}")
        pos = m.end()
        comment, lp, rp, quoted, string, atom = m.groups()
        if comment is not None:
            continue
        if lp:
            out.append("(")
        elif rp:
            out.append(")")
        elif quoted is not None:
            out.append(Sym(quoted[1:-1]))
        elif string is not None:
            out.append(string[1:-1].replace('""', '"'))
        elif atom is not None:
            out.append(_atom(atom))
    return out


def _atom(text: str):
    if re.fullmatch(r"\d+", text):
        return int(text)
    return Sym(text)


def parse_all(text: str) -> list:
    """Parse every top-level expression in ``text``."""
    tokens = tokenize(text)
    pos = 0
    out = []

    def read():
        nonlocal pos
        if pos >= len(tokens):
            raise SexprError("unexpected end of input")
        t = tokens[pos]
        pos += 1
        if t == "(" and not isinstance(t, Sym):
            items = []
            while True:
                if pos >= len(tokens):
                    raise SexprError("unbalanced parentheses")
                if tokens[pos] == ")" and not isinstance(tokens[pos], Sym):
                    pos += 1
                    return items
                items.append(read())
        if t == ")" and not isinstance(t, Sym):
            raise SexprError("unexpected ')'")
        return t

    while pos < len(tokens):
        out.append(read())
    return out


def parse_one(text: str):
    items = parse_all(text)
    if len(items) != 1:
        raise SexprError(f"expected one expression, found {len(items)}")
    return items[0]


def balance(text: str) -> int:
    """Open-minus-close parenthesis count, ignoring quoted symbols, strings and comments."""
    depth = 0
    for t in tokenize(text):
        if t == "(" and not isinstance(t, Sym):
            depth += 1
        elif t == ")" and not isinstance(t, Sym):
            depth -= 1
    return depth
