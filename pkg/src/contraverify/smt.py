"""SMT-LIB 2 encoding of verification conditions and the external solver driver.

Integers map to ``Int``, booleans to ``Bool``. An array variable ``a`` becomes
an ``(Array Int Int)`` constant ``|a|`` plus an ``Int`` constant ``|a.count|``
constrained to be non-negative. Bounded quantifiers over a constant range of
at most 64 values are expanded; the rest become guarded quantifiers.
"""

from __future__ import annotations

import os
import queue
import shutil
import subprocess
import threading
import time
from dataclasses import dataclass, field, replace

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
    Type,
    Unary,
    Var,
    free_vars,
)
from .logic import ArrayVal, evaluate, subst
from .sexpr import SexprError, Sym, balance, parse_all

EXPAND_LIMIT = 64
MATERIALIZE_CAP = 10**5
DEFAULT_TIMEOUT = 10.0
DEFAULT_SEEDS = (0, 1, 2)
SOLVER_ENV = "CONTRAVERIFY_SOLVER"


class EncodingError(Exception):
    pass


class SolverProcessError(Exception):
    pass


class ModelParseError(Exception):
    pass


class ModelIncomplete(Exception):
    pass


def count_symbol(name: str) -> str:
    return f"{name}.count"


def quote(name: str) -> str:
    if "|" in name or "\\" in name:
        raise EncodingError(f"symbol {name!r} cannot be quoted")
    return f"|{name}|"


# -- encoding -------------------------------------------------------------------


@dataclass(frozen=True)
class SmtScript:
    """A solver query: background declarations and assertions plus the goal."""

    declarations: tuple  # rendered declare-const commands
    background: tuple  # rendered asserts: count bounds, definitions, assumptions
    goal: str  # rendered (assert (not obligation))
    symbols: dict = field(hash=False, compare=False)  # VC symbol -> Type
    seed: int = 0
    timeout: float = DEFAULT_TIMEOUT

    def commands(self, extra: tuple = ()) -> list[str]:
        return [*self.declarations, *self.background, self.goal, *extra]

    def render(self, extra: tuple = ()) -> str:
        head = ["(set-option :produce-models true)", f"(set-option :random-seed {self.seed})"]
        return "\n".join(head + self.commands(extra) + ["(check-sat)"]) + "\n"

    def with_seed(self, seed: int) -> SmtScript:
        return replace(self, seed=seed)

    def with_assertions(self, *asserts: str) -> SmtScript:
        return replace(self, background=self.background + tuple(asserts))


class Encoder:
    def __init__(self, types: dict[str, Type]):
        self.types = types

    def is_array(self, e: Expr) -> bool:
        if isinstance(e, Var):
            return self.types.get(e.name) is Type.ARRAY
        if isinstance(e, (Store, NewArray)):
            return True
        if isinstance(e, Ite):
            return self.is_array(e.then)
        return False

    def count(self, e: Expr) -> str:
        if isinstance(e, Var):
            return quote(count_symbol(e.name))
        if isinstance(e, Store):
            return self.count(e.array)
        if isinstance(e, NewArray):
            return self.term(e.count)
        if isinstance(e, Ite):
            return f"(ite {self.term(e.cond)} {self.count(e.then)} {self.count(e.other)})"
        raise EncodingError(f"count of non-array term {type(e).__name__}")

    def term(self, e: Expr) -> str:
        if isinstance(e, IntLit):
            return str(e.value) if e.value >= 0 else f"(- {-e.value})"
        if isinstance(e, BoolLit):
            return "true" if e.value else "false"
        if isinstance(e, Var):
            return quote(e.name)
        if isinstance(e, Index):
            return f"(select {self.term(e.array)} {self.term(e.index)})"
        if isinstance(e, Count):
            return self.count(e.array)
        if isinstance(e, Store):
            return f"(store {self.term(e.array)} {self.term(e.index)} {self.term(e.value)})"
        if isinstance(e, NewArray):
            return "((as const (Array Int Int)) 0)"
        if isinstance(e, Ite):
            return f"(ite {self.term(e.cond)} {self.term(e.then)} {self.term(e.other)})"
        if isinstance(e, Unary):
            return f"({'not' if e.op == 'not' else '-'} {self.term(e.operand)})"
        if isinstance(e, Binary):
            return self.binary(e)
        if isinstance(e, Quant):
            return self.quant(e)
        if isinstance(e, Old):
            raise EncodingError("'old' must be resolved before encoding")
        raise EncodingError(f"unsupported term {type(e).__name__}")

    def binary(self, e: Binary) -> str:
        a, b = e.left, e.right
        op = e.op
        if op in ("=", "/=") and self.is_array(a):
            eq = (f"(and (= {self.term(a)} {self.term(b)}) "
                  f"(= {self.count(a)} {self.count(b)}))")
            return eq if op == "=" else f"(not {eq})"
        smt_op = {
            "+": "+", "-": "-", "*": "*", "//": "div", "\\\\": "mod", "=": "=",
            "<": "<", "<=": "<=", ">": ">", ">=": ">=", "and": "and", "or": "or",
            "implies": "=>",
        }.get(op)
        if op == "/=":
            return f"(not (= {self.term(a)} {self.term(b)}))"
        if smt_op is None:
            raise EncodingError(f"unsupported operator {op}")
        return f"({smt_op} {self.term(a)} {self.term(b)})"

    def quant(self, e: Quant) -> str:
        lo = _constant(e.lo)
        hi = _constant(e.hi)
        if lo is not None and hi is not None and hi - lo + 1 <= EXPAND_LIMIT:
            parts = [self.term(subst(e.body, {e.var: IntLit(k)})) for k in range(lo, hi + 1)]
            if not parts:
                return "true" if e.kind == "for_all" else "false"
            if len(parts) == 1:
                return parts[0]
            return f"({'and' if e.kind == 'for_all' else 'or'} {' '.join(parts)})"
        k = quote(e.var)
        inner = Encoder({**self.types, e.var: Type.INTEGER})
        rng = f"(and (<= {self.term(e.lo)} {k}) (<= {k} {self.term(e.hi)}))"
        body = inner.term(e.body)
        if e.kind == "for_all":
            return f"(forall (({k} Int)) (=> {rng} {body}))"
        return f"(exists (({k} Int)) (and {rng} {body}))"


def _constant(e: Expr) -> int | None:
    if free_vars(e):
        return None
    try:
        v = evaluate(e, {})
    except Exception:
        return None
    return v if isinstance(v, int) and not isinstance(v, bool) else None


def declarations(types: dict[str, Type]) -> tuple[list[str], list[str]]:
    decls, bounds = [], []
    for name in sorted(types):
        ty = types[name]
        if ty is Type.ARRAY:
            decls.append(f"(declare-const {quote(name)} (Array Int Int))")
            decls.append(f"(declare-const {quote(count_symbol(name))} Int)")
            bounds.append(f"(assert (>= {quote(count_symbol(name))} 0))")
        else:
            sort = "Int" if ty is Type.INTEGER else "Bool"
            decls.append(f"(declare-const {quote(name)} {sort})")
    return decls, bounds


def encode(vc, seed: int = 0, timeout: float = DEFAULT_TIMEOUT) -> SmtScript:
    """Script whose models are exactly the bindings falsifying ``vc``."""
    used = vc.symbols()
    unknown = used - set(vc.var_types)
    if unknown:
        raise EncodingError(f"undeclared symbols: {', '.join(sorted(unknown))}")
    types = {n: t for n, t in vc.var_types.items() if n in used or n in dict(vc.inputs)}
    enc = Encoder(types)
    decls, bounds = declarations(types)
    background = list(bounds)
    background += [f"(assert {enc.term(d)})" for d in vc.definitions]
    background += [f"(assert {enc.term(a)})" for a in vc.assumptions]
    goal = f"(assert (not {enc.term(vc.obligation)}))"
    return SmtScript(tuple(decls), tuple(background), goal, types, seed, timeout)


def encode_assertion(e: Expr, types: dict[str, Type]) -> str:
    return f"(assert {Encoder(types).term(e)})"


# -- verdicts and models ----------------------------------------------------------------


class Model:
    """Values of solver symbols. Arrays are :class:`ArrayVal` with their count."""

    def __init__(self, values: dict, raw: str = ""):
        self.values = values
        self.raw = raw

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def __getitem__(self, name: str):
        return self.values[name]

    def get(self, name: str, default=None):
        return self.values.get(name, default)

    def env(self) -> dict:
        return dict(self.values)

    def __repr__(self) -> str:
        shown = []
        for k in sorted(self.values):
            v = self.values[k]
            if isinstance(v, ArrayVal):
                v = f"array(count={v.count})"
            shown.append(f"{k}={v}")
        return f"Model({', '.join(shown)})"


@dataclass(frozen=True)
class Valid:
    pass


@dataclass(frozen=True)
class Falsified:
    model: Model = field(compare=False)


@dataclass(frozen=True)
class Unknown:
    reason: str  # "timeout" | "incomplete"


@dataclass(frozen=True)
class SolverConfig:
    path: str | None = None
    args: tuple = ("-in", "-smt2")
    timeout: float = DEFAULT_TIMEOUT
    seeds: tuple = DEFAULT_SEEDS

    def executable(self) -> str:
        path = self.path or os.environ.get(SOLVER_ENV) or shutil.which("z3")
        if not path:
            raise SolverProcessError("no SMT solver found (set --solver or CONTRAVERIFY_SOLVER)")
        return path


# -- model term evaluation ---------------------------------------------------------------


def _compile(t, scope: frozenset, funcs: dict):
    """Compile a model term into ``f(env) -> value``."""
    if isinstance(t, int) and not isinstance(t, bool):
        return lambda env, v=t: v
    if isinstance(t, Sym):
        if t == "true":
            return lambda env: True
        if t == "false":
            return lambda env: False
        if t in scope:
            return lambda env, n=t: env[n]
        if t in funcs:
            return lambda env, n=t: funcs[n].value()
        raise ModelParseError(f"unknown symbol {t!r} in model")
    if isinstance(t, str):
        raise ModelParseError(f"unexpected string literal {t!r}")
    if not t:
        raise ModelParseError("empty application")
    head = t[0]
    if isinstance(head, list):
        # ((as const (Array Int Int)) v)
        if len(head) == 3 and head[0] == "as" and head[1] == "const":
            inner = _compile(t[1], scope, funcs)
            return lambda env: ArrayVal(0, default=inner(env))
        raise ModelParseError(f"unsupported application head {head!r}")
    if head == "-" and len(t) == 2:
        f = _compile(t[1], scope, funcs)
        return lambda env: -f(env)
    if head == "let":
        names = [b[0] for b in t[1]]
        values = [_compile(b[1], scope, funcs) for b in t[1]]
        body = _compile(t[2], scope | frozenset(names), funcs)

        def run_let(env):
            inner = dict(env)
            for n, f in zip(names, values):
                inner[n] = f(env)
            return body(inner)

        return run_let
    if head == "lambda":
        params = [p[0] for p in t[1]]
        body = _compile(t[2], scope | frozenset(params), funcs)
        if len(params) != 1:
            raise ModelParseError("only unary lambdas denote arrays")

        def make(env, p=params[0]):
            return ArrayVal(0, base=lambda i: body({**env, p: i}))

        return make
    if head == "_" and len(t) == 3 and t[1] == "as-array":
        name = t[2]
        return lambda env: ArrayVal(0, base=lambda i: funcs[name].apply([i]))
    if head == "ite":
        c, a, b = (_compile(x, scope, funcs) for x in t[1:4])
        return lambda env: a(env) if c(env) else b(env)
    if head == "store":
        arr, i, v = (_compile(x, scope, funcs) for x in t[1:4])
        return lambda env: arr(env).store(i(env), v(env))
    if head == "select":
        arr, i = (_compile(x, scope, funcs) for x in t[1:3])
        return lambda env: arr(env).read(i(env))
    args = [_compile(x, scope, funcs) for x in t[1:]]
    op = _OPS.get(head)
    if op is not None:
        return lambda env: op([f(env) for f in args])
    if head in funcs:
        return lambda env, n=head: funcs[n].apply([f(env) for f in args])
    raise ModelParseError(f"unsupported model operator {head!r}")


def _chain(rel):
    return lambda xs: all(rel(a, b) for a, b in zip(xs, xs[1:]))


def _div(xs):
    a, b = xs
    if b == 0:
        return 0
    q = a // abs(b)
    return q if b > 0 else -q


def _mod(xs):
    a, b = xs
    return a - b * _div(xs) if b != 0 else a


def _minus(xs):
    out = xs[0]
    for x in xs[1:]:
        out -= x
    return out


def _times(xs):
    out = 1
    for x in xs:
        out *= x
    return out


_OPS = {
    "+": sum,
    "-": _minus,
    "*": _times,
    "div": _div,
    "mod": _mod,
    "abs": lambda xs: abs(xs[0]),
    "=": _chain(lambda a, b: a == b),
    "distinct": lambda xs: len(set(xs)) == len(xs),
    "<": _chain(lambda a, b: a < b),
    "<=": _chain(lambda a, b: a <= b),
    ">": _chain(lambda a, b: a > b),
    ">=": _chain(lambda a, b: a >= b),
    "and": all,
    "or": any,
    "not": lambda xs: not xs[0],
    "=>": lambda xs: (not xs[0]) or xs[1],
    "xor": lambda xs: xs[0] != xs[1],
}


class _Fun:
    def __init__(self, params: list, body, funcs: dict):
        self.params = params
        self.body = body
        self.funcs = funcs
        self._compiled = None
        self._cache = None

    def _fn(self):
        if self._compiled is None:
            self._compiled = _compile(self.body, frozenset(self.params), self.funcs)
        return self._compiled

    def value(self):
        if self._cache is None:
            self._cache = self._fn()({})
        return self._cache

    def apply(self, args: list):
        return self._fn()(dict(zip(self.params, args)))


def parse_model(text: str, types: dict[str, Type] | None = None) -> Model:
    """Parse a ``(get-model)`` response (optionally followed by ``get-value`` results)."""
    try:
        items = parse_all(text)
    except SexprError as exc:
        raise ModelParseError(str(exc)) from exc
    funcs: dict = {}
    overrides: dict = {}
    for item in items:
        if not isinstance(item, list):
            continue
        entries = item[1:] if item and item[0] == "model" else item
        for d in entries:
            if isinstance(d, list) and len(d) == 5 and d[0] == "define-fun":
                _, name, params, _sort, body = d
                funcs[str(name)] = _Fun([p[0] for p in params], body, funcs)
            elif isinstance(d, list) and len(d) == 2 and not (d and d[0] == "define-fun"):
                # a get-value pair (term value)
                if isinstance(d[0], Sym):
                    overrides[str(d[0])] = d[1]
            elif isinstance(d, list) and d and d[0] in ("declare-fun", "forall", "declare-sort"):
                continue
            elif isinstance(d, list) and d and d[0] == "error":
                continue
    values: dict = {}
    try:
        for name, f in funcs.items():
            if not f.params:
                values[name] = f.value()
        for name, term in overrides.items():
            values[name] = _compile(term, frozenset(), funcs)({})
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ModelParseError(f"malformed model term: {exc}") from exc
    # attach counts to arrays
    for name in list(values):
        v = values[name]
        if isinstance(v, ArrayVal):
            n = values.get(count_symbol(name))
            if isinstance(n, int):
                values[name] = v.with_count(n)
    if types:
        for name, ty in types.items():
            if ty is Type.ARRAY and name not in values and count_symbol(name) in values:
                values[name] = ArrayVal(values[count_symbol(name)])
    return Model(values, text)


# -- solver processes ------------------------------------------------------------------------


def _get_value_command(types: dict[str, Type]) -> str:
    terms = []
    for name in sorted(types):
        terms.append(quote(name))
        if types[name] is Type.ARRAY:
            terms.append(quote(count_symbol(name)))
    return f"(get-value ({' '.join(terms)}))" if terms else ""


def solve(script: SmtScript, cfg: SolverConfig | None = None) -> Valid | Falsified | Unknown:
    """One-shot solver run on ``script``."""
    cfg = cfg or SolverConfig()
    timeout = min(script.timeout, cfg.timeout) if script.timeout else cfg.timeout
    text = script.render(extra=(f"(set-option :timeout {int(timeout * 1000)})",))
    getv = _get_value_command(script.symbols)
    text += "(get-model)\n" + (getv + "\n" if getv else "") + "(exit)\n"
    exe = cfg.executable()
    try:
        proc = subprocess.run([exe, *cfg.args], input=text, capture_output=True, text=True,
                              timeout=timeout + 5.0)
    except subprocess.TimeoutExpired:
        return Unknown("timeout")
    except OSError as exc:
        raise SolverProcessError(f"cannot run solver {exe!r}: {exc}") from exc
    out = proc.stdout
    first, _, rest = out.lstrip().partition("\n")
    first = first.strip()
    if first == "unsat":
        return Valid()
    if first == "sat":
        return Falsified(parse_model(rest, script.symbols))
    if first in ("unknown", "timeout"):
        return Unknown("timeout" if _looks_like_timeout(rest) else "incomplete")
    raise SolverProcessError(f"unexpected solver response {out[:200]!r} {proc.stderr[:200]!r}")


def _looks_like_timeout(rest: str) -> bool:
    return "timeout" in rest or "canceled" in rest


class SolverSession:
    """A long-lived interactive solver process used for incremental queries.

    The background of ``script`` is asserted once; goal variants are checked
    inside push/pop scopes.
    """

    def __init__(self, script: SmtScript, cfg: SolverConfig | None = None):
        self.cfg = cfg or SolverConfig()
        self.script = script
        self.calls = 0
        self._proc = None
        self._lines: queue.Queue = queue.Queue()
        self._start()

    def _start(self) -> None:
        exe = self.cfg.executable()
        try:
            self._proc = subprocess.Popen(
                [exe, *self.cfg.args], stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.STDOUT, text=True, bufsize=1,
            )
        except OSError as exc:
            raise SolverProcessError(f"cannot run solver {exe!r}: {exc}") from exc
        self._lines = queue.Queue()
        threading.Thread(target=self._pump, args=(self._proc, self._lines), daemon=True).start()
        timeout = self.script.timeout or self.cfg.timeout
        self._send("(set-option :print-success false)")
        self._send("(set-option :produce-models true)")
        self._send(f"(set-option :random-seed {self.script.seed})")
        self._send(f"(set-option :timeout {int(timeout * 1000)})")
        for cmd in self.script.commands():
            self._send(cmd)

    @staticmethod
    def _pump(proc, lines: queue.Queue) -> None:
        for line in proc.stdout:
            lines.put(line)
        lines.put(None)

    def _send(self, cmd: str) -> None:
        try:
            self._proc.stdin.write(cmd + "\n")
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise SolverProcessError(f"solver pipe closed: {exc}") from exc

    def _read_response(self, deadline: float) -> str | None:
        buf = []
        depth = 0
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None
            try:
                line = self._lines.get(timeout=remaining)
            except queue.Empty:
                return None
            if line is None:
                raise SolverProcessError("solver exited unexpectedly: " + "".join(buf)[:200])
            if not buf and not line.strip():
                continue
            buf.append(line)
            try:
                depth += balance(line)
            except SexprError:
                pass
            if depth <= 0:
                return "".join(buf)

    def check(self, *asserts: str) -> Valid | Falsified | Unknown:
        """Check the goal under extra assertions, scoped to this call."""
        self.calls += 1
        timeout = self.script.timeout or self.cfg.timeout
        self._send("(push 1)")
        for a in asserts:
            self._send(a)
        self._send("(check-sat)")
        answer = self._read_response(time.monotonic() + timeout + 5.0)
        if answer is None:
            self.restart()
            return Unknown("timeout")
        answer = answer.strip()
        try:
            if answer == "sat":
                getv = _get_value_command(self.script.symbols)
                self._send("(get-model)")
                text = self._read_response(time.monotonic() + timeout + 5.0) or ""
                if getv:
                    self._send(getv)
                    text += self._read_response(time.monotonic() + timeout + 5.0) or ""
                return Falsified(parse_model(text, self.script.symbols))
            if answer == "unsat":
                return Valid()
            if answer == "unknown":
                return Unknown("incomplete")
            raise SolverProcessError(f"unexpected solver response {answer[:200]!r}")
        finally:
            if self._proc.poll() is None:
                self._send("(pop 1)")

    def restart(self) -> None:
        self.close()
        self._start()

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            try:
                self._proc.stdin.write("(exit)\n")
                self._proc.stdin.flush()
            except (OSError, ValueError):
                pass
            try:
                self._proc.wait(timeout=1.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> SolverSession:
        return self

    def __exit__(self, *exc) -> None:
        self.close()


# -- counterexamples ----------------------------------------------------------------------


@dataclass
class Counterexample:
    """Concrete routine inputs falsifying one VC.

    ``values`` holds scalar inputs and array counts keyed by SMT symbol name;
    arrays are read lazily from the model so that huge counts stay cheap.
    """

    routine: str
    params: tuple  # ((name, Type), ...)
    values: dict
    arrays: dict  # name -> ArrayVal
    violated: tuple  # (kind, label, span)
    vc_id: str = ""
    seed: int | None = None
    model: Model | None = None
    _binding: dict | None = field(default=None, repr=False)

    @property
    def oversized(self) -> bool:
        return any(a.count > MATERIALIZE_CAP for a in self.arrays.values())

    @property
    def binding(self) -> dict:
        """Argument binding; arrays materialized over ``1..count``."""
        if self._binding is None:
            if self.oversized:
                raise ModelIncomplete("counterexample is oversized; minimize before materializing")
            out = {}
            for name, ty in self.params:
                if ty is Type.ARRAY:
                    out[name] = self.arrays[name].values()
                else:
                    out[name] = self.values[name]
            self._binding = out
        return self._binding

    def magnitudes(self) -> dict:
        """Integer magnitudes: scalar inputs and counts, plus cells keyed ``a[i]``."""
        out = {}
        for name, ty in self.params:
            if ty is Type.INTEGER:
                out[name] = abs(self.values[name])
            elif ty is Type.ARRAY:
                arr = self.arrays[name]
                out[count_symbol(name)] = arr.count
                if arr.count <= MATERIALIZE_CAP:
                    for i in range(1, arr.count + 1):
                        out[f"{name}[{i}]"] = abs(arr.read(i))
        return out


def extract_counterexample(model: Model, vc, r=None, seed: int | None = None) -> Counterexample:
    params = tuple(r.params) if r is not None else tuple(vc.inputs)
    values: dict = {}
    arrays: dict = {}
    for name, ty in params:
        if ty is Type.ARRAY:
            n = model.get(count_symbol(name))
            if not isinstance(n, int) or isinstance(n, bool):
                raise ModelIncomplete(f"model lacks {count_symbol(name)}")
            arr = model.get(name)
            if not isinstance(arr, ArrayVal):
                arr = ArrayVal(n)  # unconstrained cells default to 0
            arrays[name] = arr.with_count(n)
            values[count_symbol(name)] = n
        else:
            v = model.get(name)
            if v is None:
                raise ModelIncomplete(f"model lacks input {name}")
            values[name] = bool(v) if ty is Type.BOOLEAN else int(v)
    return Counterexample(
        routine=vc.routine, params=params, values=values, arrays=arrays,
        violated=(vc.kind, vc.label, vc.span), vc_id=vc.id, seed=seed, model=model,
    )


def binding_assertions(binding: dict, params: tuple, cell_limit: int = EXPAND_LIMIT) -> list[str]:
    """Equalities pinning the inputs to ``binding`` (cells up to ``cell_limit``)."""
    out = []
    for name, ty in params:
        v = binding[name]
        if ty is Type.ARRAY:
            out.append(f"(= {quote(count_symbol(name))} {len(v)})")
            for i, x in enumerate(v[:cell_limit], start=1):
                out.append(f"(= (select {quote(name)} {i}) {_num(x)})")
        elif ty is Type.BOOLEAN:
            out.append(f"(= {quote(name)} {'true' if v else 'false'})")
        else:
            out.append(f"(= {quote(name)} {_num(v)})")
    return out


def _num(v: int) -> str:
    return str(v) if v >= 0 else f"(- {-v})"


def _and(parts: list[str]) -> str:
    if not parts:
        return "true"
    return parts[0] if len(parts) == 1 else f"(and {' '.join(parts)})"


def blocking_clause(cex: Counterexample, cell_limit: int = EXPAND_LIMIT) -> str:
    parts = []
    for name, ty in cex.params:
        if ty is Type.ARRAY:
            arr = cex.arrays[name]
            parts.append(f"(= {quote(count_symbol(name))} {arr.count})")
            for i in range(1, min(arr.count, cell_limit) + 1):
                parts.append(f"(= (select {quote(name)} {i}) {_num(arr.read(i))})")
        elif ty is Type.BOOLEAN:
            parts.append(f"(= {quote(name)} {'true' if cex.values[name] else 'false'})")
        else:
            parts.append(f"(= {quote(name)} {_num(cex.values[name])})")
    return f"(assert (not {_and(parts)}))"


def solve_distinct(script: SmtScript, n: int, cfg: SolverConfig | None = None, vc=None) -> list[Model]:
    """Up to ``n`` models pairwise distinct on the input valuation.

    Each round uses the next seed and blocks every earlier input valuation.
    Stops at the first non-sat answer.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    cfg = cfg or SolverConfig()
    seeds = list(cfg.seeds) or [0]
    models: list[Model] = []
    blocks: list[str] = []
    params = tuple(vc.inputs) if vc is not None else _input_params(script)
    for i in range(n):
        seed = seeds[i % len(seeds)] + (i // len(seeds)) * 1000
        verdict = solve(script.with_seed(seed).with_assertions(*blocks), cfg)
        if not isinstance(verdict, Falsified):
            break
        models.append(verdict.model)
        cex = _cex_for_blocking(verdict.model, params)
        blocks.append(blocking_clause(cex))
    return models


def _input_params(script: SmtScript) -> tuple:
    return tuple((n, t) for n, t in sorted(script.symbols.items()) if "@" not in n)


def _cex_for_blocking(model: Model, params: tuple) -> Counterexample:
    values, arrays = {}, {}
    for name, ty in params:
        if ty is Type.ARRAY:
            n = model.get(count_symbol(name), 0)
            arr = model.get(name)
            arrays[name] = (arr if isinstance(arr, ArrayVal) else ArrayVal(n)).with_count(n)
        else:
            values[name] = model.get(name, False if ty is Type.BOOLEAN else 0)
    return Counterexample("", params, values, arrays, ("", "", None))


def falsifies(vc, env: dict) -> bool:
    """Whether a full valuation of the VC's symbols falsifies it (direct evaluation)."""
    return not evaluate(vc.formula(), env)


def binding_env(binding: dict, params: tuple) -> dict:
    env = {}
    for name, ty in params:
        v = binding[name]
        if ty is Type.ARRAY:
            env[name] = ArrayVal.of(v)
            env[count_symbol(name)] = len(v)
        else:
            env[name] = v
    return env
