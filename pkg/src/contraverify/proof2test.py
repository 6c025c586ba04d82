"""From proof failures to runnable tests: counterexample minimization, test
construction and emission, and failure diagnosis."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .ast import Type
from .evaluator import (
    DEFAULT_STEP_BUDGET,
    OTHER_VIOLATION,
    PASSES,
    PASSES_UNEXPECTEDLY,
    REPRODUCES,
    ContractViolation,
    Divergence,
    Normal,
    TestVerdict,
    run_routine,
    run_test,
)
from .parser import parse_program
from .smt import (
    MATERIALIZE_CAP,
    Counterexample,
    Falsified,
    SmtScript,
    SolverConfig,
    SolverSession,
    Valid,
    count_symbol,
    encode,
    extract_counterexample,
    quote,
)
from .suite import Origin, TestCase, format_binding
from .typecheck import TypedProgram, typecheck
from .vcgen import FALSIFIED, ProofFailure, VerificationCondition

DEFAULT_MIN_BUDGET = 32
TEST_ROUTINE = "__test"
SPEC_GAP = "specification gap"


class NotACounterexample(Exception):
    pass


# -- minimization ---------------------------------------------------------------


def _num(v: int) -> str:
    return str(v) if v >= 0 else f"(- {-v})"


@dataclass(frozen=True)
class _Slot:
    """One minimizable integer: a scalar, an array count, or a cell."""

    name: str  # display name: x, a.count, a[3]
    term: str  # SMT term

    def pin(self, v: int) -> str:
        return f"(assert (= {self.term} {_num(v)}))"

    def within(self, m: int) -> str:
        return f"(assert (and (<= {_num(-m)} {self.term}) (<= {self.term} {_num(m)})))"

    def below(self, m: int) -> str:
        return f"(assert (and (< {_num(-m)} {self.term}) (< {self.term} {_num(m)})))"


def _slot_value(model, slot: _Slot):
    if "[" in slot.name:
        arr, idx = slot.name[:-1].split("[")
        return model[arr].read(int(idx))
    return model[slot.name]


@dataclass
class VariableShrink:
    name: str
    original: int
    minimized: int
    calls: int


@dataclass
class MinimizationReport:
    original: Counterexample
    minimized: Counterexample
    reverification_runs: int
    variables: list = field(default_factory=list)  # VariableShrink per slot
    budget_exhausted: bool = False
    pins: tuple = ()  # final pin assertions, in search order

    @property
    def magnitude_reduction(self) -> float | None:
        """Mean relative reduction of |value| over variables that started non-zero."""
        rs = [(v.original - v.minimized) / v.original for v in self.variables if v.original > 0]
        return sum(rs) / len(rs) if rs else None

    def to_json(self) -> dict:
        return {
            "reverification_runs": self.reverification_runs,
            "budget_exhausted": self.budget_exhausted,
            "variables": [
                {"name": v.name, "original": v.original, "minimized": v.minimized, "calls": v.calls}
                for v in self.variables
            ],
        }


def _scalar_slots(cex: Counterexample, fixed: set) -> tuple[list, list]:
    counts, scalars = [], []
    for name, ty in cex.params:
        if name in fixed:
            continue
        if ty is Type.ARRAY:
            counts.append(_Slot(count_symbol(name), quote(count_symbol(name))))
        elif ty is Type.INTEGER:
            scalars.append(_Slot(name, quote(name)))
    return counts, scalars


def _pin_all(cex: Counterexample, cell_limit: int = 64) -> list[str]:
    out = []
    for name, ty in cex.params:
        if ty is Type.ARRAY:
            arr = cex.arrays[name]
            out.append(f"(assert (= {quote(count_symbol(name))} {arr.count}))")
            for i in range(1, min(arr.count, cell_limit) + 1):
                out.append(f"(assert (= (select {quote(name)} {i}) {_num(arr.read(i))}))")
        elif ty is Type.BOOLEAN:
            out.append(f"(assert (= {quote(name)} {'true' if cex.values[name] else 'false'}))")
        else:
            out.append(f"(assert (= {quote(name)} {_num(cex.values[name])}))")
    return out


def minimize(cex: Counterexample, vc: VerificationCondition, budget: int = DEFAULT_MIN_BUDGET,
             cfg: SolverConfig | None = None, fixed: tuple = (),
             extra: tuple = (), script: SmtScript | None = None) -> MinimizationReport:
    """Greedy pinned shrink of ``cex`` toward small magnitudes.

    Search order: array counts, then integer scalars by descending magnitude,
    then cells of each array in index order. For each variable the smallest
    bound ``m`` with ``|x| <= m`` still falsifiable (earlier variables pinned,
    later ones free) is found by galloping from 0 and then bisecting; the
    variable is then pinned to ``+m`` when possible, else ``-m``. Names in
    ``fixed`` (e.g. a coverage selector) are pinned first and never shrunk.
    ``extra`` holds additional SMT assertions kept throughout (e.g. blocking
    clauses).
    """
    cfg = cfg or SolverConfig()
    script = script or encode(vc, seed=cfg.seeds[0] if cfg.seeds else 0, timeout=cfg.timeout)
    with SolverSession(script, cfg) as session:
        initial = session.check(*extra, *_pin_all(cex))
        if isinstance(initial, Valid):
            raise NotACounterexample(f"binding does not falsify {vc.label}")
        if not isinstance(initial, Falsified):
            return MinimizationReport(cex, cex, 0, budget_exhausted=True)
        witness = initial.model
        base_calls = session.calls
        pins: list[str] = list(extra)
        for name in fixed:
            value = cex.values[name]
            pins.append(f"(assert (= {quote(name)} {_num(value) if not isinstance(value, bool) else str(value).lower()}))")
        # booleans are not shrunk; they keep their witness values
        for name, ty in cex.params:
            if ty is Type.BOOLEAN and name not in fixed:
                pins.append(f"(assert (= {quote(name)} {'true' if witness[name] else 'false'}))")
        counts, scalars = _scalar_slots(cex, set(fixed))
        scalars.sort(key=lambda s: -abs(_slot_value(witness, s)))
        shrinks: list[VariableShrink] = []
        exhausted = False

        def used() -> int:
            return session.calls - base_calls

        def shrink(slot: _Slot) -> None:
            nonlocal witness, exhausted
            start = session.calls
            original = _slot_value(witness, slot)
            orig_mag = abs(_cex_value(cex, slot.name))
            w = abs(original)
            if exhausted or w == 0:
                pins.append(slot.pin(original))
                shrinks.append(VariableShrink(slot.name, orig_mag, w, 0))
                return
            lo, hi = -1, w  # |x| <= lo infeasible, |x| <= hi feasible
            probe = 0
            while probe < hi:
                if used() >= budget:
                    exhausted = True
                    break
                v = session.check(*pins, slot.within(probe))
                if isinstance(v, Falsified):
                    witness = v.model
                    hi = abs(_slot_value(witness, slot))
                    break
                lo = probe
                probe = 1 if probe == 0 else probe * 2
            while hi - lo > 1 and not exhausted:
                if used() >= budget:
                    exhausted = True
                    break
                mid = (lo + hi) // 2
                v = session.check(*pins, slot.within(mid))
                if isinstance(v, Falsified):
                    witness = v.model
                    hi = abs(_slot_value(witness, slot))
                else:
                    lo = mid
            value = _slot_value(witness, slot)
            if value < 0 and not exhausted and used() < budget:
                v = session.check(*pins, slot.pin(-value))
                if isinstance(v, Falsified):
                    witness = v.model
                    value = -value
            pins.append(slot.pin(value))
            shrinks.append(VariableShrink(slot.name, orig_mag, abs(value), session.calls - start))

        for slot in counts:
            shrink(slot)
        for slot in scalars:
            shrink(slot)
        for name, ty in cex.params:
            if ty is not Type.ARRAY or name in fixed:
                continue
            n = witness[count_symbol(name)]
            for i in range(1, min(n, MATERIALIZE_CAP) + 1):
                shrink(_Slot(f"{name}[{i}]", f"(select {quote(name)} {i})"))
        final = session.check(*pins)
        if not isinstance(final, Falsified):
            # cannot happen when the solver is consistent; fall back to the last witness
            final = Falsified(witness)
        minimized = extract_counterexample(final.model, vc, seed=cex.seed)
        for name in fixed:
            minimized.values[name] = cex.values[name]
        return MinimizationReport(
            original=cex, minimized=minimized, reverification_runs=session.calls - base_calls,
            variables=shrinks, budget_exhausted=exhausted, pins=tuple(pins),
        )


def one_minimality_violations(report: MinimizationReport, vc: VerificationCondition,
                              cfg: SolverConfig | None = None, fixed: tuple = ()) -> list[str]:
    """Variables that could still be pinned to a strictly smaller magnitude
    with every other variable fixed at its minimized value. Uses one solver
    call per non-zero variable."""
    cfg = cfg or SolverConfig()
    cex = report.minimized
    script = encode(vc, seed=cfg.seeds[0] if cfg.seeds else 0, timeout=cfg.timeout)
    slots: list[_Slot] = []
    counts, scalars = _scalar_slots(cex, set(fixed))
    slots += counts + scalars
    for name, ty in cex.params:
        if ty is Type.ARRAY and name not in fixed:
            for i in range(1, cex.arrays[name].count + 1):
                slots.append(_Slot(f"{name}[{i}]", f"(select {quote(name)} {i})"))
    bad = []
    with SolverSession(script, cfg) as session:
        all_pins = _pin_all(cex, cell_limit=MATERIALIZE_CAP)
        for slot in slots:
            value = abs(_cex_value(cex, slot.name))
            if value == 0:
                continue
            others = [p for p in all_pins if not _pins_slot(p, slot)]
            verdict = session.check(*others, slot.below(value))
            if isinstance(verdict, Falsified):
                bad.append(slot.name)
    return bad


def _cex_value(cex: Counterexample, name: str) -> int:
    if "[" in name:
        arr, idx = name[:-1].split("[")
        return cex.arrays[arr].read(int(idx))
    return cex.values[name]


def _pins_slot(pin: str, slot: _Slot) -> bool:
    return pin.startswith(f"(assert (= {slot.term} ")


# -- tests -------------------------------------------------------------------------


def counterexample_to_test(cex: Counterexample, r, program: str, origin: Origin | None = None,
                           minimized: bool = False, expected: str | None = "__from_cex") -> TestCase:
    """A test case calling ``r`` on the counterexample's binding."""
    binding = {name: cex.binding[name] for name, _ in r.params}
    label = cex.violated[1] if expected == "__from_cex" else expected
    return TestCase(program, r.name, binding, label, origin or Origin("proof_failure"), minimized)


def test_file_name(t: TestCase, n: int) -> str:
    return f"t_{t.routine}_{t.origin.tag()}_{n}.ec"


def _lit(v) -> str:
    if isinstance(v, bool):
        return "True" if v else "False"
    return str(v)


def emit_test_source(t: TestCase, r) -> str:
    """Standalone test routine constructing the inputs literally and calling the target."""
    header = (f"-- expect: violation {t.expected}" if t.expected is not None
              else "-- expect: passes")
    lines = [header, f"-- target: {t.program}.{t.routine}", f"-- origin: {t.origin.tag()}", ""]
    lines += [f"class TEST_{t.routine.upper()}", "", "feature", "", f"  {TEST_ROUTINE}"]
    decls = [f"      {name}: {ty}" for name, ty in r.params]
    if r.result_type is not None:
        decls.append(f"      r: {r.result_type}")
    if decls:
        lines.append("    local")
        lines += decls
    lines.append("    do")
    for name, ty in r.params:
        v = t.binding[name]
        if ty is Type.ARRAY:
            lines.append(f"      create {name}.make ({len(v)})")
            lines += [f"      {name}[{i}] := {x}" for i, x in enumerate(v, start=1)]
        else:
            lines.append(f"      {name} := {_lit(v)}")
    args = ", ".join(name for name, _ in r.params)
    call = f"{t.routine} ({args})" if args else t.routine
    lines.append(f"      r := {call}" if r.result_type is not None else f"      {call}")
    lines += ["    end", "", "end", ""]
    return "\n".join(lines)


_HEADER = re.compile(r"--\s*expect:\s*(violation\s+(\S+)|passes)")
_TARGET = re.compile(r"--\s*target:\s*(\S+)\.(\S+)")


def read_test_header(source: str) -> tuple[str | None, str | None, str | None]:
    """(expected label or None, program, routine) from a test file's header."""
    lines = source.splitlines()
    m = _HEADER.match(lines[0].strip()) if lines else None
    if m is None:
        raise ValueError("test file lacks an '-- expect:' header on line 1")
    expected = m.group(2)
    program = routine = None
    for line in lines[1:4]:
        t = _TARGET.match(line.strip())
        if t:
            program, routine = t.group(1), t.group(2)
    return expected, program, routine


def run_test_source(p: TypedProgram, source: str,
                    step_budget: int = DEFAULT_STEP_BUDGET) -> TestVerdict:
    """Execute an emitted test file against ``p`` and compare with its header."""
    expected, _, _ = read_test_header(source)
    test_prog = parse_program(source, "test")
    merged = p.program
    for r in test_prog.routines:
        merged = merged.with_routine(r)
    typed = typecheck(merged)
    outcome = run_routine(typed, TEST_ROUTINE, {}, step_budget)
    if isinstance(outcome, ContractViolation):
        if expected is not None and outcome.label == expected:
            return TestVerdict(REPRODUCES, outcome)
        return TestVerdict(OTHER_VIOLATION, outcome)
    if isinstance(outcome, Divergence):
        return TestVerdict(OTHER_VIOLATION, outcome)
    return TestVerdict(PASSES_UNEXPECTEDLY if expected is not None else PASSES, outcome)


# -- diagnosis ----------------------------------------------------------------------


@dataclass(frozen=True)
class Diagnosis:
    text: str
    record: dict


def _kind_word(vc: VerificationCondition) -> str:
    return vc.runtime_kind.replace("_", " ")


def diagnose(f: ProofFailure, cex: Counterexample | None = None,
             test_path: str | None = None) -> Diagnosis | None:
    """Human-readable account of a proof failure; ``None`` for valid VCs."""
    vc = f.vc
    where = f" at {vc.span}" if vc.span else ""
    record = {
        "routine": vc.routine, "vc": vc.id, "kind": vc.kind, "label": vc.label,
        "location": str(vc.span) if vc.span else None, "verdict": f.verdict,
    }
    if f.verdict != FALSIFIED:
        text = (f"{_kind_word(vc)} {vc.label}{where} in {vc.routine} may be violated: "
                f"the prover could not decide ({f.verdict}). No counterexample is available; "
                "review the annotations (loop invariants, callee contracts).")
        record["inputs"] = None
        return Diagnosis(text, record)
    text = f"{_kind_word(vc)} {vc.label} violated in {vc.routine}{where}"
    if vc.call_site is not None:
        text += f" (call at {vc.call_site})"
    if cex is not None:
        if cex.oversized:
            values = ", ".join(f"{k} = {v}" for k, v in sorted(cex.values.items()))
            text += f"; {values} (array too large to display)"
            record["inputs"] = {k: v for k, v in sorted(cex.values.items())}
        else:
            text += f"; {format_binding(cex.binding)}"
            record["inputs"] = {k: (list(v) if isinstance(v, tuple) else v)
                                for k, v in sorted(cex.binding.items())}
    if test_path:
        text += f"\n  test: {test_path}"
        record["test"] = test_path
    return Diagnosis(text, record)


def spec_gap_diagnostic(vc: VerificationCondition, t: TestCase, verdict: TestVerdict) -> Diagnosis:
    """The counterexample's test does not fail as the proof predicts."""
    out = verdict.outcome
    if isinstance(out, Normal):
        observed = "the run terminates normally"
    elif isinstance(out, ContractViolation):
        observed = f"the run fails elsewhere ({out.describe()})"
    else:
        observed = "the run does not terminate within the step budget"
    text = (f"{SPEC_GAP}: the counterexample to {vc.label} in {vc.routine} does not reproduce at "
            f"run time; {observed}. The proof relies on facts the contracts do not state "
            "(e.g. a loop invariant or callee postcondition that is too weak).")
    return Diagnosis(text, {"routine": vc.routine, "vc": vc.id, "label": vc.label,
                            "diagnostic": SPEC_GAP, "binding": format_binding(t.binding)})


@dataclass
class Proof2TestResult:
    cex: Counterexample
    report: MinimizationReport | None
    test: TestCase
    verdict: TestVerdict
    diagnosis: Diagnosis

    @property
    def reproduces(self) -> bool:
        return self.verdict.status == REPRODUCES


def proof_to_test(p: TypedProgram, vc: VerificationCondition, model, cfg: SolverConfig | None = None,
                  budget: int = DEFAULT_MIN_BUDGET, step_budget: int = DEFAULT_STEP_BUDGET,
                  seed: int | None = None) -> Proof2TestResult:
    """Minimize a falsifying model, build the test, and check it reproduces."""
    cfg = cfg or SolverConfig()
    r = p.routine(vc.routine)
    cex = extract_counterexample(model, vc, r, seed=seed)
    report = None
    if budget > 0:
        report = minimize(cex, vc, budget, cfg)
        final = report.minimized
    else:
        final = cex
    t = counterexample_to_test(final, r, p.program.name, minimized=report is not None)
    verdict = run_test(p, t, step_budget)
    if verdict.status == REPRODUCES:
        diag = diagnose(ProofFailure(vc, FALSIFIED, model), final)
    else:
        diag = spec_gap_diagnostic(vc, t, verdict)
    return Proof2TestResult(cex, report, t, verdict, diag)
