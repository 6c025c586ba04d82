"""Command-line driver: verify, testgen, run-tests and fix.

Settings come from, in decreasing priority, command-line flags, the
``CONTRAVERIFY_SOLVER`` environment variable, a ``contraverify.toml`` file in
the working directory, and built-in defaults. Every command writes one
canonical JSON report (``report.json``) into the output directory; wall-clock
timings live in its ``timings`` field so the rest of the document can be
compared byte for byte across runs.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from contextlib import contextmanager
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .coverage import measure_coverage
from .evaluator import DEFAULT_STEP_BUDGET, ContractViolation, Normal, run_test
from .parser import ParseError, parse_program
from .proof2fix import failures_of, fix_failure, regression_green
from .proof2test import (DEFAULT_MIN_BUDGET, diagnose, emit_test_source, proof_to_test,
                         test_file_name)
from .seeding import MAX_UNROLL_DEPTH, CoverageGoal, generate_suite
from .smt import (DEFAULT_SEEDS, DEFAULT_TIMEOUT, SOLVER_ENV, Falsified, ModelParseError,
                  SolverConfig, SolverProcessError, Unknown, Valid, encode, solve)
from .suite import TestSuite, dump_json, format_binding, read_manifest, write_manifest
from .typecheck import TypeCheckError, TypedProgram, typecheck
from .vcgen import FALSIFIED, UNKNOWN, ProofFailure, VcGenError, generate_vcs

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("contraverify")

CONFIG_FILE = "contraverify.toml"
REPORT_FILE = "report.json"
MANIFEST_FILE = "manifest.json"

EXIT_OK, EXIT_FAILURE, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3
COVERAGE_GOALS = ("branch", "mcdc")
REPORT_FORMATS = ("text", "json")


class ConfigError(Exception):
    pass


class InputError(Exception):
    """Missing file, parse error or type error: exit code 2."""


@dataclass(frozen=True)
class RunConfig:
    solver: str | None = None
    solver_args: tuple = ("-in", "-smt2")
    timeout: float = DEFAULT_TIMEOUT
    seeds: tuple = DEFAULT_SEEDS
    workers: int = 1
    coverage: str = "branch"
    unroll: int | None = None
    max_unroll: int = MAX_UNROLL_DEPTH
    min_budget: int = DEFAULT_MIN_BUDGET
    step_budget: int = DEFAULT_STEP_BUDGET
    out: str = "contraverify-out"
    format: str = "text"
    keep_smt: bool = False
    trace: bool = False

    def __post_init__(self):
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")
        if not self.seeds or any(s < 0 for s in self.seeds):
            raise ConfigError("seeds must be a non-empty list of non-negative integers")
        for name in ("workers", "max_unroll", "min_budget", "step_budget"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name.replace('_', '-')} must be positive")
        if self.unroll is not None and not 0 <= self.unroll <= self.max_unroll:
            raise ConfigError(f"unroll depth must be in 0..{self.max_unroll}")
        if self.coverage not in COVERAGE_GOALS:
            raise ConfigError(f"coverage must be one of {', '.join(COVERAGE_GOALS)}")
        if self.format not in REPORT_FORMATS:
            raise ConfigError(f"format must be one of {', '.join(REPORT_FORMATS)}")

    def solver_config(self) -> SolverConfig:
        return SolverConfig(self.solver, tuple(self.solver_args), self.timeout, tuple(self.seeds))

    def goal(self) -> CoverageGoal:
        return CoverageGoal(self.coverage == "mcdc", self.unroll, self.max_unroll)

    def to_json(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["solver_args"] = list(self.solver_args)
        d["seeds"] = list(self.seeds)
        return d


_TUPLE_KEYS = ("solver_args", "seeds")


def _normalize(key: str, value):
    if key in _TUPLE_KEYS:
        return tuple(value)
    if key == "timeout":
        return float(value)
    return value


def load_config(cli: dict | None = None, env: dict | None = None,
                cwd: Path | str | None = None) -> RunConfig:
    """Merge settings: CLI > environment > config file > defaults."""
    env = os.environ if env is None else env
    known = {f.name for f in fields(RunConfig)}
    merged: dict = {}
    path = Path(cwd or ".") / CONFIG_FILE
    if path.is_file():
        try:
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        data = data.get("contraverify", data)
        for k, v in data.items():
            key = k.replace("-", "_")
            if key not in known:
                raise ConfigError(f"{path}: unknown setting {k!r}")
            merged[key] = _normalize(key, v)
    if env.get(SOLVER_ENV):
        merged["solver"] = env[SOLVER_ENV]
    for k, v in (cli or {}).items():
        if v is not None:
            merged[k] = _normalize(k, v)
    return RunConfig(**merged)


@dataclass
class RunReport:
    command: str
    files: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    exit_code: int = EXIT_OK
    verdicts: dict = field(default_factory=dict)  # routine -> [{vc, kind, label, verdict}]
    counterexamples: list = field(default_factory=list)
    tests: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    coverage: dict = field(default_factory=dict)
    infeasibility: dict = field(default_factory=dict)
    results: list = field(default_factory=list)  # run-tests verdicts
    fixes: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def to_json(self, timings: bool = True) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        if not timings:
            del d["timings"]
        return d

    @classmethod
    def from_json(cls, d: dict) -> RunReport:
        return cls(**d)

    def canonical(self, timings: bool = True) -> str:
        return dump_json(self.to_json(timings))

    def text(self) -> str:
        lines = [f"contraverify {self.command}: exit {self.exit_code}"]
        for e in self.errors:
            lines.append(f"error: {e}")
        for routine, vcs in self.verdicts.items():
            bad = [v for v in vcs if v["verdict"] != "valid"]
            lines.append(f"{routine}: {len(vcs) - len(bad)}/{len(vcs)} VCs valid")
            for v in bad:
                lines.append(f"  {v['vc']} {v['kind']} {v['label']}: {v['verdict']}")
        for d in self.diagnostics:
            lines.append(d["text"])
        for name, cov in self.coverage.items():
            lines.append(f"{name}: branch coverage {cov['branch_coverage_ratio']:.3f}")
        if self.tests:
            lines.append(f"{len(self.tests)} tests written")
        for r in self.results:
            lines.append(f"  {'green' if r['green'] else 'RED  '} {r['name']}: {r['status']}")
        for f in self.fixes:
            lines.append(f["text"])
        if self.timings:
            lines.append("timings: " + ", ".join(f"{k} {v:.2f}s" for k, v in sorted(self.timings.items())))
        return "\n".join(lines)


def _clock(report: RunReport):
    """``with clock("phase"):`` accumulates wall-clock seconds into ``report.timings``."""
    @contextmanager
    def phase(name: str):
        t = time.perf_counter()
        try:
            yield
        finally:
            report.timings[name] = round(report.timings.get(name, 0.0) + time.perf_counter() - t, 6)
    return phase


# -- loading ------------------------------------------------------------------------------


def load_programs(files: list[str]) -> list[tuple[str, TypedProgram]]:
    """Parse and typecheck every file before any solver work starts."""
    out = []
    for f in files:
        path = Path(f)
        if not path.is_file():
            raise InputError(f"{f}: no such file")
        try:
            prog = parse_program(path.read_text(encoding="utf-8"), path.stem.upper())
            out.append((f, typecheck(prog)))
        except ParseError as exc:
            raise InputError(f"{f}: {exc}") from exc
        except TypeCheckError as exc:
            raise InputError(f"{f}: {exc}") from exc
    return out


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- verify -----------------------------------------------------------------------------------


def solve_vc(vc, cfg: SolverConfig, smt_dir: Path | None = None):
    """Solve one VC, retrying the remaining seeds while the answer is unknown."""
    verdict, seed = None, cfg.seeds[0]
    for seed in cfg.seeds:
        script = encode(vc, seed=seed, timeout=cfg.timeout)
        if smt_dir is not None and seed == cfg.seeds[0]:
            (smt_dir / f"{vc.routine}.{vc.id}.smt2").write_text(script.render(), encoding="utf-8")
        verdict = solve(script, cfg)
        if not isinstance(verdict, Unknown):
            break
    return verdict, seed


def _verdict_word(v) -> str:
    if isinstance(v, Valid):
        return "valid"
    if isinstance(v, Falsified):
        return FALSIFIED
    return f"{UNKNOWN} ({v.reason})"


def describe_counterexample(cex) -> str:
    """Binding text; huge arrays are summarized by their counts."""
    if not cex.oversized:
        return format_binding(cex.binding)
    parts = []
    for name, ty in cex.params:
        if name in cex.arrays:
            parts.append(f"{name}.count = {cex.arrays[name].count} (cells elided)")
        else:
            parts.append(f"{name} = {cex.values[name]}")
    return ", ".join(parts)


def cmd_verify(files: list[str], cfg: RunConfig) -> RunReport:
    report = RunReport("verify", list(files), cfg.to_json())
    clock = _clock(report)
    with clock("parse"):
        programs = load_programs(files)
    scfg = cfg.solver_config()
    out = _out_dir(cfg)
    smt_dir = None
    if cfg.keep_smt:
        smt_dir = out / "smt"
        smt_dir.mkdir(exist_ok=True)
    suite = TestSuite(provenance={"generator": "proof2test", "seeds": list(scfg.seeds)})
    written: dict = {}
    failed = False
    for f, p in programs:
        with clock("vcgen"):
            jobs = [(r, vc) for r in p.program.routines for vc in generate_vcs(p, r.name)]
        log.info("%s: %d VCs", f, len(jobs))
        with clock("solve"):
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                verdicts = list(pool.map(lambda j: solve_vc(j[1], scfg, smt_dir), jobs))
        for (r, vc), (verdict, seed) in zip(jobs, verdicts):
            key = f"{p.program.name}.{r.name}"
            report.verdicts.setdefault(key, []).append(
                {"vc": vc.id, "kind": vc.kind, "label": vc.label, "verdict": _verdict_word(verdict)})
            log.info("%s %s %s: %s", key, vc.id, vc.label, _verdict_word(verdict))
            if isinstance(verdict, Valid):
                continue
            failed = True
            if isinstance(verdict, Unknown):
                d = diagnose(ProofFailure(vc, UNKNOWN))
                report.diagnostics.append({"text": d.text, **d.record})
                continue
            with clock("proof2test"):
                res = proof_to_test(p, vc, verdict.model, scfg, cfg.min_budget, cfg.step_budget, seed)
            t = res.test
            name = test_file_name(t, len(suite) + 1)
            t = replace(t, name=name[:-3])
            if suite.add(t):
                (out / "tests").mkdir(exist_ok=True)
                (out / "tests" / name).write_text(emit_test_source(t, r), encoding="utf-8")
                written[t.name] = f"tests/{name}"
                report.tests.append(f"tests/{name}")
            entry = {"routine": key, "vc": vc.id, "label": vc.label,
                     "original": describe_counterexample(res.cex), "minimized": format_binding(t.binding),
                     "reproduces": res.reproduces}
            if res.report is not None:
                entry["minimization"] = res.report.to_json()
            report.counterexamples.append(entry)
            report.diagnostics.append({"text": res.diagnosis.text, **res.diagnosis.record})
    if len(suite):
        write_manifest(suite, out / MANIFEST_FILE, written)
    report.exit_code = EXIT_FAILURE if failed else EXIT_OK
    return report


# -- testgen ----------------------------------------------------------------------------------


def cmd_testgen(files: list[str], cfg: RunConfig) -> RunReport:
    report = RunReport("testgen", list(files), cfg.to_json())
    clock = _clock(report)
    with clock("parse"):
        programs = load_programs(files)
    scfg = cfg.solver_config()
    out = _out_dir(cfg)
    goal = cfg.goal()
    combined = TestSuite(provenance={"generator": "seeding", "goal": goal.to_json(),
                                     "seeds": list(scfg.seeds)})
    written: dict = {}
    for f, p in programs:
        with clock("testgen"):
            suite, cov, infeasible = generate_suite(p, goal, scfg, budget=cfg.min_budget,
                                                    jobs=cfg.workers, step_budget=cfg.step_budget)
        log.info("%s: %d tests, branch coverage %.3f", f, len(suite), cov.branch_coverage_ratio)
        name = p.program.name
        report.coverage[name] = {**cov.to_json(), "mcdc_ratio": round(cov.mcdc_ratio, 6)}
        report.infeasibility[name] = infeasible.to_json()
        for w in infeasible.warnings:
            report.diagnostics.append({"text": f"warning: {w}"})
        for t in suite:
            t = replace(t, name=f"{name.lower()}_{t.name}")
            if not combined.add(t):
                continue
            fname = f"t_{t.name}.ec"
            (out / "tests").mkdir(exist_ok=True)
            (out / "tests" / fname).write_text(emit_test_source(t, p.routine(t.routine)), encoding="utf-8")
            written[t.name] = f"tests/{fname}"
            report.tests.append(f"tests/{fname}")
    write_manifest(combined, out / MANIFEST_FILE, written)
    (out / "coverage.json").write_text(dump_json(report.coverage), encoding="utf-8")
    (out / "infeasibility.json").write_text(dump_json(report.infeasibility), encoding="utf-8")
    report.exit_code = EXIT_OK
    return report


# -- run-tests --------------------------------------------------------------------------------


def regression_status(p: TypedProgram, t) -> tuple[bool, str]:
    """Green/red for one test.

    Tests born from proof failures are regression tests: green once the run
    completes without a contract violation, or once the target's own
    precondition excludes the input. Other tests are green when the run meets
    the expectation recorded in the manifest.
    """
    v = run_test(p, t)
    if t.origin.kind == "proof_failure":
        if isinstance(v.outcome, Normal):
            return True, "passes"
        if regression_green(p, t):
            return True, "input excluded by precondition"
        if isinstance(v.outcome, ContractViolation):
            return False, f"violation {v.outcome.describe()}"
        return False, v.status
    return v.ok, v.status


def cmd_runtests(files: list[str], manifest: str, cfg: RunConfig) -> RunReport:
    report = RunReport("run-tests", list(files), cfg.to_json())
    clock = _clock(report)
    with clock("parse"):
        programs = load_programs(files)
        mpath = Path(manifest)
        if not mpath.is_file():
            raise InputError(f"{manifest}: no such manifest")
        suite, test_files = read_manifest(mpath)
        for name, rel in sorted(test_files.items()):
            if not (mpath.parent / rel).is_file():
                raise InputError(f"{manifest}: test {name} references missing file {rel}")
    by_name = {p.program.name: p for _, p in programs}
    all_green = True
    with clock("run"):
        for t in suite:
            p = by_name.get(t.program)
            if p is None and len(programs) == 1:
                p = programs[0][1]
            if p is None or not p.program.has_routine(t.routine):
                raise InputError(f"test {t.name} targets {t.program}.{t.routine}, which no input file defines")
            green, status = regression_status(p, t)
            all_green &= green
            report.results.append({"name": t.name, "routine": f"{t.program}.{t.routine}",
                                   "green": green, "status": status})
    with clock("coverage"):
        for _, p in programs:
            mine = TestSuite([t for t in suite if t.program == p.program.name or len(programs) == 1])
            cov = measure_coverage(p, mine, step_budget=cfg.step_budget)
            report.coverage[p.program.name] = cov.to_json()
    report.exit_code = EXIT_OK if all_green else EXIT_FAILURE
    return report


# -- fix ----------------------------------------------------------------------------------------


def cmd_fix(files: list[str], cfg: RunConfig) -> RunReport:
    report = RunReport("fix", list(files), cfg.to_json())
    clock = _clock(report)
    with clock("parse"):
        programs = load_programs(files)
    scfg = cfg.solver_config()
    out = _out_dir(cfg)
    failed = False
    for f, p in programs:
        with clock("solve"):
            failures = failures_of(p, scfg)
        for failure in failures:
            failed = True
            if failure.verdict != FALSIFIED:
                d = diagnose(failure)
                report.fixes.append({"routine": failure.vc.routine, "vc": failure.vc.id,
                                     "label": failure.vc.label, "candidates": [], "valid_fixes": [],
                                     "diagnostic": d.text, "text": d.text})
                continue
            with clock("fix"):
                fr = fix_failure(p, failure, scfg, budget=cfg.min_budget, jobs=cfg.workers,
                                 step_budget=cfg.step_budget)
            log.info("%s: %d candidates, %d valid", failure.vc.label, len(fr.candidates), len(fr.ranked))
            report.fixes.append({**fr.to_json(), "program": p.program.name, "text": fr.text()})
    (out / "fixes.json").write_text(dump_json(report.fixes), encoding="utf-8")
    report.exit_code = EXIT_FAILURE if failed else EXIT_OK
    return report


# -- entry point ------------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="contraverify", description="Verify contracted programs, "
                                 "turn proof failures into tests, seed coverage suites and suggest fixes.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("files", nargs="+", help=".ec source files")
    common.add_argument("--solver", help="SMT solver executable (default: z3 on PATH)")
    common.add_argument("--timeout", type=float, help="per-query solver timeout in seconds")
    common.add_argument("--seeds", type=lambda s: tuple(int(x) for x in s.split(",")),
                        help="comma-separated solver seeds, tried in order")
    common.add_argument("--coverage", choices=COVERAGE_GOALS, help="test generation goal")
    common.add_argument("--unroll", type=int, help="loop unrolling depth for testgen")
    common.add_argument("--min-budget", dest="min_budget", type=int, help="minimization solver-call budget")
    common.add_argument("--workers", type=int, help="parallel solver workers")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=REPORT_FORMATS, help="stdout rendering of the report")
    common.add_argument("--keep-smt", dest="keep_smt", action="store_true", default=None,
                        help="keep SMT-LIB queries as <routine>.<vc-id>.smt2")
    common.add_argument("--trace", action="store_true", default=None, help="log pipeline progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="prove every VC; emit tests for failures")
    sub.add_parser("testgen", parents=[common], help="generate a coverage suite by seeding contradictions")
    rt = sub.add_parser("run-tests", parents=[common], help="run a suite manifest against the sources")
    rt.add_argument("--manifest", required=True, help="suite manifest written by verify or testgen")
    sub.add_parser("fix", parents=[common], help="propose validated fixes for proof failures")
    return ap


_CLI_KEYS = ("solver", "timeout", "seeds", "coverage", "unroll", "min_budget", "workers", "out",
             "format", "keep_smt", "trace")


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config({k: getattr(args, k) for k in _CLI_KEYS})
    except (ConfigError, TypeError) as exc:
        print(f"contraverify: configuration error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if cfg.trace:
        logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s", stream=sys.stderr)
    report = RunReport(args.command, list(args.files), cfg.to_json())
    try:
        if args.command == "verify":
            report = cmd_verify(args.files, cfg)
        elif args.command == "testgen":
            report = cmd_testgen(args.files, cfg)
        elif args.command == "run-tests":
            report = cmd_runtests(args.files, args.manifest, cfg)
        else:
            report = cmd_fix(args.files, cfg)
    except (InputError, VcGenError) as exc:
        report.errors.append(str(exc))
        report.exit_code = EXIT_INPUT
    except (SolverProcessError, ModelParseError) as exc:
        report.errors.append(f"solver failure: {exc}")
        report.exit_code = EXIT_SOLVER
    out = _out_dir(cfg)
    (out / REPORT_FILE).write_text(report.canonical(), encoding="utf-8")
    print(dump_json(report.to_json()) if cfg.format == "json" else report.text())
    return report.exit_code
