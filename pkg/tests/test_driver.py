import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from contraverify.driver import (EXIT_FAILURE, EXIT_INPUT, EXIT_OK, EXIT_SOLVER, ConfigError, RunConfig,
                                 RunReport, load_config, main)
from contraverify.smt import SOLVER_ENV
from support import CORPUS, ROOT

MAX = str(CORPUS / "verify" / "max.ec")
MAX_FIXED = str(CORPUS / "verify" / "max_fixed.ec")


@pytest.fixture
def work(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(SOLVER_ENV, raising=False)
    return tmp_path


def _report(path="contraverify-out"):
    return json.loads((Path.cwd() / path / "report.json").read_text())


def test_config_defaults(tmp_path):
    cfg = load_config({}, {}, tmp_path)
    assert cfg == RunConfig()
    assert cfg.solver_config().seeds == cfg.seeds


def test_config_precedence(tmp_path):
    (tmp_path / "contraverify.toml").write_text(
        '[contraverify]\nsolver = "from-file"\ntimeout = 7\nseeds = [4, 5]\ncoverage = "mcdc"\n')
    cfg = load_config({}, {}, tmp_path)
    assert (cfg.solver, cfg.timeout, cfg.seeds, cfg.coverage) == ("from-file", 7.0, (4, 5), "mcdc")
    cfg = load_config({}, {SOLVER_ENV: "from-env"}, tmp_path)
    assert cfg.solver == "from-env" and cfg.timeout == 7.0
    cfg = load_config({"solver": "from-cli", "timeout": 2, "seeds": None}, {SOLVER_ENV: "from-env"}, tmp_path)
    assert (cfg.solver, cfg.timeout, cfg.seeds) == ("from-cli", 2.0, (4, 5))


@pytest.mark.parametrize("text", ['[contraverify]\nbogus = 1\n', 'timeout = -1\n', 'seeds = []\n',
                                  'coverage = "paths"\n', 'unroll = 99\n', 'not toml ==\n'])
def test_config_errors(tmp_path, text):
    (tmp_path / "contraverify.toml").write_text(text)
    with pytest.raises(ConfigError):
        load_config({}, {}, tmp_path)


def test_verify_failure_writes_test_and_manifest(work):
    assert main(["verify", MAX, "--keep-smt"]) == EXIT_FAILURE
    out = work / "contraverify-out"
    manifest = json.loads((out / "manifest.json").read_text())
    (t,) = manifest["tests"]
    assert t["origin"]["kind"] == "proof_failure" and t["expected"]["label"] == "is_max"
    assert (out / t["file"]).is_file()
    report = _report()
    (cex,) = report["counterexamples"]
    assert cex["minimized"] == "a.count = 2, a[1] = 0, a[2] = 1"
    smt = sorted(p.name for p in (out / "smt").iterdir())
    assert "max.vc1.smt2" in smt and all(n.startswith("max.vc") for n in smt)
    assert len(smt) == len(report["verdicts"]["MAX.max"])


def test_verify_valid_program(work):
    assert main(["verify", MAX_FIXED]) == EXIT_OK
    report = _report()
    assert report["tests"] == [] and report["errors"] == []
    assert all(v["verdict"] == "valid" for vs in report["verdicts"].values() for v in vs)


def test_run_tests_inverts_after_fix(work):
    assert main(["verify", MAX]) == EXIT_FAILURE
    manifest = "contraverify-out/manifest.json"
    assert main(["run-tests", MAX, "--manifest", manifest, "--out", "buggy"]) == EXIT_FAILURE
    assert [r["green"] for r in _report("buggy")["results"]] == [False]
    assert main(["run-tests", MAX_FIXED, "--manifest", manifest, "--out", "fixed"]) == EXIT_OK
    assert [r["green"] for r in _report("fixed")["results"]] == [True]


def test_testgen_then_run_tests_green(work):
    src = str(CORPUS / "sc" / "two_branch.ec")
    assert main(["testgen", src]) == EXIT_OK
    out = work / "contraverify-out"
    for name in ("manifest.json", "coverage.json", "infeasibility.json"):
        assert (out / name).is_file()
    assert main(["run-tests", src, "--manifest", str(out / "manifest.json"), "--out", "rt"]) == EXIT_OK
    assert all(r["green"] for r in _report("rt")["results"])


def test_exit_codes_for_bad_input(work):
    assert main(["verify", str(work / "missing.ec")]) == EXIT_INPUT
    (work / "broken.ec").write_text("class BROKEN\nfeature\n  f (: INTEGER\nend\n")
    assert main(["verify", "broken.ec"]) == EXIT_INPUT
    assert "broken.ec" in " ".join(_report()["errors"])
    assert main(["run-tests", MAX, "--manifest", "nope.json"]) == EXIT_INPUT
    assert main(["verify", MAX, "--timeout", "0"]) == EXIT_INPUT
    assert main(["verify", MAX, "--solver", str(work / "no-such-solver")]) == EXIT_SOLVER


def test_manifest_with_missing_test_file(work):
    assert main(["verify", MAX]) == EXIT_FAILURE
    out = work / "contraverify-out"
    for f in (out / "tests").iterdir():
        f.unlink()
    assert main(["run-tests", MAX, "--manifest", str(out / "manifest.json"), "--out", "rt"]) == EXIT_INPUT


def test_fix_command(work):
    assert main(["fix", MAX]) == EXIT_FAILURE
    fixes = json.loads((work / "contraverify-out" / "fixes.json").read_text())
    top = [c for c in fixes[0]["candidates"] if c["rank"] == 1][0]
    assert top["replacement"] == "i > a.count"
    assert (CORPUS / "verify" / "max.ec").read_text().count("i >= a.count") == 1
    assert main(["fix", MAX_FIXED, "--out", "ok"]) == EXIT_OK


def test_report_round_trip(work):
    main(["verify", MAX, "--format", "json"])
    d = _report()
    r = RunReport.from_json(d)
    assert r.to_json() == d
    assert "exit 1" in r.text()


def test_runs_are_deterministic(work, monkeypatch):
    for cmd in (["verify", MAX], ["testgen", str(CORPUS / "sc" / "clamp.ec")], ["fix", MAX]):
        texts, manifests = [], []
        for run in ("one", "two"):
            (work / run).mkdir(exist_ok=True)
            monkeypatch.chdir(work / run)
            main(cmd)
            texts.append(RunReport.from_json(_report()).canonical(timings=False))
            manifests.append((work / run / "contraverify-out" / "manifest.json").read_bytes())
        assert texts[0] == texts[1]
        assert manifests[0] == manifests[1]


def test_module_entry_point(work):
    proc = subprocess.run([sys.executable, "-m", "contraverify", "verify", MAX_FIXED],
                          capture_output=True, text=True, cwd=work,
                          env={"PYTHONPATH": str(ROOT / "src"), "PATH": os.environ["PATH"]})
    assert proc.returncode == EXIT_OK, proc.stderr
    assert "VCs valid" in proc.stdout
