"""Test cases, test suites, and the JSON suite manifest."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

MANIFEST_VERSION = 1


def freeze_binding(binding: dict) -> tuple:
    """Hashable canonical form of an argument binding."""
    out = []
    for name in sorted(binding):
        v = binding[name]
        if isinstance(v, (list, tuple)):
            v = tuple(int(x) for x in v)
        out.append((name, v))
    return tuple(out)


def format_binding(binding: dict) -> str:
    parts = []
    for name in sorted(binding):
        v = binding[name]
        if isinstance(v, (list, tuple)):
            parts.append(f"{name}.count = {len(v)}")
            parts.extend(f"{name}[{i}] = {x}" for i, x in enumerate(v, start=1))
        elif isinstance(v, bool):
            parts.append(f"{name} = {'True' if v else 'False'}")
        else:
            parts.append(f"{name} = {v}")
    return ", ".join(parts)


@dataclass(frozen=True)
class Origin:
    """Why a test exists: a proof failure or one seeded coverage obligation."""

    kind: str  # proof_failure | seeded_branch | mcdc | loop_unroll
    branch: int | None = None
    decision: int | None = None
    condition: int | None = None
    polarity: bool | None = None
    loop: int | None = None
    iterations: int | None = None

    def tag(self) -> str:
        if self.kind == "seeded_branch":
            return f"branch{self.branch}"
        if self.kind == "mcdc":
            return f"mcdc{self.decision}c{self.condition}{'t' if self.polarity else 'f'}"
        if self.kind == "loop_unroll":
            return f"loop{self.loop}k{self.iterations}"
        return "proof"

    def to_json(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}

    @classmethod
    def from_json(cls, d: dict) -> Origin:
        return cls(**d)


@dataclass(frozen=True)
class TestCase:
    __test__ = False

    program: str
    routine: str
    binding: dict = field(hash=False)
    expected: str | None = None  # violated clause label; None means "passes"
    origin: Origin = Origin("proof_failure")
    minimized: bool = False
    name: str = ""

    @property
    def key(self) -> tuple:
        return (self.program, self.routine, freeze_binding(self.binding))

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "program": self.program,
            "routine": self.routine,
            "binding": {k: (list(v) if isinstance(v, (list, tuple)) else v)
                        for k, v in sorted(self.binding.items())},
            "expected": ({"verdict": "violation", "label": self.expected}
                         if self.expected is not None else {"verdict": "passes"}),
            "origin": self.origin.to_json(),
            "minimized": self.minimized,
        }

    @classmethod
    def from_json(cls, d: dict) -> TestCase:
        exp = d["expected"]
        binding = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d["binding"].items()}
        return cls(
            program=d["program"],
            routine=d["routine"],
            binding=binding,
            expected=exp.get("label") if exp["verdict"] == "violation" else None,
            origin=Origin.from_json(d["origin"]),
            minimized=d.get("minimized", False),
            name=d.get("name", ""),
        )


@dataclass
class TestSuite:
    __test__ = False

    tests: list[TestCase] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def add(self, t: TestCase) -> bool:
        """Append ``t`` unless a test with the same target and binding exists."""
        if any(existing.key == t.key for existing in self.tests):
            return False
        self.tests.append(t)
        return True

    def __len__(self) -> int:
        return len(self.tests)

    def __iter__(self):
        return iter(self.tests)

    def to_json(self) -> dict:
        return {
            "version": MANIFEST_VERSION,
            "provenance": self.provenance,
            "tests": [t.to_json() for t in self.tests],
        }

    @classmethod
    def from_json(cls, d: dict) -> TestSuite:
        return cls([TestCase.from_json(t) for t in d.get("tests", [])], d.get("provenance", {}))


def dump_json(data: Any) -> str:
    """Canonical JSON rendering: sorted keys, stable indentation."""
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def write_manifest(suite: TestSuite, path: Path, files: dict[str, str] | None = None) -> None:
    data = suite.to_json()
    if files:
        for t in data["tests"]:
            if t["name"] in files:
                t["file"] = files[t["name"]]
    Path(path).write_text(dump_json(data), encoding="utf-8")


def read_manifest(path: Path) -> tuple[TestSuite, dict]:
    """Load a manifest; also returns ``{test name: file}`` for tests with files."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    files = {t["name"]: t["file"] for t in data.get("tests", []) if "file" in t}
    return TestSuite.from_json(data), files
