"""Pass/fail reporting shared by the law suites and verification helpers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass(frozen=True)
class CheckEntry:
    law: str
    statement: str
    passed: bool
    tolerance: float | None = None
    seed: int | None = None
    witness: str | None = None

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        extra = f"  [{self.witness}]" if (self.witness and not self.passed) else ""
        return f"{status}  {self.law}: {self.statement}{extra}"


@dataclass
class CheckReport:
    suite: str
    entries: list = field(default_factory=list)

    def add(self, law, statement, passed, tolerance=None, seed=None, witness=None):
        self.entries.append(CheckEntry(law, statement, bool(passed), tolerance, seed, witness))

    def extend(self, other: "CheckReport"):
        self.entries.extend(other.entries)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    @property
    def failures(self) -> list:
        return [e for e in self.entries if not e.passed]

    def sorted(self) -> "CheckReport":
        out = CheckReport(self.suite)
        out.entries = sorted(self.entries, key=lambda e: e.law)
        return out

    def to_dict(self) -> dict:
        ordered = self.sorted()
        return {
            "schema": 1,
            "suite": self.suite,
            "passed": self.passed,
            "checks": [
                {
                    "law": e.law,
                    "statement": e.statement,
                    "status": "pass" if e.passed else "fail",
                    "tolerance": e.tolerance,
                    "seed": e.seed,
                    "witness": e.witness,
                }
                for e in ordered.entries
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)
