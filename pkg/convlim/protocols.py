"""Protocol definitions for convlim.

Pydantic models for verification verdicts, witnesses, reports and the
system description document.
"""
from __future__ import annotations

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field


# ---- verdicts ----

class Witness(BaseModel):
    """Concrete counterexample attached to a failed check."""
    location: str
    point: Optional[str] = None
    expected: Optional[str] = None
    actual: Optional[str] = None

    def __str__(self) -> str:
        parts = [self.location]
        if self.point is not None:
            parts.append(f"at {self.point}")
        if self.expected is not None or self.actual is not None:
            parts.append(f"expected {self.expected}, got {self.actual}")
        return " ".join(parts)


class CheckResult(BaseModel):
    """Verdict of one law over an exhaustive index set."""
    name: str
    passed: bool
    checked: int = 0
    witness: Optional[Witness] = None
    detail: str = ""
    suite: str = ""

    @classmethod
    def ok(cls, name: str, checked: int, detail: str = "") -> "CheckResult":
        return cls(name=name, passed=True, checked=checked, detail=detail)

    @classmethod
    def fail(cls, name: str, checked: int, witness: Witness, detail: str = "") -> "CheckResult":
        return cls(name=name, passed=False, checked=checked, witness=witness, detail=detail)


class Report(BaseModel):
    """Machine-readable result of a verification run."""
    suite: str
    source: str = ""
    checks: List[CheckResult] = Field(default_factory=list)
    elapsed: float = 0.0
    meta: Dict[str, Any] = Field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [c for c in self.checks if not c.passed]


class MutationOutcome(BaseModel):
    """Verdict of the target suite on one injected corruption."""
    mutant: str
    suite: str
    description: str = ""
    skipped: bool = False
    equivalent: bool = False
    detected: bool = False
    failed_check: Optional[str] = None
    witness: Optional[str] = None


# ---- system description (format 1) ----

class SemigroupBlock(BaseModel):
    elements: List[str]
    table: List[List[str]]


class MeasureBlock(BaseModel):
    idempotent: Optional[Dict[str, str]] = None
    generator: Optional[Dict[str, str]] = None
    per_interval: Optional[List[Dict[str, Any]]] = None


class TowerEvent(BaseModel):
    """Cylinder event {X_{from,to} in values}."""
    from_: str = Field(alias="from")
    to: str
    values: List[str]

    model_config = {"populate_by_name": True}


class TowerBlock(BaseModel):
    levels: List[List[str]]
    events: List[TowerEvent] = Field(default_factory=list)


class SystemDescription(BaseModel):
    """Parsed system description; ``to_system`` lives in ``description``."""
    format: int = 1
    name: str = ""
    times: List[str]
    mode: Literal["semigroup", "explicit"]
    positions: Optional[Dict[str, int]] = None
    semigroup: Optional[SemigroupBlock] = None
    measures: MeasureBlock = Field(default_factory=MeasureBlock)
    spaces: Optional[List[Dict[str, Any]]] = None
    mult: Optional[List[Dict[str, Any]]] = None
    tower: Optional[TowerBlock] = None
