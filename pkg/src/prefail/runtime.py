"""Shared engine plumbing: deadlines, statistics, outcomes."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

__all__ = ["EngineTimeout", "Deadline", "EngineStats", "SearchOutcome"]


class EngineTimeout(Exception):
    """The search budget ran out; distinct from an exhausted search."""


class Deadline:
    def __init__(self, seconds: Optional[float] = None):
        self.expires = None if seconds is None else time.monotonic() + seconds

    def check(self):
        if self.expires is not None and time.monotonic() > self.expires:
            raise EngineTimeout()


@dataclass
class EngineStats:
    rule1: int = 0
    rule2: int = 0
    rule3: int = 0
    rule4: int = 0
    rule5: int = 0  # primary conflicts: `false <-` derivations
    abductions: int = 0
    backtracks: int = 0
    table_backtracks: int = 0  # constraint engine only: retreats past answer choices
    solver_backtracks: int = 0  # constraint engine only: inside the store solver
    secondary_conflicts: int = 0
    symmetry_rejections: int = 0
    clauses_added: int = 0
    solver_checks: int = 0

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class SearchOutcome:
    """Either a witnessing partial pre-interpretation or exhaustion."""

    solution: Optional[dict]  # (functor_index, inputs) -> output, or None
    stats: EngineStats
    conflicts: list = field(default_factory=list)  # collected when requested

    @property
    def is_solution(self) -> bool:
        return self.solution is not None
