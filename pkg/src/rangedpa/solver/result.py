from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict


class SatStatus(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class SatResult:
    status: SatStatus
    model: Dict[str, int] = field(default_factory=dict)
    reason: str = ""

    @property
    def sat(self) -> bool:
        return self.status is SatStatus.SAT

    @property
    def unsat(self) -> bool:
        return self.status is SatStatus.UNSAT
