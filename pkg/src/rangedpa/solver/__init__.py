"""Satisfiability backends and path formulas.

``make_solver("internal")`` returns the built-in procedure;
``make_solver("external")`` pipes SMT-LIB2 to a solver process.  Both expose
``check_sat(formula) -> SatResult``.  Handles are not meant to be shared
between threads.
"""

from __future__ import annotations

from typing import Optional, Protocol, Sequence

from ..expr import Formula, negate
from .internal import InternalSolver, decide_conjunction
from .pathformula import PathFormula, domain_constraint, initial_symbol, path_formula, symbol, test_case_from_model
from .result import SatResult, SatStatus
from .smtlib import ENV_VAR, SmtLibSolver, default_command, to_smtlib

__all__ = [
    "SolverHandle",
    "SatResult",
    "SatStatus",
    "InternalSolver",
    "SmtLibSolver",
    "make_solver",
    "is_valid",
    "implies",
    "path_formula",
    "PathFormula",
    "domain_constraint",
    "test_case_from_model",
    "initial_symbol",
    "symbol",
    "to_smtlib",
    "default_command",
    "decide_conjunction",
    "ENV_VAR",
]


class SolverHandle(Protocol):
    name: str

    def check_sat(self, formula: Formula) -> SatResult: ...


def make_solver(backend: str = "internal", command: Optional[Sequence[str]] = None, timeout: float = 30.0) -> SolverHandle:
    if backend == "internal":
        return InternalSolver()
    if backend == "external":
        return SmtLibSolver(command, timeout)
    raise ValueError(f"unknown solver backend {backend!r}")


def is_valid(solver: SolverHandle, f: Formula) -> Optional[bool]:
    """True if valid, False if refuted, None if the solver gave up."""
    res = solver.check_sat(negate(f))
    if res.status is SatStatus.UNSAT:
        return True
    if res.status is SatStatus.SAT:
        return False
    return None


def implies(solver: SolverHandle, a: Formula, b: Formula) -> Optional[bool]:
    return is_valid(solver, negate(a) | b)
