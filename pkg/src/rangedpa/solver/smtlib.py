"""SMT-LIB2 backend talking to an external solver process (QF_LIA).

Each query runs a fresh process, e.g. ``z3 -in -smt2``; the command comes
from the constructor or the ``RANGEDPA_SMT_SOLVER`` environment variable.
"""

from __future__ import annotations

import os
import re
import shlex
import shutil
import subprocess
import threading
from typing import Dict, List, Optional, Sequence, Union

from ..expr import And, BoolConst, Cmp, Formula, LinExpr, Not, Or, formula_vars
from .result import SatResult, SatStatus

__all__ = ["SmtLibSolver", "to_smtlib", "parse_sexprs", "default_command", "ENV_VAR"]

ENV_VAR = "RANGEDPA_SMT_SOLVER"

SExpr = Union[str, List["SExpr"]]


def default_command() -> Optional[List[str]]:
    """Solver command from the environment, else ``z3`` if it is on PATH."""
    env = os.environ.get(ENV_VAR)
    if env:
        return shlex.split(env)
    if shutil.which("z3"):
        return ["z3", "-in", "-smt2"]
    return None


def _sym(name: str) -> str:
    return f"|{name}|"


def _int(k: int) -> str:
    return str(k) if k >= 0 else f"(- {-k})"


def _term(e: LinExpr) -> str:
    parts = []
    for v, k in e.coeffs:
        parts.append(_sym(v) if k == 1 else f"(* {_int(k)} {_sym(v)})")
    if e.const or not parts:
        parts.append(_int(e.const))
    return parts[0] if len(parts) == 1 else f"(+ {' '.join(parts)})"


def _formula(f: Formula) -> str:
    if isinstance(f, BoolConst):
        return "true" if f.value else "false"
    if isinstance(f, Cmp):
        l, r = _term(f.lhs), _term(f.rhs)
        if f.op == "==":
            return f"(= {l} {r})"
        if f.op == "!=":
            return f"(not (= {l} {r}))"
        return f"({f.op} {l} {r})"
    if isinstance(f, Not):
        return f"(not {_formula(f.arg)})"
    op = "and" if isinstance(f, And) else "or"
    return f"({op} {' '.join(_formula(a) for a in f.args)})"  # type: ignore[attr-defined]


def to_smtlib(f: Formula) -> str:
    lines = ["(set-option :produce-models true)", "(set-logic QF_LIA)"]
    lines += [f"(declare-const {_sym(v)} Int)" for v in sorted(formula_vars(f))]
    lines += [f"(assert {_formula(f)})", "(check-sat)", "(get-model)", "(exit)"]
    return "\n".join(lines) + "\n"


_TOKEN = re.compile(r"\s*(?:(\()|(\))|(\|[^|]*\|)|(\"(?:[^\"]|\"\")*\")|([^\s()|\"]+))")


def parse_sexprs(text: str) -> List[SExpr]:
    """Parse a sequence of s-expressions; ``|quoted|`` symbols lose their bars."""
    stack: List[List[SExpr]] = [[]]
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse solver output near {text[pos:pos + 20]!r}")
        pos = m.end()
        lp, rp, quoted, string, atom = m.groups()
        if lp:
            stack.append([])
        elif rp:
            if len(stack) == 1:
                raise ValueError("unbalanced ')' in solver output")
            done = stack.pop()
            stack[-1].append(done)
        elif quoted:
            stack[-1].append(quoted[1:-1])
        else:
            stack[-1].append(string or atom)
    if len(stack) != 1:
        raise ValueError("unbalanced '(' in solver output")
    return stack[0]


def _value(s: SExpr) -> int:
    if isinstance(s, str):
        return int(s)
    if len(s) == 2 and s[0] == "-":
        return -_value(s[1])
    raise ValueError(f"unsupported model value {s!r}")


def _model(sexprs: Sequence[SExpr]) -> Dict[str, int]:
    model: Dict[str, int] = {}

    def walk(s: SExpr) -> None:
        if isinstance(s, list):
            if len(s) == 5 and s[0] == "define-fun" and s[2] == [] and s[3] == "Int":
                model[str(s[1])] = _value(s[4])
                return
            for x in s:
                walk(x)

    for s in sexprs:
        walk(s)
    return model


class SmtLibSolver:
    """Backend piping SMT-LIB2 scripts to an external solver."""

    name = "external"

    def __init__(self, command: Optional[Sequence[str]] = None, timeout: float = 30.0):
        cmd = list(command) if command else default_command()
        if not cmd:
            raise RuntimeError(f"no external SMT solver configured (set {ENV_VAR})")
        self.command = cmd
        self.timeout = timeout
        self._lock = threading.Lock()

    def check_sat(self, formula: Formula) -> SatResult:
        script = to_smtlib(formula)
        with self._lock:
            try:
                proc = subprocess.run(
                    self.command,
                    input=script,
                    capture_output=True,
                    text=True,
                    timeout=self.timeout,
                )
            except (OSError, subprocess.TimeoutExpired) as exc:
                return SatResult(SatStatus.UNKNOWN, reason=f"solver process failed: {exc}")
        try:
            replies = parse_sexprs(proc.stdout)
        except ValueError as exc:
            return SatResult(SatStatus.UNKNOWN, reason=str(exc))
        if not replies or replies[0] not in ("sat", "unsat", "unknown"):
            return SatResult(SatStatus.UNKNOWN, reason=f"unexpected reply: {proc.stdout[:200]!r}")
        status = SatStatus(replies[0])
        if status is not SatStatus.SAT:
            return SatResult(status)
        try:
            model = _model(replies[1:])
        except ValueError as exc:
            return SatResult(SatStatus.UNKNOWN, reason=str(exc))
        for v in formula_vars(formula):
            model.setdefault(v, 0)
        return SatResult(SatStatus.SAT, model)
