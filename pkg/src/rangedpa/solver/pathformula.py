"""Strongest-postcondition path formulas in single-assignment form.

Every variable ``v`` starts as the symbol ``v#0``; each assignment to ``v``
introduces the next index ``v#k`` and an equation binding it.  Assume edges
conjoin their condition over the current indices.  The formula is
satisfiable iff the edge sequence is feasible for some input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Tuple

from ..expr import TRUE, Cmp, Formula, LinExpr, conj, formula_vars, rename, substitute
from ..frontend import AssignOp, AssumeOp, Cfa, Edge

__all__ = ["PathFormula", "path_formula", "symbol", "initial_symbol", "domain_constraint", "test_case_from_model"]


def symbol(var: str, index: int) -> str:
    return f"{var}#{index}"


def initial_symbol(var: str) -> str:
    return symbol(var, 0)


@dataclass(frozen=True)
class PathFormula:
    formula: Formula
    current: Mapping[str, str]  # variable -> symbol holding its final value

    def at_end(self, f: Formula) -> Formula:
        """Rename a formula over program variables to the path's final symbols."""
        return rename(f, lambda v: self.current.get(v, initial_symbol(v)))


def path_formula(cfa: Cfa, edges: Iterable[Edge], start: Optional[Formula] = None) -> PathFormula:
    """SSA encoding of an edge sequence.

    ``start`` is an optional precondition over program variables, placed
    over the initial symbols.
    """
    index: Dict[str, int] = {v: 0 for v in cfa.variables}
    parts = []
    if start is not None:
        parts.append(rename(start, initial_symbol))
    for e in edges:
        env = {v: LinExpr.var(symbol(v, i)) for v, i in index.items()}
        if isinstance(e.op, AssignOp):
            rhs = e.op.expr.substitute(env)
            index[e.op.var] += 1
            parts.append(Cmp("==", LinExpr.var(symbol(e.op.var, index[e.op.var])), rhs))
        elif isinstance(e.op, AssumeOp):
            parts.append(substitute(e.op.cond, env))
    return PathFormula(conj(parts), {v: symbol(v, i) for v, i in index.items()})


def domain_constraint(cfa: Cfa, domain, over_symbols: bool = True) -> Formula:
    """Bounds of the input box, over initial symbols or plain input names."""
    if domain is None:
        return TRUE
    from ..semantics import domain_of

    parts = []
    for x, (lo, hi) in domain_of(cfa, domain).items():
        term = LinExpr.var(initial_symbol(x) if over_symbols else x)
        parts.append(Cmp(">=", term, LinExpr.constant(lo)))
        parts.append(Cmp("<=", term, LinExpr.constant(hi)))
    return conj(parts)


def test_case_from_model(
    cfa: Cfa, model: Mapping[str, int], formula: Optional[Formula] = None, complete: bool = False
) -> Dict[str, int]:
    """Input values from a model.

    Only inputs whose initial symbol occurs in ``formula`` are taken unless
    ``complete`` is set, in which case absent inputs default to 0.
    """
    present = formula_vars(formula) if formula is not None else frozenset(model)
    tau: Dict[str, int] = {}
    for x in cfa.inputs:
        s = initial_symbol(x)
        if s in present and s in model:
            tau[x] = int(model[s])
        elif complete:
            tau[x] = int(model.get(s, 0))
    return tau
