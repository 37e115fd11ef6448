"""Symbolic execution: symbolic store over input symbols plus a path condition."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

from ..cpa_core import CPA, RunContext
from ..expr import TRUE, Cmp, Formula, LinExpr, conj, eval_formula, formula_vars, substitute
from ..frontend import AssignOp, AssumeOp, Cfa
from ..solver import SatStatus, domain_constraint, initial_symbol

__all__ = ["SymState", "SymbolicExecution"]

DEFAULT_LOOP_CAP = 16


@dataclass(frozen=True)
class SymState:
    store: Tuple[Tuple[str, LinExpr], ...]
    pc: Tuple[Formula, ...]
    visits: Tuple[Tuple[int, int], ...] = ()  # loop head -> visits on this path

    def lookup(self) -> Dict[str, LinExpr]:
        return dict(self.store)

    def path_condition(self) -> Formula:
        return conj(self.pc)


class SymbolicExecution(CPA):
    """Path-sensitive symbolic execution with a per-path loop-visit cap."""

    name = "symexec"

    def __init__(self, domain=None, loop_cap: int = DEFAULT_LOOP_CAP):
        self.domain = domain
        self.loop_cap = loop_cap

    def initial_states(self, cfa: Cfa):
        store = tuple((v, LinExpr.var(initial_symbol(v))) for v in cfa.variables)
        dom = domain_constraint(cfa, self.domain)
        pc = () if dom == TRUE else (dom,)
        return [SymState(store, pc)]

    def transfer(self, state: SymState, edge, ctx: RunContext):
        op = edge.op
        store = state.lookup()
        visits = state.visits
        if edge.dst in ctx.cfa.loop_heads:
            counts = dict(visits)
            counts[edge.dst] = counts.get(edge.dst, 0) + 1
            if counts[edge.dst] > self.loop_cap:
                ctx.mark_incomplete(f"loop visit cap {self.loop_cap} reached")
                return []
            visits = tuple(sorted(counts.items()))
        if isinstance(op, AssignOp):
            new = dict(store)
            new[op.var] = op.expr.substitute(store)
            return [SymState(tuple(new.items()), state.pc, visits)]
        if isinstance(op, AssumeOp):
            cond = substitute(op.cond, store)
            if not formula_vars(cond):
                if not eval_formula(cond, {}):
                    return []
                return [SymState(state.store, state.pc, visits)]
            pc = state.pc + (cond,)
            res = ctx.solver.check_sat(conj(pc))
            if res.status is SatStatus.UNSAT:
                return []
            if res.status is SatStatus.UNKNOWN:
                ctx.mark_incomplete("path condition undecided")
            return [SymState(state.store, pc, visits)]
        return [SymState(state.store, state.pc, visits)]

    def to_formula(self, state: SymState) -> Formula:
        return render_symbolic(state)


def render_symbolic(state: SymState) -> Formula:
    """Project a symbolic state to a formula over program variables.

    Input symbols still held by their own variable are renamed back to it;
    other symbols are solved for through a variable holding ``+-s + rest``
    when possible and otherwise eliminated by dropping the constraints that
    mention them (a sound weakening).
    """
    store = state.lookup()
    sub: Dict[str, LinExpr] = {}
    for v, e in store.items():
        s = initial_symbol(v)
        if e == LinExpr.var(s):
            sub[s] = LinExpr.var(v)
    symbols = set()
    for e in store.values():
        symbols |= e.variables
    for f in state.pc:
        symbols |= formula_vars(f)
    changed = True
    while changed:
        changed = False
        for s in sorted(symbols - set(sub)):
            for v, e in store.items():
                k = e.coeff(s)
                if abs(k) != 1:
                    continue
                rest = e - LinExpr.var(s).scale(k)
                if not rest.variables <= set(sub):
                    continue
                # v = k*s + rest  ->  s = k*(v - rest)
                sub[s] = (LinExpr.var(v) - rest.substitute(sub)).scale(k)
                changed = True
                break
    parts: List[Formula] = []
    for v, e in store.items():
        rhs = e.substitute(sub)
        if e.variables <= set(sub) and rhs != LinExpr.var(v):
            parts.append(Cmp("==", LinExpr.var(v), rhs))
    for f in state.pc:
        if formula_vars(f) <= set(sub):
            parts.append(substitute(f, sub))
    return conj(parts)
