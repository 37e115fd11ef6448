"""Explicit-value analysis: every variable is a concrete integer or unknown."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, Mapping, Optional, Tuple, Union

from ..cpa_core import CPA
from ..expr import And, BoolConst, Cmp, Formula, LinExpr, Not, Or, compare, conj
from ..frontend import AssignOp, AssumeOp, Cfa, Edge
from ..semantics import enumerate_assignments

__all__ = ["UNKNOWN_VALUE", "ValueState", "ValueAnalysis", "value_post", "eval3"]


class _Top:
    def __repr__(self) -> str:
        return "T"

    def __reduce__(self):
        return "UNKNOWN_VALUE"


UNKNOWN_VALUE = _Top()

Value = Union[int, _Top]


@dataclass(frozen=True)
class ValueState:
    items: Tuple[Tuple[str, Value], ...]

    @staticmethod
    def make(variables: Iterable[str], known: Optional[Mapping[str, int]] = None) -> "ValueState":
        known = known or {}
        return ValueState(tuple((v, known.get(v, UNKNOWN_VALUE)) for v in variables))

    def get(self, var: str) -> Value:
        for v, x in self.items:
            if v == var:
                return x
        raise KeyError(var)

    def as_dict(self) -> Dict[str, Value]:
        return dict(self.items)

    def known(self) -> Dict[str, int]:
        return {v: x for v, x in self.items if x is not UNKNOWN_VALUE}  # type: ignore[misc]

    def set(self, var: str, value: Value) -> "ValueState":
        return ValueState(tuple((v, value if v == var else x) for v, x in self.items))

    def leq(self, other: "ValueState") -> bool:
        return all(b is UNKNOWN_VALUE or a == b for (_, a), (_, b) in zip(self.items, other.items))

    def join(self, other: "ValueState") -> "ValueState":
        return ValueState(tuple((v, a if a == b else UNKNOWN_VALUE) for (v, a), (_, b) in zip(self.items, other.items)))

    def __repr__(self) -> str:
        return "{" + ", ".join(f"{v}={x!r}" for v, x in self.items) + "}"


def eval_term(e: LinExpr, s: ValueState) -> Value:
    env = s.as_dict()
    total = e.const
    for v, k in e.coeffs:
        x = env[v]
        if x is UNKNOWN_VALUE:
            return UNKNOWN_VALUE
        total += k * x  # type: ignore[operator]
    return total


def eval3(f: Formula, s: ValueState) -> Optional[bool]:
    """Three-valued evaluation: ``None`` when unknown values decide the outcome."""
    if isinstance(f, BoolConst):
        return f.value
    if isinstance(f, Cmp):
        l, r = eval_term(f.lhs, s), eval_term(f.rhs, s)
        if l is UNKNOWN_VALUE or r is UNKNOWN_VALUE:
            # x - x style comparisons are still decidable
            d = f.lhs - f.rhs
            if d.is_const():
                return compare(f.op, d.const, 0)
            return None
        return compare(f.op, l, r)  # type: ignore[arg-type]
    if isinstance(f, Not):
        v = eval3(f.arg, s)
        return None if v is None else not v
    vals = [eval3(a, s) for a in f.args]  # type: ignore[attr-defined]
    if isinstance(f, And):
        if False in vals:
            return False
        return True if all(v is True for v in vals) else None
    if True in vals:
        return True
    return False if all(v is False for v in vals) else None


def value_post(s: ValueState, edge: Edge) -> Optional[ValueState]:
    """Successor under one edge, or ``None`` when the edge is definitely disabled."""
    op = edge.op
    if isinstance(op, AssignOp):
        return s.set(op.var, eval_term(op.expr, s))
    if isinstance(op, AssumeOp):
        return None if eval3(op.cond, s) is False else s
    return s


class ValueAnalysis(CPA):
    """Path-sensitive value analysis (merge-sep, stop by the pointwise order).

    With a finite input ``domain`` the initial states enumerate every input
    assignment, so each run is an explicit exploration of all executions;
    without one the inputs start unknown.
    """

    name = "value"

    def __init__(self, domain=None):
        self.domain = domain

    def initial_states(self, cfa: Cfa) -> Iterator[ValueState]:
        if self.domain is None:
            yield ValueState.make(cfa.variables)
            return
        for tau in enumerate_assignments(cfa, self.domain, cap=10**12):
            yield ValueState.make(cfa.variables, tau)

    def transfer(self, state, edge, ctx):
        nxt = value_post(state, edge)
        return [] if nxt is None else [nxt]

    def leq(self, a, b):
        return a.leq(b)

    def to_formula(self, state: ValueState) -> Formula:
        return conj(Cmp("==", LinExpr.var(v), LinExpr.constant(x)) for v, x in state.known().items())
