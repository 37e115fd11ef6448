"""Range reduction: restrict any analysis to the paths between two bound paths.

A bound component tracks the concrete values of its test case along the
bound path.  When the analysed path leaves the bound path at a branch, the
component either *releases* (the path is now strictly inside the range on
this side, so every extension is in range) or produces no successor (the
path is outside).  For the lower bound, leaving towards ``F`` while the
bound goes ``T`` releases; for the upper bound it is the other way round.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Union

from .cpa_core import CPA, CompositeCPA, PassThroughCPA, compose
from .expr import Cmp, LinExpr, conj
from .frontend import AssumeOp, Cfa, Edge
from .domains.value import ValueState, eval3, value_post
from .semantics import BOTTOM, TOP, Path, _Sentinel
from .solver import (
    SatStatus,
    SolverHandle,
    domain_constraint,
    initial_symbol,
    make_solver,
    path_formula,
    test_case_from_model,
)

__all__ = [
    "Role",
    "BoundKind",
    "BoundState",
    "RangeBoundCPA",
    "init_bound",
    "lower_transfer",
    "upper_transfer",
    "make_ranged",
    "complete_test_case",
]


class Role(enum.Enum):
    LOWER = "lower"
    UPPER = "upper"


class BoundKind(enum.Enum):
    TRACK = "track"
    RELEASED = "released"


@dataclass(frozen=True)
class BoundState:
    kind: BoundKind
    value: Optional[ValueState] = None

    def __repr__(self) -> str:
        return "RELEASED" if self.kind is BoundKind.RELEASED else f"TRACK{self.value!r}"


RELEASED = BoundState(BoundKind.RELEASED)


def init_bound(cfa: Cfa, tau: Mapping[str, int], role: Role = Role.LOWER) -> BoundState:
    extra = sorted(set(tau) - set(cfa.inputs))
    if extra:
        raise ValueError(f"bound test case assigns non-input variable {extra[0]!r}")
    return BoundState(BoundKind.TRACK, ValueState.make(cfa.variables, tau))


def _bound_transfer(s: BoundState, edge: Edge, role: Role) -> List[BoundState]:
    if s.kind is BoundKind.RELEASED:
        return [RELEASED]
    assert s.value is not None
    if not isinstance(edge.op, AssumeOp):
        nxt = value_post(s.value, edge)
        return [BoundState(BoundKind.TRACK, nxt)] if nxt is not None else []
    outcome = eval3(edge.op.cond, s.value)
    # the side on which leaving the bound path stays inside the range
    inside = "F" if role is Role.LOWER else "T"
    if outcome is True:
        return [s]
    if outcome is False:
        return [RELEASED] if edge.indicator == inside else []
    # undetermined: the bound path is the minimum, so it goes T
    if edge.indicator == "T":
        return [s]
    return [RELEASED] if role is Role.LOWER else []


def lower_transfer(s: BoundState, edge: Edge) -> List[BoundState]:
    return _bound_transfer(s, edge, Role.LOWER)


def upper_transfer(s: BoundState, edge: Edge) -> List[BoundState]:
    return _bound_transfer(s, edge, Role.UPPER)


class RangeBoundCPA(CPA):
    """Lower- or upper-bound range-reduction component."""

    def __init__(self, tau: Mapping[str, int], role: Role, domain=None, solver: Optional[SolverHandle] = None):
        self.tau = dict(tau)
        self.role = role
        self.domain = domain
        self.solver = solver
        self.name = f"{role.value}bound"
        self.effective_tau: Optional[Dict[str, int]] = None

    def initial_states(self, cfa: Cfa):
        tau = self.tau
        if any(x not in tau for x in cfa.inputs):
            tau = complete_test_case(cfa, tau, self.domain, self.solver) or tau
        self.effective_tau = dict(tau)
        return [init_bound(cfa, tau, self.role)]

    def transfer(self, state, edge, ctx):
        return _bound_transfer(state, edge, self.role)

    def leq(self, a: BoundState, b: BoundState) -> bool:
        if b.kind is BoundKind.RELEASED:
            return True
        if a.kind is BoundKind.RELEASED:
            return False
        return a.value.leq(b.value)  # type: ignore[union-attr]


def complete_test_case(
    cfa: Cfa, tau: Mapping[str, int], domain=None, solver: Optional[SolverHandle] = None, max_steps: int = 500
) -> Optional[Dict[str, int]]:
    """A total test case inducing the minimum path consistent with ``tau``.

    Walks the CFA taking ``T`` whenever the prefix stays feasible under
    ``tau`` (and the input domain).  Every feasible prefix extends to a
    maximal path, so the greedy walk yields the minimum.  Returns ``None``
    if the walk exceeds ``max_steps`` or the solver gives up.
    """
    solver = solver or make_solver()
    fixed = [Cmp("==", LinExpr.var(initial_symbol(x)), LinExpr.constant(int(v))) for x, v in tau.items()]
    base = conj(fixed + [domain_constraint(cfa, domain)])
    edges: List[Edge] = []
    loc = cfa.initial
    for _ in range(max_steps):
        out = cfa.out_edges(loc)
        if not out:
            res = solver.check_sat(conj([base, path_formula(cfa, edges).formula]))
            if not res.sat:
                return None
            return test_case_from_model(cfa, res.model, complete=True)
        if len(out) == 1:
            edges.append(out[0])
            loc = out[0].dst
            continue
        chosen = None
        for e in sorted(out, key=lambda e: e.indicator != "T"):
            res = solver.check_sat(conj([base, path_formula(cfa, edges + [e]).formula]))
            if res.sat:
                chosen = e
                break
            if res.status is SatStatus.UNKNOWN:
                return None
        if chosen is None:
            return None
        edges.append(chosen)
        loc = chosen.dst
    return None


BoundSpec = Union[Mapping[str, int], Path, _Sentinel, None]


def _as_tau(b: BoundSpec) -> Optional[Dict[str, int]]:
    if b is None or isinstance(b, _Sentinel):
        return None
    if isinstance(b, Path):
        state = b.states[0] if b.states else None
        if state is None:
            raise ValueError("a path bound must carry its initial data state")
        return {x: state[x] for x in b.cfa.inputs}  # type: ignore[misc]
    return dict(b)


def make_ranged(
    analysis: CPA,
    lower: BoundSpec = BOTTOM,
    upper: BoundSpec = TOP,
    domain=None,
    solver: Optional[SolverHandle] = None,
) -> CompositeCPA:
    """Compose ``analysis`` with range reduction for ``[lower, upper]``.

    Bounds are test cases (possibly partial), concrete paths, or the
    sentinels ``BOTTOM`` / ``TOP`` (also ``None``) for an open side.
    """
    lo, hi = _as_tau(lower), _as_tau(upper)
    if lower is TOP or upper is BOTTOM:
        raise ValueError("range sentinels are on the wrong side")
    parts: List[CPA] = [
        RangeBoundCPA(lo, Role.LOWER, domain, solver) if lo is not None else PassThroughCPA(),
        RangeBoundCPA(hi, Role.UPPER, domain, solver) if hi is not None else PassThroughCPA(),
        analysis,
    ]
    ranged = compose(parts)
    ranged.name = f"ranged-{analysis.name}"
    return ranged
