"""Configurable program analysis: interfaces, composition and the CPA algorithm.

An analysis supplies initial states, a transfer relation, ``merge`` and
``stop``.  :func:`run_cpa` explores the program with a breadth-first
waitlist, records an abstract reachability graph (ARG) and decides the
verdict.  A state at an error location only yields FALSE after the ARG path
leading to it has been confirmed feasible by the solver.
"""

from __future__ import annotations

import enum
import itertools
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from .expr import TRUE, Formula, conj
from .frontend import Cfa, Edge
from .semantics import Path, execute
from .solver import SatStatus, SolverHandle, domain_constraint, make_solver, path_formula, test_case_from_model

__all__ = [
    "Verdict",
    "CPA",
    "PassThroughCPA",
    "CompositeCPA",
    "compose",
    "Budget",
    "CancelToken",
    "RunContext",
    "ArgNode",
    "CpaResult",
    "run_cpa",
    "explored_paths",
]


class Verdict(enum.Enum):
    TRUE = "TRUE"
    FALSE = "FALSE"
    UNKNOWN = "UNKNOWN"


class CPA:
    """Base class; subclasses override what differs from merge-sep/stop-sep."""

    name = "cpa"

    def initial_states(self, cfa: Cfa) -> Iterable[Any]:
        raise NotImplementedError

    def transfer(self, state: Any, edge: Edge, ctx: "RunContext") -> Sequence[Any]:
        raise NotImplementedError

    def leq(self, a: Any, b: Any) -> bool:
        return a == b

    def merge(self, loc: int, new: Any, reached: Any) -> Any:
        return reached

    def stop(self, loc: int, state: Any, reached: Sequence[Any]) -> bool:
        return any(self.leq(state, r) for r in reached)

    def to_formula(self, state: Any) -> Formula:
        """Over-approximating rendering over program variables."""
        return TRUE


class PassThroughCPA(CPA):
    """Neutral component standing in for an absent range bound."""

    name = "pass"
    STATE = "PASS"

    def initial_states(self, cfa):
        return [self.STATE]

    def transfer(self, state, edge, ctx):
        return [state]


class CompositeCPA(CPA):
    """Product of component CPAs (states are tuples)."""

    def __init__(self, components: Sequence[CPA]):
        self.components = tuple(components)
        self.name = "x".join(c.name for c in self.components)

    def initial_states(self, cfa):
        # every component but the last is materialized; the last may be lazy
        firsts = [list(c.initial_states(cfa)) for c in self.components[:-1]]
        for last in self.components[-1].initial_states(cfa):
            for combo in itertools.product(*firsts):
                yield tuple(combo) + (last,)

    def transfer(self, state, edge, ctx):
        succs = []
        for comp, s in zip(self.components, state):
            out = list(comp.transfer(s, edge, ctx))
            if not out:
                return []
            succs.append(out)
        return [tuple(p) for p in itertools.product(*succs)]

    def leq(self, a, b):
        return all(c.leq(x, y) for c, x, y in zip(self.components, a, b))

    def merge(self, loc, new, reached):
        # merge only if every component agrees: each one either merges or
        # already covers the new state; otherwise keep the states apart
        out = []
        for c, x, y in zip(self.components, new, reached):
            m = c.merge(loc, x, y)
            if m == y and x != y and not c.leq(x, y):
                return reached
            out.append(m)
        return tuple(out)

    def to_formula(self, state):
        return conj(c.to_formula(s) for c, s in zip(self.components, state))


def compose(cpas: Sequence[CPA]) -> CompositeCPA:
    if len(cpas) < 2:
        raise ValueError(f"compose needs at least 2 components, got {len(cpas)}")
    return CompositeCPA(cpas)


@dataclass(frozen=True)
class Budget:
    timeout: float = 60.0
    max_states: int = 1_000_000


class CancelToken:
    def __init__(self) -> None:
        self._event = threading.Event()

    def cancel(self) -> None:
        self._event.set()

    @property
    def cancelled(self) -> bool:
        return self._event.is_set()


class RunContext:
    """Per-run services handed to transfer functions."""

    def __init__(self, cfa: Cfa, solver: SolverHandle, domain=None):
        self.cfa = cfa
        self.solver = solver
        self.domain = domain
        self.incomplete: List[str] = []

    def mark_incomplete(self, reason: str) -> None:
        if reason not in self.incomplete:
            self.incomplete.append(reason)


class ArgNode:
    __slots__ = ("id", "loc", "state", "parent", "edge", "children", "covered_by", "replaced_by")

    def __init__(self, nid: int, loc: int, state: Any, parent: Optional["ArgNode"], edge: Optional[Edge]):
        self.id = nid
        self.loc = loc
        self.state = state
        self.parent = parent
        self.edge = edge
        self.children: List[ArgNode] = []
        self.covered_by: Optional[ArgNode] = None
        self.replaced_by: Optional[ArgNode] = None

    def edges_from_root(self) -> List[Edge]:
        out = []
        n: Optional[ArgNode] = self
        while n is not None and n.edge is not None:
            out.append(n.edge)
            n = n.parent
        return out[::-1]

    def __repr__(self) -> str:
        return f"ArgNode({self.id}, l{self.loc}, {self.state!r})"


@dataclass
class CpaResult:
    verdict: Verdict
    cfa: Cfa
    cpa: CPA
    roots: List[ArgNode]
    reached: Dict[int, List[ArgNode]]
    counterexample: Optional[Path] = None
    test_case: Optional[Dict[str, int]] = None
    incomplete: List[str] = field(default_factory=list)
    reason: str = ""
    states: int = 0
    transfers: int = 0
    elapsed: float = 0.0
    domain: Any = None

    def states_at(self, loc: int) -> List[Any]:
        return [n.state for n in self.reached.get(loc, [])]

    @property
    def explored_locations(self) -> frozenset:
        return frozenset(l for l, ns in self.reached.items() if ns)


def run_cpa(
    cfa: Cfa,
    cpa: CPA,
    budget: Budget = Budget(),
    cancel: Optional[CancelToken] = None,
    solver: Optional[SolverHandle] = None,
    domain=None,
    stop_at_error: bool = True,
) -> CpaResult:
    """The CPA algorithm with BFS waitlist and counterexample confirmation.

    With ``stop_at_error=False`` exploration continues past a confirmed
    violation (the first one is still reported), which gives the complete
    explored path set of a buggy program.
    """
    solver = solver or make_solver()
    ctx = RunContext(cfa, solver, domain)
    start = time.monotonic()
    reached: Dict[int, List[ArgNode]] = {l: [] for l in cfa.locations}
    roots: List[ArgNode] = []
    waitlist: deque = deque()
    ids = itertools.count()
    stats = {"states": 0, "transfers": 0}
    error_locs = cfa.error_locations
    dom_f = domain_constraint(cfa, domain)
    first_cex: List[Any] = []

    def finish(verdict: Verdict, reason: str = "", cex=None, tau=None) -> CpaResult:
        if first_cex:
            verdict, reason = Verdict.FALSE, "error location reachable"
            cex, tau = first_cex
        if verdict is Verdict.TRUE and ctx.incomplete:
            verdict, reason = Verdict.UNKNOWN, "; ".join(ctx.incomplete)
        return CpaResult(
            verdict, cfa, cpa, roots, reached, cex, tau, list(ctx.incomplete), reason,
            stats["states"], stats["transfers"], time.monotonic() - start, domain,
        )

    def add(node: ArgNode) -> Optional[CpaResult]:
        reached[node.loc].append(node)
        stats["states"] += 1
        if node.loc in error_locs:
            return check_error(node)
        waitlist.append(node)
        return None

    def check_error(node: ArgNode) -> Optional[CpaResult]:
        edges = node.edges_from_root()
        pf = path_formula(cfa, edges)
        res = solver.check_sat(conj([pf.formula, dom_f]))
        if res.status is SatStatus.SAT:
            tau = test_case_from_model(cfa, res.model, complete=True)
            cex = execute(cfa, tau)
            if cex.reaches_error:
                if stop_at_error:
                    return finish(Verdict.FALSE, "error location reachable", cex, tau)
                if not first_cex:
                    first_cex.extend((cex, tau))
                return None
            ctx.mark_incomplete("counterexample did not replay")
        elif res.status is SatStatus.UNSAT:
            ctx.mark_incomplete("infeasible error path (no refinement)")
        else:
            ctx.mark_incomplete("counterexample check inconclusive")
        return None

    initial = iter(cpa.initial_states(cfa))
    while True:
        if not waitlist:
            init = next(initial, None)
            if init is None:
                return finish(Verdict.TRUE)
            root = ArgNode(next(ids), cfa.initial, init, None, None)
            roots.append(root)
            if cpa.stop(root.loc, init, [n.state for n in reached[root.loc]]):
                continue
            done = add(root)
            if done:
                return done
            continue
        if cancel is not None and cancel.cancelled:
            return finish(Verdict.UNKNOWN, "cancelled")
        if time.monotonic() - start > budget.timeout:
            return finish(Verdict.UNKNOWN, "timeout")
        if stats["states"] > budget.max_states:
            return finish(Verdict.UNKNOWN, "state limit")
        node = waitlist.popleft()
        if node.replaced_by is not None:
            continue
        for edge in cfa.out_edges(node.loc):
            stats["transfers"] += 1
            for succ in cpa.transfer(node.state, edge, ctx):
                child = ArgNode(next(ids), edge.dst, succ, node, edge)
                node.children.append(child)
                bucket = reached[edge.dst]
                for i, r in enumerate(list(bucket)):
                    merged = cpa.merge(edge.dst, succ, r.state)
                    if merged != r.state:
                        m = ArgNode(next(ids), edge.dst, merged, node, edge)
                        node.children.append(m)
                        r.replaced_by = m
                        bucket[bucket.index(r)] = m
                        waitlist.append(m)
                cover = next((r for r in bucket if cpa.leq(succ, r.state)), None)
                if cover is not None:
                    child.covered_by = cover
                    continue
                done = add(child)
                if done:
                    return done


def explored_paths(result: CpaResult, cap: int = 100_000, max_len: int = 100_000) -> List[Path]:
    """Maximal root-to-sink paths of the ARG, following coverage links.

    Only meaningful for analyses whose ARG is acyclic up to coverage (the
    path-sensitive ones); enumeration stops at ``cap`` paths.
    """
    cfa = result.cfa
    found: Dict[Tuple[Edge, ...], Path] = {}
    stack: List[Tuple[ArgNode, Tuple[Edge, ...]]] = [(r, ()) for r in reversed(result.roots)]
    while stack and len(found) < cap:
        node, prefix = stack.pop()
        while node.covered_by is not None or node.replaced_by is not None:
            node = node.covered_by or node.replaced_by  # type: ignore[assignment]
        if len(prefix) > max_len:
            continue
        if cfa.is_sink(node.loc) and not node.children:
            found.setdefault(prefix, Path(cfa, prefix))
            continue
        for child in reversed(node.children):
            if child.replaced_by is not None and child.covered_by is None and child.edge is None:
                continue
            stack.append((child, prefix + (child.edge,)))
    return list(found.values())
