"""Correctness witnesses: generation per range, joining, validation, IO.

A witness is a protocol automaton whose states carry invariants.  The
witnesses built here are shaped like the CFA (one state per location, one
transition per edge, plus an ``otherwise`` self-loop per state), so the
validator can work location by location.

Validation is block based.  Cutpoints are the initial location, loop heads,
error locations and every location whose invariant is not ``true``.  For
each straight segment between two cutpoints the validator asks the solver
whether the source invariant and the segment's path formula entail the
target invariant.  Segments ending in an error location must be infeasible.
"""

from __future__ import annotations

import enum
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from .cpa_core import CPA, CompositeCPA, CpaResult
from .domains.interval import IntervalAnalysis
from .domains.symexec import SymbolicExecution, render_symbolic
from .domains.value import ValueAnalysis, ValueState
from .expr import FALSE, TRUE, Cmp, Formula, LinExpr, conj, disj, format_formula, negate
from .frontend import Cfa, Edge, ProgramError, parse_condition
from .semantics import Path, domain_of
from .solver import SatStatus, SolverHandle, domain_constraint, make_solver, path_formula

__all__ = [
    "WitnessError",
    "Transition",
    "WitnessAutomaton",
    "ViolationReport",
    "ValidationStatus",
    "ValidationResult",
    "cfa_shaped_witness",
    "box_cover",
    "render_value_states",
    "generate_correctness_witness",
    "join_witnesses",
    "join_all",
    "validate_witness",
    "check_completeness",
    "select_violation",
    "witness_to_json",
    "witness_from_json",
    "save_witness",
    "load_witness",
]

FORMAT = "rangedpa-witness/1"
EdgeId = Tuple[int, int]
State = int


class WitnessError(ValueError):
    pass


@dataclass(frozen=True)
class Transition:
    source: State
    target: State
    edges: Optional[FrozenSet[EdgeId]]  # None means "otherwise"
    condition: Formula = TRUE


@dataclass
class WitnessAutomaton:
    states: Tuple[State, ...]
    initial: State
    transitions: List[Transition]
    invariants: Dict[State, Formula]
    program_hash: str = ""
    producer: str = ""
    range: Tuple[Optional[Dict[str, int]], Optional[Dict[str, int]]] = (None, None)
    domain: Optional[Dict[str, Tuple[int, int]]] = None

    def outgoing(self, q: State) -> List[Transition]:
        return [t for t in self.transitions if t.source == q]

    def covering(self, q: State, edge: EdgeId) -> List[Transition]:
        """Transitions of ``q`` whose edge set contains ``edge``."""
        out = self.outgoing(q)
        explicit = [t for t in out if t.edges is not None and edge in t.edges]
        named = set().union(*(t.edges for t in out if t.edges is not None))
        if edge not in named:
            explicit += [t for t in out if t.edges is None]
        return explicit

    def invariant(self, q: State) -> Formula:
        return self.invariants.get(q, TRUE)


@dataclass
class ViolationReport:
    path: Path
    test_case: Dict[str, int]
    range_index: int
    producer: str = ""
    arrival: float = 0.0


class ValidationStatus(enum.Enum):
    VALID = "VALID"
    INVALID = "INVALID"
    UNKNOWN = "UNKNOWN"


@dataclass
class ValidationResult:
    status: ValidationStatus
    location: Optional[int] = None
    edge: Optional[EdgeId] = None
    reason: str = ""
    queries: int = 0

    @property
    def valid(self) -> bool:
        return self.status is ValidationStatus.VALID

    def __str__(self) -> str:
        if self.status is ValidationStatus.INVALID:
            return f"INVALID at location {self.location} via edge {self.edge}: {self.reason}"
        return self.status.value + (f" ({self.reason})" if self.reason else "")


def cfa_shaped_witness(cfa: Cfa, invariants: Mapping[int, Formula], **meta: Any) -> WitnessAutomaton:
    """Witness with the CFA's structure: one transition per edge plus self-loops."""
    transitions = [Transition(e.src, e.dst, frozenset([e.id])) for e in cfa.edges]
    transitions += [Transition(l, l, None) for l in cfa.locations]
    inv = {l: invariants.get(l, TRUE) for l in cfa.locations}
    meta.setdefault("program_hash", cfa.program_hash)
    return WitnessAutomaton(tuple(cfa.locations), cfa.initial, transitions, inv, **meta)


# --- generation -------------------------------------------------------------


def _analysis_part(cpa: CPA) -> Tuple[CPA, int]:
    if isinstance(cpa, CompositeCPA):
        return cpa.components[-1], len(cpa.components) - 1
    return cpa, -1


def _bounds_of(cpa: CPA) -> Tuple[Optional[Dict[str, int]], Optional[Dict[str, int]]]:
    from .range_reduction import RangeBoundCPA, Role

    lo = hi = None
    for c in getattr(cpa, "components", ()):
        if isinstance(c, RangeBoundCPA):
            tau = dict(c.effective_tau or c.tau)
            if c.role is Role.LOWER:
                lo = tau
            else:
                hi = tau
    return lo, hi


def invariant_points(cfa: Cfa, analysis: CPA) -> FrozenSet[int]:
    """Locations that receive a rendered invariant.

    The interval analysis only summarises at loop heads; the path-sensitive
    analyses also at branching and merging locations.
    """
    if isinstance(analysis, IntervalAnalysis):
        return frozenset(cfa.loop_heads)
    return frozenset(
        l for l in cfa.locations if len(cfa.in_edges(l)) >= 2 or len(cfa.out_edges(l)) >= 2
    )


def _render(analysis: CPA, state: Any) -> Formula:
    if isinstance(analysis, SymbolicExecution):
        return render_symbolic(state)
    return analysis.to_formula(state)


def _runs(values: Iterable[int]) -> List[Tuple[int, int]]:
    out: List[Tuple[int, int]] = []
    for v in sorted(set(values)):
        if out and out[-1][1] == v - 1:
            out[-1] = (out[-1][0], v)
        else:
            out.append((v, v))
    return out


def box_cover(points: Iterable[Tuple[int, ...]]) -> List[Tuple[Tuple[int, int], ...]]:
    """Cover a finite set of integer points exactly by boxes.

    Points are first merged into runs along the last coordinate, then runs
    with equal extents are merged along each earlier coordinate in turn.
    """
    pts = set(points)
    if not pts:
        return []
    dims = len(next(iter(pts)))
    if dims == 0:
        return [()]
    groups: Dict[Tuple[int, ...], List[int]] = {}
    for p in pts:
        groups.setdefault(p[:-1], []).append(p[-1])
    boxes = [tuple((c, c) for c in head) + (run,) for head, vals in groups.items() for run in _runs(vals)]
    for d in reversed(range(dims - 1)):
        by_rest: Dict[Tuple, List[int]] = {}
        for b in boxes:
            by_rest.setdefault(b[:d] + b[d + 1:], []).append(b[d][0])
        boxes = [rest[:d] + (run,) + rest[d:] for rest, vals in by_rest.items() for run in _runs(vals)]
    return sorted(boxes)


def render_value_states(states: Sequence[ValueState], inputs: Sequence[str]) -> Formula:
    """Exact formula for a set of value states, compacted over the inputs.

    States that agree on every non-input variable are grouped and the
    input values of the group are written as a union of boxes, so
    ``x == 0 && a == 0 || x == 1 && a == 0`` becomes ``a == 0 && x >= 0 && x <= 1``.
    """
    groups: Dict[Tuple, List[Tuple[int, ...]]] = {}
    for st in states:
        known = st.known()
        dims = tuple(x for x in inputs if x in known)
        rest = tuple((v, k) for v, k in known.items() if v not in dims)
        groups.setdefault((dims, rest), []).append(tuple(known[x] for x in dims))
    parts = []
    for (dims, rest), pts in groups.items():
        fixed = [Cmp("==", LinExpr.var(v), LinExpr.constant(k)) for v, k in rest]
        for box in box_cover(pts):
            atoms = list(fixed)
            for x, (lo, hi) in zip(dims, box):
                if lo == hi:
                    atoms.append(Cmp("==", LinExpr.var(x), LinExpr.constant(lo)))
                else:
                    atoms.append(Cmp(">=", LinExpr.var(x), LinExpr.constant(lo)))
                    atoms.append(Cmp("<=", LinExpr.var(x), LinExpr.constant(hi)))
            parts.append(conj(atoms))
    return disj(parts)


def generate_correctness_witness(
    result: CpaResult,
    cfa: Optional[Cfa] = None,
    solver: Optional[SolverHandle] = None,
    slim: bool = True,
) -> WitnessAutomaton:
    """Correctness witness for a run that proved its range.

    Unexplored locations get ``false``; explored locations that are not
    invariant points get ``true``.  With ``slim`` the interval analysis'
    invariants are pruned to the conjuncts needed for inductiveness over
    the explored part of the program.
    """
    cfa = cfa or result.cfa
    analysis, idx = _analysis_part(result.cpa)
    points = invariant_points(cfa, analysis)
    explored = result.explored_locations
    inv: Dict[int, Formula] = {}
    for l in cfa.locations:
        if l not in explored:
            inv[l] = FALSE
        elif l in points:
            states = [s[idx] if idx >= 0 else s for s in result.states_at(l)]
            if isinstance(analysis, ValueAnalysis):
                inv[l] = render_value_states(states, cfa.inputs)
            else:
                inv[l] = disj(_render(analysis, s) for s in states)
        else:
            inv[l] = TRUE
    dom = domain_of(cfa, result.domain) if result.domain is not None else None
    w = cfa_shaped_witness(
        cfa, inv, producer=getattr(result.cpa, "name", analysis.name), range=_bounds_of(result.cpa), domain=dom
    )
    if slim and isinstance(analysis, IntervalAnalysis):
        solver = solver or make_solver()
        w.invariants.update(_slim_interval(cfa, result, analysis, idx, explored, solver, dom))
    return w


def _slim_interval(cfa, result, analysis, idx, explored, solver, dom) -> Dict[int, Formula]:
    """Greedily drop conjuncts (bounds before relations) while still inductive.

    Each abstract state at a loop head is one disjunct and is slimmed on
    its own; the check covers the explored locations plus the error.
    """
    keep: Dict[Tuple[int, int], List[Tuple[str, Formula]]] = {}
    for l in cfa.loop_heads:
        if l in explored:
            for i, st in enumerate(result.states_at(l)):
                keep[(l, i)] = analysis.atoms(st[idx] if idx >= 0 else st)
    if not keep:
        return {}
    allowed = frozenset(explored) | cfa.error_locations
    base = {l: (FALSE if l not in explored else TRUE) for l in cfa.locations}

    def rendered() -> Dict[int, Formula]:
        parts: Dict[int, List[Formula]] = {}
        for (l, _), atoms in sorted(keep.items(), key=lambda kv: kv[0]):
            parts.setdefault(l, []).append(conj(f for _, f in atoms))
        return {l: disj(fs) for l, fs in parts.items()}

    def ok() -> bool:
        return _check(cfa, {**base, **rendered()}, solver, dom, allowed).valid

    if not ok():
        return rendered()
    changed = True
    while changed:
        changed = False
        for kind in ("bound", "rel"):
            for key in sorted(keep):
                i = 0
                while i < len(keep[key]):
                    if keep[key][i][0] != kind:
                        i += 1
                        continue
                    saved = keep[key]
                    keep[key] = saved[:i] + saved[i + 1:]
                    if ok():
                        changed = True
                    else:
                        keep[key] = saved
                        i += 1
    return rendered()


# --- join -------------------------------------------------------------------


def _check_edges(cfa: Cfa, w: WitnessAutomaton) -> None:
    known = {e.id for e in cfa.edges}
    for t in w.transitions:
        if t.edges is None:
            continue
        bad = sorted(t.edges - known)
        if bad:
            raise WitnessError(f"witness transition {t.source}->{t.target} names unknown CFA edge {bad[0]}")
        if t.source not in w.states or t.target not in w.states:
            raise WitnessError(f"transition {t.source}->{t.target} uses an undeclared state")
    if w.program_hash and w.program_hash != cfa.program_hash:
        raise WitnessError("witness was produced for a different program")


def join_witnesses(
    cfa: Cfa, a: WitnessAutomaton, b: WitnessAutomaton, solver: Optional[SolverHandle] = None
) -> WitnessAutomaton:
    """Join two correctness witnesses by a product exploration with the CFA.

    Pairs of transitions whose conditions are jointly unsatisfiable are
    pruned; a solver ``UNKNOWN`` keeps the pair.  The joint invariant at a
    location is the disjunction of both invariants over all explored
    product nodes at that location.
    """
    _check_edges(cfa, a)
    _check_edges(cfa, b)
    solver = solver or make_solver()
    start = (cfa.initial, a.initial, b.initial)
    seen = {start}
    waitlist = deque([start])
    compatible: Dict[Tuple[Formula, Formula], bool] = {}
    while waitlist:
        l, q, r = waitlist.popleft()
        for g in cfa.out_edges(l):
            for ta in a.covering(q, g.id):
                for tb in b.covering(r, g.id):
                    key = (ta.condition, tb.condition)
                    if key not in compatible:
                        phi = conj([ta.condition, tb.condition])
                        compatible[key] = phi != FALSE and not solver.check_sat(phi).unsat
                    node = (g.dst, ta.target, tb.target)
                    if compatible[key] and node not in seen:
                        seen.add(node)
                        waitlist.append(node)
    by_loc: Dict[int, List[Formula]] = {l: [] for l in cfa.locations}
    for l, q, r in sorted(seen):
        by_loc[l] += [a.invariant(q), b.invariant(r)]
    inv = {l: disj([FALSE] + parts) for l, parts in by_loc.items()}
    producer = f"join({a.producer}, {b.producer})"
    return cfa_shaped_witness(cfa, inv, producer=producer, range=_join_range(a, b), domain=a.domain or b.domain)


def _join_range(a: WitnessAutomaton, b: WitnessAutomaton):
    # adjacent ranges [lo_a, hi_a] and [lo_b, hi_b] cover [lo_a, hi_b]
    return (a.range[0], b.range[1])


def join_all(cfa: Cfa, witnesses: Sequence[WitnessAutomaton], solver: Optional[SolverHandle] = None) -> WitnessAutomaton:
    if not witnesses:
        raise ValueError("nothing to join")
    out = witnesses[0]
    for w in witnesses[1:]:
        out = join_witnesses(cfa, out, w, solver)
    return out


# --- validation -------------------------------------------------------------


def check_completeness(cfa: Cfa, w: WitnessAutomaton, solver: Optional[SolverHandle] = None) -> List[Tuple[State, EdgeId]]:
    """State/edge pairs whose covering conditions are not valid (empty if complete)."""
    solver = solver or make_solver()
    missing = []
    for q in w.states:
        for e in cfa.edges:
            conds = [t.condition for t in w.covering(q, e.id)]
            phi = disj(conds)
            if phi == TRUE:
                continue
            if not solver.check_sat(negate(phi)).unsat:
                missing.append((q, e.id))
    return missing


def _segments(cfa: Cfa, start: int, cutpoints: FrozenSet[int], allowed: FrozenSet[int], cap: int):
    """Edge sequences from ``start`` to the next cutpoint inside ``allowed``."""
    stack: List[Tuple[int, Tuple[Edge, ...]]] = [(start, ())]
    count = 0
    while stack:
        loc, prefix = stack.pop()
        for e in reversed(cfa.out_edges(loc)):
            if e.dst not in allowed:
                continue
            seg = prefix + (e,)
            if e.dst in cutpoints:
                count += 1
                if count > cap:
                    raise _TooMany()
                yield seg
            else:
                stack.append((e.dst, seg))


class _TooMany(Exception):
    pass


def _check(
    cfa: Cfa,
    inv: Mapping[int, Formula],
    solver: SolverHandle,
    domain: Optional[Mapping[str, Tuple[int, int]]],
    allowed: Optional[FrozenSet[int]] = None,
    segment_cap: int = 20_000,
) -> ValidationResult:
    allowed = frozenset(cfa.locations) if allowed is None else allowed
    dom = domain_constraint(cfa, domain, over_symbols=False) if domain else TRUE
    queries = 0
    init = inv.get(cfa.initial, TRUE)
    if init != TRUE:
        queries += 1
        res = solver.check_sat(conj([dom, negate(init)]))
        if res.status is SatStatus.SAT:
            return ValidationResult(ValidationStatus.INVALID, cfa.initial, None, "initial states violate the invariant", queries)
        if res.status is SatStatus.UNKNOWN:
            return ValidationResult(ValidationStatus.UNKNOWN, reason="solver gave up on initiation", queries=queries)
    cut = frozenset(
        {cfa.initial} | set(cfa.loop_heads) | set(cfa.error_locations) | {l for l in cfa.locations if inv.get(l, TRUE) != TRUE}
    )
    # the entry has no predecessors, so its states are exactly the initial ones
    entry_pre = conj([init, dom]) if not cfa.in_edges(cfa.initial) else init
    unknown = None
    try:
        for c in sorted(cut & allowed):
            pre = entry_pre if c == cfa.initial else inv.get(c, TRUE)
            if pre == FALSE:
                continue
            for seg in _segments(cfa, c, cut, allowed, segment_cap):
                target = seg[-1].dst
                post = FALSE if target in cfa.error_locations else inv.get(target, TRUE)
                if post == TRUE:
                    continue
                pf = path_formula(cfa, seg, start=pre)
                queries += 1
                res = solver.check_sat(conj([pf.formula, negate(pf.at_end(post))]))
                if res.status is SatStatus.SAT:
                    why = "error location reachable" if target in cfa.error_locations else "invariant not inductive"
                    return ValidationResult(ValidationStatus.INVALID, target, seg[-1].id, why, queries)
                if res.status is SatStatus.UNKNOWN and unknown is None:
                    unknown = (target, seg[-1].id)
    except _TooMany:
        return ValidationResult(ValidationStatus.UNKNOWN, reason="too many segments", queries=queries)
    if unknown is not None:
        return ValidationResult(ValidationStatus.UNKNOWN, unknown[0], unknown[1], "solver gave up", queries)
    return ValidationResult(ValidationStatus.VALID, queries=queries)


def validate_witness(
    cfa: Cfa, w: WitnessAutomaton, solver: Optional[SolverHandle] = None, domain=None
) -> ValidationResult:
    """Check that the witness invariants are inductive and exclude the error.

    ``domain`` defaults to the input domain recorded in the witness.
    """
    _check_edges(cfa, w)
    if set(w.states) != set(cfa.locations) or w.initial != cfa.initial:
        raise WitnessError("validation needs a witness whose states are the CFA locations")
    solver = solver or make_solver()
    dom = domain_of(cfa, domain) if domain is not None else w.domain
    return _check(cfa, w.invariants, solver, dom)


def select_violation(reports: Sequence[ViolationReport]) -> ViolationReport:
    """First report to arrive; on a tie the lower range wins."""
    if not reports:
        raise ValueError("no violation reports")
    return min(reports, key=lambda r: (r.arrival, r.range_index))


# --- serialization ----------------------------------------------------------


def witness_to_json(w: WitnessAutomaton) -> Dict[str, Any]:
    def edges(t: Transition):
        return "otherwise" if t.edges is None else [list(e) for e in sorted(t.edges)]

    return {
        "format": FORMAT,
        "program_hash": w.program_hash,
        "producer": w.producer,
        "range": {"lower": w.range[0], "upper": w.range[1]},
        "assumptions": {"input_domain": {x: list(b) for x, b in w.domain.items()} if w.domain else None},
        "states": [{"id": q, "invariant": format_formula(w.invariant(q))} for q in w.states],
        "initial": w.initial,
        "transitions": [
            {"source": t.source, "target": t.target, "edges": edges(t), "condition": format_formula(t.condition)}
            for t in w.transitions
        ],
    }


def witness_from_json(data: Mapping[str, Any], variables: Optional[Sequence[str]] = None) -> WitnessAutomaton:
    try:
        if data.get("format") != FORMAT:
            raise WitnessError(f"unsupported witness format {data.get('format')!r}")
        states = tuple(int(s["id"]) for s in data["states"])
        inv = {int(s["id"]): parse_condition(s["invariant"], variables) for s in data["states"]}
        transitions = []
        for t in data["transitions"]:
            raw = t["edges"]
            edges = None if raw == "otherwise" else frozenset((int(a), int(b)) for a, b in raw)
            transitions.append(
                Transition(int(t["source"]), int(t["target"]), edges, parse_condition(t.get("condition", "true"), variables))
            )
        rng = data.get("range") or {}
        dom = (data.get("assumptions") or {}).get("input_domain")
        return WitnessAutomaton(
            states,
            int(data["initial"]),
            transitions,
            inv,
            data.get("program_hash", ""),
            data.get("producer", ""),
            (rng.get("lower"), rng.get("upper")),
            {x: (int(lo), int(hi)) for x, (lo, hi) in dom.items()} if dom else None,
        )
    except ProgramError as exc:
        raise WitnessError(f"bad invariant or condition: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, WitnessError):
            raise
        raise WitnessError(f"malformed witness: {exc}") from exc


def save_witness(w: WitnessAutomaton, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(witness_to_json(w), fh, indent=2, sort_keys=False)
        fh.write("\n")


def load_witness(path, variables: Optional[Iterable[str]] = None) -> WitnessAutomaton:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return witness_from_json(data, list(variables) if variables is not None else None)
