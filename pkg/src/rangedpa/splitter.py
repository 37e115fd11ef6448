"""Splitters: pick test cases whose induced paths cut the path space into ranges.

``split_loopbound`` follows the leftmost syntactic path that unrolls every
loop exactly ``k`` times (per iteration of any enclosing loop).
``split_random`` walks the CFA choosing the true branch with probability
``p_true``.  Both turn the chosen path into a test case through its path
formula; an infeasible path is shortened from the end until it becomes
feasible.
"""

from __future__ import annotations

import functools
import random
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from .expr import conj
from .frontend import Cfa, Edge
from .solver import SatStatus, SolverHandle, domain_constraint, make_solver, path_formula, test_case_from_model

__all__ = [
    "SplitResult",
    "split_loopbound",
    "split_loopbound_multi",
    "split_random",
    "leftmost_path",
    "random_walk",
    "test_case_for_path",
    "parse_splitter",
]


@dataclass
class SplitResult:
    test_cases: List[Dict[str, int]] = field(default_factory=list)
    failed: bool = False
    reason: str = ""
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def ranges(self) -> int:
        return 1 if self.failed else len(self.test_cases) + 1


def leftmost_path(cfa: Cfa, k: int, max_len: int = 100_000) -> List[Edge]:
    """Leftmost path with exactly ``k`` unrollings of each loop.

    At a loop head the true branch is taken on the first ``k`` arrivals and
    the false branch on arrival ``k + 1``, which also resets the count so an
    inner loop is unrolled ``k`` times again in the next outer iteration.
    Every other branch takes the true edge.
    """
    visits: Dict[int, int] = {}
    edges: List[Edge] = []
    loc = cfa.initial
    while cfa.out_edges(loc) and len(edges) < max_len:
        out = cfa.out_edges(loc)
        if len(out) == 1:
            edge = out[0]
        else:
            t, f = sorted(out, key=lambda e: e.indicator != "T")
            edge = t
            if loc in cfa.loop_heads:
                visits[loc] = visits.get(loc, 0) + 1
                if visits[loc] > k:
                    visits[loc] = 0
                    edge = f
        edges.append(edge)
        loc = edge.dst
    return edges


def random_walk(cfa: Cfa, p_true: float, seed: int, max_depth: int = 1000) -> List[Edge]:
    rng = random.Random(seed)
    edges: List[Edge] = []
    loc = cfa.initial
    while cfa.out_edges(loc) and len(edges) < max_depth:
        out = cfa.out_edges(loc)
        if len(out) == 1:
            edge = out[0]
        else:
            t, f = sorted(out, key=lambda e: e.indicator != "T")
            edge = t if rng.random() < p_true else f
        edges.append(edge)
        loc = edge.dst
    return edges


def test_case_for_path(
    cfa: Cfa, edges: Sequence[Edge], solver: SolverHandle, domain=None
) -> SplitResult:
    """Test case for the longest feasible prefix of ``edges``.

    Prefix feasibility is monotone, so the longest feasible prefix (what
    repeatedly dropping the last edge converges to) is found by bisection.
    """
    dom = domain_constraint(cfa, domain)

    def check(n: int):
        pf = path_formula(cfa, edges[:n]).formula
        return pf, solver.check_sat(conj([pf, dom]))

    pf, res = check(len(edges))
    kept = len(edges)
    if res.status is SatStatus.UNKNOWN:
        return SplitResult(failed=True, reason="solver gave up on the path formula")
    if res.status is SatStatus.UNSAT:
        lo, hi = 0, len(edges) - 1  # prefix lo is feasible, prefix hi + 1 is not
        while lo < hi:
            mid = (lo + hi + 1) // 2
            _, mres = check(mid)
            if mres.status is SatStatus.UNKNOWN:
                return SplitResult(failed=True, reason="solver gave up while shortening")
            if mres.sat:
                lo = mid
            else:
                hi = mid - 1
        kept = lo
        pf, res = check(kept)
        if not res.sat:
            return SplitResult(failed=True, reason="no feasible prefix")
    tau = test_case_from_model(cfa, res.model, pf)
    return SplitResult(
        [tau],
        diagnostics={"path_length": len(edges), "kept": kept, "shortened": kept < len(edges)},
    )


def split_loopbound(cfa: Cfa, k: int = 3, solver: Optional[SolverHandle] = None, domain=None) -> SplitResult:
    if k < 1:
        raise ValueError("k must be at least 1")
    if not cfa.loop_heads:
        return SplitResult(failed=True, reason="program is loop-free", diagnostics={"splitter": f"lb:{k}"})
    solver = solver or make_solver()
    edges = leftmost_path(cfa, k)
    result = test_case_for_path(cfa, edges, solver, domain)
    result.diagnostics["splitter"] = f"lb:{k}"
    unrollings = sum(1 for e in edges[: result.diagnostics.get("kept", 0)] if e.src in cfa.loop_heads and e.indicator == "T")
    result.diagnostics["loop_true_edges"] = unrollings
    return result


def split_loopbound_multi(
    cfa: Cfa, ks: Sequence[int], solver: Optional[SolverHandle] = None, domain=None
) -> SplitResult:
    """Several loop-bound test cases, ordered by their induced paths."""
    from .range_reduction import complete_test_case
    from .semantics import execute, path_cmp

    solver = solver or make_solver()
    found = []
    for k in ks:
        r = split_loopbound(cfa, k, solver, domain)
        if r.failed:
            return r
        tau = r.test_cases[0]
        full = complete_test_case(cfa, tau, domain, solver) or {x: tau.get(x, 0) for x in cfa.inputs}
        found.append((execute(cfa, full), tau))
    found.sort(key=functools.cmp_to_key(lambda a, b: path_cmp(a[0], b[0])))
    unique, seen = [], set()
    for path, tau in found:
        if path.edges not in seen:
            seen.add(path.edges)
            unique.append(tau)
    return SplitResult(unique, diagnostics={"splitter": "lb:" + ",".join(map(str, ks))})


def split_random(
    cfa: Cfa,
    p_true: float = 0.5,
    seed: int = 0,
    max_depth: int = 1000,
    solver: Optional[SolverHandle] = None,
    domain=None,
) -> SplitResult:
    if not 0 < p_true < 1:
        raise ValueError("p_true must lie strictly between 0 and 1")
    solver = solver or make_solver()
    edges = random_walk(cfa, p_true, seed, max_depth)
    result = test_case_for_path(cfa, edges, solver, domain)
    result.diagnostics.update({"splitter": f"random:{p_true}", "seed": seed, "walk_depth": len(edges)})
    return result


def parse_splitter(text: str):
    """Map a CLI splitter name to a function ``(cfa, solver, domain, seed)``."""
    text = text.strip().lower()
    if text == "none":
        return None
    if text.startswith("lb:"):
        ks = [int(x) for x in text[3:].split(",")]
        if len(ks) == 1:
            return lambda cfa, solver, domain, seed: split_loopbound(cfa, ks[0], solver, domain)
        return lambda cfa, solver, domain, seed: split_loopbound_multi(cfa, ks, solver, domain)
    if text in ("lb3", "lb10"):
        return parse_splitter(f"lb:{text[2:]}")
    if text in ("rdm", "rdm9"):
        p = 0.5 if text == "rdm" else 0.9

        def run(cfa, solver, domain, seed):
            if seed is None:
                raise ValueError("random splitters need a seed")
            return split_random(cfa, p, seed, solver=solver, domain=domain)

        return run
    raise ValueError(f"unknown splitter {text!r}")
