"""Concrete execution, paths, the path order and the enumeration oracle.

Paths are compared purely by their edge sequences.  At the first position
where two paths disagree they leave the same location through the two edges
of an assume pair, and the path taking the ``T`` edge is the smaller one; a
proper prefix precedes all of its extensions.
"""

from __future__ import annotations

import enum
import functools
import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from .expr import eval_formula
from .frontend import AssignOp, AssumeOp, Cfa, Edge

__all__ = [
    "TestCase",
    "Path",
    "BOTTOM",
    "TOP",
    "Range",
    "Relation",
    "PathOrderWitness",
    "NonTerminationError",
    "DomainTooLarge",
    "execute",
    "path_leq",
    "path_cmp",
    "sort_paths",
    "in_range",
    "induced_min_path",
    "enumerate_paths",
    "enumerate_assignments",
    "domain_of",
]

TestCase = Mapping[str, int]
Domain = Union[Tuple[int, int], Mapping[str, Tuple[int, int]]]

DEFAULT_DOMAIN = (-8, 8)


class NonTerminationError(RuntimeError):
    pass


class DomainTooLarge(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Path:
    """A CFA path; equality and hashing use the edge sequence only."""

    cfa: Cfa = field(repr=False)
    edges: Tuple[Edge, ...]
    states: Optional[Tuple[Dict[str, Optional[int]], ...]] = field(default=None, repr=False)

    @staticmethod
    def from_edges(cfa: Cfa, edges: Iterable[Edge]) -> "Path":
        return Path(cfa, tuple(edges))

    @property
    def locations(self) -> Tuple[int, ...]:
        if not self.edges:
            return (self.cfa.initial,)
        return (self.edges[0].src,) + tuple(e.dst for e in self.edges)

    @property
    def last(self) -> int:
        return self.edges[-1].dst if self.edges else self.cfa.initial

    @property
    def maximal(self) -> bool:
        return self.cfa.is_sink(self.last)

    @property
    def reaches_error(self) -> bool:
        return self.last in self.cfa.error_locations

    @property
    def edge_ids(self) -> Tuple[Tuple[int, int], ...]:
        return tuple(e.id for e in self.edges)

    def final_state(self) -> Optional[Dict[str, Optional[int]]]:
        return self.states[-1] if self.states else None

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Path) and self.edges == other.edges

    def __hash__(self) -> int:
        return hash(self.edges)

    def __len__(self) -> int:
        return len(self.edges)

    def __str__(self) -> str:
        return " ".join(f"l{l}" for l in self.locations)


class _Sentinel:
    def __init__(self, name: str):
        self.name = name

    def __repr__(self) -> str:
        return self.name

    def __reduce__(self):
        return self.name


BOTTOM = _Sentinel("BOTTOM")  # below every path
TOP = _Sentinel("TOP")  # above every path

Bound = Union[Path, _Sentinel]


@dataclass(frozen=True)
class Range:
    lower: Bound = BOTTOM
    upper: Bound = TOP

    def __post_init__(self) -> None:
        if isinstance(self.lower, Path) and isinstance(self.upper, Path):
            if path_leq(self.lower, self.upper).relation is Relation.GEQ:
                raise ValueError("range lower bound exceeds upper bound")

    def __contains__(self, path: Path) -> bool:
        return in_range(path, self)


class Relation(enum.Enum):
    LEQ = "LEQ"
    GEQ = "GEQ"
    EQUAL = "EQUAL"


@dataclass(frozen=True)
class PathOrderWitness:
    relation: Relation
    diverge_index: int

    @property
    def leq(self) -> bool:
        return self.relation is not Relation.GEQ


# -- execution ----------------------------------------------------------------


def _check_test_case(cfa: Cfa, tau: TestCase) -> None:
    extra = sorted(set(tau) - set(cfa.inputs))
    if extra:
        raise ValueError(f"test case assigns non-input variable {extra[0]!r}")


def execute(cfa: Cfa, tau: TestCase, max_steps: int = 1_000_000) -> Path:
    """Run the program on a fully specified test case."""
    _check_test_case(cfa, tau)
    missing = [x for x in cfa.inputs if x not in tau]
    if missing:
        raise ValueError(f"test case leaves input {missing[0]!r} unassigned")
    env: Dict[str, Optional[int]] = {v: None for v in cfa.variables}
    env.update({x: int(tau[x]) for x in cfa.inputs})
    loc = cfa.initial
    edges: List[Edge] = []
    states = [dict(env)]
    for _ in range(max_steps):
        out = cfa.out_edges(loc)
        if not out:
            return Path(cfa, tuple(edges), tuple(states))
        edge = _step(out, env)
        if isinstance(edge.op, AssignOp):
            env[edge.op.var] = edge.op.expr.evaluate(env)  # type: ignore[arg-type]
        edges.append(edge)
        states.append(dict(env))
        loc = edge.dst
    raise NonTerminationError(f"no sink reached within {max_steps} steps")


def _step(out: Sequence[Edge], env: Mapping[str, Optional[int]]) -> Edge:
    for e in out:
        if not isinstance(e.op, AssumeOp) or eval_formula(e.op.cond, env):  # type: ignore[arg-type]
            return e
    raise AssertionError("no enabled edge: assume pair is not complementary")


# -- ordering -----------------------------------------------------------------


def path_leq(p: Bound, q: Bound) -> PathOrderWitness:
    """Compare two paths (or range sentinels) under the path order."""
    if p is q and isinstance(p, _Sentinel):
        return PathOrderWitness(Relation.EQUAL, 0)
    if p is BOTTOM or q is TOP:
        return PathOrderWitness(Relation.LEQ, 0)
    if p is TOP or q is BOTTOM:
        return PathOrderWitness(Relation.GEQ, 0)
    assert isinstance(p, Path) and isinstance(q, Path)
    if p.cfa is not q.cfa:
        raise ValueError("paths of different CFAs are incomparable")
    k = 0
    for a, b in zip(p.edges, q.edges):
        if a != b:
            break
        k += 1
    if k == len(p.edges) == len(q.edges):
        return PathOrderWitness(Relation.EQUAL, k)
    if k == len(p.edges):
        return PathOrderWitness(Relation.LEQ, k)
    if k == len(q.edges):
        return PathOrderWitness(Relation.GEQ, k)
    smaller = p.edges[k].indicator == "T"
    return PathOrderWitness(Relation.LEQ if smaller else Relation.GEQ, k)


def path_cmp(p: Bound, q: Bound) -> int:
    rel = path_leq(p, q).relation
    return 0 if rel is Relation.EQUAL else (-1 if rel is Relation.LEQ else 1)


def sort_paths(paths: Iterable[Path]) -> List[Path]:
    return sorted(paths, key=functools.cmp_to_key(path_cmp))


def in_range(path: Path, r: Range) -> bool:
    return path_leq(r.lower, path).leq and path_leq(path, r.upper).leq


# -- oracle -------------------------------------------------------------------


def domain_of(cfa: Cfa, domain: Domain) -> Dict[str, Tuple[int, int]]:
    if isinstance(domain, tuple):
        return {x: domain for x in cfa.inputs}
    return {x: tuple(domain[x]) for x in cfa.inputs}  # type: ignore[misc]


def enumerate_assignments(
    cfa: Cfa, domain: Domain, fixed: Optional[TestCase] = None, cap: int = 1_000_000
) -> Iterator[Dict[str, int]]:
    """All total input assignments over the domain that extend ``fixed``."""
    fixed = dict(fixed or {})
    _check_test_case(cfa, fixed)
    bounds = domain_of(cfa, domain)
    free = [x for x in cfa.inputs if x not in fixed]
    size = 1
    for x in free:
        lo, hi = bounds[x]
        size *= max(0, hi - lo + 1)
    if size > cap:
        raise DomainTooLarge(f"{size} assignments exceed the cap of {cap}")
    ranges = [range(bounds[x][0], bounds[x][1] + 1) for x in free]
    for values in itertools.product(*ranges):
        tau = dict(fixed)
        tau.update(zip(free, values))
        yield {x: tau[x] for x in cfa.inputs}


def enumerate_paths(cfa: Cfa, domain: Domain = DEFAULT_DOMAIN, cap: int = 1_000_000) -> List[Path]:
    """Every maximal feasible path over the bounded input box, ascending."""
    seen: Dict[Tuple[Edge, ...], Path] = {}
    for tau in enumerate_assignments(cfa, domain, cap=cap):
        p = execute(cfa, tau)
        seen.setdefault(p.edges, p)
    return sort_paths(seen.values())


def induced_min_path(cfa: Cfa, tau: TestCase, domain: Domain = DEFAULT_DOMAIN) -> Path:
    """The smallest maximal path consistent with a possibly partial test case.

    A total ``tau`` induces exactly one path.  For a partial one the minimum
    is taken over all completions within ``domain``.
    """
    _check_test_case(cfa, tau)
    if all(x in tau for x in cfa.inputs):
        return execute(cfa, tau)
    paths = (execute(cfa, t) for t in enumerate_assignments(cfa, domain, tau))
    return min(paths, key=functools.cmp_to_key(path_cmp))
