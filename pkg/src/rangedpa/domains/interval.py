"""Interval analysis with a small relational extension.

Besides a box of integer intervals, a state keeps difference equalities
``v = rep + off`` grouped in classes (one representative per class).  This
is just enough to carry ``a == b`` through a loop that increments both in
lockstep, which intervals alone cannot express.  Merging joins at loop heads
and widens once a location has been joined three times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from ..cpa_core import CPA
from ..expr import And, BoolConst, Cmp, Formula, LinExpr, Not, Or, conj, nnf
from ..frontend import AssignOp, AssumeOp, Cfa
from ..semantics import domain_of

__all__ = ["IntervalState", "IntervalAnalysis", "WIDEN_DELAY"]

INF = math.inf
WIDEN_DELAY = 3

Bound = float  # int or +-inf


class _Bottom(Exception):
    pass


def _floor_div(a, b: int):
    if a in (INF, -INF):
        return a if b > 0 else -a
    return a // b


def _ceil_div(a, b: int):
    if a in (INF, -INF):
        return a if b > 0 else -a
    return -((-a) // b)


@dataclass(frozen=True)
class IntervalState:
    """Box plus difference-equality classes.

    ``box`` lists ``(var, lo, hi)`` in program order; ``rel`` lists
    ``(var, rep, off)`` meaning ``var == rep + off`` for every non-representative
    class member.  ``joins`` counts merges at this location and is not part
    of the abstract value.
    """

    box: Tuple[Tuple[str, Bound, Bound], ...]
    rel: Tuple[Tuple[str, str, int], ...] = ()
    joins: int = field(default=0, compare=False)

    def interval(self, var: str) -> Tuple[Bound, Bound]:
        for v, lo, hi in self.box:
            if v == var:
                return lo, hi
        raise KeyError(var)

    def relations(self) -> Dict[str, Tuple[str, int]]:
        return {v: (r, o) for v, r, o in self.rel}

    def diff(self, x: str, y: str) -> Optional[int]:
        """Known constant ``x - y`` or ``None``."""
        return _Work.of(self).diff(x, y)

    def __repr__(self) -> str:
        parts = []
        for v, lo, hi in self.box:
            if lo == hi:
                parts.append(f"{v}={lo}")
            elif lo != -INF or hi != INF:
                parts.append(f"{v}in[{_fmt(lo)},{_fmt(hi)}]")
        parts += [f"{v}={r}{o:+d}" if o else f"{v}={r}" for v, r, o in self.rel]
        return "<" + " ".join(parts) + ">"


def _fmt(b: Bound) -> str:
    if b == INF:
        return "inf"
    if b == -INF:
        return "-inf"
    return str(int(b))


class _Work:
    """Mutable scratch copy of a state."""

    def __init__(self, order: Sequence[str], box: Dict[str, List[Bound]], cls: Dict[str, Tuple[str, int]]):
        self.order = list(order)
        self.box = box
        self.cls = cls  # every var -> (rep, off); reps map to themselves

    @staticmethod
    def of(s: IntervalState) -> "_Work":
        order = [v for v, _, _ in s.box]
        box = {v: [lo, hi] for v, lo, hi in s.box}
        cls = {v: (v, 0) for v in order}
        for v, r, o in s.rel:
            cls[v] = (r, o)
        return _Work(order, box, cls)

    def freeze(self, joins: int = 0) -> IntervalState:
        self.canonicalize()
        self.reduce()
        box = tuple((v, self.box[v][0], self.box[v][1]) for v in self.order)
        rel = tuple((v, r, o) for v in self.order for r, o in [self.cls[v]] if r != v)
        return IntervalState(box, rel, joins)

    # -- relations --
    def members(self, rep: str) -> List[str]:
        return [v for v in self.order if self.cls[v][0] == rep]

    def canonicalize(self) -> None:
        # representative = first class member in program order
        pos = {v: i for i, v in enumerate(self.order)}
        groups: Dict[str, List[str]] = {}
        for v in self.order:
            groups.setdefault(self.cls[v][0], []).append(v)
        for rep, ms in groups.items():
            new = min(ms, key=pos.__getitem__)
            if new == rep:
                continue
            shift = self.cls[new][1]  # new = rep + shift
            for m in ms:
                self.cls[m] = (new, self.cls[m][1] - shift)

    def diff(self, x: str, y: str) -> Optional[int]:
        rx, ox = self.cls[x]
        ry, oy = self.cls[y]
        if rx == ry:
            return ox - oy
        (lx, hx), (ly, hy) = self.box[x], self.box[y]
        if lx == hx and ly == hy and lx not in (INF, -INF) and ly not in (INF, -INF):
            return int(lx - ly)
        return None

    def forget(self, var: str) -> None:
        rep, off = self.cls[var]
        if rep == var:
            others = [m for m in self.members(var) if m != var]
            if others:
                new = others[0]
                shift = self.cls[new][1]  # new = var + shift
                for m in others:
                    self.cls[m] = (new, self.cls[m][1] - shift)
        self.cls[var] = (var, 0)
        self.box[var] = [-INF, INF]

    def link(self, x: str, y: str, c: int) -> None:
        """Record ``x == y + c``."""
        rx, ox = self.cls[x]
        ry, oy = self.cls[y]
        if rx == ry:
            if ox - oy != c:
                raise _Bottom
            return
        # rx = x - ox = y + c - ox = ry + oy + c - ox
        shift = oy + c - ox
        for m in self.members(rx):
            self.cls[m] = (ry, self.cls[m][1] + shift)

    def reduce(self) -> None:
        for rep in {r for r, _ in self.cls.values()}:
            ms = self.members(rep)
            lo, hi = -INF, INF
            for m in ms:
                o = self.cls[m][1]
                lo = max(lo, self.box[m][0] - o)
                hi = min(hi, self.box[m][1] - o)
            if lo > hi:
                raise _Bottom
            for m in ms:
                o = self.cls[m][1]
                self.box[m] = [lo + o, hi + o]
        for v in self.order:
            if self.box[v][0] > self.box[v][1]:
                raise _Bottom

    # -- transfer --
    def eval(self, e: LinExpr) -> Tuple[Bound, Bound]:
        lo = hi = e.const
        for v, k in e.coeffs:
            a, b = self.box[v]
            if k > 0:
                lo, hi = lo + k * a, hi + k * b
            else:
                lo, hi = lo + k * b, hi + k * a
        return lo, hi

    def assign(self, var: str, e: LinExpr) -> None:
        if e.coeffs == ((var, 1),):
            self.shift(var, e.const)
            return
        if len(e.coeffs) == 1 and e.coeffs[0][1] == 1:
            src = e.coeffs[0][0]
            self.forget(var)
            self.box[var] = [self.box[src][0] + e.const, self.box[src][1] + e.const]
            self.link(var, src, e.const)
            return
        lo, hi = self.eval(e)
        self.forget(var)
        self.box[var] = [lo, hi]

    def shift(self, var: str, c: int) -> None:
        rep, off = self.cls[var]
        self.box[var] = [self.box[var][0] + c, self.box[var][1] + c]
        if rep != var:
            self.cls[var] = (rep, off + c)
        else:
            # var is the representative: the others are now c further away
            for m in self.members(var):
                if m != var:
                    self.cls[m] = (var, self.cls[m][1] - c)

    def assume(self, f: Formula) -> None:
        if isinstance(f, BoolConst):
            if not f.value:
                raise _Bottom
        elif isinstance(f, Cmp):
            self.assume_cmp(f)
        elif isinstance(f, And):
            for a in f.args:
                self.assume(a)
            self.reduce()
        elif isinstance(f, Or):
            branches = []
            for a in f.args:
                w = self.copy()
                try:
                    w.assume(a)
                    w.reduce()
                except _Bottom:
                    continue
                branches.append(w)
            if not branches:
                raise _Bottom
            result = branches[0]
            for b in branches[1:]:
                result = join_work(result, b)
            self.box, self.cls = result.box, result.cls
        else:  # pragma: no cover - input is in negation normal form
            raise TypeError(f"unexpected formula {f!r}")

    def copy(self) -> "_Work":
        return _Work(self.order, {v: list(b) for v, b in self.box.items()}, dict(self.cls))

    def in_rep_space(self, e: LinExpr) -> LinExpr:
        return e.substitute({v: LinExpr.var(r).shift(o) for v, (r, o) in self.cls.items() if v in e.variables})

    def assume_cmp(self, c: Cmp) -> None:
        d = self.in_rep_space(c.lhs - c.rhs)
        op = c.op
        if d.is_const():
            from ..expr import compare

            if not compare(op, d.const, 0):
                raise _Bottom
            return
        if op == "<":
            op, d = "<=", d.shift(1)
        elif op == ">":
            op, d = "<=", (-d).shift(1)
        elif op == ">=":
            op, d = "<=", -d
        if op == "==":
            coeffs = d.as_dict()
            if len(coeffs) == 2 and sorted(coeffs.values()) == [-1, 1]:
                x = next(v for v, k in coeffs.items() if k == 1)
                y = next(v for v, k in coeffs.items() if k == -1)
                self.link(x, y, -d.const)  # x - y + c == 0
            self.propagate(d)
            self.propagate(-d)
        elif op == "<=":
            self.propagate(d)
        else:  # !=
            lo, hi = self.eval(d)
            if lo == hi == 0:
                raise _Bottom
            if len(d.coeffs) == 1:
                v, k = d.coeffs[0]
                if d.const % k == 0:
                    val = -d.const // k
                    a, b = self.box[v]
                    if a == val:
                        self.box[v][0] = val + 1
                    if b == val:
                        self.box[v][1] = val - 1
        self.reduce()

    def propagate(self, d: LinExpr) -> None:
        """Tighten bounds from ``d <= 0`` (``d`` over representatives)."""
        self.reduce()
        for _ in range(2):
            for v, k in d.coeffs:
                rest = d - LinExpr.var(v).scale(k)
                rlo, _ = self.eval(rest)
                if rlo == -INF:
                    continue
                # k*v <= -rest <= -rlo
                bound = -rlo
                if k > 0:
                    self.box[v][1] = min(self.box[v][1], _floor_div(bound, k))
                else:
                    self.box[v][0] = max(self.box[v][0], _ceil_div(bound, k))
                if self.box[v][0] > self.box[v][1]:
                    raise _Bottom


def join_work(a: _Work, b: _Work, widen: bool = False) -> _Work:
    box = {}
    for v in a.order:
        (alo, ahi), (blo, bhi) = a.box[v], b.box[v]
        if widen:
            lo = alo if blo >= alo else -INF
            hi = ahi if bhi <= ahi else INF
        else:
            lo, hi = min(alo, blo), max(ahi, bhi)
        box[v] = [lo, hi]
    out = _Work(a.order, box, {v: (v, 0) for v in a.order})
    for i, x in enumerate(a.order):
        for y in a.order[:i]:
            if out.cls[y][0] != y:
                continue
            da = a.diff(x, y)
            if da is not None and da == b.diff(x, y):
                out.cls[x] = (y, da)
                break
    return out


class IntervalAnalysis(CPA):
    """Abstracting analysis: merge-join at loop heads, delayed widening."""

    name = "interval"

    def __init__(self, domain=None, widen_delay: int = WIDEN_DELAY):
        self.domain = domain
        self.widen_delay = widen_delay
        self._loop_heads: frozenset = frozenset()

    def initial_states(self, cfa: Cfa):
        self._loop_heads = cfa.loop_heads
        bounds = domain_of(cfa, self.domain) if self.domain is not None else {}
        box = tuple((v, *bounds.get(v, (-INF, INF))) for v in cfa.variables)
        return [IntervalState(box)]  # type: ignore[arg-type]

    def transfer(self, state: IntervalState, edge, ctx):
        op = edge.op
        if not isinstance(op, (AssignOp, AssumeOp)):
            return [state]
        w = _Work.of(state)
        try:
            if isinstance(op, AssignOp):
                w.assign(op.var, op.expr)
            else:
                w.assume(nnf(op.cond))
            return [w.freeze()]
        except _Bottom:
            return []

    def leq(self, a: IntervalState, b: IntervalState) -> bool:
        for (_, alo, ahi), (_, blo, bhi) in zip(a.box, b.box):
            if alo < blo or ahi > bhi:
                return False
        wa = _Work.of(a)
        return all(wa.diff(v, r) == o for v, r, o in b.rel)

    def join(self, a: IntervalState, b: IntervalState, widen: bool = False) -> IntervalState:
        return join_work(_Work.of(a), _Work.of(b), widen).freeze()

    def merge(self, loc, new: IntervalState, reached: IntervalState) -> IntervalState:
        if loc not in self._loop_heads or self.leq(new, reached):
            return reached
        joined = self.join(reached, new)
        if reached.joins >= self.widen_delay:
            joined = self.join(reached, joined, widen=True)
        return IntervalState(joined.box, joined.rel, reached.joins + 1)

    def atoms(self, state: IntervalState) -> List[Tuple[str, Formula]]:
        """Rendered conjuncts tagged ``bound`` or ``rel``."""
        out: List[Tuple[str, Formula]] = []
        rels = state.relations()
        for v, lo, hi in state.box:
            x = LinExpr.var(v)
            if lo == hi:
                out.append(("bound", Cmp("==", x, LinExpr.constant(int(lo)))))
                continue
            if lo != -INF:
                out.append(("bound", Cmp(">=", x, LinExpr.constant(int(lo)))))
            if hi != INF:
                out.append(("bound", Cmp("<=", x, LinExpr.constant(int(hi)))))
        for v, (r, o) in rels.items():
            out.append(("rel", Cmp("==", LinExpr.var(v), LinExpr.var(r).shift(o))))
        return out

    def to_formula(self, state: IntervalState) -> Formula:
        return conj(f for _, f in self.atoms(state))
