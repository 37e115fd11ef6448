"""Self-contained decision procedure for quantifier-free linear integer arithmetic.

Boolean structure is handled by a model-guided case split: conjuncts are
collected into a cube, the cube is decided, and only disjunctions that the
current cube model falsifies are split.  Cubes are decided by

* Gaussian elimination of equalities with a unit coefficient (other
  equalities are first reduced by a Euclid-style change of variable),
* gcd normalization and tightening of every constraint,
* Fourier-Motzkin elimination of the remaining inequalities.

Infeasibility of the rational shadow (after tightening) is a proof of
integer infeasibility.  When the shadow is feasible a model is rebuilt by
back-substitution and checked by evaluation; if back-substitution runs into
an integer gap the answer is UNKNOWN, never a wrong SAT.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from ..expr import And, BoolConst, Cmp, Formula, LinExpr, Not, Or, eval_formula, formula_vars, nnf
from .result import SatResult, SatStatus

__all__ = ["InternalSolver"]

# A normalized atom is (expr, kind) meaning ``expr == 0`` or ``expr <= 0``.
Atom = Tuple[LinExpr, str]

_EQ, _LE = "eq", "le"


class _Unknown(Exception):
    pass


def _normalize(c: Cmp) -> Formula | Tuple[Atom, ...]:
    d = c.lhs - c.rhs
    if c.op == "<=":
        return ((d, _LE),)
    if c.op == "<":
        return ((d.shift(1), _LE),)
    if c.op == ">=":
        return ((-d, _LE),)
    if c.op == ">":
        return (((-d).shift(1), _LE),)
    if c.op == "==":
        return ((d, _EQ),)
    # x != y splits into x < y or x > y
    return Or((Cmp("<", c.lhs, c.rhs), Cmp(">", c.lhs, c.rhs)))


def _tighten(e: LinExpr, kind: str) -> Optional[Atom]:
    """Divide by the coefficient gcd; ``None`` means trivially true.

    Raises :class:`_Infeasible` on a constant contradiction.
    """
    if e.is_const():
        ok = e.const == 0 if kind == _EQ else e.const <= 0
        if not ok:
            raise _Infeasible
        return None
    g = 0
    for _, k in e.coeffs:
        g = math.gcd(g, k)
    if g == 1:
        return (e, kind)
    coeffs = tuple((v, k // g) for v, k in e.coeffs)
    if kind == _EQ:
        if e.const % g:
            raise _Infeasible
        return (LinExpr(coeffs, e.const // g), kind)
    # sum(k*v) + c <= 0  <=>  sum(k/g*v) <= floor(-c/g)
    return (LinExpr(coeffs, -((-e.const) // g)), kind)


class _Infeasible(Exception):
    pass


@dataclass
class _Elim:
    """One back-substitution step."""

    var: str
    definition: Optional[LinExpr] = None  # set for equality elimination
    bounds: Tuple[LinExpr, ...] = ()  # inequalities mentioning var (FM step)


def decide_conjunction(atoms: Sequence[Atom], max_constraints: int = 4000) -> SatResult:
    """Decide a conjunction of normalized atoms."""
    try:
        model = _solve(list(atoms), max_constraints)
    except _Infeasible:
        return SatResult(SatStatus.UNSAT)
    except _Unknown as exc:
        return SatResult(SatStatus.UNKNOWN, reason=str(exc))
    for e, kind in atoms:
        val = e.evaluate(_with_default(model, e))
        if (kind == _EQ and val != 0) or (kind == _LE and val > 0):
            return SatResult(SatStatus.UNKNOWN, reason="model check failed")
    return SatResult(SatStatus.SAT, model)


def _with_default(model: Dict[str, int], e: LinExpr) -> Dict[str, int]:
    if all(v in model for v in e.variables):
        return model
    return {**{v: 0 for v in e.variables}, **model}


def _solve(atoms: List[Atom], cap: int) -> Dict[str, int]:
    eqs: List[LinExpr] = []
    les: List[LinExpr] = []
    for e, kind in atoms:
        t = _tighten(e, kind)
        if t is not None:
            (eqs if t[1] == _EQ else les).append(t[0])
    steps: List[_Elim] = []

    # equalities: eliminate a unit-coefficient variable, else demote to a pair
    while eqs:
        pick = None
        for i, e in enumerate(eqs):
            for v, k in e.coeffs:
                if abs(k) == 1:
                    pick = (i, v, k)
                    break
            if pick:
                break
        if pick is None:
            # no unit coefficient: substitute v = t - sum(q_i x_i) - q_c for
            # the smallest coefficient a, leaving coefficients a_i mod a
            e = eqs[0]
            v, k = min(e.coeffs, key=lambda vk: abs(vk[1]))
            if k < 0:
                e, k = -e, -k
            t = f"%t{len(steps)}"
            q = {x: c // k for x, c in e.coeffs if x != v}
            definition = LinExpr.of({t: 1, **{x: -c for x, c in q.items()}}, -(e.const // k))
            steps.append(_Elim(v, definition=definition))
            sub = {v: definition}
            new_eqs = []
            for other in eqs:
                t_eq = _tighten(other.substitute(sub), _EQ)
                if t_eq is not None:
                    new_eqs.append(t_eq[0])
            eqs = new_eqs
            les = [x.substitute(sub) for x in les]
            continue
        i, v, k = pick
        e = eqs.pop(i)
        # k*v + rest == 0  ->  v = -rest/k
        rest = e - LinExpr.var(v).scale(k)
        definition = rest.scale(-k)  # k is +-1, so -rest/k == -k*rest
        steps.append(_Elim(v, definition=definition))
        sub = {v: definition}
        new_eqs = []
        for other in eqs:
            t = _tighten(other.substitute(sub), _EQ)
            if t is not None:
                new_eqs.append(t[0])
        eqs = new_eqs
        les = [x.substitute(sub) for x in les]

    # substitution can leave a common factor behind; tighten before FM
    cons = _dedupe([t[0] for t in (_tighten(x, _LE) for x in les) if t is not None])
    while True:
        variables = sorted({v for c in cons for v in c.variables})
        if not variables:
            break
        v = min(variables, key=lambda x: _fm_cost(cons, x))
        pos = [c for c in cons if c.coeff(v) > 0]
        neg = [c for c in cons if c.coeff(v) < 0]
        keep = [c for c in cons if c.coeff(v) == 0]
        steps.append(_Elim(v, bounds=tuple(pos + neg)))
        for p in pos:
            a = p.coeff(v)
            for n in neg:
                b = -n.coeff(v)
                combined = p.scale(b) + n.scale(a)
                t = _tighten(combined, _LE)
                if t is not None:
                    keep.append(t[0])
        cons = _dedupe(keep)
        if len(cons) > cap:
            raise _Unknown("Fourier-Motzkin blow-up")

    model: Dict[str, int] = {}
    for step in reversed(steps):
        if step.definition is not None:
            model[step.var] = step.definition.evaluate(_with_default(model, step.definition))
            continue
        lo, hi = -math.inf, math.inf
        for c in step.bounds:
            k = c.coeff(step.var)
            rest = c - LinExpr.var(step.var).scale(k)
            r = rest.evaluate(_with_default(model, rest))
            if k > 0:  # k*x + r <= 0
                hi = min(hi, (-r) // k)
            else:  # -|k|*x + r <= 0
                lo = max(lo, -((-r) // (-k)))
        if lo > hi:
            raise _Unknown("integer gap during back-substitution")
        model[step.var] = int(min(max(0, lo), hi))
    return {v: x for v, x in model.items() if not v.startswith("%t")}


def _fm_cost(cons: Sequence[LinExpr], v: str) -> int:
    p = sum(1 for c in cons if c.coeff(v) > 0)
    n = sum(1 for c in cons if c.coeff(v) < 0)
    return p * n - p - n


def _dedupe(cons: Sequence[LinExpr]) -> List[LinExpr]:
    # keep only the tightest constant per coefficient vector
    best: Dict[tuple, int] = {}
    for c in cons:
        if c.is_const():
            if c.const > 0:
                raise _Infeasible
            continue
        prev = best.get(c.coeffs)
        if prev is None or c.const > prev:
            best[c.coeffs] = c.const
    return [LinExpr(k, v) for k, v in best.items()]


class InternalSolver:
    """Default backend; pure Python, no external dependencies."""

    name = "internal"

    def __init__(self, max_nodes: int = 200_000):
        self.max_nodes = max_nodes
        self._cube_cache: Dict[FrozenSet[Atom], SatResult] = {}
        self._cache: Dict[Formula, SatResult] = {}

    def check_sat(self, formula: Formula) -> SatResult:
        cached = self._cache.get(formula)
        if cached is not None:
            return cached
        result = self._check(formula)
        if len(self._cache) > 50_000:
            self._cache.clear()
        self._cache[formula] = result
        return result

    def _cube(self, cube: Tuple[Atom, ...]) -> SatResult:
        key = frozenset(cube)
        res = self._cube_cache.get(key)
        if res is None:
            res = decide_conjunction(sorted(key, key=repr))
            if len(self._cube_cache) > 200_000:
                self._cube_cache.clear()
            self._cube_cache[key] = res
        return res

    def _check(self, formula: Formula) -> SatResult:
        self._nodes = 0
        f = nnf(formula)
        try:
            res = self._search((), [f])
        except _Unknown as exc:
            return SatResult(SatStatus.UNKNOWN, reason=str(exc))
        if res.status is SatStatus.SAT:
            model = {v: 0 for v in formula_vars(formula)}
            model.update({k: v for k, v in res.model.items() if k in model})
            if not eval_formula(formula, model):
                return SatResult(SatStatus.UNKNOWN, reason="model check failed")
            return SatResult(SatStatus.SAT, model)
        return res

    def _search(self, cube: Tuple[Atom, ...], todo: List[Formula]) -> SatResult:
        self._nodes += 1
        if self._nodes > self.max_nodes:
            raise _Unknown("case-split limit reached")
        cube_list = list(cube)
        ors: List[Or] = []
        stack = list(todo)
        while stack:
            f = stack.pop()
            if isinstance(f, BoolConst):
                if not f.value:
                    return SatResult(SatStatus.UNSAT)
            elif isinstance(f, Cmp):
                n = _normalize(f)
                if isinstance(n, tuple):
                    cube_list.extend(n)
                else:
                    ors.append(n)  # type: ignore[arg-type]
            elif isinstance(f, And):
                stack.extend(f.args)
            elif isinstance(f, Or):
                ors.append(f)
            else:  # pragma: no cover - nnf removes Not
                raise TypeError(f"unexpected formula {f!r}")
        cube = tuple(dict.fromkeys(cube_list))
        res = self._cube(cube)
        if res.status is not SatStatus.SAT:
            return res
        model = res.model
        pending = [o for o in ors if not _holds(o, model)]
        if not pending:
            return res
        # prune alternatives the cube's variable bounds already decide
        bounds = _propagate_bounds(cube)
        units: List[Formula] = []
        kept: List[Or] = []
        for o in ors:
            alts = []
            satisfied = False
            for a in o.args:
                v = _eval_bounds(a, bounds)
                if v is True:
                    satisfied = True
                    break
                if v is None:
                    alts.append(a)
            if satisfied:
                continue
            if not alts:
                return SatResult(SatStatus.UNSAT)
            if len(alts) == 1:
                units.append(alts[0])
            else:
                kept.append(o if len(alts) == len(o.args) else Or(tuple(alts)))
        if units:
            return self._search(cube, units + kept)
        pending = [o for o in kept if not _holds(o, model)]
        if not pending:
            return res
        # split the falsified disjunction with the fewest alternatives;
        # branch i also assumes the earlier atomic alternatives are false
        split = min(pending, key=lambda o: len(o.args))
        rest = [o for o in kept if o is not split]
        unknown = None
        negated: List[Formula] = []
        for choice in split.args:
            r = self._search(cube, [choice] + negated + rest)
            if r.status is SatStatus.SAT:
                return r
            if r.status is SatStatus.UNKNOWN:
                unknown = r
            if isinstance(choice, Cmp):
                negated.append(nnf(Not(choice)))
        return unknown or SatResult(SatStatus.UNSAT)


_Box = Dict[str, Tuple[float, float]]


def _propagate_bounds(cube: Sequence[Atom], rounds: int = 3) -> _Box:
    """Interval bounds implied by the cube (a few rounds of propagation)."""
    box: _Box = {}
    for _ in range(rounds):
        changed = False
        for e, kind in cube:
            coeffs = e.coeffs
            for v, k in coeffs:
                # k*v <= -(c + sum of the other terms)  (and >= for equalities)
                lo_rest = hi_rest = e.const
                for w, kw in coeffs:
                    if w == v:
                        continue
                    wl, wh = box.get(w, (-math.inf, math.inf))
                    a, b = kw * wl, kw * wh
                    lo_rest += min(a, b)
                    hi_rest += max(a, b)
                cur_lo, cur_hi = box.get(v, (-math.inf, math.inf))
                new_lo, new_hi = cur_lo, cur_hi
                if lo_rest != -math.inf:  # k*v <= -lo_rest
                    num = -int(lo_rest)
                    if k > 0:
                        new_hi = min(new_hi, num // k)
                    else:
                        new_lo = max(new_lo, -((-num) // k))
                if kind == _EQ and hi_rest != math.inf:  # k*v >= -hi_rest
                    num = -int(hi_rest)
                    if k > 0:
                        new_lo = max(new_lo, -((-num) // k))
                    else:
                        new_hi = min(new_hi, num // k)
                if (new_lo, new_hi) != (cur_lo, cur_hi):
                    box[v] = (new_lo, new_hi)
                    changed = True
        if not changed:
            break
    return box


def _eval_bounds(f: Formula, box: _Box) -> Optional[bool]:
    """Three-valued truth of ``f`` over every point of ``box``."""
    if isinstance(f, Cmp):
        d = f.lhs - f.rhs
        lo = hi = d.const
        for v, k in d.coeffs:
            vl, vh = box.get(v, (-math.inf, math.inf))
            a, b = k * vl, k * vh
            lo += min(a, b)
            hi += max(a, b)
        op = f.op
        if op == "<=":
            return True if hi <= 0 else False if lo > 0 else None
        if op == "<":
            return True if hi < 0 else False if lo >= 0 else None
        if op == ">=":
            return True if lo >= 0 else False if hi < 0 else None
        if op == ">":
            return True if lo > 0 else False if hi <= 0 else None
        if op == "==":
            return True if lo == hi == 0 else False if lo > 0 or hi < 0 else None
        return True if lo > 0 or hi < 0 else False if lo == hi == 0 else None
    if isinstance(f, BoolConst):
        return f.value
    if isinstance(f, (And, Or)):
        vals = [_eval_bounds(a, box) for a in f.args]
        if isinstance(f, And):
            return False if False in vals else True if all(v is True for v in vals) else None
        return True if True in vals else False if all(v is False for v in vals) else None
    return None


def _holds(f: Formula, model: Dict[str, int]) -> bool:
    env = {v: model.get(v, 0) for v in formula_vars(f)}
    return eval_formula(f, env)
