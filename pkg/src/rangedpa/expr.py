"""Linear integer terms and quantifier-free formulas.

This is the shared vocabulary of the whole package: program expressions are
parsed into :class:`LinExpr`, conditions into :class:`Formula`, and the
solver, the abstract domains and the witness machinery all consume the same
objects.  Everything here is immutable and hashable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Iterator, Mapping, Optional, Tuple

__all__ = [
    "LinExpr",
    "Formula",
    "BoolConst",
    "Cmp",
    "Not",
    "And",
    "Or",
    "TRUE",
    "FALSE",
    "conj",
    "disj",
    "negate",
    "nnf",
    "format_formula",
    "formula_vars",
    "eval_formula",
    "substitute",
    "rename",
]


@dataclass(frozen=True)
class LinExpr:
    """``sum(coeff * var) + const`` with integer coefficients.

    ``coeffs`` is a sorted tuple of ``(var, coeff)`` pairs with non-zero
    coefficients, so structurally equal terms compare equal.
    """

    coeffs: Tuple[Tuple[str, int], ...] = ()
    const: int = 0

    @staticmethod
    def of(mapping: Mapping[str, int], const: int = 0) -> "LinExpr":
        return LinExpr(tuple(sorted((v, c) for v, c in mapping.items() if c != 0)), const)

    @staticmethod
    def var(name: str) -> "LinExpr":
        return LinExpr(((name, 1),), 0)

    @staticmethod
    def constant(value: int) -> "LinExpr":
        return LinExpr((), value)

    def as_dict(self) -> Dict[str, int]:
        return dict(self.coeffs)

    @property
    def variables(self) -> frozenset:
        return frozenset(v for v, _ in self.coeffs)

    def is_const(self) -> bool:
        return not self.coeffs

    def coeff(self, var: str) -> int:
        for v, c in self.coeffs:
            if v == var:
                return c
        return 0

    def __add__(self, other: "LinExpr") -> "LinExpr":
        d = self.as_dict()
        for v, c in other.coeffs:
            d[v] = d.get(v, 0) + c
        return LinExpr.of(d, self.const + other.const)

    def __neg__(self) -> "LinExpr":
        return LinExpr(tuple((v, -c) for v, c in self.coeffs), -self.const)

    def __sub__(self, other: "LinExpr") -> "LinExpr":
        return self + (-other)

    def scale(self, k: int) -> "LinExpr":
        if k == 0:
            return LinExpr()
        return LinExpr(tuple((v, c * k) for v, c in self.coeffs), self.const * k)

    def shift(self, k: int) -> "LinExpr":
        return LinExpr(self.coeffs, self.const + k)

    def evaluate(self, env: Mapping[str, int]) -> int:
        return self.const + sum(c * env[v] for v, c in self.coeffs)

    def substitute(self, sub: Mapping[str, "LinExpr"]) -> "LinExpr":
        out = LinExpr.constant(self.const)
        rest: Dict[str, int] = {}
        for v, c in self.coeffs:
            if v in sub:
                out = out + sub[v].scale(c)
            else:
                rest[v] = rest.get(v, 0) + c
        return out + LinExpr.of(rest)

    def rename(self, fn: Callable[[str], str]) -> "LinExpr":
        d: Dict[str, int] = {}
        for v, c in self.coeffs:
            n = fn(v)
            d[n] = d.get(n, 0) + c
        return LinExpr.of(d, self.const)

    def __str__(self) -> str:
        return format_linexpr(self)


def format_linexpr(e: LinExpr) -> str:
    parts = []
    for v, c in e.coeffs:
        if c == 1:
            term = v
        elif c == -1:
            term = f"-{v}"
        else:
            term = f"{c} * {v}"
        parts.append(term)
    if e.const or not parts:
        parts.append(str(e.const))
    text = parts[0]
    for p in parts[1:]:
        text += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
    return text


class Formula:
    """Base class of the Boolean formula AST."""

    __slots__ = ()

    def __and__(self, other: "Formula") -> "Formula":
        return conj([self, other])

    def __or__(self, other: "Formula") -> "Formula":
        return disj([self, other])

    def __invert__(self) -> "Formula":
        return negate(self)

    def __str__(self) -> str:
        return format_formula(self)


@dataclass(frozen=True)
class BoolConst(Formula):
    value: bool


TRUE = BoolConst(True)
FALSE = BoolConst(False)

_CMP_OPS = ("<", "<=", ">", ">=", "==", "!=")
_NEG_OP = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "==": "!=", "!=": "=="}


@dataclass(frozen=True)
class Cmp(Formula):
    op: str
    lhs: LinExpr
    rhs: LinExpr

    def __post_init__(self) -> None:
        if self.op not in _CMP_OPS:
            raise ValueError(f"unknown comparison {self.op!r}")


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    args: Tuple[Formula, ...]


@dataclass(frozen=True)
class Or(Formula):
    args: Tuple[Formula, ...]


def conj(items: Iterable[Formula]) -> Formula:
    """Flattening, constant-folding conjunction (duplicates removed)."""
    out = []
    for f in items:
        if f == TRUE:
            continue
        if f == FALSE:
            return FALSE
        for g in (f.args if isinstance(f, And) else (f,)):
            if g not in out:
                out.append(g)
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return And(tuple(out))


def disj(items: Iterable[Formula]) -> Formula:
    """Flattening, constant-folding disjunction (duplicates removed)."""
    out = []
    for f in items:
        if f == FALSE:
            continue
        if f == TRUE:
            return TRUE
        for g in (f.args if isinstance(f, Or) else (f,)):
            if g not in out:
                out.append(g)
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return Or(tuple(out))


def negate(f: Formula) -> Formula:
    if isinstance(f, BoolConst):
        return BoolConst(not f.value)
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def nnf(f: Formula, positive: bool = True) -> Formula:
    """Negation normal form; negated comparisons become the dual comparison."""
    if isinstance(f, BoolConst):
        return f if positive else BoolConst(not f.value)
    if isinstance(f, Cmp):
        return f if positive else Cmp(_NEG_OP[f.op], f.lhs, f.rhs)
    if isinstance(f, Not):
        return nnf(f.arg, not positive)
    if isinstance(f, And):
        parts = [nnf(a, positive) for a in f.args]
        return conj(parts) if positive else disj(parts)
    if isinstance(f, Or):
        parts = [nnf(a, positive) for a in f.args]
        return disj(parts) if positive else conj(parts)
    raise TypeError(f"not a formula: {f!r}")


def formula_vars(f: Formula) -> frozenset:
    if isinstance(f, BoolConst):
        return frozenset()
    if isinstance(f, Cmp):
        return f.lhs.variables | f.rhs.variables
    if isinstance(f, Not):
        return formula_vars(f.arg)
    out: frozenset = frozenset()
    for a in f.args:  # type: ignore[attr-defined]
        out |= formula_vars(a)
    return out


def compare(op: str, left: int, right: int) -> bool:
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    if op == ">=":
        return left >= right
    if op == "==":
        return left == right
    return left != right


def eval_formula(f: Formula, env: Mapping[str, int]) -> bool:
    if isinstance(f, BoolConst):
        return f.value
    if isinstance(f, Cmp):
        return compare(f.op, f.lhs.evaluate(env), f.rhs.evaluate(env))
    if isinstance(f, Not):
        return not eval_formula(f.arg, env)
    if isinstance(f, And):
        return all(eval_formula(a, env) for a in f.args)
    if isinstance(f, Or):
        return any(eval_formula(a, env) for a in f.args)
    raise TypeError(f"not a formula: {f!r}")


def map_atoms(f: Formula, fn: Callable[[Cmp], Formula]) -> Formula:
    if isinstance(f, BoolConst):
        return f
    if isinstance(f, Cmp):
        return fn(f)
    if isinstance(f, Not):
        return negate(map_atoms(f.arg, fn))
    if isinstance(f, And):
        return conj(map_atoms(a, fn) for a in f.args)
    if isinstance(f, Or):
        return disj(map_atoms(a, fn) for a in f.args)
    raise TypeError(f"not a formula: {f!r}")


def substitute(f: Formula, sub: Mapping[str, LinExpr]) -> Formula:
    return map_atoms(f, lambda c: Cmp(c.op, c.lhs.substitute(sub), c.rhs.substitute(sub)))


def rename(f: Formula, fn: Callable[[str], str]) -> Formula:
    return map_atoms(f, lambda c: Cmp(c.op, c.lhs.rename(fn), c.rhs.rename(fn)))


def atoms(f: Formula) -> Iterator[Cmp]:
    if isinstance(f, Cmp):
        yield f
    elif isinstance(f, Not):
        yield from atoms(f.arg)
    elif isinstance(f, (And, Or)):
        for a in f.args:
            yield from atoms(a)


def cubes(f: Formula) -> Optional[Tuple[Tuple[Formula, ...], ...]]:
    """Split a formula already in DNF shape into its cubes, else ``None``."""
    f = nnf(f)
    if f == FALSE:
        return ()
    if f == TRUE:
        return ((),)
    out = []
    for d in (f.args if isinstance(f, Or) else (f,)):
        lits = d.args if isinstance(d, And) else (d,)
        if not all(isinstance(x, Cmp) for x in lits):
            return None
        out.append(tuple(lits))
    return tuple(out)


# -- printing in the program's expression grammar ----------------------------

_PREC = {Or: 1, And: 2, Not: 3}


def _format_cmp(c: Cmp) -> str:
    lhs, rhs = c.lhs, c.rhs
    # ``a - b == 0`` prints as ``a == b``
    if rhs.is_const() and rhs.const == 0 and any(k < 0 for _, k in lhs.coeffs):
        left = LinExpr.of({v: k for v, k in lhs.coeffs if k > 0}, max(lhs.const, 0))
        right = LinExpr.of({v: -k for v, k in lhs.coeffs if k < 0}, max(-lhs.const, 0))
        lhs, rhs = left, right
    return f"{format_linexpr(lhs)} {c.op} {format_linexpr(rhs)}"


def format_formula(f: Formula, parent: int = 0) -> str:
    if isinstance(f, BoolConst):
        return "true" if f.value else "false"
    if isinstance(f, Cmp):
        return _format_cmp(f)
    prec = _PREC[type(f)]
    if isinstance(f, Not):
        inner = f.arg
        text = "!" + (f"({format_formula(inner)})" if not isinstance(inner, BoolConst) else format_formula(inner))
    else:
        sep = " || " if isinstance(f, Or) else " && "
        text = sep.join(format_formula(a, prec) for a in f.args)
    return f"({text})" if prec < parent else text
