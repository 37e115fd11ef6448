"""Parser for the ``.imp`` input language and control-flow automaton builder.

The language is a tiny C-like subset::

    decl x, a, b;
    input x;
    a = 0; b = 0;
    if (x >= 0) { while (a < x) { a = a + 1; b = b + 1; } }
    else { a = 10; b = 10; }
    assert(a == b);

Integer arithmetic is linear (``*`` needs a constant operand), conditions
combine comparisons with ``&&``, ``||`` and ``!``.  Inputs are read once, at
program start; every other variable must be assigned before it is read.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

from .expr import (
    FALSE,
    TRUE,
    Cmp,
    Formula,
    LinExpr,
    conj,
    disj,
    format_formula,
    formula_vars,
    negate,
)

__all__ = [
    "ProgramError",
    "Program",
    "Assign",
    "Skip",
    "If",
    "While",
    "Assert",
    "AssignOp",
    "AssumeOp",
    "SkipOp",
    "Edge",
    "Cfa",
    "parse",
    "parse_condition",
    "build_cfa",
    "load_cfa",
]


class ProgramError(Exception):
    """Syntax or static-semantics error, with a 1-based source position."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line else ""
        super().__init__(f"{where}{message}")


# -- source AST ---------------------------------------------------------------

Pos = Tuple[int, int]


@dataclass(frozen=True)
class Assign:
    var: str
    expr: LinExpr
    pos: Pos = (0, 0)


@dataclass(frozen=True)
class Skip:
    pos: Pos = (0, 0)


@dataclass(frozen=True)
class If:
    cond: Formula
    then: Tuple["Stmt", ...]
    orelse: Tuple["Stmt", ...]
    pos: Pos = (0, 0)


@dataclass(frozen=True)
class While:
    cond: Formula
    body: Tuple["Stmt", ...]
    pos: Pos = (0, 0)


@dataclass(frozen=True)
class Assert:
    cond: Formula
    pos: Pos = (0, 0)


Stmt = Union[Assign, Skip, If, While, Assert]


@dataclass(frozen=True)
class Program:
    declarations: Tuple[str, ...]
    inputs: Tuple[str, ...]
    body: Tuple[Stmt, ...]
    source: str = ""

    def asserts(self) -> List[Assert]:
        found: List[Assert] = []

        def walk(stmts: Sequence[Stmt]) -> None:
            for s in stmts:
                if isinstance(s, Assert):
                    found.append(s)
                elif isinstance(s, If):
                    walk(s.then)
                    walk(s.orelse)
                elif isinstance(s, While):
                    walk(s.body)

        walk(self.body)
        return found


# -- lexer --------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*|/\*.*?\*/)
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>&&|\|\||==|!=|<=|>=|\+\+|--|[-+*<>=!(){};,])
    """,
    re.VERBOSE | re.DOTALL,
)

KEYWORDS = {"decl", "input", "if", "else", "while", "assert", "skip", "true", "false"}


@dataclass(frozen=True)
class Token:
    kind: str  # 'num', 'ident', 'kw', 'op', 'eof'
    text: str
    line: int
    col: int


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ProgramError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        lexeme = m.group()
        if kind != "ws":
            if kind == "ident" and lexeme in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, lexeme, line, pos - line_start + 1))
        nl = lexeme.count("\n")
        if nl:
            line += nl
            line_start = pos + lexeme.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# -- parser -------------------------------------------------------------------

_CMP = ("<", "<=", ">", ">=", "==", "!=")


class _Parser:
    def __init__(self, text: str, declared: Optional[FrozenSet[str]] = None):
        self.toks = tokenize(text)
        self.i = 0
        self.declared = declared

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Optional[Token] = None) -> ProgramError:
        t = tok or self.tok
        return ProgramError(msg, t.line, t.col)

    def accept(self, text: str) -> Optional[Token]:
        if self.tok.text == text and self.tok.kind in ("op", "kw"):
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, text: str) -> Token:
        t = self.accept(text)
        if t is None:
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return t

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            found = self.tok.text or "end of input"
            raise self.error(f"expected identifier, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def use(self, tok: Token) -> str:
        if self.declared is not None and tok.text not in self.declared:
            raise self.error(f"use of undeclared variable {tok.text!r}", tok)
        return tok.text

    # program ::= decl-list input-list? stmt*
    def program(self, source: str) -> Program:
        decls: List[str] = []
        inputs: List[str] = []
        while self.accept("decl"):
            decls.extend(self.name_list(decls))
        self.declared = frozenset(decls)
        while self.tok.text == "input" and self.tok.kind == "kw":
            self.i += 1
            for t in self._names():
                name = self.use(t)
                if name in inputs:
                    raise self.error(f"input {name!r} listed twice", t)
                inputs.append(name)
            self.expect(";")
        body: List[Stmt] = []
        while self.tok.kind != "eof":
            body.append(self.statement())
        return Program(tuple(decls), tuple(inputs), tuple(body), source)

    def _names(self) -> List[Token]:
        names = [self.ident()]
        while self.accept(","):
            names.append(self.ident())
        return names

    def name_list(self, already: List[str]) -> List[str]:
        out = []
        for t in self._names():
            if t.text in already or t.text in out:
                raise self.error(f"variable {t.text!r} declared twice", t)
            out.append(t.text)
        self.expect(";")
        return out

    def block(self) -> Tuple[Stmt, ...]:
        if self.tok.text != "{":
            return (self.statement(),)
        self.expect("{")
        stmts: List[Stmt] = []
        while not self.accept("}"):
            if self.tok.kind == "eof":
                raise self.error("unterminated block")
            stmts.append(self.statement())
        return tuple(stmts)

    def statement(self) -> Stmt:
        t = self.tok
        pos = (t.line, t.col)
        if self.accept("skip"):
            self.expect(";")
            return Skip(pos)
        if self.accept("if"):
            self.expect("(")
            cond = self.condition()
            self.expect(")")
            then = self.block()
            orelse: Tuple[Stmt, ...] = ()
            if self.accept("else"):
                orelse = self.block()
            return If(cond, then, orelse, pos)
        if self.accept("while"):
            self.expect("(")
            cond = self.condition()
            self.expect(")")
            return While(cond, self.block(), pos)
        if self.accept("assert"):
            self.expect("(")
            cond = self.condition()
            self.expect(")")
            self.expect(";")
            return Assert(cond, pos)
        if self.tok.text == "{":
            return _Seq(self.block(), pos)  # type: ignore[return-value]
        if t.kind == "ident":
            name = self.use(self.ident())
            if self.accept("++"):
                expr = LinExpr.var(name).shift(1)
            elif self.accept("--"):
                expr = LinExpr.var(name).shift(-1)
            else:
                self.expect("=")
                expr = self.int_expr()
            self.expect(";")
            return Assign(name, expr, pos)
        raise self.error(f"unexpected {t.text or 'end of input'!r}")

    # Expressions are parsed with one grammar and then type-checked, so that
    # ``a = x < 1;`` reports a type error rather than a confusing syntax error.
    def int_expr(self) -> LinExpr:
        start = self.tok
        value = self.expr()
        if not isinstance(value, LinExpr):
            raise self.error("non-integer expression", start)
        return value

    def condition(self) -> Formula:
        start = self.tok
        value = self.expr()
        if not isinstance(value, Formula):
            raise self.error("condition must be Boolean, found integer expression", start)
        return value

    def expr(self) -> Union[LinExpr, Formula]:
        return self.disjunction()

    def disjunction(self) -> Union[LinExpr, Formula]:
        left = self.conjunction()
        while self.tok.text == "||":
            t = self.tok
            self.i += 1
            right = self.conjunction()
            left = disj([self._bool(left, t), self._bool(right, t)])
        return left

    def conjunction(self) -> Union[LinExpr, Formula]:
        left = self.negation()
        while self.tok.text == "&&":
            t = self.tok
            self.i += 1
            right = self.negation()
            left = conj([self._bool(left, t), self._bool(right, t)])
        return left

    def negation(self) -> Union[LinExpr, Formula]:
        if self.tok.text == "!":
            t = self.tok
            self.i += 1
            return negate(self._bool(self.negation(), t))
        return self.comparison()

    def comparison(self) -> Union[LinExpr, Formula]:
        left = self.additive()
        if self.tok.kind == "op" and self.tok.text in _CMP:
            t = self.tok
            self.i += 1
            right = self.additive()
            return Cmp(t.text, self._int(left, t), self._int(right, t))
        return left

    def additive(self) -> Union[LinExpr, Formula]:
        left = self.multiplicative()
        while self.tok.text in ("+", "-"):
            t = self.tok
            self.i += 1
            right = self.multiplicative()
            l, r = self._int(left, t), self._int(right, t)
            left = l + r if t.text == "+" else l - r
        return left

    def multiplicative(self) -> Union[LinExpr, Formula]:
        left = self.unary()
        while self.tok.text == "*":
            t = self.tok
            self.i += 1
            right = self.unary()
            l, r = self._int(left, t), self._int(right, t)
            if l.is_const():
                left = r.scale(l.const)
            elif r.is_const():
                left = l.scale(r.const)
            else:
                raise self.error("nonlinear expression: multiplication needs a constant operand", t)
        return left

    def unary(self) -> Union[LinExpr, Formula]:
        if self.tok.text == "-":
            t = self.tok
            self.i += 1
            return -self._int(self.unary(), t)
        return self.atom()

    def atom(self) -> Union[LinExpr, Formula]:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return LinExpr.constant(int(t.text))
        if t.kind == "ident":
            self.i += 1
            return LinExpr.var(self.use(t))
        if self.accept("true"):
            return TRUE
        if self.accept("false"):
            return FALSE
        if self.accept("("):
            inner = self.expr()
            self.expect(")")
            return inner
        raise self.error(f"unexpected {t.text or 'end of input'!r} in expression")

    def _int(self, v: Union[LinExpr, Formula], at: Token) -> LinExpr:
        if not isinstance(v, LinExpr):
            raise self.error("non-integer expression", at)
        return v

    def _bool(self, v: Union[LinExpr, Formula], at: Token) -> Formula:
        if not isinstance(v, Formula):
            raise self.error("operand of logical operator must be Boolean", at)
        return v


@dataclass(frozen=True)
class _Seq:
    """Brace-delimited nested block; only lives between parser and builder."""

    body: Tuple[Stmt, ...]
    pos: Pos = (0, 0)


def parse(source: str) -> Program:
    """Parse program text; raises :class:`ProgramError` with line/column."""
    parser = _Parser(source)
    program = parser.program(source)
    program = Program(program.declarations, program.inputs, _flatten(program.body), source)
    if not program.asserts():
        raise ProgramError("program has no assert statement")
    _check_definite_assignment(program)
    return program


def parse_condition(text: str, variables: Optional[Sequence[str]] = None) -> Formula:
    """Parse a standalone Boolean expression (used for witness invariants)."""
    parser = _Parser(text, frozenset(variables) if variables is not None else None)
    cond = parser.condition()
    if parser.tok.kind != "eof":
        raise parser.error(f"unexpected {parser.tok.text!r} after condition")
    return cond


def _flatten(stmts: Sequence) -> Tuple[Stmt, ...]:
    out: List[Stmt] = []
    for s in stmts:
        if isinstance(s, _Seq):
            out.extend(_flatten(s.body))
        elif isinstance(s, If):
            out.append(If(s.cond, _flatten(s.then), _flatten(s.orelse), s.pos))
        elif isinstance(s, While):
            out.append(While(s.cond, _flatten(s.body), s.pos))
        else:
            out.append(s)
    return tuple(out)


def _check_definite_assignment(program: Program) -> None:
    """Reject reads of non-input variables that may be uninitialized.

    Inputs are the only source of nondeterminism, so every other variable
    must be written on all paths before it is read.
    """

    def need(used: FrozenSet[str], assigned: FrozenSet[str], pos: Pos) -> None:
        missing = sorted(used - assigned)
        if missing:
            raise ProgramError(f"variable {missing[0]!r} may be read before assignment", *pos)

    def walk(stmts: Sequence[Stmt], assigned: FrozenSet[str]) -> FrozenSet[str]:
        for s in stmts:
            if isinstance(s, Assign):
                need(s.expr.variables, assigned, s.pos)
                assigned = assigned | {s.var}
            elif isinstance(s, Assert):
                need(formula_vars(s.cond), assigned, s.pos)
            elif isinstance(s, If):
                need(formula_vars(s.cond), assigned, s.pos)
                assigned = walk(s.then, assigned) & walk(s.orelse, assigned)
            elif isinstance(s, While):
                need(formula_vars(s.cond), assigned, s.pos)
                walk(s.body, assigned)
        return assigned

    walk(program.body, frozenset(program.inputs))


# -- control-flow automaton ---------------------------------------------------


@dataclass(frozen=True)
class AssignOp:
    var: str
    expr: LinExpr

    def __str__(self) -> str:
        return f"{self.var} = {self.expr};"


@dataclass(frozen=True)
class AssumeOp:
    cond: Formula

    def __str__(self) -> str:
        return format_formula(self.cond)


@dataclass(frozen=True)
class SkipOp:
    def __str__(self) -> str:
        return "skip;"


Op = Union[AssignOp, AssumeOp, SkipOp]


@dataclass(frozen=True)
class Edge:
    """A CFA edge; ``(src, index)`` is its stable identifier."""

    src: int
    index: int
    dst: int
    op: Op
    indicator: str  # 'T', 'F' or 'N'
    pos: Pos = field(default=(0, 0), compare=False)

    @property
    def id(self) -> Tuple[int, int]:
        return (self.src, self.index)

    @property
    def is_assume(self) -> bool:
        return isinstance(self.op, AssumeOp)

    def __str__(self) -> str:
        return f"l{self.src} -[{self.op}]-> l{self.dst}"


@dataclass(eq=False)
class Cfa:
    """Deterministic control-flow automaton with branch indicators.

    Instances are treated as immutable after :func:`build_cfa` returns and
    are compared by identity.
    """

    locations: Tuple[int, ...]
    initial: int
    edges: Tuple[Edge, ...]
    error_locations: FrozenSet[int]
    variables: Tuple[str, ...]
    inputs: Tuple[str, ...]
    loop_heads: FrozenSet[int]
    program: Optional[Program] = None
    _out: Dict[int, Tuple[Edge, ...]] = field(default_factory=dict, repr=False)
    _in: Dict[int, Tuple[Edge, ...]] = field(default_factory=dict, repr=False)
    _by_id: Dict[Tuple[int, int], Edge] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        out: Dict[int, List[Edge]] = {l: [] for l in self.locations}
        inc: Dict[int, List[Edge]] = {l: [] for l in self.locations}
        for e in self.edges:
            out[e.src].append(e)
            inc[e.dst].append(e)
            self._by_id[e.id] = e
        self._out = {l: tuple(sorted(es, key=lambda e: e.index)) for l, es in out.items()}
        self._in = {l: tuple(es) for l, es in inc.items()}

    def out_edges(self, loc: int) -> Tuple[Edge, ...]:
        return self._out[loc]

    def in_edges(self, loc: int) -> Tuple[Edge, ...]:
        return self._in[loc]

    def edge(self, edge_id: Tuple[int, int]) -> Edge:
        try:
            return self._by_id[tuple(edge_id)]  # type: ignore[arg-type]
        except KeyError:
            raise KeyError(f"unknown CFA edge id {edge_id!r}") from None

    def sibling(self, edge: Edge) -> Optional[Edge]:
        """The other assume edge leaving the same location, if any."""
        for e in self._out[edge.src]:
            if e.index != edge.index:
                return e
        return None

    def is_sink(self, loc: int) -> bool:
        return not self._out[loc]

    @property
    def error_location(self) -> int:
        return min(self.error_locations)

    @property
    def program_hash(self) -> str:
        text = self.program.source if self.program is not None else repr(self.edges)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def dump(self) -> str:
        return "\n".join(f"{e.id} {e} [{e.indicator}]" for e in self.edges)


class _Builder:
    """Backpatching lowering: each statement consumes the edges still waiting
    for a target and returns the edges leaving it."""

    def __init__(self) -> None:
        self.next_loc = 0
        self.edges: List[Edge] = []
        self.loop_heads: List[int] = []
        self.failures: List[Tuple[int, int, Op, str, Pos]] = []

    def new_loc(self) -> int:
        loc = self.next_loc
        self.next_loc += 1
        return loc

    def patch(self, pending, target: int) -> None:
        for src, index, op, ind, pos in pending:
            self.edges.append(Edge(src, index, target, op, ind, pos))

    def entry(self, pending) -> int:
        loc = self.new_loc()
        self.patch(pending, loc)
        return loc

    def stmt(self, s: Stmt, pending):
        loc = self.entry(pending)
        if isinstance(s, Assign):
            return [(loc, 0, AssignOp(s.var, s.expr), "N", s.pos)]
        if isinstance(s, Skip):
            return [(loc, 0, SkipOp(), "N", s.pos)]
        if isinstance(s, If):
            then_out = self.block(s.then, [(loc, 0, AssumeOp(s.cond), "T", s.pos)])
            else_out = self.block(s.orelse, [(loc, 1, AssumeOp(negate(s.cond)), "F", s.pos)])
            return then_out + else_out
        if isinstance(s, While):
            self.loop_heads.append(loc)
            body_out = self.block(s.body, [(loc, 0, AssumeOp(s.cond), "T", s.pos)])
            self.patch(body_out, loc)
            return [(loc, 1, AssumeOp(negate(s.cond)), "F", s.pos)]
        if isinstance(s, Assert):
            self.failures.append((loc, 1, AssumeOp(negate(s.cond)), "F", s.pos))
            return [(loc, 0, AssumeOp(s.cond), "T", s.pos)]
        raise TypeError(f"unknown statement {s!r}")

    def block(self, stmts: Sequence[Stmt], pending):
        for s in stmts:
            pending = self.stmt(s, pending)
        return pending


def build_cfa(program: Program) -> Cfa:
    """Lower a checked program to its CFA.

    Each condition yields an assume pair (true evaluation labelled ``T`` with
    edge index 0, false evaluation ``F`` with index 1); ``assert(c)`` becomes
    ``c`` to the continuation and ``!c`` to the shared error location, which
    always gets the highest location id.
    """
    b = _Builder()
    b.entry(b.block(program.body, []))
    err = b.entry(b.failures)
    return Cfa(
        locations=tuple(range(b.next_loc)),
        initial=0,
        edges=tuple(sorted(b.edges, key=lambda e: e.id)),
        error_locations=frozenset({err}),
        variables=program.declarations,
        inputs=program.inputs,
        loop_heads=frozenset(b.loop_heads),
        program=program,
    )


def load_cfa(path) -> Cfa:
    with open(path, encoding="utf-8") as fh:
        return build_cfa(parse(fh.read()))
