import itertools

from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import requires_z3
from rangedpa import execute
from rangedpa.expr import And, Cmp, LinExpr, Not, Or, conj, eval_formula, format_formula, formula_vars, nnf
from rangedpa.solver import (
    SatStatus,
    implies,
    initial_symbol,
    is_valid,
    make_solver,
    path_formula,
    to_smtlib,
)
from rangedpa.solver import test_case_from_model as model_test_case
from rangedpa.splitter import leftmost_path

X = LinExpr.var("x")
Y = LinExpr.var("y")


def const(k):
    return LinExpr.constant(k)


def test_exit_path_formula_pins_input(running):
    p = execute(running, {"x": 0})
    pf = path_formula(running, p.edges)
    solver = make_solver()
    res = solver.check_sat(pf.formula)
    assert res.sat
    assert model_test_case(running, res.model, pf.formula) == {"x": 0}
    other = Cmp("!=", LinExpr.var(initial_symbol("x")), const(0))
    assert solver.check_sat(conj([pf.formula, other])).unsat


def test_ssa_indices_advance(running):
    pf = path_formula(running, execute(running, {"x": 1}).edges)
    assert pf.current["x"] == initial_symbol("x")
    assert pf.current["a"] != pf.current["b"]
    assert pf.current["a"].endswith("#2")


def test_three_unrollings_force_three(running):
    edges = leftmost_path(running, 3)
    res = make_solver().check_sat(path_formula(running, edges).formula)
    assert res.sat and res.model[initial_symbol("x")] == 3


def test_integer_reasoning():
    solver = make_solver()
    assert solver.check_sat(Cmp("==", X.scale(2), const(1))).unsat
    assert solver.check_sat(Cmp("<", X, Y) & Cmp("<", Y, X.shift(1))).unsat
    assert solver.check_sat(Cmp("==", X.scale(3) + Y.scale(5), const(7))).sat


def test_validity_helpers():
    solver = make_solver()
    assert is_valid(solver, Cmp(">=", X, X))
    assert not is_valid(solver, Cmp(">", X, const(0)))
    assert implies(solver, Cmp(">", X, const(3)), Cmp(">", X, const(1)))
    assert not implies(solver, Cmp(">", X, const(1)), Cmp(">", X, const(3)))


def test_smtlib_rendering():
    text = to_smtlib(Cmp("<=", X.scale(-2), Y.shift(3)) | Not(Cmp("==", X, Y)))
    assert "(set-logic QF_LIA)" in text
    assert "(declare-const |x| Int)" in text and "(declare-const |y| Int)" in text
    assert "(check-sat)" in text


def test_missing_external_binary_is_unknown():
    solver = make_solver("external", command=["/nonexistent/solver", "-in"])
    res = solver.check_sat(Cmp(">", X, const(0)))
    assert res.status is SatStatus.UNKNOWN
    assert "failed" in res.reason


@requires_z3
def test_external_agrees_on_running_formula(running):
    edges = leftmost_path(running, 3)
    res = make_solver("external").check_sat(path_formula(running, edges).formula)
    assert res.sat and res.model[initial_symbol("x")] == 3


# bounded formulas let brute force serve as the oracle
BOX = 3

atom = st.builds(
    lambda a, b, op, k: Cmp(op, X.scale(a) + Y.scale(b), const(k)),
    st.integers(-2, 2),
    st.integers(-2, 2),
    st.sampled_from(["<", "<=", ">", ">=", "==", "!="]),
    st.integers(-5, 5),
)
formulas = st.recursive(
    atom,
    lambda sub: st.one_of(
        st.lists(sub, min_size=2, max_size=3).map(lambda xs: And(tuple(xs))),
        st.lists(sub, min_size=2, max_size=3).map(lambda xs: Or(tuple(xs))),
        sub.map(Not),
    ),
    max_leaves=8,
)


def _box(f):
    return conj([f] + [Cmp(op, LinExpr.var(v), const(s * BOX)) for v in ("x", "y") for op, s in ((">=", -1), ("<=", 1))])


def _brute(f):
    return any(eval_formula(f, {"x": a, "y": b}) for a, b in itertools.product(range(-BOX, BOX + 1), repeat=2))


@settings(max_examples=300, deadline=None)
@given(formulas)
def test_internal_matches_brute_force(f):
    bounded = _box(f)
    res = make_solver().check_sat(bounded)
    assert res.status is not SatStatus.UNKNOWN, format_formula(bounded)
    assert res.sat == _brute(f)
    if res.sat:
        env = {v: res.model.get(v, 0) for v in formula_vars(bounded)}
        assert eval_formula(bounded, env)


@settings(max_examples=100, deadline=None)
@given(formulas, st.integers(-4, 4), st.integers(-4, 4))
def test_nnf_preserves_meaning(f, a, b):
    env = {"x": a, "y": b}
    assert eval_formula(nnf(f), env) == eval_formula(f, env)
    assert eval_formula(nnf(f, positive=False), env) != eval_formula(f, env)
