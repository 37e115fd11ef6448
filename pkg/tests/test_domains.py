import pytest

from _corpus import DOMAIN, load
from rangedpa import Budget, Verdict, run_cpa
from rangedpa.domains import IntervalAnalysis, IntervalState, SymbolicExecution, ValueAnalysis, ValueState, make_analysis
from rangedpa.domains.interval import INF
from rangedpa.domains.value import UNKNOWN_VALUE, eval3, value_post
from rangedpa.expr import Cmp, conj
from rangedpa.solver import make_solver


def test_unknown_input_keeps_both_branches(running):
    v = ValueState.make(running.variables, {})
    t, f = running.out_edges(2)
    assert value_post(v, t) == v
    assert value_post(v, f) == v
    assert eval3(t.op.cond, v) is None


def test_known_value_decides_branch(running):
    v = ValueState.make(running.variables, {"x": -1})
    t, f = running.out_edges(2)
    assert value_post(v, t) is None
    assert value_post(v, f) is not None
    assert v.get("a") is UNKNOWN_VALUE


def test_value_analysis_bounded_vs_unbounded(running):
    assert run_cpa(running, ValueAnalysis(DOMAIN)).verdict is Verdict.TRUE
    res = run_cpa(running, ValueAnalysis(None), Budget(timeout=1.0))
    assert res.verdict is Verdict.UNKNOWN
    assert res.reason == "timeout"


def test_interval_proves_running_example(running):
    res = run_cpa(running, IntervalAnalysis(None))
    assert res.verdict is Verdict.TRUE
    head = res.states_at(3)
    assert len(head) == 1
    assert head[0].diff("b", "a") == 0


def test_symbolic_unrollings_are_safe(running):
    res = run_cpa(running, SymbolicExecution(DOMAIN))
    assert res.verdict is Verdict.TRUE
    solver = make_solver()
    heads = res.states_at(8)
    assert len(heads) >= 9  # one per unrolling count plus the else branch
    for s in heads:
        store = s.lookup()
        bad = conj([s.path_condition(), Cmp("!=", store["a"], store["b"])])
        assert solver.check_sat(bad).unsat


def test_symbolic_loop_cap_gives_unknown(running):
    res = run_cpa(running, SymbolicExecution(None, loop_cap=4))
    assert res.verdict is Verdict.UNKNOWN
    assert "cap" in res.reason


def test_lockstep_equality_retained():
    cfa = load("lockstep")
    res = run_cpa(cfa, IntervalAnalysis(None))
    assert res.verdict is Verdict.TRUE
    (head,) = res.states_at(min(cfa.loop_heads))
    assert head.diff("b", "a") == 0
    # the value analysis agrees on a concrete run
    val = run_cpa(cfa, ValueAnalysis({"n": (3, 3)}))
    assert val.verdict is Verdict.TRUE
    assert all(s.get("a") == s.get("b") for s in val.states_at(min(cfa.loop_heads)))


def test_widening_after_delay():
    ia = IntervalAnalysis(widen_delay=3)
    ia._loop_heads = frozenset({1})
    reached = IntervalState((("a", 0, 1),), joins=3)
    new = IntervalState((("a", 0, 2),))
    merged = ia.merge(1, new, reached)
    assert merged.interval("a") == (0, INF)
    early = ia.merge(1, new, IntervalState((("a", 0, 1),), joins=0))
    assert early.interval("a") == (0, 2)
    # no merging away from loop heads
    assert ia.merge(2, new, reached) is reached


def test_interval_bottom_on_contradiction(running):
    ia = IntervalAnalysis({"x": (-8, -1)})
    (s,) = ia.initial_states(running)
    t, _ = running.out_edges(2)
    assert ia.transfer(s, t, None) == []


def test_make_analysis_names():
    assert isinstance(make_analysis("interval"), IntervalAnalysis)
    with pytest.raises(ValueError):
        make_analysis("octagon")
