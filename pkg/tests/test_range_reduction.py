import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _corpus import DOMAIN
from rangedpa import BOTTOM, TOP, Range, Verdict, enumerate_paths, execute, in_range, make_ranged, run_cpa
from rangedpa.cpa_core import explored_paths
from rangedpa.domains import SymbolicExecution, ValueAnalysis, ValueState
from rangedpa.range_reduction import (
    RELEASED,
    BoundKind,
    BoundState,
    complete_test_case,
    init_bound,
    lower_transfer,
    upper_transfer,
)


def _track(cfa, **values):
    return BoundState(BoundKind.TRACK, ValueState.make(cfa.variables, values))


def _edge(cfa, src, indicator):
    return next(e for e in cfa.out_edges(src) if e.indicator == indicator)


def test_initial_bound_state(running):
    s = init_bound(running, {"x": 0})
    assert s.kind is BoundKind.TRACK
    assert s.value.known() == {"x": 0}
    with pytest.raises(ValueError):
        init_bound(running, {"a": 0})


def test_leaving_towards_false_releases_lower_bound(running):
    s = _track(running, x=2, a=0, b=0)
    assert lower_transfer(s, _edge(running, 3, "F")) == [RELEASED]
    assert lower_transfer(s, _edge(running, 3, "T")) == [s]


def test_leaving_towards_true_is_outside_lower_bound(running):
    s = _track(running, x=2, a=2, b=2)
    assert lower_transfer(s, _edge(running, 3, "T")) == []


def test_bound_path_branch_keeps_tracking(running):
    s = _track(running, x=0, a=0, b=0)
    assert upper_transfer(s, _edge(running, 2, "T")) == [s]
    assert lower_transfer(s, _edge(running, 2, "T")) == [s]


def test_leaving_towards_true_releases_upper_bound(running):
    s = _track(running, x=0, a=0, b=0)
    assert upper_transfer(s, _edge(running, 3, "T")) == [RELEASED]
    assert upper_transfer(s, _edge(running, 3, "F")) == [s]


def test_released_stays_released(running):
    for e in running.edges:
        assert lower_transfer(RELEASED, e) == [RELEASED]
        assert upper_transfer(RELEASED, e) == [RELEASED]


def _explored(cfa, analysis, lo, hi, domain):
    res = run_cpa(cfa, make_ranged(analysis, lo, hi, domain), domain=domain, stop_at_error=False)
    return {p.edges for p in explored_paths(res) if p.maximal}, res


def _oracle(cfa, lo, hi, domain):
    lp = lo if lo is BOTTOM else execute(cfa, lo)
    hp = hi if hi is TOP else execute(cfa, hi)
    return {p.edges for p in enumerate_paths(cfa, domain) if in_range(p, Range(lp, hp))}


def test_lower_range_of_exit_path(running):
    dom = (-1, 1)
    got, res = _explored(running, ValueAnalysis(dom), BOTTOM, {"x": 0}, dom)
    assert res.verdict is Verdict.TRUE
    assert got == {execute(running, {"x": v}).edges for v in (1, 0)}


def test_symbolic_range_above_two_unrollings(running):
    got, _ = _explored(running, SymbolicExecution(DOMAIN), {"x": 2}, TOP, DOMAIN)
    assert got == _oracle(running, {"x": 2}, TOP, DOMAIN)
    # paths unrolling more than twice are smaller than the bound
    assert all(sum(1 for e in p if e.src == 3 and e.indicator == "T") <= 2 for p in got)


@settings(max_examples=17, deadline=None)
@given(st.integers(-8, 8))
def test_two_ranges_partition_paths(running, x):
    tau = {"x": x}
    lower, _ = _explored(running, ValueAnalysis(DOMAIN), BOTTOM, tau, DOMAIN)
    upper, _ = _explored(running, ValueAnalysis(DOMAIN), tau, TOP, DOMAIN)
    assert lower | upper == {p.edges for p in enumerate_paths(running, DOMAIN)}
    assert lower & upper == {execute(running, tau).edges}


def test_partial_test_case_completion(running):
    assert complete_test_case(running, {}, DOMAIN) == {"x": 8}
    assert complete_test_case(running, {"x": -4}, DOMAIN) == {"x": -4}


def test_sentinels_on_wrong_side():
    with pytest.raises(ValueError):
        make_ranged(ValueAnalysis(), TOP, BOTTOM)


def test_ranged_composition_shape():
    ranged = make_ranged(ValueAnalysis(DOMAIN), {"x": 0}, {"x": 3}, DOMAIN)
    names = [c.name for c in ranged.components]
    assert names == ["lowerbound", "upperbound", "value"]
    assert ranged.name == "ranged-value"
