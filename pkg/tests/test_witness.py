import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _corpus import DOMAIN, load
from rangedpa import BOTTOM, TOP, Verdict, execute, make_ranged, run_cpa
from rangedpa.domains import IntervalAnalysis, ValueAnalysis
from rangedpa.expr import FALSE, TRUE, conj, format_formula, negate
from rangedpa.frontend import parse_condition
from rangedpa.solver import domain_constraint, make_solver
from rangedpa.witness import (
    ValidationStatus,
    ViolationReport,
    WitnessAutomaton,
    WitnessError,
    box_cover,
    cfa_shaped_witness,
    check_completeness,
    generate_correctness_witness,
    join_witnesses,
    load_witness,
    save_witness,
    select_violation,
    validate_witness,
    witness_from_json,
    witness_to_json,
)

SOLVER = make_solver()


def equivalent(f, g, assume=TRUE):
    """``f`` and ``g`` agree on every state satisfying ``assume``."""
    return all(SOLVER.check_sat(conj([assume, a, negate(b)])).unsat for a, b in ((f, g), (g, f)))


def _in_domain(cfa):
    return domain_constraint(cfa, DOMAIN, over_symbols=False)


@pytest.fixture(scope="module")
def range_witnesses(running):
    lower = run_cpa(running, make_ranged(IntervalAnalysis(DOMAIN), BOTTOM, {"x": 0}, DOMAIN), domain=DOMAIN)
    upper = run_cpa(running, make_ranged(ValueAnalysis(DOMAIN), {"x": 0}, TOP, DOMAIN), domain=DOMAIN)
    assert lower.verdict is upper.verdict is Verdict.TRUE
    return generate_correctness_witness(lower), generate_correctness_witness(upper)


def test_value_range_invariants(running, range_witnesses):
    _, wu = range_witnesses
    ab0 = parse_condition("a == 0 && b == 0", running.variables)
    assert equivalent(wu.invariant(2), ab0, _in_domain(running))
    # the loop body lies outside this range
    assert wu.invariant(4) is FALSE


def test_interval_range_invariants(running, range_witnesses):
    wl, _ = range_witnesses
    assert equivalent(wl.invariant(3), parse_condition("b == a", running.variables))
    # the else branch lies outside this range
    assert wl.invariant(6) is FALSE


def test_single_path_range(running):
    res = run_cpa(running, make_ranged(ValueAnalysis(DOMAIN), {"x": 0}, {"x": 0}, DOMAIN), domain=DOMAIN)
    w = generate_correctness_witness(res)
    on_path = set(execute(running, {"x": 0}).locations)
    for loc in running.locations:
        assert (w.invariant(loc) is FALSE) == (loc not in on_path), loc


def test_joint_invariants(running, range_witnesses):
    j = join_witnesses(running, *range_witnesses, solver=SOLVER)
    want = parse_condition("b == a || a == 0 && b == 0", running.variables)
    assert equivalent(j.invariant(3), want)
    assert j.invariant(8) is TRUE and j.invariant(0) is TRUE
    falses = {loc for loc in running.locations if j.invariant(loc) is FALSE}
    assert falses == running.error_locations
    assert validate_witness(running, j, SOLVER).valid


def test_join_is_complete(running, range_witnesses):
    j = join_witnesses(running, *range_witnesses, solver=SOLVER)
    assert check_completeness(running, j, SOLVER) == []
    for w in range_witnesses:
        assert check_completeness(running, w, SOLVER) == []


def test_non_inductive_invariant_rejected(running, range_witnesses):
    j = join_witnesses(running, *range_witnesses, solver=SOLVER)
    inv = {loc: j.invariant(loc) for loc in running.locations}
    inv[8] = parse_condition("a == 0 && b == 0", running.variables)
    res = validate_witness(running, cfa_shaped_witness(running, inv), SOLVER)
    assert res.status is ValidationStatus.INVALID
    assert (res.location, res.edge) == (8, (7, 0))


def test_trivial_witness_rejected(running):
    res = validate_witness(running, cfa_shaped_witness(running, {}), SOLVER)
    assert res.status is ValidationStatus.INVALID
    assert res.location == 10 and res.edge == (8, 1)


def test_incomplete_automaton_detected(running):
    w = cfa_shaped_witness(running, {})
    first = w.transitions[0]
    partial = WitnessAutomaton(
        w.states, w.initial, [t for t in w.transitions if t is not first and t.edges is not None], w.invariants
    )
    assert check_completeness(running, partial, SOLVER)


def test_json_round_trip(tmp_path, running, range_witnesses):
    j = join_witnesses(running, *range_witnesses, solver=SOLVER)
    again = witness_from_json(witness_to_json(j), running.variables)
    assert again.invariants == j.invariants
    save_witness(j, tmp_path / "w.json")
    loaded = load_witness(tmp_path / "w.json", running.variables)
    assert validate_witness(running, loaded, SOLVER).valid


def test_witness_bound_to_program(running, range_witnesses):
    other = load("running_bug")
    with pytest.raises(WitnessError):
        validate_witness(other, range_witnesses[0], SOLVER)


def test_first_violation_wins(running_bug):
    path = execute(running_bug, {"x": 3})
    upper = ViolationReport(path, {"x": 3}, range_index=1, arrival=3.0)
    lower = ViolationReport(path, {"x": 3}, range_index=0, arrival=5.0)
    assert select_violation([lower, upper]) is upper
    tie = ViolationReport(path, {"x": 3}, range_index=0, arrival=3.0)
    assert select_violation([upper, tie]) is tie


def test_value_witness_rendering_is_compact():
    cfa = load("max2")
    res = run_cpa(cfa, ValueAnalysis(DOMAIN), domain=DOMAIN)
    w = generate_correctness_witness(res)
    text = max((format_formula(w.invariant(l)) for l in cfa.locations), key=len)
    # 289 concrete input pairs, far fewer rendered boxes
    assert text.count("||") < 100
    assert validate_witness(cfa, w, SOLVER, DOMAIN).valid


@settings(max_examples=80, deadline=None)
@given(st.sets(st.tuples(st.integers(-4, 4), st.integers(-4, 4)), max_size=30))
def test_box_cover_is_exact(points):
    boxes = box_cover(points)
    covered = set()
    for box in boxes:
        cells = set(itertools.product(*(range(lo, hi + 1) for lo, hi in box)))
        assert not covered & cells
        covered |= cells
    assert covered == set(points)
