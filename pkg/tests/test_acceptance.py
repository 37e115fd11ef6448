"""Acceptance criteria A1-A9.

Each test records a PASS/FAIL line (printed in the terminal summary) and
then asserts, so a failing criterion shows up both ways.  Run alone with
``pytest tests/test_acceptance.py -s`` to see the lines inline too.
"""

from __future__ import annotations

import itertools
import time

import pytest

from _corpus import DOMAIN, corpus_files, mutant_cfas
from conftest import ACCEPTANCE
from rangedpa import (
    BOTTOM,
    TOP,
    Budget,
    Range,
    Verdict,
    enumerate_paths,
    execute,
    in_range,
    load_cfa,
    make_ranged,
    path_leq,
    run_cpa,
    run_ranged_program_analysis,
    split_loopbound,
    split_random,
)
from rangedpa.cpa_core import explored_paths
from rangedpa.domains import IntervalAnalysis, ValueAnalysis
from rangedpa.expr import TRUE, conj, negate
from rangedpa.frontend import parse_condition
from rangedpa.orchestrator import SequentialExecutor, ThreadExecutor
from rangedpa.semantics import Path, induced_min_path
from rangedpa.solver import SatStatus, default_command, make_solver, path_formula
from rangedpa.witness import generate_correctness_witness, join_witnesses, validate_witness

PAIRS = [("interval", "value"), ("value", "value"), ("symexec", "value"), ("value", "interval"), ("symexec", "interval")]


def record(key: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[key] = (ok, detail)
    print(f"{key} {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def corpus():
    return {p.stem: load_cfa(p) for p in corpus_files()}


def splitter_outputs(cfa):
    """Every test case the splitters produce for ``cfa`` (deduplicated)."""
    runs = [split_loopbound(cfa, k, domain=DOMAIN) for k in (1, 3, 10)] if cfa.loop_heads else []
    runs += [split_random(cfa, p, seed, domain=DOMAIN) for p in (0.5, 0.9) for seed in range(3)]
    seen, out = set(), []
    for r in runs:
        for tau in r.test_cases:
            key = tuple(sorted(tau.items()))
            if key not in seen:
                seen.add(key)
                out.append(tau)
    return out


def test_a1_loopbound_ground_truth():
    cfa = load_cfa(corpus_files("safe")[0].parent / "running.imp")
    start = time.perf_counter()
    res = split_loopbound(cfa, 3)
    elapsed = time.perf_counter() - start
    ok = res.test_cases == [{"x": 3}] and elapsed < 1.0
    record("A1", ok, f"tau={res.test_cases} in {elapsed * 1000:.0f} ms")


def test_a2_partition_completeness():
    start = time.perf_counter()
    programs = corpus()
    checked, bad = 0, []
    for name, cfa in programs.items():
        paths = enumerate_paths(cfa, DOMAIN)
        everything = set(paths)
        for tau in splitter_outputs(cfa):
            pt = induced_min_path(cfa, tau, DOMAIN)
            lower = {p for p in paths if in_range(p, Range(BOTTOM, pt))}
            upper = {p for p in paths if in_range(p, Range(pt, TOP))}
            checked += 1
            if lower | upper != everything or lower & upper != {pt}:
                bad.append(f"{name}:{tau}")
    elapsed = time.perf_counter() - start
    ok = len(programs) >= 10 and checked > 0 and not bad and elapsed < 60
    record("A2", ok, f"{len(programs)} programs, {checked} splits, {len(bad)} violations, {elapsed:.1f} s {bad[:3]}")


def test_a3_ordering_laws():
    pairs = triples = 0
    bad = []
    for name, cfa in corpus().items():
        paths = enumerate_paths(cfa, DOMAIN)
        leq = {(p, q): path_leq(p, q).leq for p, q in itertools.product(paths, repeat=2)}
        for p, q in itertools.product(paths, repeat=2):
            pairs += 1
            if not (leq[p, q] or leq[q, p]):
                bad.append(f"{name}: totality")
            if leq[p, q] and leq[q, p] and p != q:
                bad.append(f"{name}: antisymmetry")
        for p, q, r in itertools.product(paths, repeat=3):
            triples += 1
            if leq[p, q] and leq[q, r] and not leq[p, r]:
                bad.append(f"{name}: transitivity")
        for p in paths:
            for n in range(len(p.edges)):
                if not path_leq(Path(cfa, p.edges[:n]), p).leq:
                    bad.append(f"{name}: prefix")
        if {p for p in paths if in_range(p, Range(BOTTOM, TOP))} != set(paths):
            bad.append(f"{name}: full range")
    record("A3", not bad, f"{pairs} pairs, {triples} triples, {len(bad)} violations {bad[:3]}")


def test_a4_range_reduction_matches_oracle():
    checked, bad = 0, []
    for name, cfa in corpus().items():
        paths = enumerate_paths(cfa, DOMAIN)
        for tau in splitter_outputs(cfa):
            pt = induced_min_path(cfa, tau, DOMAIN)
            for lo, hi, rng in ((BOTTOM, tau, Range(BOTTOM, pt)), (tau, TOP, Range(pt, TOP))):
                res = run_cpa(cfa, make_ranged(ValueAnalysis(DOMAIN), lo, hi, DOMAIN), domain=DOMAIN, stop_at_error=False)
                got = {p.edges for p in explored_paths(res) if p.maximal}
                want = {p.edges for p in paths if in_range(p, rng)}
                checked += 1
                if got != want:
                    bad.append(f"{name}:{tau}")
    record("A4", checked > 0 and not bad, f"{checked} ranged runs, {len(bad)} mismatches {bad[:3]}")


def test_a5_running_example_join():
    cfa = load_cfa(corpus_files("safe")[0].parent / "running.imp")
    solver = make_solver()
    tau = {"x": 0}
    lower = run_cpa(cfa, make_ranged(IntervalAnalysis(DOMAIN), BOTTOM, tau, DOMAIN), domain=DOMAIN)
    upper = run_cpa(cfa, make_ranged(ValueAnalysis(DOMAIN), tau, TOP, DOMAIN), domain=DOMAIN)
    joint = join_witnesses(cfa, generate_correctness_witness(lower), generate_correctness_witness(upper), solver)

    def equivalent(f, g):
        return all(solver.check_sat(conj([a, negate(b)])).unsat for a, b in ((f, g), (g, f)))

    want = parse_condition("b == a || a == 0 && b == 0", cfa.variables)
    loop = equivalent(joint.invariant(3), want)
    merge = equivalent(joint.invariant(8), TRUE)
    verdict = validate_witness(cfa, joint, solver)
    record("A5", loop and merge and verdict.valid, f"loop head {loop}, merge {merge}, validation {verdict}")


@pytest.mark.xfail(
    strict=True,
    reason="the disjunctive join cannot carry a range restriction that an interval proof relies on (triple.imp)",
)
def test_a6_joined_witnesses_validate():
    total = valid = unknown = 0
    failures = []
    programs = dict(corpus())
    programs.update(mutant_cfas())
    for name, cfa in programs.items():
        splits = [split_loopbound(cfa, 3, domain=DOMAIN), split_random(cfa, 0.9, 1, domain=DOMAIN)]
        for split, pair in itertools.product(splits, PAIRS):
            report = run_ranged_program_analysis(
                cfa, list(pair), split, Budget(20), domain=DOMAIN, executor=SequentialExecutor()
            )
            if report.verdict is not Verdict.TRUE:
                continue
            total += 1
            status = report.validation.status.value if report.validation else None
            # a single range witness standing in for an invalid join does not count
            if status == "VALID" and report.witness_source != "single-range":
                valid += 1
            elif status == "UNKNOWN":
                unknown += 1
            elif report.witness_source == "single-range":
                failures.append(f"{name}/{'-'.join(pair)}: join INVALID, single range witness used")
            else:
                failures.append(f"{name}/{'-'.join(pair)}: join {status}")
    decided = total - unknown
    ok = decided > 0 and valid == decided
    record("A6", ok, f"{valid}/{decided} joined witnesses valid, {unknown} solver UNKNOWN {failures[:3]}")


def test_a7_work_stealing():
    cfa = load_cfa(corpus_files("safe")[0].parent / "running.imp")
    wide = (-(10**6), 10**6)
    split = split_loopbound(cfa, 3, domain=wide)
    start = time.perf_counter()
    runs = {}
    for steal in (False, True):
        runs[steal] = run_ranged_program_analysis(
            cfa, ["value", "interval"], split, Budget(timeout=5), steal=steal, domain=wide,
            executor=ThreadExecutor(), witnesses=True,
        )
    elapsed = time.perf_counter() - start
    off, on = runs[False], runs[True]
    ok = (
        off.verdict is Verdict.UNKNOWN
        and on.verdict is Verdict.TRUE
        and all(r.launches <= 3 and r.max_concurrent <= 2 for r in runs.values())
        and elapsed < 120
    )
    record(
        "A7",
        ok,
        f"steal off {off.verdict.value} ({off.launches} launches), steal on {on.verdict.value} "
        f"({on.launches} launches, {on.max_concurrent} concurrent), {elapsed:.1f} s",
    )


def test_a8_verdict_soundness():
    programs = dict(corpus())
    programs.update(mutant_cfas())
    counts = {v: 0 for v in Verdict}
    bad = []
    for name, cfa in programs.items():
        buggy = any(p.reaches_error for p in enumerate_paths(cfa, DOMAIN))
        splits = [split_loopbound(cfa, 3, domain=DOMAIN), split_random(cfa, 0.5, 7, domain=DOMAIN)]
        for split, pair in itertools.product(splits, (("interval", "value"), ("symexec", "interval"))):
            report = run_ranged_program_analysis(
                cfa, list(pair), split, Budget(20), domain=DOMAIN, executor=SequentialExecutor(), witnesses=False
            )
            counts[report.verdict] += 1
            if report.verdict is Verdict.FALSE:
                if not execute(cfa, report.violation.test_case).reaches_error:
                    bad.append(f"{name}: counterexample does not replay")
            elif report.verdict is Verdict.TRUE and buggy:
                bad.append(f"{name}: TRUE on a buggy program")
    ok = not bad and len(programs) >= 36
    summary = ", ".join(f"{v.value} {n}" for v, n in counts.items())
    record("A8", ok, f"{len(programs)} programs, {summary}, {len(bad)} unsound {bad[:3]}")


def _constraint_corpus():
    formulas = []
    for cfa in corpus().values():
        for p in enumerate_paths(cfa, DOMAIN):
            formulas.append(path_formula(cfa, p.edges).formula)
            for i, e in enumerate(p.edges):
                if e.indicator in ("T", "F"):
                    flipped = list(p.edges[:i]) + [cfa.sibling(e)]
                    formulas.append(path_formula(cfa, flipped).formula)
    return formulas


@pytest.mark.skipif(default_command() is None, reason="no external SMT solver configured")
def test_a9_solver_cross_check():
    formulas = _constraint_corpus()
    internal, external = make_solver(), make_solver("external")
    agree, disagree = 0, []
    for f in formulas:
        a, b = internal.check_sat(f).status, external.check_sat(f).status
        if a is b and a is not SatStatus.UNKNOWN:
            agree += 1
        else:
            disagree.append((a.value, b.value))
    ok = len(formulas) >= 200 and not disagree
    record("A9", ok, f"{agree}/{len(formulas)} formulas agree {disagree[:3]}")
