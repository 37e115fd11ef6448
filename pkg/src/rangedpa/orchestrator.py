"""Run ranged analyses side by side, steal work, aggregate verdicts.

Workers communicate with a single coordinator through a queue.  The
coordinator owns every cancellation token, so all decisions (cancelling on
FALSE, stealing a range, picking a race winner) happen in one place and are
written to an event log.  :class:`SequentialExecutor` runs the same
coordinator without threads: workers execute one at a time in an order
given by an arrival log, which makes runs replayable.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from .cpa_core import Budget, CancelToken, CpaResult, Verdict, run_cpa
from .domains import make_analysis
from .frontend import Cfa
from .range_reduction import make_ranged
from .semantics import BOTTOM, TOP
from .solver import SolverHandle, make_solver
from .splitter import SplitResult
from .witness import (
    ValidationResult,
    ViolationReport,
    WitnessAutomaton,
    generate_correctness_witness,
    join_all,
    select_violation,
    validate_witness,
)

__all__ = [
    "AnalysisSpec",
    "RangeOutcome",
    "RunReport",
    "aggregate",
    "ranges_from_split",
    "ThreadExecutor",
    "SequentialExecutor",
    "run_ranged_program_analysis",
]

log = logging.getLogger(__name__)

Bound = Any  # test case dict, BOTTOM or TOP


def aggregate(verdicts: Sequence[Verdict]) -> Verdict:
    if any(v is Verdict.FALSE for v in verdicts):
        return Verdict.FALSE
    if verdicts and all(v is Verdict.TRUE for v in verdicts):
        return Verdict.TRUE
    return Verdict.UNKNOWN


def ranges_from_split(split: Optional[SplitResult]) -> List[Tuple[Bound, Bound]]:
    """Adjacent ranges cut at the split test cases; one full range if none."""
    if split is None or split.failed or not split.test_cases:
        return [(BOTTOM, TOP)]
    cuts: List[Bound] = [BOTTOM, *split.test_cases, TOP]
    return list(zip(cuts, cuts[1:]))


@dataclass(frozen=True)
class AnalysisSpec:
    analysis: str
    range_index: int


@dataclass
class _Job:
    label: str
    spec: AnalysisSpec
    lower: Bound
    upper: Bound
    stolen: bool = False
    cancel: CancelToken = field(default_factory=CancelToken)


@dataclass
class _Arrival:
    job: _Job
    result: Optional[CpaResult]
    witness: Optional[WitnessAutomaton]
    elapsed: float
    error: str = ""

    @property
    def verdict(self) -> Verdict:
        return self.result.verdict if self.result is not None else Verdict.UNKNOWN


@dataclass
class RangeOutcome:
    index: int
    lower: Bound
    upper: Bound
    verdict: Verdict = Verdict.UNKNOWN
    analysis: str = ""
    stolen: bool = False
    wall_time: Optional[float] = None
    reason: str = ""
    states: int = 0
    result: Optional[CpaResult] = field(default=None, repr=False)
    witness: Optional[WitnessAutomaton] = field(default=None, repr=False)


@dataclass
class RunReport:
    verdict: Verdict
    outcomes: List[RangeOutcome]
    events: List[Dict[str, Any]]
    arrival_log: List[str]
    launches: int
    max_concurrent: int
    split: Dict[str, Any]
    witness: Optional[WitnessAutomaton] = None
    validation: Optional[ValidationResult] = None
    violation: Optional[ViolationReport] = None
    wall_time: Optional[float] = None
    # "joined", "joined-unslimmed" or "single-range"
    witness_source: Optional[str] = None

    @property
    def steals(self) -> List[Dict[str, Any]]:
        return [e for e in self.events if e["event"] == "steal"]

    def to_json(self, timings: bool = True) -> Dict[str, Any]:
        def bound(b):
            return None if b is BOTTOM or b is TOP else dict(b)

        ranges = []
        for o in self.outcomes:
            entry = {
                "index": o.index,
                "lower": bound(o.lower),
                "upper": bound(o.upper),
                "verdict": o.verdict.value,
                "analysis": o.analysis,
                "stolen": o.stolen,
                "reason": o.reason,
                "states": o.states,
            }
            if timings:
                entry["wall_time"] = o.wall_time
            ranges.append(entry)
        events = [e if timings else {k: v for k, v in e.items() if k != "time"} for e in self.events]
        out: Dict[str, Any] = {
            "verdict": self.verdict.value,
            "ranges": ranges,
            "split": self.split,
            "launches": self.launches,
            "max_concurrent": self.max_concurrent,
            "steals": len(self.steals),
            "events": events,
            "arrival_log": list(self.arrival_log),
        }
        if self.validation is not None:
            out["witness_validation"] = str(self.validation)
            out["witness_source"] = self.witness_source
        if timings:
            out["wall_time"] = self.wall_time
        return out


# --- executors --------------------------------------------------------------

Work = Callable[[_Job], _Arrival]


class ThreadExecutor:
    """One daemon thread per job; results arrive in completion order."""

    def __init__(self) -> None:
        self._queue: "queue.Queue[_Arrival]" = queue.Queue()
        self._threads: List[threading.Thread] = []

    def launch(self, job: _Job, work: Work) -> None:
        t = threading.Thread(target=lambda: self._queue.put(work(job)), name=job.label, daemon=True)
        self._threads.append(t)
        t.start()

    def next_arrival(self) -> _Arrival:
        return self._queue.get()

    def cancel(self, job: _Job) -> None:
        job.cancel.cancel()

    def shutdown(self, grace: float = 5.0) -> None:
        deadline = time.monotonic() + grace
        for t in self._threads:
            t.join(max(0.0, deadline - time.monotonic()))


class SequentialExecutor:
    """Runs jobs one at a time, in arrival-log order when one is given.

    Without a log, pending jobs arrive in launch order.  Log entries naming
    jobs that are not pending are skipped.
    """

    def __init__(self, arrival_log: Optional[Sequence[str]] = None) -> None:
        self._log = list(arrival_log or [])
        self._pending: List[Tuple[_Job, Work]] = []

    def launch(self, job: _Job, work: Work) -> None:
        self._pending.append((job, work))

    def next_arrival(self) -> _Arrival:
        labels = [j.label for j, _ in self._pending]
        pick = 0
        while self._log:
            want = self._log.pop(0)
            if want in labels:
                pick = labels.index(want)
                break
        job, work = self._pending.pop(pick)
        return work(job)

    def cancel(self, job: _Job) -> None:
        job.cancel.cancel()
        self._pending = [(j, w) for j, w in self._pending if j is not job]

    def shutdown(self, grace: float = 0.0) -> None:
        self._pending.clear()


# --- coordinator ------------------------------------------------------------


def _worker(cfa: Cfa, budget: Budget, domain, solver_factory: Callable[[], SolverHandle]) -> Work:
    def work(job: _Job) -> _Arrival:
        start = time.monotonic()
        solver = solver_factory()
        try:
            analysis = make_analysis(job.spec.analysis, domain)
            cpa = make_ranged(analysis, job.lower, job.upper, domain, solver)
            result = run_cpa(cfa, cpa, budget, job.cancel, solver, domain)
            witness = None
            if result.verdict is Verdict.TRUE:
                witness = generate_correctness_witness(result, cfa, solver)
            return _Arrival(job, result, witness, time.monotonic() - start)
        except Exception as exc:  # a crashing worker only costs its range
            log.exception("worker %s failed", job.label)
            return _Arrival(job, None, None, time.monotonic() - start, f"{type(exc).__name__}: {exc}")

    return work


def run_ranged_program_analysis(
    cfa: Cfa,
    analyses: Sequence[str],
    split: Optional[SplitResult] = None,
    budget: Budget = Budget(),
    steal: bool = False,
    domain=None,
    solver_factory: Optional[Callable[[], SolverHandle]] = None,
    executor=None,
    witnesses: bool = True,
) -> RunReport:
    """Split, analyse each range, aggregate.

    ``analyses`` are assigned to the ranges in order (cycled when there are
    more ranges than analyses).  If the split failed, the first analysis
    runs on the full range.  With ``steal`` a worker that proves its range
    while another range is still open is relaunched on that range; the two
    race and the first conclusive result wins.
    """
    if not analyses:
        raise ValueError("need at least one analysis")
    solver_factory = solver_factory or make_solver
    executor = executor or ThreadExecutor()
    ranges = ranges_from_split(split)
    t0 = time.monotonic()
    events: List[Dict[str, Any]] = []
    arrivals: List[str] = []
    outcomes = [RangeOutcome(i, lo, hi) for i, (lo, hi) in enumerate(ranges)]
    decided: Dict[int, bool] = {i: False for i in range(len(ranges))}
    active: Dict[str, _Job] = {}
    stolen_ranges: set = set()
    stats = {"launches": 0, "max_concurrent": 0}
    violations: List[ViolationReport] = []
    work = _worker(cfa, budget, domain, solver_factory)

    def note(event: str, job: _Job, **extra: Any) -> None:
        entry = {"event": event, "job": job.label, "range": job.spec.range_index, "analysis": job.spec.analysis}
        entry.update(extra)
        entry["time"] = round(time.monotonic() - t0, 6)
        events.append(entry)

    def launch(spec: AnalysisSpec, stolen: bool = False) -> None:
        lo, hi = ranges[spec.range_index]
        label = f"r{spec.range_index}:{spec.analysis}" + (":steal" if stolen else "")
        job = _Job(label, spec, lo, hi, stolen)
        active[label] = job
        stats["launches"] += 1
        stats["max_concurrent"] = max(stats["max_concurrent"], len(active))
        note("steal" if stolen else "launch", job)
        executor.launch(job, work)

    def cancel(job: _Job, why: str) -> None:
        if job.label in active:
            del active[job.label]
            executor.cancel(job)
            note("cancel", job, reason=why)

    def decide(i: int, arrival: _Arrival) -> None:
        o = outcomes[i]
        r = arrival.result
        o.verdict = arrival.verdict
        o.analysis = arrival.job.spec.analysis
        o.stolen = arrival.job.stolen
        o.wall_time = round(arrival.elapsed, 6)
        o.reason = arrival.error or (r.reason if r is not None else "")
        o.states = r.states if r is not None else 0
        o.result = r
        o.witness = arrival.witness
        decided[i] = True

    specs = [AnalysisSpec(analyses[i % len(analyses)], i) for i in range(len(ranges))]
    for spec in specs:
        launch(spec)

    try:
        while active:
            arrival = executor.next_arrival()
            job = arrival.job
            if job.label not in active:
                continue  # a cancelled job delivering late
            del active[job.label]
            i = job.spec.range_index
            arrivals.append(job.label)
            note("arrive", job, verdict=arrival.verdict.value)
            racers = [j for j in active.values() if j.spec.range_index == i]
            if arrival.verdict is Verdict.FALSE:
                r = arrival.result
                violations.append(
                    ViolationReport(r.counterexample, dict(r.test_case or {}), i, job.spec.analysis, len(arrivals))
                )
                decide(i, arrival)
                for other in list(active.values()):
                    cancel(other, "violation found")
                break
            if arrival.verdict is Verdict.UNKNOWN and racers:
                continue  # the racer on this range may still conclude
            decide(i, arrival)
            for other in racers:
                cancel(other, "range decided")
            if steal and arrival.verdict is Verdict.TRUE:
                open_ranges = sorted(
                    {j.spec.range_index for j in active.values()} - stolen_ranges,
                )
                if open_ranges:
                    target = open_ranges[0]
                    stolen_ranges.add(target)
                    launch(AnalysisSpec(job.spec.analysis, target), stolen=True)
    finally:
        for other in list(active.values()):
            cancel(other, "shutdown")
        executor.shutdown()

    verdict = aggregate([o.verdict for o in outcomes])
    report = RunReport(
        verdict,
        outcomes,
        events,
        arrivals,
        stats["launches"],
        stats["max_concurrent"],
        dict(split.diagnostics, failed=split.failed, reason=split.reason, test_cases=split.test_cases)
        if split is not None
        else {"splitter": "none"},
    )
    if verdict is Verdict.FALSE:
        report.violation = select_violation(violations)
    elif verdict is Verdict.TRUE and witnesses:
        report.witness, report.validation, report.witness_source = _joint_witness(cfa, outcomes, solver_factory())
    report.wall_time = round(time.monotonic() - t0, 6)
    return report


def _joint_witness(cfa: Cfa, outcomes: Sequence[RangeOutcome], solver: SolverHandle):
    parts = [o.witness for o in outcomes]
    if any(w is None for w in parts):
        return None, None, None
    joined = join_all(cfa, parts, solver)
    check = validate_witness(cfa, joined, solver)
    if check.valid:
        return joined, check, "joined"
    # slimmed invariants can be too weak outside their own range
    raw = [generate_correctness_witness(o.result, cfa, solver, slim=False) for o in outcomes]
    joined_raw = join_all(cfa, raw, solver)
    check_raw = validate_witness(cfa, joined_raw, solver)
    if check_raw.valid:
        log.info("slimmed joint witness rejected (%s); using unslimmed invariants", check)
        return joined_raw, check_raw, "joined-unslimmed"
    # a range whose analysis happened to cover every path certifies the
    # whole program on its own
    for w in raw:
        alone = validate_witness(cfa, w, solver)
        if alone.valid:
            log.info("joint witness rejected (%s); range %s witness is valid alone", check, w.range)
            return w, alone, "single-range"
    return joined, check, "joined"
