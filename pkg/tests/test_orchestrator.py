import json

import pytest

from _corpus import DOMAIN, load
from rangedpa import BOTTOM, TOP, Budget, Verdict, aggregate, execute, run_ranged_program_analysis
from rangedpa.orchestrator import SequentialExecutor, ThreadExecutor, ranges_from_split
from rangedpa.splitter import SplitResult, split_loopbound

T, F, U = Verdict.TRUE, Verdict.FALSE, Verdict.UNKNOWN


@pytest.mark.parametrize(
    "verdicts, expected",
    [([T, T], T), ([T, F], F), ([U, F], F), ([T, U], U), ([U, U], U), ([], U)],
)
def test_aggregate(verdicts, expected):
    assert aggregate(verdicts) is expected


def test_ranges_from_split():
    assert ranges_from_split(None) == [(BOTTOM, TOP)]
    assert ranges_from_split(SplitResult(failed=True)) == [(BOTTOM, TOP)]
    assert ranges_from_split(SplitResult([{"x": 3}])) == [(BOTTOM, {"x": 3}), ({"x": 3}, TOP)]


@pytest.fixture(scope="module")
def lb3(running):
    return split_loopbound(running, 3, domain=DOMAIN)


def _run(cfa, analyses, split, log=None, steal=False, timeout=20):
    return run_ranged_program_analysis(
        cfa, analyses, split, Budget(timeout), steal=steal, domain=DOMAIN, executor=SequentialExecutor(log)
    )


def test_both_ranges_proved_with_witness(running, lb3):
    report = _run(running, ["interval", "value"], lb3)
    assert report.verdict is Verdict.TRUE
    assert [o.analysis for o in report.outcomes] == ["interval", "value"]
    assert report.validation.valid
    assert report.launches == 2 and not report.steals


def test_stealing_range_and_cancelling_owner(running, lb3):
    # interval proves its range first, is relaunched on the open range and wins
    report = _run(running, ["value", "interval"], lb3, ["r1:interval", "r0:interval:steal"], steal=True)
    assert report.verdict is Verdict.TRUE
    assert [(e["event"], e["job"]) for e in report.events] == [
        ("launch", "r0:value"),
        ("launch", "r1:interval"),
        ("arrive", "r1:interval"),
        ("steal", "r0:interval:steal"),
        ("arrive", "r0:interval:steal"),
        ("cancel", "r0:value"),
    ]
    assert report.outcomes[0].stolen
    assert (report.launches, report.max_concurrent) == (3, 2)


def test_stolen_run_cancelled_when_owner_finishes(running, lb3):
    report = _run(running, ["value", "interval"], lb3, ["r0:value", "r1:interval"], steal=True)
    assert report.verdict is Verdict.TRUE
    assert report.events[-1] == {
        "event": "cancel", "job": "r1:value:steal", "range": 1, "analysis": "value",
        "reason": "range decided", "time": report.events[-1]["time"],
    }
    assert not any(o.stolen for o in report.outcomes)
    assert (report.launches, report.max_concurrent) == (3, 2)


def test_steal_happens_once_per_range(running, lb3):
    report = _run(running, ["interval", "interval"], lb3, steal=True)
    assert report.verdict is Verdict.TRUE
    assert len(report.steals) <= 1 and report.launches <= 3


def test_unknown_waits_for_racer(running, lb3):
    # the owner runs out of budget while the stolen run is still pending
    report = run_ranged_program_analysis(
        running, ["value", "interval"], lb3, Budget(timeout=0.5), steal=True,
        domain=(-10**6, 10**6), executor=SequentialExecutor(["r1:interval", "r0:value", "r0:interval:steal"]),
    )
    assert report.arrival_log == ["r1:interval", "r0:value", "r0:interval:steal"]
    assert report.verdict is Verdict.TRUE
    assert report.outcomes[0].stolen


def test_violation_stops_everything(running_bug, lb3):
    report = _run(running_bug, ["value", "value"], lb3)
    assert report.verdict is Verdict.FALSE
    v = report.violation
    assert execute(running_bug, v.test_case).reaches_error
    assert v.path.reaches_error
    cancelled = [e for e in report.events if e["event"] == "cancel"]
    assert all(e["reason"] == "violation found" for e in cancelled)


def test_threads_cancel_peer_on_violation(running_bug, lb3):
    # the peer would run for a long time on the wide domain
    report = run_ranged_program_analysis(
        running_bug, ["interval", "value"], lb3, Budget(timeout=60), domain=(-10**6, 10**6),
        executor=ThreadExecutor(),
    )
    assert report.verdict is Verdict.FALSE
    assert report.wall_time < 30
    assert execute(running_bug, report.violation.test_case).reaches_error


def test_threaded_run_matches_sequential(running, lb3):
    threaded = run_ranged_program_analysis(running, ["interval", "value"], lb3, Budget(20), domain=DOMAIN)
    assert threaded.verdict is Verdict.TRUE
    assert threaded.validation.valid
    replay = _run(running, ["interval", "value"], lb3, threaded.arrival_log)
    assert [o.verdict for o in replay.outcomes] == [o.verdict for o in threaded.outcomes]


def test_replay_is_byte_stable(running, lb3):
    log = ["r1:value", "r0:interval"]
    a = json.dumps(_run(running, ["interval", "value"], lb3, log).to_json(timings=False), sort_keys=True)
    b = json.dumps(_run(running, ["interval", "value"], lb3, log).to_json(timings=False), sort_keys=True)
    assert a == b


def test_crashing_worker_only_costs_its_range(running, lb3):
    report = _run(running, ["interval", "octagon"], lb3)
    assert report.outcomes[0].verdict is Verdict.TRUE
    assert report.outcomes[1].verdict is Verdict.UNKNOWN
    assert "octagon" in report.outcomes[1].reason
    assert report.verdict is Verdict.UNKNOWN


def test_failed_split_runs_first_analysis_on_everything():
    cfa = load("abs")
    report = _run(cfa, ["value", "interval"], split_loopbound(cfa, 3))
    assert len(report.outcomes) == 1
    assert report.outcomes[0].analysis == "value"
    assert report.verdict is Verdict.TRUE


def test_needs_an_analysis(running):
    with pytest.raises(ValueError):
        run_ranged_program_analysis(running, [])
