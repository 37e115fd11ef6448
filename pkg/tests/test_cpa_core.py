import threading
import time

from _corpus import DOMAIN, load
from rangedpa import Budget, Verdict, run_cpa
from rangedpa.cpa_core import CPA, CancelToken, PassThroughCPA, compose, explored_paths
from rangedpa.domains import IntervalAnalysis, IntervalState, ValueAnalysis
from rangedpa.semantics import enumerate_paths, execute


class Tripwire(CPA):
    """Delegates to ``inner`` and cancels ``token`` on transfer number ``at``."""

    def __init__(self, inner, token, at):
        self.inner, self.token, self.at = inner, token, at
        self.calls = 0
        self.name = inner.name

    def initial_states(self, cfa):
        return self.inner.initial_states(cfa)

    def transfer(self, state, edge, ctx):
        self.calls += 1
        if self.calls == self.at:
            self.token.cancel()
        return self.inner.transfer(state, edge, ctx)

    def leq(self, a, b):
        return self.inner.leq(a, b)


def test_cancel_stops_within_one_transfer(running):
    for at in (1, 5, 17, 40):
        token = CancelToken()
        wire = Tripwire(ValueAnalysis(None), token, at)
        res = run_cpa(running, wire, Budget(timeout=30), cancel=token)
        assert res.verdict is Verdict.UNKNOWN and res.reason == "cancelled"
        # the node being expanded may finish its other out-edge
        assert wire.calls <= at + 1


def test_cancel_from_another_thread(running):
    token = CancelToken()
    box = {}
    t = threading.Thread(target=lambda: box.setdefault("r", run_cpa(running, ValueAnalysis(None), Budget(60), token)))
    t.start()
    time.sleep(0.2)
    stamp = time.monotonic()
    token.cancel()
    t.join(5)
    assert not t.is_alive()
    assert time.monotonic() - stamp < 1.0
    assert box["r"].reason == "cancelled"


def test_state_limit(running):
    res = run_cpa(running, ValueAnalysis(None), Budget(timeout=30, max_states=50))
    assert res.verdict is Verdict.UNKNOWN and res.reason == "state limit"


def test_counterexample_replays(running_bug):
    res = run_cpa(running_bug, ValueAnalysis(DOMAIN))
    assert res.verdict is Verdict.FALSE
    assert res.counterexample.reaches_error
    assert execute(running_bug, res.test_case).reaches_error


def test_full_exploration_past_violation(running_bug):
    res = run_cpa(running_bug, ValueAnalysis(DOMAIN), stop_at_error=False)
    assert res.verdict is Verdict.FALSE
    got = {p.edges for p in explored_paths(res) if p.maximal}
    assert got == {p.edges for p in enumerate_paths(running_bug, DOMAIN)}


def test_pass_through_is_neutral(running):
    plain = run_cpa(running, ValueAnalysis(DOMAIN))
    wrapped = run_cpa(running, compose([PassThroughCPA(), ValueAnalysis(DOMAIN)]))
    assert plain.verdict is wrapped.verdict is Verdict.TRUE
    assert plain.states == wrapped.states


def test_composite_merges_only_when_components_agree():
    ia = IntervalAnalysis(None)
    ia._loop_heads = frozenset({3})

    class Tag(PassThroughCPA):
        def leq(self, a, b):
            return a == b

    comp = compose([Tag(), ia])
    a = IntervalState((("a", 0, 0),))
    b = IntervalState((("a", 1, 1),))
    assert comp.merge(3, ("p", b), ("p", a))[1].interval("a") == (0, 1)
    # different tags keep the states apart
    assert comp.merge(3, ("q", b), ("p", a)) == ("p", a)


def test_explored_paths_match_enumeration():
    for name in ("running", "branches", "nested"):
        cfa = load(name)
        res = run_cpa(cfa, ValueAnalysis(DOMAIN))
        got = {p.edges for p in explored_paths(res)}
        assert got == {p.edges for p in enumerate_paths(cfa, DOMAIN)}, name
