from fractions import Fraction as F

import pytest
from hypothesis import given, seed, settings

import strategies as gen
from conftest import CORPUS, load
from toast import typecheck as tc
from toast.calculus import LT
from toast.semantics import Message, SessionEnv, config
from toast.surface import parse
from toast.surface import parse_process as P
from toast.surface import parse_type as T
from toast.typecheck import (
    balanced,
    delayable,
    fully_balanced,
    reading_witness,
    subject_reduction_harness,
    t_reading,
    typecheck,
    wf_session,
)


def env(queues=None, **roles):
    return SessionEnv.make({r: config(T(s)) for r, s in roles.items()}, queues)


def verdict(src, D, theta=None):
    r = typecheck(None, theta or {}, P(src), D)
    return r.accepted, r.failing and r.failing[1]


# -- single rules ---------------------------------------------------------------


@pytest.mark.parametrize(
    "src,roles,premise",
    [
        ("p!a.0", {"p": "!b.end"}, "VSend: no option !a in the type of p"),
        ("p!a(3).0", {"p": "!a.end"}, "VSend: Gamma |- v : none fails"),
        ("p!a.0", {"p": "!a(x>1).end"}, "VSend: nu |= delta fails for !a at {x:0}"),
        ("0", {"p": "!a.end"}, "End: Delta is not end (role p)"),
        ("set(z).0", {}, "Timer: timer z is not declared in theta"),
        ("Y(; p)", {"p": "end"}, "Var: process variable Y is not defined"),
        ("p!a.0 | p!a.0", {"p": "!a.end"}, "Par: role p is used on both sides"),
        ("new (p q) (p!a.0 | q?{a: 0} | pq:[] | qp:[])", {}, "Res: no session types given for (p q)"),
    ],
)
def test_rule_failures_name_their_premise(src, roles, premise):
    assert verdict(src, env(**roles)) == (False, premise)


@pytest.mark.parametrize(
    "src,roles",
    [
        ("p!a.0", {"p": "!a.end"}),
        ("p!a(3).0", {"p": "!a<nat>.end"}),
        ("delay(2).p!a.0", {"p": "!a(x>1).end"}),
        ("p?{a(v): p!b(v).0}", {"p": "?a<nat>.!b<nat>.end"}),
        ("p?<2{a: 0} after<2 p!t.0", {"p": "{?a(x<2).end, !t(x>=2).end}"}),
        ("def X(; r) = r!a.X(; r) in X(; p)", {"p": "rec t . !a.t"}),
    ],
)
def test_accepted(src, roles):
    assert verdict(src, env(**roles)) == (True, None)


def test_timeout_needs_after_branch_to_follow_the_type():
    ok, premise = verdict("p?<2{a: 0} after<2 0", env(p="{?a(x<2).end, !t(x>=2).end}"))
    assert not ok and premise == "End: Delta is not end (role p)"


def test_timer_conditionals():
    D = env(p="{!a(x<1).end, !b(x>=1).end}")
    assert verdict("set(z).delay(w<=2).if (z<1) p!a.0 else p!b.0", D, {"z": 0}) == (True, None)
    ok, premise = verdict("set(z).delay(w<=2).if (z<2) p!a.0 else p!b.0", D, {"z": 0})
    assert not ok and premise.startswith("VSend: nu |= delta fails for !a")


def test_difference_guards():
    # y is reset on !a, so x-y stays at the time !a happened
    D = env(p="!a(x>1, {y}).!b(x-y>2).end")
    assert verdict("delay(5/2).p!a.delay(1/2).p!b.0", D) == (True, None)
    ok, premise = verdict("delay(2).p!a.delay(3).p!b.0", D)
    assert not ok and premise.startswith("VSend: nu |= delta fails for !b")


def test_delay_past_a_read_is_rejected():
    ok, premise = verdict("delay(3).p?{a: 0}", env(p="?a(x<5).end"))
    assert not ok and premise.startswith("Del[t]: Δ not t-reading")


def test_derivation_tree_output():
    r = typecheck(None, {}, P("delay(2).p!a.0"), env(p="!a(x>1).end"))
    assert r.rules() == ["Del[t]", "VSend", "Weak", "End"]
    lines = r.tree.render()
    assert lines[0].startswith("[Del[t]] ") and lines[1].startswith("  [VSend] ")
    js = r.to_json()
    assert js["verdict"] == "accepted" and js["derivation"]["children"][0]["rule"] == "VSend"


def test_failing_premise_is_reported_in_json():
    r = typecheck(None, {}, P("p!a.0"), env(p="!b.end"))
    js = r.to_json()
    assert js["verdict"] == "rejected"
    assert js["failing_premise"]["rule"] == "VSend"
    assert "|-" in js["failing_premise"]["judgment"]


def test_corpus_checks():
    sf = load("tc_example_bounded.toast")
    c = sf.checks["bounded"]
    D = SessionEnv.make({b.role: config(b.type, b.valuation) for b in c.bindings})
    assert typecheck(None, c.timers, c.process, D).accepted
    c = load("interleaving.toast").checks["interleaving"]
    D = SessionEnv.make({b.role: config(b.type, b.valuation) for b in c.bindings})
    r = typecheck(None, c.timers, c.process, D)
    assert r.failing[0] == "VRecv" and "Δ not e-reading" in r.failing[1]


@seed(17)
@settings(max_examples=300, deadline=None, database=None)
@given(gen.processes)
def test_memo_does_not_change_verdicts(proc):
    D = env(p="rec t . {!a(x<3, {x}).t, ?b(x>=3).end}")
    first = typecheck(None, {"z": F(0)}, proc, D)
    tc._MEMO.clear()
    again = typecheck(None, {"z": F(0)}, proc, D)
    assert first.accepted == again.accepted
    assert first.failing == again.failing


# -- predicates on session environments -------------------------------------------------


def test_t_reading_and_witness():
    D = env(p="?a(x>2).end")
    assert not t_reading(D, 2) and t_reading(D, F(5, 2))
    assert not t_reading(D, LT(2))
    r, t = reading_witness(D, 3)
    assert r == "p" and 2 < t < 3
    assert reading_witness(D, 1) is None


def test_balanced_and_delayable():
    S = T("!a.?b.end")
    D = SessionEnv.for_scope("p", S, None, "q", T("?a.!b.end"), None)
    assert balanced(D) and fully_balanced(D) and delayable(D) and wf_session(D)
    sent = D.with_role("p", config(T("?b.end"))).with_queue(("p", "q"), (Message("a"),))
    assert balanced(sent) and not delayable(sent)
    wrong = D.with_queue(("p", "q"), (Message("z"),))
    assert not balanced(wrong)
    assert not fully_balanced(env(p="end"))


# -- subject reduction ------------------------------------------------------------------


SMALL = """
type s = !a(x<2, {x}).?b.end;
system small = new (p q) (delay(1).p!a.p?{b: 0} | q?<2{a: q!b.0} | pq:[] | qp:[])
  with p: s, q: dual s;
"""


def test_sr_small_system():
    s = parse(SMALL).systems["small"]
    rep = subject_reduction_harness(s.process, s.timers, fuel=30)
    assert rep.status == "ok", rep.to_json()
    assert rep.steps > 0 and rep.delays > 0 and rep.violations == []


def test_sr_runs_out_of_fuel():
    s = load("throttling_system.toast").systems["throttling"]
    rep = subject_reduction_harness(s.process, s.timers, fuel=3)
    assert rep.status == "fuel" and rep.violations == []


def test_sr_random_mode_is_seeded():
    s = parse(SMALL).systems["small"]
    a = subject_reduction_harness(s.process, s.timers, fuel=30, mode="random", seed=1)
    b = subject_reduction_harness(s.process, s.timers, fuel=30, mode="random", seed=1)
    assert a.to_json() == b.to_json() and a.status == "ok"


def test_sr_rejects_ill_typed_start():
    text = (CORPUS / "mixed_pingpong_system.toast").read_text().replace("q!ping.(", "q!pang.(")
    s = parse(text).systems["pingpong"]
    rep = subject_reduction_harness(s.process, s.timers, fuel=5)
    assert rep.status == "rejected"
    assert rep.message.startswith("initial judgment rejected: ")
