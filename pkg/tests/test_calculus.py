from fractions import Fraction as F

import pytest
from hypothesis import given, seed, settings

import strategies as gen
from toast.calculus import (
    LE,
    LT,
    TERM,
    Alt,
    Branch,
    Call,
    Def,
    Delay,
    NatV,
    Par,
    Queue,
    Scope,
    Send,
    SessionRef,
    Timeout,
    digest,
    free_calls,
    is_final,
    live_timers,
    neq_set,
    prune_defs,
    reduce_delay,
    reduce_step,
    run,
    time_pass,
    wait_set,
)
from toast.surface import parse_process as P

SEED = 11


def labels(theta, proc):
    return sorted(str(lab) for lab, _, _ in reduce_step(theta, proc))


# -- time passing ---------------------------------------------------------------


def test_expired_timeout_continues_in_after_branch():
    # one unit past the deadline, the leftover unit is spent in the after-branch
    n = 2
    recv = Timeout("p", LE(n), (Alt("l", "v", TERM),), Delay(F(3), TERM))
    assert time_pass(recv, n + 1) == Delay(F(2), TERM)


def test_expired_timeout_with_send_blocks_time():
    # sends are instantaneous, so time stops once the after-branch is reached
    recv = Timeout("p", LE(2), (Alt("l", "v", TERM),), Send("q", "m", NatV(0), TERM))
    assert time_pass(recv, 3) is None
    assert time_pass(recv, 2) is not None


def test_time_passing_example_system():
    # the expired timeout becomes 0 and the neighbour just ages
    sys = P("new (p q) (p?<2{l(v): 0} after<2 0 | qp:[] | delay(5).0)")
    assert time_pass(sys, 3) == P("new (p q) (0 | qp:[] | delay(2).0)")


def test_deadlines_shrink_and_expire():
    b = Branch("p", LT(2), (Alt("a", None, TERM),))
    assert time_pass(b, F(1, 2)) == Branch("p", LT(F(3, 2)), b.alts)
    assert time_pass(b, 2) is None
    assert time_pass(Branch("p", LE(2), b.alts), 2) is not None


def test_urgent_receive_blocks_time():
    waiting = P("new (p q) (p?{a: 0} | qp:[a] | pq:[])")
    assert wait_set(P("p?{a: 0}")) == {"p"}
    assert neq_set(P("qp:[a]")) == {"p"}
    assert time_pass(waiting, F(1, 2)) is None
    assert time_pass(P("new (p q) (p?{a: 0} | qp:[] | pq:[])"), 7) is not None


def test_sends_and_conditionals_are_instant():
    assert time_pass(P("p!a.0"), 1) is None
    assert time_pass(P("if (z<1) 0 else 0"), 1) is None
    assert time_pass(P("delay(w<=1).0"), 1) is None
    assert time_pass(P("p!a.0"), 0) == P("p!a.0")


@seed(SEED)
@settings(max_examples=300, deadline=None, database=None)
@given(gen.processes, gen.amounts)
def test_time_pass_zero_and_split(proc, a):
    assert time_pass(proc, 0) == proc
    half = time_pass(proc, a / 2)
    assert time_pass(proc, a) == (None if half is None else time_pass(half, a / 2))


def test_negative_delay_rejected():
    with pytest.raises(ValueError):
        time_pass(TERM, -1)


# -- reduction ------------------------------------------------------------------


def test_send_appends_to_own_queue():
    sys = P("new (p q) (p!a(3).0 | pq:[b] | qp:[])")
    [(lab, _, after)] = reduce_step({}, sys)
    assert str(lab) == "p Send a(3)"
    assert after == P("new (p q) (0 | pq:[b, a 3] | qp:[])")


def test_receive_takes_queue_head_and_substitutes():
    sys = P("new (p q) (q?{a(v): q!b(v).0} | pq:[a 4] | qp:[])")
    [(lab, _, after)] = reduce_step({}, sys)
    assert str(lab) == "q Recv a(4)"
    assert after == P("new (p q) (q!b(4).0 | pq:[] | qp:[])")


def test_receive_with_unknown_label_is_stuck():
    sys = P("new (p q) (q?{a: 0} | pq:[b] | qp:[])")
    assert reduce_step({}, sys) == []


def test_timer_and_conditional_steps():
    [(lab, th, after)] = reduce_step({"z": F(5)}, P("set(z).0"))
    assert str(lab) == "- Set z" and th == {"z": 0} and after == TERM
    assert labels({"z": F(1, 2)}, P("if (z<1) 0 else p!a.0")) == ["- IfT"]
    assert labels({"z": F(1)}, P("if (z<1) 0 else p!a.0")) == ["- IfF"]
    with pytest.raises(KeyError):
        reduce_step({}, P("if (z<1) 0 else 0"))


def test_det_picks_half_grid_delays():
    got = [after for _, _, after in reduce_step({}, P("delay(w<=1).0"), M=1)]
    assert got == [TERM, P("delay(1/2).0"), P("delay(1).0")]


def test_call_unfolds_and_prunes():
    proc = Def("X", ("v",), ("r",), Send("r", "a", SessionRef("v"), TERM), Call("X", (NatV(1),), ("p",)))
    [(lab, _, after)] = reduce_step({}, proc)
    assert str(lab) == "- Call X"
    # X is no longer called, so its definition is dropped
    assert after == Send("p", "a", NatV(1), TERM)


def test_call_errors():
    with pytest.raises(KeyError):
        reduce_step({}, Call("Y", (), ()))
    with pytest.raises(ValueError):
        reduce_step({}, Def("X", (), ("r",), TERM, Call("X", (), ())))


def test_prune_defs_keeps_called_definitions():
    live = P("def X(; p) = p!a.X(; p) in X(; p)")
    assert prune_defs(live) == live
    assert prune_defs(P("def X(; p) = 0 in 0")) == TERM
    assert free_calls(P("def X(; p) = Y(; p) in X(; p)")) == {"Y"}


def test_live_timers():
    assert live_timers(P("if (z<1) 0 else 0")) == {"z"}
    assert live_timers(P("set(z).if (z<1) 0 else 0")) == frozenset()
    # a recursive body that resets first never reads the caller's value
    assert live_timers(P("def X(; p) = set(y).if (y<1) X(; p) else 0 in X(; p)")) == frozenset()
    assert live_timers(P("def X(; p) = if (y<1) set(y).X(; p) else 0 in X(; p)")) == {"y"}


def test_reduce_delay_advances_timers():
    th, after = reduce_delay({"z": F(1)}, P("delay(2).0"), F(1, 2))
    assert th == {"z": F(3, 2)} and after == P("delay(3/2).0")
    assert reduce_delay({}, P("p!a.0"), 1) is None


# -- running --------------------------------------------------------------------


PINGPONG = "new (p q) (p!ping.p?{pong: 0} | q?{ping: q!pong.0} | pq:[] | qp:[])"


def test_random_run_is_deterministic_per_seed():
    a = run({}, P(PINGPONG), "random", fuel=20, seed=3)
    b = run({}, P(PINGPONG), "random", fuel=20, seed=3)
    assert [e.label for e in a.trace] == [e.label for e in b.trace]
    assert a.status == "final"
    assert is_final(a.trace[-1].process)


def test_exhaustive_run_finds_stuck_state():
    ok = run({}, P(PINGPONG), "exhaustive", fuel=20)
    assert ok.status == "explored" and ok.finals >= 1 and ok.stuck == []
    bad = run({}, P("new (p q) (p?<1{a: 0} | q?<1{a: 0} | pq:[] | qp:[])"), "exhaustive", fuel=20)
    assert bad.status == "stuck"


def test_unknown_schedule():
    with pytest.raises(ValueError):
        run({}, TERM, "sideways")


def test_digest_is_stable():
    assert digest({"z": F(1)}, TERM) == digest({"z": F(1)}, TERM)
    assert digest({"z": F(1)}, TERM) != digest({"z": F(2)}, TERM)
    assert len(digest({}, TERM)) == 12


def test_timers_above_bound_are_collapsed_in_exhaustive_runs():
    # a loop that only delays would otherwise grow its timer forever
    loop = P("def X(; p) = delay(1).X(; p) in set(z).X(; p)")
    rep = run({}, loop, "exhaustive", fuel=30)
    assert rep.status in ("explored", "fuel") and rep.states < 20


def test_queue_and_par_shapes():
    q = Queue("p", "q", (("a", NatV(1)),))
    assert time_pass(Par(q, TERM), 4) == Par(q, TERM)
    assert isinstance(P("new (p q) 0"), Scope)
