from fractions import Fraction as F

import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

import strategies as gen
from conftest import load
from toast.semantics import (
    TAU,
    Configuration,
    DelayL,
    Message,
    QueuedConfig,
    RecvM,
    SendM,
    SessionEnv,
    can_progress,
    canon_system,
    cfg_actions,
    compatible,
    config,
    enabling_delays,
    future_enabled,
    initial_system,
    progress_explore,
    qc_step,
    session_step,
    sys_steps,
    time_ok,
)
from toast.surface import parse_type as T
from toast.timelogic import Valuation, sat
from toast.typesys import NAT, STRING, dual, head

SEED = 13


def cfg(text, **nu):
    return config(T(text), {k: F(v) for k, v in nu.items()})


# -- configurations ---------------------------------------------------------------


def test_actions_respect_guards_and_resets():
    c = cfg("{!a(x<3, {x}).end, ?b(x>=3).end}", x=1)
    [(lab, c2)] = cfg_actions(c)
    assert lab == SendM(Message("a")) and c2.nu["x"] == 0
    [(lab, _)] = cfg_actions(cfg("{!a(x<3, {x}).end, ?b(x>=3).end}", x=3))
    assert lab == RecvM(Message("b"))


def test_actions_unfold_recursion():
    [(lab, c2)] = cfg_actions(cfg("rec a . !tick(x<=1, {x}).a", x=0))
    assert str(lab) == "!tick" and c2.type == T("rec a . !tick(x<=1, {x}).a")


def test_enabling_delays_and_future_enabled():
    c = cfg("{!a(x<3).end, ?b(x>4).end}", x=1)
    assert enabling_delays(c, "!").contains(F(1)) and not enabling_delays(c, "!").contains(2)
    assert future_enabled(c) == "both"
    assert future_enabled(cfg("!a(x<3).end", x=5)) == "none"
    assert future_enabled(cfg("end")) == "none"


def test_messages_match_on_label_and_sort():
    assert Message("a", NAT).matches(Message("a", NAT))
    assert not Message("a", NAT).matches(Message("a", STRING))
    assert str(Message("a", NAT)) == "a<nat>"
    with pytest.raises(ValueError):
        Message("")
    with pytest.raises(ValueError):
        DelayL(-1)


# -- queued configurations -------------------------------------------------------------


def test_persistency_blocks_losing_every_action():
    q = QueuedConfig(cfg("!a(x<3).end"))
    assert qc_step(q, DelayL(2)) is not None
    assert qc_step(q, DelayL(3)) is None
    # nothing was ever enabled, so there is nothing to lose
    assert qc_step(QueuedConfig(cfg("!a(x<3).end", x=4)), DelayL(10)) is not None


def test_urgency_on_receivable_head():
    q = QueuedConfig(cfg("?a(x>1).end"), (Message("a"),))
    assert qc_step(q, DelayL(1)) is not None
    assert qc_step(q, DelayL(F(3, 2))) is None


def test_tau_reads_queue_head():
    q = QueuedConfig(cfg("?a.end"), (Message("a"), Message("b")))
    after = qc_step(q, TAU)
    assert after.queue == (Message("b"),)
    assert qc_step(QueuedConfig(cfg("?a.end")), TAU) is None
    assert qc_step(QueuedConfig(cfg("?a.end"), (Message("b"),)), TAU) is None


def test_receive_label_enqueues():
    q = QueuedConfig(cfg("end"))
    assert qc_step(q, RecvM(Message("z"))).queue == (Message("z"),)
    with pytest.raises(TypeError):
        qc_step(q, "delay")


@st.composite
def queued(draw):
    s = draw(gen.closed_types)
    nu = draw(gen.valuations)
    c = config(s, nu)
    msgs = draw(st.lists(st.sampled_from(gen.LABELS), max_size=1))
    return QueuedConfig(c, tuple(Message(m) for m in msgs))


@seed(SEED)
@settings(max_examples=400, deadline=None, database=None)
@given(queued(), gen.amounts)
def test_time_ok_against_sampling(q, t):
    # oracle: persistency at t and urgency below t, both checked pointwise on eighths
    c = q.cfg
    opts = getattr(head(c.type), "options", ())

    def enabled(d, keep=lambda o: True):
        nu = c.nu.advance(d)
        return any(sat(nu, o.guard) for o in opts if keep(o))

    horizon = [F(k, 8) for k in range(8 * 12)]
    persistent = not any(enabled(d) for d in horizon) or any(enabled(t + d) for d in horizon)
    urgent = False
    if q.queue:
        m = q.queue[0]
        readable = lambda o: o.direction == "?" and m.matches(Message(o.label, o.payload))
        urgent = any(enabled(F(k, 8), readable) for k in range(int(t * 8)))
    assert time_ok(q, t) == (persistent and not urgent)


# -- systems and compatibility ------------------------------------------------------------


def test_initial_system_is_compatible():
    s = initial_system(T("!a(x<3).?b.end"))
    assert compatible(s.left, s.right)


def test_compatibility_consumes_queues():
    a = QueuedConfig(cfg("?b.end"), (Message("b"),))
    b = QueuedConfig(cfg("end"))
    assert compatible(a, b)
    assert not compatible(a, QueuedConfig(cfg("end"), (Message("c"),)))
    # valuations must agree once queues drain
    assert not compatible(QueuedConfig(cfg("end", x=1)), QueuedConfig(cfg("end", x=2)))


def test_system_steps_and_progress():
    s = initial_system(T("!a(x<3).end"))
    steps = sys_steps(s, [F(1)])
    assert [side for side, _, _ in steps] == ["left", "joint"]
    assert can_progress(s, 3)
    done = steps[0][2]
    assert done.right.queue == (Message("a"),)


def test_canon_system_collapses_large_clocks():
    s = initial_system(T("!a(x<3).end"))
    big = canon_system(
        type(s)(
            QueuedConfig(Configuration(Valuation({"x": F(40)}), s.left.cfg.type)),
            QueuedConfig(Configuration(Valuation({"x": F(41, 2)}), s.right.cfg.type)),
        ),
        3,
    )
    assert big.left.cfg.nu["x"] == 4 and big.right.cfg.nu["x"] == 4


def test_progress_reports():
    assert progress_explore(load("pingpong.toast").types["pingpong"], 20).status == "ok"
    assert progress_explore(load("junk.toast").types["junk"], 20).status == "rejected"
    rnd = progress_explore(load("pingpong.toast").types["pingpong"], 20, mode="random", seed=4)
    assert rnd.status == "ok" and rnd.depth <= 20
    with pytest.raises(ValueError):
        progress_explore(T("end"), 0)
    with pytest.raises(ValueError):
        progress_explore(T("end"), 5, mode="dfs")


def test_progress_json_shape():
    rep = progress_explore(load("unsafe_stuck.toast").types["s1"], 40, override_wf=True)
    js = rep.to_json()
    assert js["status"] == "stuck"
    assert js["stuck"][0]["trace"][0].startswith("STEP 1: ")


# -- session environments ----------------------------------------------------------------


def test_session_env_basics():
    d = SessionEnv.for_scope("p", T("!a.end"), None, "q", T("?a.end"), None)
    assert d.role_names() == {"p", "q"} and d.queue_keys() == {("p", "q"), ("q", "p")}
    assert d.advance(F(1, 2)).get("p").nu == d.get("p").nu
    with pytest.raises(ValueError):
        d.union(d)
    assert d.without_role("p").role_names() == {"q"}
    assert SessionEnv().is_empty() and str(SessionEnv()) == "."


def test_session_step_send_then_read():
    d = SessionEnv.for_scope("p", T("!a.end"), None, "q", T("?a.end"), None)
    [sent] = session_step(d)
    assert sent.queue(("p", "q")) == (Message("a"),)
    [read] = session_step(sent)
    assert read.queue(("p", "q")) == () and read.get("q").type == T("end")
    assert session_step(read) == []


def test_session_step_with_clock():
    S = T("!a(x>2).end")
    d = SessionEnv.for_scope("p", S, None, "q", dual(S), None)
    assert session_step(d) == []
    assert len(session_step(d.advance(3))) == 1
