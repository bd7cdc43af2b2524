import pytest
from hypothesis import given, seed, settings

import strategies as gen
from toast import timelogic as tl
from toast.surface import parse_type as T
from toast.typesys import (
    END,
    NAT,
    Choice,
    Delegate,
    Rec,
    Var,
    bound_names,
    dual,
    free_names,
    head,
    is_contractive,
    is_end,
    option,
    substitute,
    type_clocks,
    type_max_constant,
    unfold,
    unfold_equiv,
)

SEED = 5
SETTINGS = settings(max_examples=400, deadline=None, database=None)


def tree_equal(a, b, depth):
    """Compare the infinite unfoldings of ``a`` and ``b`` down to ``depth`` choices."""
    a, b = head(a), head(b)
    if depth == 0:
        return True
    if type(a) is not type(b):
        return False
    if isinstance(a, Var):
        return a == b
    if a == END:
        return True
    ka = {(o.direction, o.label): o for o in a.options}
    kb = {(o.direction, o.label): o for o in b.options}
    if ka.keys() != kb.keys():
        return False
    for k, o in ka.items():
        p = kb[k]
        if (o.guard, o.resets, o.payload) != (p.guard, p.resets, p.payload):
            return False
        if not tree_equal(o.cont, p.cont, depth - 1):
            return False
    return True


def test_dual_flips_directions_only():
    s = T("rec a . {!ping<nat>(x<=3, {x}).a, ?stop.end}")
    assert dual(s) == T("rec a . {?ping<nat>(x<=3, {x}).a, !stop.end}")


def test_substitute_avoids_capture():
    s = Rec("b", Choice((option("!", "l", cont=Var("a")), option("?", "m", cont=Var("b")))))
    out = substitute(s, "a", Var("b"))
    assert isinstance(out, Rec) and out.var != "b"
    assert free_names(out) == {"b"}


def test_substitute_respects_shadowing():
    s = T("rec a . !l.a")
    assert substitute(s, "a", END) == s


def test_unfold_and_head():
    s = T("rec a . !l.a")
    assert unfold(s) == T("!l.rec a . !l.a")
    assert head(s) == unfold(s)
    with pytest.raises(TypeError):
        unfold(END)


def test_names_and_measures():
    s = T("rec a . {!l(x<3, {x}).a, ?m(y>5).end}")
    assert bound_names(s) == {"a"} and free_names(s) == frozenset()
    assert type_clocks(s) == {"x", "y"}
    assert type_max_constant(s) == 5
    # the throttling client has constants 3 only
    assert type_max_constant(T("rec a0 . !msg(x>=3, {x}).rec a1 . {?ack(x<3, {x}).a0, !msg(x>=3, {x}).{?ack(x<3, {x}).a1, !tout(x>=3).end}}")) == 3


def test_contractive():
    assert is_contractive(T("rec a . !l.a"))
    assert not is_contractive(Rec("a", Var("a")))
    assert not is_contractive(Rec("a", Rec("b", Var("a"))))


def test_delegated_payload_measures():
    inner = T("!x(y<7).end")
    s = Choice((option("!", "d", Delegate(tl.TRUE, inner)),))
    assert type_max_constant(s) == 7
    assert str(dual(s)).startswith("?d<")


def test_is_end():
    assert is_end(END)
    assert not is_end(T("!l.end"))


def test_choice_invariants():
    with pytest.raises(ValueError):
        Choice(())
    with pytest.raises(ValueError):
        Choice((option("!", "l"), option("?", "l")))
    with pytest.raises(ValueError):
        option("#", "l")
    assert option("!", "l", NAT).payload == NAT


@seed(SEED)
@SETTINGS
@given(gen.closed_types, gen.closed_types)
def test_unfold_equiv_matches_tree_oracle(s, t):
    # generated types have few states, so depth 8 separates any two that differ
    assert unfold_equiv(s, t) == tree_equal(s, t, 8)


@seed(SEED)
@SETTINGS
@given(gen.closed_types)
def test_dual_preserves_shape(s):
    assert type_clocks(dual(s)) == type_clocks(s)
    assert type_max_constant(dual(s)) == type_max_constant(s)
    assert unfold_equiv(dual(s), dual(s))
    if isinstance(s, Rec):
        assert unfold_equiv(dual(unfold(s)), dual(s))
