from fractions import Fraction as F

import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

import strategies as gen
from toast import timelogic as tl
from toast.surface import parse_constraint as C

SEED = 7
SETTINGS = settings(max_examples=300, deadline=None, database=None)


def V(**kw):
    return tl.Valuation({k: F(v) for k, v in kw.items()})


def quarter_grid(top):
    return [F(k, 4) for k in range(4 * top + 1)]


# -- valuations ---------------------------------------------------------------


def test_floats_rejected():
    with pytest.raises(TypeError):
        tl.as_time(0.5)


def test_valuation_ops():
    nu = V(x=1, y=F(1, 2))
    assert nu.advance(F(3, 2)) == V(x=F(5, 2), y=2)
    assert nu.reset({"x"}) == V(x=0, y=F(1, 2))
    with pytest.raises(KeyError):
        nu.reset({"z"})


# -- sat against the zone normal form ----------------------------------------


@seed(SEED)
@SETTINGS
@given(gen.constraints, gen.valuations)
def test_sat_agrees_with_zones(d, nu):
    assert tl.sat(nu, d) == tl.normalize(d, gen.CLOCKS).contains(nu)


@seed(SEED)
@SETTINGS
@given(gen.constraints, gen.constraints)
def test_entails_against_sampling(a, b):
    # entailment is decided symbolically; a counterexample on the grid refutes it
    grid = quarter_grid(5)
    counter = any(
        tl.sat(nu, a) and not tl.sat(nu, b)
        for nu in (V(x=x, y=y) for x in grid for y in grid)
    )
    if counter:
        assert not tl.entails(a, b)
    if tl.entails(a, b):
        assert not counter


@seed(SEED)
@SETTINGS
@given(gen.constraints)
def test_denormalize_preserves_meaning(d):
    back = tl.denormalize(tl.normalize(d, gen.CLOCKS))
    assert tl.equivalent(back, d)


# -- past and future ------------------------------------------------------------


def test_past_golden():
    # past of 3<x<5 is x<5, past of x>2 is true
    assert tl.past(C("3<x<5")) == C("x<5")
    assert tl.past(C("x>2")) == tl.TRUE


def test_past_of_equality_and_diagonal():
    assert tl.equivalent(tl.past(C("x=2")), C("x<=2"))
    # differences survive delay, so only the upper bound is lost
    assert tl.equivalent(tl.past(C("x-y>1 && x>2"), ("x", "y")), C("x-y>1"))
    assert tl.equivalent(tl.past(C("x-y>1 && x<4"), ("x", "y")), C("x-y>1 && x<4"))


def test_past_two_clocks_derived():
    # grid oracle: past(x=3 && y=5) is the diagonal line below (3,5)
    got = tl.past(C("x=3 && y=5"), ("x", "y"))
    assert tl.equivalent(got, C("y-x=2 && x<=3"))


def test_constraint_reset_derived():
    # sample points of 3<x<5 && x-y=2 put y in (1,3); resetting x pins it
    got = tl.constraint_reset(C("3<x<5 && x-y=2"), {"x"})
    assert tl.equivalent(got, C("x=0 && 1<y<3"))


@seed(SEED)
@SETTINGS
@given(gen.constraints, gen.valuations)
def test_future_against_sampling(d, nu):
    # eighth steps reach the open regions between quarter-grid points
    f = tl.future(d, gen.CLOCKS)
    low = min(nu.values())
    back = [F(k, 8) for k in range(int(low * 8) + 1)]
    oracle = any(tl.sat({c: v - t for c, v in nu.items()}, d) for t in back)
    assert tl.sat(nu, f) == oracle


def test_constraint_reset():
    assert tl.equivalent(tl.constraint_reset(C("x>3"), {"x"}), C("x=0"))
    assert tl.equivalent(tl.constraint_reset(C("x>3 && y<2"), {"x"}), C("x=0 && y<2"))
    assert not tl.satisfiable(tl.constraint_reset(tl.FALSE, {"x"}))


# -- intervals ------------------------------------------------------------------


interval_sets = st.lists(
    st.tuples(st.integers(0, 8), st.integers(0, 4), st.booleans(), st.booleans(), st.booleans()),
    max_size=3,
).map(
    lambda xs: tl.IntervalSet(
        tl.Interval(F(lo, 2), lc, None if inf else F(lo + w, 2), hc) for lo, w, lc, hc, inf in xs
    )
)


@seed(SEED)
@SETTINGS
@given(interval_sets, interval_sets)
def test_interval_algebra_pointwise(a, b):
    for t in quarter_grid(6):
        assert a.union(b).contains(t) == (a.contains(t) or b.contains(t))
        assert a.intersect(b).contains(t) == (a.contains(t) and b.contains(t))
        assert a.complement().contains(t) == (not a.contains(t))
        assert a.minus(b).contains(t) == (a.contains(t) and not b.contains(t))


@seed(SEED)
@SETTINGS
@given(gen.constraints, gen.valuations)
def test_delay_set_exact(d, nu):
    nu = tl.Valuation(nu)
    ds = tl.delay_set(nu, d)
    for t in quarter_grid(7):
        assert ds.contains(t) == tl.sat(nu.advance(t), d)


def test_delay_set_examples():
    assert tl.delay_set(V(x=0), C("x<3")) == tl.IntervalSet.below(3, False)
    assert tl.delay_set(V(x=1), C("x>=3")) == tl.IntervalSet.above(2, True)
    assert tl.delay_set(V(x=4), C("x<=3")) == tl.IntervalSet()


# -- regions ----------------------------------------------------------------------


def test_representative_delays():
    assert tl.representative_delays(C("w<=1"), 2) == [0, F(1, 2), 1]
    assert tl.representative_delays(tl.TRUE, 0) == [0, F(1, 2), 1]
    with pytest.raises(ValueError):
        tl.representative_delays(C("x<1 && y<1"), 1)


def test_region_canon_examples():
    assert tl.region_canon({"x": F(1, 3), "y": F(2, 3)}, 2) == {"x": F(1, 3), "y": F(2, 3)}
    assert tl.region_canon({"x": F(1, 10), "y": F(9, 10)}, 2) == {"x": F(1, 3), "y": F(2, 3)}
    assert tl.region_canon({"x": F(7), "y": F(1, 2)}, 3) == {"x": 4, "y": F(1, 2)}


@seed(SEED)
@SETTINGS
@given(gen.constraints, gen.valuations)
def test_region_canon_preserves_sat(d, nu):
    M = tl.max_constant(d)
    nu = tl.Valuation(nu)
    diag = tl.has_diagonal(d)
    for t in (0, F(1, 8), F(5, 8), 3):
        assert tl.sat(tl.region_canon(nu.advance(t), M, diag), d) == tl.sat(nu.advance(t), d)


def test_plain_canon_forgets_differences():
    nu = {"x": F(1, 2), "y": F(1, 4)}
    d = C("x-y>0")
    assert tl.has_diagonal(d) and not tl.has_diagonal(C("x>0 && !(y=1)"))
    assert not tl.sat(tl.region_canon(nu, 0), d)
    assert tl.sat(tl.region_canon(nu, 0, diagonal=True), d)


def test_diagonal_canon_is_bounded():
    # far-apart clocks shrink to gaps just over M
    got = tl.region_canon({"x": F(1001, 2), "y": F(1, 4)}, 2, diagonal=True)
    assert got["y"] == F(1, 3) and 2 < got["x"] - got["y"] <= 3
    assert tl.region_canon({"x": F(7), "y": F(15, 2)}, 2, diagonal=True) == {"x": 3, "y": F(7, 2)}


@seed(SEED)
@SETTINGS
@given(gen.valuations, st.integers(0, 3))
def test_delay_candidates_visit_every_region(nu, M):
    nu = tl.Valuation(nu)
    cands = tl.delay_candidates(nu.values(), M)
    seen = {tuple(sorted(tl.region_canon(nu.advance(c), M).items())) for c in cands}
    for k in range(8 * (M + 2)):
        t = F(k, 8)
        assert tuple(sorted(tl.region_canon(nu.advance(t), M).items())) in seen
