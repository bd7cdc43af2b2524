"""Clocks, valuations and the clock-constraint algebra.

Constraints follow the small grammar

    true | x>n | x=n | x-y>n | x-y=n | !d | d && d

and everything else (``x<n``, ``x>=n``, intervals, disjunction) is sugar
built from those nodes.  Symbolic questions (satisfiability, entailment,
reset, past) go through a DNF of canonical difference-bound matrices with
exact rational bounds.  Questions about a single valuation moving forward
in time go through :class:`IntervalSet`, which is exact and cheap.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping
import dataclasses
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
import math

Time = Fraction


def as_time(v) -> Fraction:
    """Coerce ints, strings like ``"3/2"`` and Fractions to an exact time."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        raise TypeError("floats are not accepted as time values")
    return Fraction(v)


# ---------------------------------------------------------------------------
# valuations


class Valuation(Mapping):
    """An immutable total map from clock names to non-negative rationals."""

    __slots__ = ("_items", "_hash")

    def __init__(self, assignment: Mapping | Iterable = ()):
        d = dict(assignment)
        for k, v in d.items():
            v = as_time(v)
            if v < 0:
                raise ValueError(f"negative value for clock {k}: {v}")
            d[k] = v
        self._items = tuple(sorted(d.items()))
        self._hash = None

    @classmethod
    def zero(cls, clocks: Iterable[str]) -> "Valuation":
        return cls((c, 0) for c in clocks)

    def __getitem__(self, key):
        for k, v in self._items:
            if k == key:
                return v
        raise KeyError(key)

    def __iter__(self) -> Iterator[str]:
        return (k for k, _ in self._items)

    def __len__(self):
        return len(self._items)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._items)
        return self._hash

    def __eq__(self, other):
        if isinstance(other, Valuation):
            return self._items == other._items
        return NotImplemented

    def __repr__(self):
        inner = ", ".join(f"{k}:{fmt_time(v)}" for k, v in self._items)
        return "{" + inner + "}"

    def advance(self, t) -> "Valuation":
        t = as_time(t)
        if t < 0:
            raise ValueError("cannot advance by a negative delay")
        if t == 0:
            return self
        return Valuation((k, v + t) for k, v in self._items)

    def reset(self, clocks: Iterable[str]) -> "Valuation":
        clocks = set(clocks)
        unknown = clocks - set(self)
        if unknown:
            raise KeyError(f"unknown clock(s) in reset: {sorted(unknown)}")
        if not clocks:
            return self
        return Valuation((k, Fraction(0) if k in clocks else v) for k, v in self._items)

    def extend(self, clocks: Iterable[str]) -> "Valuation":
        """Add missing clocks at value 0."""
        d = dict(self._items)
        for c in clocks:
            d.setdefault(c, Fraction(0))
        return Valuation(d)

    def items(self):
        return self._items


def val_advance(nu: Valuation, t) -> Valuation:
    return nu.advance(t)


def val_reset(nu: Valuation, clocks: Iterable[str]) -> Valuation:
    return nu.reset(clocks)


def fmt_time(v: Fraction) -> str:
    v = as_time(v)
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


# ---------------------------------------------------------------------------
# constraint syntax


class Constraint:
    __slots__ = ()

    def __and__(self, other: "Constraint") -> "Constraint":
        return And(self, other)

    def __invert__(self) -> "Constraint":
        return Not(self)

    def __str__(self):
        return show(self)


@dataclass(frozen=True, slots=True)
class TrueC(Constraint):
    pass


@dataclass(frozen=True, slots=True)
class Gt(Constraint):
    x: str
    n: int


@dataclass(frozen=True, slots=True)
class Eq(Constraint):
    x: str
    n: int


@dataclass(frozen=True, slots=True)
class DiffGt(Constraint):
    x: str
    y: str
    n: int


@dataclass(frozen=True, slots=True)
class DiffEq(Constraint):
    x: str
    y: str
    n: int


@dataclass(frozen=True, slots=True)
class Not(Constraint):
    arg: Constraint


@dataclass(frozen=True, slots=True)
class And(Constraint):
    left: Constraint
    right: Constraint


TRUE = TrueC()
FALSE = Not(TRUE)


# sugar; each helper fixes the exact tree the parser produces for it
def lt(x: str, n: int) -> Constraint:
    return And(Not(Gt(x, n)), Not(Eq(x, n)))


def le(x: str, n: int) -> Constraint:
    return Not(Gt(x, n))


def ge(x: str, n: int) -> Constraint:
    return Not(lt(x, n))


def diff_lt(x: str, y: str, n: int) -> Constraint:
    return And(Not(DiffGt(x, y, n)), Not(DiffEq(x, y, n)))


def diff_le(x: str, y: str, n: int) -> Constraint:
    return Not(DiffGt(x, y, n))


def diff_ge(x: str, y: str, n: int) -> Constraint:
    return Not(diff_lt(x, y, n))


def or_(a: Constraint, b: Constraint) -> Constraint:
    return Not(And(Not(a), Not(b)))


def conj(items: Iterable[Constraint]) -> Constraint:
    out = None
    for c in items:
        out = c if out is None else And(out, c)
    return TRUE if out is None else out


def disj(items: Iterable[Constraint]) -> Constraint:
    out = None
    for c in items:
        out = c if out is None else or_(out, c)
    return FALSE if out is None else out


def clocks_of(d: Constraint) -> frozenset[str]:
    match d:
        case TrueC():
            return frozenset()
        case Gt(x, _) | Eq(x, _):
            return frozenset((x,))
        case DiffGt(x, y, _) | DiffEq(x, y, _):
            return frozenset((x, y))
        case Not(a):
            return clocks_of(a)
        case And(a, b):
            return clocks_of(a) | clocks_of(b)
    raise TypeError(f"not a constraint: {d!r}")


def max_constant(obj) -> int:
    """Largest natural constant in a constraint (or anything with ``max_constant``)."""
    if isinstance(obj, Constraint):
        match obj:
            case TrueC():
                return 0
            case Gt(_, n) | Eq(_, n) | DiffGt(_, _, n) | DiffEq(_, _, n):
                return n
            case Not(a):
                return max_constant(a)
            case And(a, b):
                return max(max_constant(a), max_constant(b))
    if hasattr(obj, "max_constant"):
        return obj.max_constant()
    raise TypeError(f"no constants to measure in {type(obj).__name__}")


def sat(nu: Mapping, d: Constraint) -> bool:
    match d:
        case TrueC():
            return True
        case Gt(x, n):
            return nu[x] > n
        case Eq(x, n):
            return nu[x] == n
        case DiffGt(x, y, n):
            return nu[x] - nu[y] > n
        case DiffEq(x, y, n):
            return nu[x] - nu[y] == n
        case Not(a):
            return not sat(nu, a)
        case And(a, b):
            return sat(nu, a) and sat(nu, b)
    raise TypeError(f"not a constraint: {d!r}")


# ---------------------------------------------------------------------------
# printing (the parser in ``surface`` reads exactly this syntax back)


def _atomic(d: Constraint) -> str | None:
    """Render ``d`` as a single atom or sugared atom, if it is one."""
    match d:
        case TrueC():
            return "true"
        case Not(TrueC()):
            return "false"
        case Gt(x, n):
            return f"{x}>{n}"
        case Eq(x, n):
            return f"{x}={n}"
        case DiffGt(x, y, n):
            return f"{x}-{y}>{n}"
        case DiffEq(x, y, n):
            return f"{x}-{y}={n}"
        case And(Not(Gt(x, n)), Not(Eq(x2, n2))) if (x, n) == (x2, n2):
            return f"{x}<{n}"
        case And(Not(DiffGt(x, y, n)), Not(DiffEq(x2, y2, n2))) if (x, y, n) == (x2, y2, n2):
            return f"{x}-{y}<{n}"
        case Not(Gt(x, n)):
            return f"{x}<={n}"
        case Not(DiffGt(x, y, n)):
            return f"{x}-{y}<={n}"
        case Not(And(Not(Gt(x, n)), Not(Eq(x2, n2)))) if (x, n) == (x2, n2):
            return f"{x}>={n}"
        case Not(And(Not(DiffGt(x, y, n)), Not(DiffEq(x2, y2, n2)))) if (x, y, n) == (x2, y2, n2):
            return f"{x}-{y}>={n}"
        case Not(Eq(x, n)):
            return f"{x}!={n}"
        case Not(DiffEq(x, y, n)):
            return f"{x}-{y}!={n}"
    return None


def show(d: Constraint, prec: int = 0) -> str:
    """Pretty-print with precedence: 0 = ``||`` level, 1 = ``&&`` level, 2 = unary."""
    a = _atomic(d)
    if a is not None:
        return a
    match d:
        case Not(And(Not(l), Not(r))):
            s = f"{show(l, 0)} || {show(r, 1)}"
            return s if prec == 0 else f"({s})"
        case And(l, r):
            s = f"{show(l, 1)} && {show(r, 2)}"
            return s if prec <= 1 else f"({s})"
        case Not(a):
            return f"!{show(a, 2)}"
    raise TypeError(f"not a constraint: {d!r}")


# ---------------------------------------------------------------------------
# difference-bound matrices

# A bound is (c, s): x_i - x_j < c when s == 0, <= c when s == 1.
# c is a Fraction or None for +infinity.
Bound = tuple
INF: Bound = (None, 0)
LE0: Bound = (Fraction(0), 1)


def _bmin(a: Bound, b: Bound) -> Bound:
    return a if _blt(a, b) else b


def _blt(a: Bound, b: Bound) -> bool:
    if a[0] is None:
        return False
    if b[0] is None:
        return True
    return a[0] < b[0] or (a[0] == b[0] and a[1] < b[1])


def _badd(a: Bound, b: Bound) -> Bound:
    if a[0] is None or b[0] is None:
        return INF
    return (a[0] + b[0], min(a[1], b[1]))


class Zone:
    """A canonical DBM over an ordered clock tuple; index 0 is the zero clock."""

    __slots__ = ("clocks", "m", "_hash")

    def __init__(self, clocks: tuple[str, ...], m: tuple[tuple[Bound, ...], ...]):
        self.clocks = clocks
        self.m = m
        self._hash = None

    def __eq__(self, other):
        return isinstance(other, Zone) and self.clocks == other.clocks and self.m == other.m

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.clocks, self.m))
        return self._hash

    def __repr__(self):
        return f"Zone({show(zone_to_constraint(self))})"

    @staticmethod
    def universe(clocks: tuple[str, ...]) -> "Zone":
        n = len(clocks) + 1
        m = [[INF] * n for _ in range(n)]
        for i in range(n):
            m[i][i] = LE0
            m[0][i] = LE0
        return Zone(clocks, tuple(map(tuple, m)))

    def index(self, x: str) -> int:
        return self.clocks.index(x) + 1

    def constrain(self, cons: Iterable[tuple[int, int, Bound]]) -> "Zone | None":
        m = [list(r) for r in self.m]
        for i, j, b in cons:
            m[i][j] = _bmin(m[i][j], b)
        return _close(self.clocks, m)

    def includes(self, other: "Zone") -> bool:
        n = len(self.m)
        return all(not _blt(self.m[i][j], other.m[i][j]) for i in range(n) for j in range(n))

    def intersect(self, other: "Zone") -> "Zone | None":
        n = len(self.m)
        m = [[_bmin(self.m[i][j], other.m[i][j]) for j in range(n)] for i in range(n)]
        return _close(self.clocks, m)

    def reset(self, clocks: Iterable[str]) -> "Zone":
        m = [list(r) for r in self.m]
        n = len(m)
        for x in clocks:
            k = self.index(x)
            for j in range(n):
                m[k][j] = m[0][j]
                m[j][k] = m[j][0]
            m[k][k] = LE0
        z = _close(self.clocks, m)
        assert z is not None
        return z

    def down(self) -> "Zone":
        m = [list(r) for r in self.m]
        n = len(m)
        for i in range(1, n):
            m[0][i] = LE0
            for j in range(1, n):
                if _blt(m[j][i], m[0][i]):
                    m[0][i] = m[j][i]
        z = _close(self.clocks, m)
        assert z is not None
        return z

    def up(self) -> "Zone":
        m = [list(r) for r in self.m]
        for i in range(1, len(m)):
            m[i][0] = INF
        z = _close(self.clocks, m)
        assert z is not None
        return z

    def contains(self, nu: Mapping) -> bool:
        vals = [Fraction(0)] + [as_time(nu[c]) for c in self.clocks]
        n = len(vals)
        for i in range(n):
            for j in range(n):
                c, s = self.m[i][j]
                if c is None:
                    continue
                d = vals[i] - vals[j]
                if d > c or (d == c and s == 0):
                    return False
        return True

    def witness(self) -> dict[str, Fraction]:
        """Some point of the zone (used for diagnostics)."""
        z = self
        vals = {}
        for i in range(1, len(self.m)):
            lo = -z.m[0][i][0]
            hi = z.m[i][0][0]
            tries = [lo] + ([(lo + hi) / 2] if hi is not None else []) + [lo + Fraction(1, 2), lo + 1]
            for v in tries:
                z2 = z.constrain([(i, 0, (v, 1)), (0, i, (-v, 1))])
                if z2 is not None:
                    z, vals[self.clocks[i - 1]] = z2, v
                    break
            else:  # pragma: no cover - a canonical zone always has a point
                raise AssertionError("no witness found")
        return vals


def _close(clocks, m) -> Zone | None:
    n = len(m)
    for k in range(n):
        mk = m[k]
        for i in range(n):
            mik = m[i][k]
            if mik[0] is None:
                continue
            mi = m[i]
            for j in range(n):
                mkj = mk[j]
                if mkj[0] is None:
                    continue
                cand = (mik[0] + mkj[0], min(mik[1], mkj[1]))
                if _blt(cand, mi[j]):
                    mi[j] = cand
        if _blt(m[k][k], LE0):
            return None
    for i in range(n):
        if _blt(m[i][i], LE0):
            return None
    return Zone(clocks, tuple(map(tuple, m)))


# ---------------------------------------------------------------------------
# normalization to DNF


class ZoneDNF:
    """A finite union of canonical zones over a fixed clock tuple."""

    __slots__ = ("clocks", "zones")

    def __init__(self, clocks: tuple[str, ...], zones: Iterable[Zone]):
        self.clocks = clocks
        self.zones = _prune(list(zones))

    def is_empty(self) -> bool:
        return not self.zones

    def contains(self, nu: Mapping) -> bool:
        return any(z.contains(nu) for z in self.zones)

    def __repr__(self):
        return f"ZoneDNF({self.zones!r})"


def _prune(zones: list[Zone]) -> list[Zone]:
    out: list[Zone] = []
    for z in sorted(set(zones), key=lambda z: repr(z.m)):
        if any(o.includes(z) for o in out):
            continue
        out = [o for o in out if not z.includes(o)]
        out.append(z)
    return out


def _atom_zones(u: Zone, d: Constraint, positive: bool) -> list[Zone]:
    F = Fraction
    match d:
        case Gt(x, n):
            i = u.index(x)
            cons = [[(0, i, (F(-n), 0))]] if positive else [[(i, 0, (F(n), 1))]]
        case Eq(x, n):
            i = u.index(x)
            if positive:
                cons = [[(i, 0, (F(n), 1)), (0, i, (F(-n), 1))]]
            else:
                cons = [[(i, 0, (F(n), 0))], [(0, i, (F(-n), 0))]]
        case DiffGt(x, y, n):
            i, j = u.index(x), u.index(y)
            cons = [[(j, i, (F(-n), 0))]] if positive else [[(i, j, (F(n), 1))]]
        case DiffEq(x, y, n):
            i, j = u.index(x), u.index(y)
            if positive:
                cons = [[(i, j, (F(n), 1)), (j, i, (F(-n), 1))]]
            else:
                cons = [[(i, j, (F(n), 0))], [(j, i, (F(-n), 0))]]
        case _:
            raise TypeError(d)
    return [z for z in (u.constrain(c) for c in cons) if z is not None]


def _dnf(u: Zone, d: Constraint, positive: bool) -> list[Zone]:
    match d:
        case TrueC():
            return [u] if positive else []
        case Not(a):
            return _dnf(u, a, not positive)
        case And(a, b):
            if positive:
                left = _dnf(u, a, True)
                if not left:
                    return []
                right = _dnf(u, b, True)
                out = []
                for z1, z2 in product(left, right):
                    z = z1.intersect(z2)
                    if z is not None:
                        out.append(z)
                return _prune(out)
            return _prune(_dnf(u, a, False) + _dnf(u, b, False))
        case _:
            return _atom_zones(u, d, positive)


@lru_cache(maxsize=65536)
def _normalize_cached(d: Constraint, clocks: tuple[str, ...]) -> ZoneDNF:
    u = Zone.universe(clocks)
    return ZoneDNF(clocks, _dnf(u, d, True))


def normalize(d: Constraint, clocks: Iterable[str] | None = None) -> ZoneDNF:
    cs = set(clocks_of(d))
    if clocks is not None:
        cs |= set(clocks)
    return _normalize_cached(d, tuple(sorted(cs)))


def satisfiable(d: Constraint) -> bool:
    return not normalize(d).is_empty()


def entails(d1: Constraint, d2: Constraint) -> bool:
    return not satisfiable(And(d1, Not(d2)))


def equivalent(d1: Constraint, d2: Constraint) -> bool:
    return entails(d1, d2) and entails(d2, d1)


# ---------------------------------------------------------------------------
# back from zones to constraints


def _bound_atom(clocks, i: int, j: int, b: Bound) -> Constraint:
    c, strict = b[0], b[1] == 0
    assert c is not None and c.denominator == 1
    c = int(c)
    if j == 0:
        x = clocks[i - 1]
        return lt(x, c) if strict else le(x, c)
    if i == 0:
        x = clocks[j - 1]
        # -x < c  means  x > -c
        return Gt(x, -c) if strict else ge(x, -c)
    x, y = clocks[i - 1], clocks[j - 1]
    if c >= 0 and not (c == 0 and strict):
        return diff_lt(x, y, c) if strict else diff_le(x, y, c)
    # x - y < c with c <= 0  is  y - x > -c
    return DiffGt(y, x, -c) if strict else diff_ge(y, x, -c)


def _trivial(i: int, j: int, b: Bound) -> bool:
    if b[0] is None or i == j:
        return True
    return i == 0 and b == LE0


def zone_to_constraint(z: Zone) -> Constraint:
    """A small conjunction of atoms denoting exactly ``z``."""
    n = len(z.m)
    cands = [(i, j, z.m[i][j]) for i in range(n) for j in range(n) if not _trivial(i, j, z.m[i][j])]

    # drop diagonal bounds first, then later clocks before earlier ones
    def order(c):
        i, j, _ = c
        diag = i != 0 and j != 0
        return (not diag, -(max(i, j)), i, j)

    kept = list(cands)
    for c in sorted(cands, key=order):
        trial = [k for k in kept if k != c]
        z2 = Zone.universe(z.clocks).constrain(trial)
        if z2 == z:
            kept = trial
    kept.sort(key=lambda c: (c[0] != 0 and c[1] != 0, max(c[0], c[1]), min(c[0], c[1]), c[1] == 0))
    atoms: list[Constraint] = []
    used = set()
    for a in kept:
        if a in used:
            continue
        i, j, b = a
        twin = next((k for k in kept if k[0] == j and k[1] == i and k not in used), None)
        if twin is not None and b[1] == 1 and twin[2][1] == 1 and twin[2][0] == -b[0]:
            used.add(twin)
            used.add(a)
            c = int(b[0])
            if j == 0:
                atoms.append(Eq(z.clocks[i - 1], c))
            elif i == 0:
                atoms.append(Eq(z.clocks[j - 1], -c))
            elif c >= 0:
                atoms.append(DiffEq(z.clocks[i - 1], z.clocks[j - 1], c))
            else:
                atoms.append(DiffEq(z.clocks[j - 1], z.clocks[i - 1], -c))
            continue
        used.add(a)
        if j == 0 and b == LE0:
            atoms.append(Eq(z.clocks[i - 1], 0))
            continue
        atoms.append(_bound_atom(z.clocks, i, j, b))
    return conj(atoms)


def denormalize(dnf: ZoneDNF) -> Constraint:
    return disj(zone_to_constraint(z) for z in dnf.zones)


def _zonewise(d: Constraint, f, clocks: Iterable[str] | None = None) -> Constraint:
    dnf = normalize(d, clocks)
    return denormalize(ZoneDNF(dnf.clocks, [f(z) for z in dnf.zones]))


def constraint_reset(d: Constraint, clocks: Iterable[str]) -> Constraint:
    """Strongest constraint holding after resetting ``clocks`` from any model of ``d``."""
    clocks = tuple(sorted(set(clocks)))
    if not clocks:
        return d
    dnf = normalize(d, clocks)
    return denormalize(ZoneDNF(dnf.clocks, [z.reset(clocks) for z in dnf.zones]))


def past(d: Constraint, clocks: Iterable[str] | None = None) -> Constraint:
    """The weakest constraint whose models reach ``d`` by letting time pass."""
    return _zonewise(d, Zone.down, clocks)


def future(d: Constraint, clocks: Iterable[str] | None = None) -> Constraint:
    """Every valuation reachable from a model of ``d`` by letting time pass.

    Clocks absent from ``d`` still advance, so pass the full clock set when
    the result is to be combined with constraints on other clocks.
    """
    return _zonewise(d, Zone.up, clocks)


def simplify(d: Constraint) -> Constraint:
    return _zonewise(d, lambda z: z)


# ---------------------------------------------------------------------------
# exact sets of delays


@dataclass(frozen=True)
class Interval:
    lo: Fraction
    lo_closed: bool
    hi: Fraction | None  # None is +infinity
    hi_closed: bool

    def contains(self, t: Fraction) -> bool:
        if t < self.lo or (t == self.lo and not self.lo_closed):
            return False
        if self.hi is None:
            return True
        return t < self.hi or (t == self.hi and self.hi_closed)

    def __str__(self):
        lo = ("[" if self.lo_closed else "(") + fmt_time(self.lo)
        hi = "inf)" if self.hi is None else fmt_time(self.hi) + ("]" if self.hi_closed else ")")
        return f"{lo}, {hi}"


class IntervalSet:
    """A finite union of disjoint, sorted intervals of non-negative rationals."""

    __slots__ = ("parts",)

    def __init__(self, parts: Iterable[Interval] = ()):
        self.parts = _merge(parts)

    @classmethod
    def everything(cls) -> "IntervalSet":
        return cls([Interval(Fraction(0), True, None, False)])

    @classmethod
    def point(cls, t) -> "IntervalSet":
        t = as_time(t)
        return cls([Interval(t, True, t, True)]) if t >= 0 else cls()

    @classmethod
    def above(cls, t, closed: bool) -> "IntervalSet":
        """``{s >= 0 : s > t}`` (or ``>=`` when closed)."""
        t = as_time(t)
        if t < 0:
            return cls.everything()
        return cls([Interval(t, closed, None, False)])

    @classmethod
    def below(cls, t, closed: bool) -> "IntervalSet":
        t = as_time(t)
        if t < 0 or (t == 0 and not closed):
            return cls()
        return cls([Interval(Fraction(0), True, t, closed)])

    def __eq__(self, other):
        return isinstance(other, IntervalSet) and self.parts == other.parts

    def __hash__(self):
        return hash(self.parts)

    def __bool__(self):
        return bool(self.parts)

    def __repr__(self):
        return "IntervalSet(" + " u ".join(map(str, self.parts)) + ")" if self.parts else "IntervalSet(empty)"

    def contains(self, t) -> bool:
        t = as_time(t)
        return any(p.contains(t) for p in self.parts)

    def complement(self) -> "IntervalSet":
        out = []
        cur, cur_closed = Fraction(0), True
        for p in self.parts:
            if p.lo > cur or (p.lo == cur and cur_closed and not p.lo_closed):
                out.append(Interval(cur, cur_closed, p.lo, not p.lo_closed))
            if p.hi is None:
                return IntervalSet(out)
            cur, cur_closed = p.hi, not p.hi_closed
        out.append(Interval(cur, cur_closed, None, False))
        return IntervalSet(out)

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(self.parts + other.parts)

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        return self.complement().union(other.complement()).complement()

    def minus(self, other: "IntervalSet") -> "IntervalSet":
        return self.intersect(other.complement())

    def sup(self) -> Fraction | None:
        """Upper end of the last part; None when unbounded or empty."""
        return self.parts[-1].hi if self.parts else None

    def endpoints(self) -> list[Fraction]:
        pts = set()
        for p in self.parts:
            pts.add(p.lo)
            if p.hi is not None:
                pts.add(p.hi)
        return sorted(pts)


def _merge(parts: Iterable[Interval]) -> tuple[Interval, ...]:
    ps = [p for p in parts if not _empty(p)]
    ps.sort(key=lambda p: (p.lo, not p.lo_closed))
    out: list[Interval] = []
    for p in ps:
        if out:
            q = out[-1]
            touch = q.hi is None or p.lo < q.hi or (p.lo == q.hi and (q.hi_closed or p.lo_closed))
            if touch:
                if q.hi is None or p.hi is None:
                    hi, hc = None, False
                elif p.hi > q.hi:
                    hi, hc = p.hi, p.hi_closed
                elif p.hi == q.hi:
                    hi, hc = q.hi, q.hi_closed or p.hi_closed
                else:
                    hi, hc = q.hi, q.hi_closed
                out[-1] = Interval(q.lo, q.lo_closed, hi, hc)
                continue
        out.append(p)
    return tuple(out)


def _empty(p: Interval) -> bool:
    if p.hi is None:
        return False
    return p.hi < p.lo or (p.hi == p.lo and not (p.lo_closed and p.hi_closed))


def delay_set(nu: Mapping, d: Constraint) -> IntervalSet:
    """Exactly the delays ``t >= 0`` with ``nu + t`` satisfying ``d``."""
    match d:
        case TrueC():
            return IntervalSet.everything()
        case Gt(x, n):
            return IntervalSet.above(n - nu[x], False)
        case Eq(x, n):
            return IntervalSet.point(n - nu[x])
        case DiffGt() | DiffEq():
            return IntervalSet.everything() if sat(nu, d) else IntervalSet()
        case Not(a):
            return delay_set(nu, a).complement()
        case And(a, b):
            return delay_set(nu, a).intersect(delay_set(nu, b))
    raise TypeError(f"not a constraint: {d!r}")


# ---------------------------------------------------------------------------
# representative delays and regions


def representative_delays(d: Constraint, M: int) -> list[Fraction]:
    """Half-integer witnesses ``0, 1/2, ..., M+1`` for a one-variable constraint.

    ``d`` is read as a predicate on its only clock (the delay variable).  A
    constraint with no clock at all is true or false for every delay.
    """
    cs = clocks_of(d)
    if len(cs) > 1:
        raise ValueError(f"delay constraint mentions several variables: {sorted(cs)}")
    var = next(iter(cs), None)
    grid = [Fraction(k, 2) for k in range(2 * M + 3)]
    if var is None:
        return grid if sat({}, d) else []
    return [t for t in grid if sat({var: t}, d)]


def has_diagonal(obj) -> bool:
    """Whether a difference atom (``x-y>n`` or ``x-y=n``) occurs anywhere in ``obj``."""
    return _has_diagonal(obj)


@lru_cache(maxsize=4096)
def _has_diagonal_cached(obj) -> bool:
    return _walk_diagonal(obj)


def _has_diagonal(obj) -> bool:
    try:
        return _has_diagonal_cached(obj)
    except TypeError:
        return _walk_diagonal(obj)


def _walk_diagonal(obj) -> bool:
    if isinstance(obj, (DiffGt, DiffEq)):
        return True
    if isinstance(obj, Constraint):
        return isinstance(obj, (Not, And)) and any(_has_diagonal(c) for c in _children(obj))
    if isinstance(obj, (str, int, Fraction, bool)) or obj is None:
        return False
    if isinstance(obj, Mapping):
        return any(_has_diagonal(v) for v in obj.values())
    if isinstance(obj, (tuple, list, frozenset, set)):
        return any(_has_diagonal(v) for v in obj)
    if dataclasses.is_dataclass(obj):
        return any(_has_diagonal(getattr(obj, f.name)) for f in dataclasses.fields(obj))
    return False


def _children(d: Constraint):
    match d:
        case Not(a):
            return (a,)
        case And(a, b):
            return (a, b)
    return ()


def region_canon(values: Mapping[str, Fraction], M: int, diagonal: bool = False) -> dict[str, Fraction]:
    """A canonical representative of the clock region of ``values``.

    Integer parts (up to ``M``) and the order of fractional parts are kept;
    values above ``M`` collapse to ``M+1``.  Two valuations in the same region
    map to the same representative.

    The collapse forgets clock differences, so with ``diagonal`` set the
    classes of all pairwise differences (and of each clock against 0) are
    kept instead: sorted gaps wider than ``M+1`` shrink by whole units, then
    fractional parts are replaced by their rank.  This is finer than needed
    but still finite.
    """
    if diagonal:
        return _diagonal_canon(values, M)
    fracs = sorted({v - math.floor(v) for v in values.values() if v <= M} - {Fraction(0)})
    k = len(fracs) + 1
    rank = {f: Fraction(i + 1, k) for i, f in enumerate(fracs)}
    out = {}
    for c, v in values.items():
        if v > M:
            out[c] = Fraction(M + 1)
        else:
            fl = math.floor(v)
            f = v - fl
            out[c] = Fraction(fl) + (rank[f] if f else 0)
    return out


def _diagonal_canon(values: Mapping[str, Fraction], M: int) -> dict[str, Fraction]:
    pts = sorted(set(values.values()) | {Fraction(0)})
    moved = {pts[0]: pts[0]}
    shift = 0
    for a, b in zip(pts, pts[1:]):
        gap = b - a
        if gap > M + 1:
            shift += math.ceil(gap - (M + 1))
        moved[b] = b - shift
    fracs = sorted({v - math.floor(v) for v in moved.values()} - {Fraction(0)})
    rank = {f: Fraction(i + 1, len(fracs) + 1) for i, f in enumerate(fracs)}
    out = {}
    for c, v in values.items():
        w = moved[v]
        fl = math.floor(w)
        out[c] = Fraction(fl) + (rank[w - fl] if w != fl else 0)
    return out


def delay_candidates(values: Iterable[Fraction], M: int, within: IntervalSet | None = None) -> list[Fraction]:
    """Delays that between them visit every region reachable from ``values``.

    The breakpoints are the delays at which some clock hits an integer up to
    ``M+1``; the candidates are those breakpoints, the midpoints between
    consecutive ones, and one point past the last.  With ``within`` given,
    the interval's own endpoints count as breakpoints and the result is
    filtered to it.
    """
    pts = {Fraction(0)}
    for v in values:
        for c in range(0, M + 2):
            if c - v > 0:
                pts.add(Fraction(c) - v)
    if within is not None:
        pts.update(p for p in within.endpoints() if p >= 0)
    bps = sorted(pts)
    cands = []
    for a, b in zip(bps, bps[1:]):
        cands.append(a)
        cands.append((a + b) / 2)
    cands.append(bps[-1])
    cands.append(bps[-1] + 1)
    if within is not None:
        cands = [t for t in cands if within.contains(t)]
    return cands
