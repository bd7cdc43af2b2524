"""Session types: syntax, duality, substitution, unfolding and equivalence."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import count
from typing import Iterable

from .timelogic import TRUE, Constraint, clocks_of, max_constant as _cmax

SEND, RECV = "!", "?"


# ---------------------------------------------------------------------------
# sorts


class Sort:
    __slots__ = ()


@dataclass(frozen=True)
class Base(Sort):
    name: str  # nat | bool | string | none

    def __str__(self):
        return self.name


NAT, BOOL, STRING, NONE = Base("nat"), Base("bool"), Base("string"), Base("none")
BASE_SORTS = {s.name: s for s in (NAT, BOOL, STRING, NONE)}


@dataclass(frozen=True)
class Delegate(Sort):
    init: Constraint
    protocol: "SessionType"


# ---------------------------------------------------------------------------
# types


class SessionType:
    __slots__ = ()

    def __str__(self):
        from .surface import pretty_type

        return pretty_type(self)


@dataclass(frozen=True)
class End(SessionType):
    pass


@dataclass(frozen=True)
class Var(SessionType):
    name: str


@dataclass(frozen=True)
class Rec(SessionType):
    var: str
    body: SessionType


@dataclass(frozen=True)
class Option:
    direction: str
    label: str
    payload: Sort = NONE
    guard: Constraint = TRUE
    resets: frozenset = field(default_factory=frozenset)
    cont: SessionType = End()

    def __post_init__(self):
        if self.direction not in (SEND, RECV):
            raise ValueError(f"bad direction {self.direction!r}")
        if not self.label:
            raise ValueError("empty label")
        if not isinstance(self.resets, frozenset):
            object.__setattr__(self, "resets", frozenset(self.resets))


@dataclass(frozen=True)
class Choice(SessionType):
    options: tuple

    def __post_init__(self):
        if not isinstance(self.options, tuple):
            object.__setattr__(self, "options", tuple(self.options))
        if not self.options:
            raise ValueError("a choice needs at least one option")
        labels = [o.label for o in self.options]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate labels in choice: {labels}")


END = End()


def option(direction, label, payload=NONE, guard=TRUE, resets=(), cont=END) -> Option:
    return Option(direction, label, payload, guard, frozenset(resets), cont)


# ---------------------------------------------------------------------------
# structural utilities


def dual(s: SessionType) -> SessionType:
    match s:
        case End() | Var():
            return s
        case Rec(a, body):
            return Rec(a, dual(body))
        case Choice(opts):
            return Choice(
                tuple(
                    Option(RECV if o.direction == SEND else SEND, o.label, o.payload, o.guard, o.resets, dual(o.cont))
                    for o in opts
                )
            )
    raise TypeError(f"not a session type: {s!r}")


def free_names(s: SessionType) -> frozenset[str]:
    match s:
        case End():
            return frozenset()
        case Var(a):
            return frozenset((a,))
        case Rec(a, body):
            return free_names(body) - {a}
        case Choice(opts):
            out = frozenset()
            for o in opts:
                out |= free_names(o.cont)
            return out
    raise TypeError(f"not a session type: {s!r}")


def bound_names(s: SessionType) -> frozenset[str]:
    match s:
        case End() | Var():
            return frozenset()
        case Rec(a, body):
            return bound_names(body) | {a}
        case Choice(opts):
            out = frozenset()
            for o in opts:
                out |= bound_names(o.cont)
            return out
    raise TypeError(f"not a session type: {s!r}")


_fresh = count(1)


def fresh_name(base: str, avoid: Iterable[str]) -> str:
    """A name ``base_k`` not in ``avoid``, using a global counter."""
    avoid = set(avoid)
    stem = base.split("_")[0] or "a"
    while True:
        cand = f"{stem}_{next(_fresh)}"
        if cand not in avoid:
            return cand


def substitute(s: SessionType, a: str, r: SessionType) -> SessionType:
    """``s[r/a]``, renaming binders of ``s`` that would capture names free in ``r``."""
    fr = free_names(r)

    def go(t: SessionType) -> SessionType:
        match t:
            case End():
                return t
            case Var(b):
                return r if b == a else t
            case Rec(b, body):
                if b == a or a not in free_names(body):
                    return t
                if b in fr:
                    nb = fresh_name(b, fr | free_names(body) | bound_names(body) | {a})
                    body = substitute(body, b, Var(nb))
                    b = nb
                return Rec(b, go(body))
            case Choice(opts):
                return Choice(tuple(_with_cont(o, go(o.cont)) for o in opts))
        raise TypeError(f"not a session type: {t!r}")

    return go(s)


def _with_cont(o: Option, cont: SessionType) -> Option:
    return Option(o.direction, o.label, o.payload, o.guard, o.resets, cont)


def unfold(s: SessionType) -> SessionType:
    if not isinstance(s, Rec):
        raise TypeError(f"unfold expects a recursive type, got {type(s).__name__}")
    return substitute(s.body, s.var, s)


def head(s: SessionType) -> SessionType:
    """Unfold top-level recursion until a choice, end or a free variable shows."""
    seen = 0
    while isinstance(s, Rec):
        s = unfold(s)
        seen += 1
        if seen > 10_000:  # pragma: no cover - contractivity rules this out
            raise ValueError("non-contractive type")
    return s


def is_contractive(s: SessionType, unguarded: frozenset = frozenset()) -> bool:
    match s:
        case End():
            return True
        case Var(a):
            return a not in unguarded
        case Rec(a, body):
            return is_contractive(body, unguarded | {a})
        case Choice(opts):
            return all(is_contractive(o.cont, frozenset()) for o in opts) and all(
                is_contractive(o.payload.protocol) for o in opts if isinstance(o.payload, Delegate)
            )
    raise TypeError(f"not a session type: {s!r}")


def sort_equiv(a: Sort, b: Sort) -> bool:
    if isinstance(a, Delegate) and isinstance(b, Delegate):
        return a.init == b.init and unfold_equiv(a.protocol, b.protocol)
    return a == b


def unfold_equiv(s1: SessionType, s2: SessionType) -> bool:
    """Decide ``s1`` and ``s2`` equal up to unfolding (coinductively)."""
    visited: set = set()
    stack = [(s1, s2)]
    while stack:
        a, b = stack.pop()
        if (a, b) in visited:
            continue
        visited.add((a, b))
        a, b = head(a), head(b)
        match a, b:
            case End(), End():
                continue
            case Var(x), Var(y):
                if x != y:
                    return False
            case Choice(oa), Choice(ob):
                ma = {(o.direction, o.label): o for o in oa}
                mb = {(o.direction, o.label): o for o in ob}
                if ma.keys() != mb.keys():
                    return False
                for k, o in ma.items():
                    p = mb[k]
                    if o.guard != p.guard or o.resets != p.resets or not sort_equiv(o.payload, p.payload):
                        return False
                    stack.append((o.cont, p.cont))
            case _:
                return False
    return True


def is_end(s: SessionType) -> bool:
    return unfold_equiv(s, END)


def type_clocks(s: SessionType) -> frozenset[str]:
    match s:
        case End() | Var():
            return frozenset()
        case Rec(_, body):
            return type_clocks(body)
        case Choice(opts):
            out = frozenset()
            for o in opts:
                out |= clocks_of(o.guard) | o.resets | type_clocks(o.cont)
            return out
    raise TypeError(f"not a session type: {s!r}")


def type_max_constant(s: SessionType) -> int:
    match s:
        case End() | Var():
            return 0
        case Rec(_, body):
            return type_max_constant(body)
        case Choice(opts):
            m = 0
            for o in opts:
                m = max(m, _cmax(o.guard), type_max_constant(o.cont))
                if isinstance(o.payload, Delegate):
                    m = max(m, _cmax(o.payload.init), type_max_constant(o.payload.protocol))
            return m
    raise TypeError(f"not a session type: {s!r}")


for _cls in (End, Var, Rec, Choice):
    _cls.max_constant = type_max_constant
