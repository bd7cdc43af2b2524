"""The timed process calculus: syntax, time passing and reduction.

Queues are named by the ordered pair ``(src, dst)``: ``Queue("p", "q", h)``
holds messages sent by ``p`` and read by ``q``.  A send ``p!l(v)`` appends
to the queue whose source is ``p``; a receive on ``p`` reads the queue whose
destination is ``p``.
"""

from __future__ import annotations

import hashlib
import math
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .timelogic import (
    IntervalSet,
    Constraint,
    as_time,
    clocks_of,
    fmt_time,
    has_diagonal,
    max_constant as _cmax,
    region_canon,
    representative_delays,
    sat,
)

# ---------------------------------------------------------------------------
# values


class Value:
    __slots__ = ()


@dataclass(frozen=True)
class NatV(Value):
    n: int


@dataclass(frozen=True)
class BoolV(Value):
    b: bool


@dataclass(frozen=True)
class StringV(Value):
    s: str


@dataclass(frozen=True)
class UnitV(Value):
    pass


@dataclass(frozen=True)
class SessionRef(Value):
    """An identifier in value position: a bound variable or a session endpoint."""

    name: str


UNIT = UnitV()


# ---------------------------------------------------------------------------
# deadlines


@dataclass(frozen=True)
class Deadline:
    kind: str  # "<", "<=" or "inf"
    bound: Fraction = Fraction(0)

    def __post_init__(self):
        if self.kind not in ("<", "<=", "inf"):
            raise ValueError(f"bad deadline kind {self.kind!r}")
        object.__setattr__(self, "bound", as_time(self.bound))
        if self.bound < 0 or (self.kind == "<" and self.bound == 0):
            raise ValueError(f"empty deadline {self.kind}{self.bound}")

    @property
    def infinite(self) -> bool:
        return self.kind == "inf"

    def holds(self, t) -> bool:
        """``t`` is still within the deadline (``t`` diamond ``n``)."""
        t = as_time(t)
        if self.kind == "inf":
            return True
        return t < self.bound if self.kind == "<" else t <= self.bound

    def shrink(self, t) -> "Deadline":
        if self.kind == "inf":
            return self
        return Deadline(self.kind, self.bound - as_time(t))

    def interval(self) -> IntervalSet:
        if self.kind == "inf":
            return IntervalSet.everything()
        return IntervalSet.below(self.bound, self.kind == "<=")

    def __str__(self):
        return "inf" if self.kind == "inf" else f"{self.kind}{fmt_time(self.bound)}"


def LT(n) -> Deadline:
    return Deadline("<", n)


def LE(n) -> Deadline:
    return Deadline("<=", n)


INF = Deadline("inf")


# ---------------------------------------------------------------------------
# processes


class Process:
    __slots__ = ()

    def __str__(self):
        from .surface import pretty_process

        return pretty_process(self)


@dataclass(frozen=True)
class Term(Process):
    pass


@dataclass(frozen=True)
class SetTimer(Process):
    timer: str
    body: Process


@dataclass(frozen=True)
class Send(Process):
    role: str
    label: str
    value: Value
    body: Process


@dataclass(frozen=True)
class Alt:
    label: str
    binder: str | None
    body: Process


@dataclass(frozen=True)
class Branch(Process):
    role: str
    deadline: Deadline
    alts: tuple

    def __post_init__(self):
        _check_alts(self.alts)


@dataclass(frozen=True)
class Timeout(Process):
    role: str
    deadline: Deadline
    alts: tuple
    after: Process

    def __post_init__(self):
        _check_alts(self.alts)
        if self.deadline.infinite:
            raise ValueError("a timeout needs a finite deadline")


def _check_alts(alts):
    labels = [a.label for a in alts]
    if not labels:
        raise ValueError("a receive needs at least one branch")
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate branch labels: {labels}")


@dataclass(frozen=True)
class If(Process):
    cond: Constraint
    then: Process
    else_: Process


@dataclass(frozen=True)
class DelayC(Process):
    """``delay(delta).P``: wait some amount satisfying ``delta``."""

    cond: Constraint
    body: Process


@dataclass(frozen=True)
class Delay(Process):
    """``delay(t).P``: wait exactly ``t``."""

    amount: Fraction
    body: Process


@dataclass(frozen=True)
class Def(Process):
    name: str
    vparams: tuple
    rparams: tuple
    body: Process
    scope: Process


@dataclass(frozen=True)
class Call(Process):
    name: str
    vargs: tuple
    rargs: tuple


@dataclass(frozen=True)
class Scope(Process):
    p: str
    q: str
    body: Process
    ann: object = field(default=None, compare=True)


@dataclass(frozen=True)
class Par(Process):
    left: Process
    right: Process


@dataclass(frozen=True)
class Queue(Process):
    src: str
    dst: str
    items: tuple = ()


TERM = Term()


def delay(t, body: Process) -> Process:
    """``delay(t).P`` with ``delay(0).P`` identified with ``P``."""
    t = as_time(t)
    return body if t == 0 else Delay(t, body)


def par(*ps: Process) -> Process:
    out = ps[-1]
    for p in reversed(ps[:-1]):
        out = Par(p, out)
    return out


# ---------------------------------------------------------------------------
# free queues, well-formedness, waiting and non-empty queues


def fq(P: Process) -> frozenset:
    match P:
        case Queue(s, d, _):
            return frozenset({(s, d)})
        case Scope(p, q, body, _):
            return fq(body) - {(p, q), (q, p)}
        case Par(l, r):
            return fq(l) | fq(r)
        case If(_, a, b):
            return fq(a) | fq(b)
        case Def(_, _, _, body, scope):
            return fq(body) | fq(scope)
        case Branch(_, _, alts):
            return frozenset().union(*(fq(a.body) for a in alts))
        case Timeout(_, _, alts, after):
            return frozenset().union(*(fq(a.body) for a in alts)) | fq(after)
        case SetTimer(_, b) | Send(_, _, _, b) | DelayC(_, b) | Delay(_, b):
            return fq(b)
    return frozenset()


def _wf(P: Process) -> bool:
    match P:
        case Scope(p, q, body, _):
            return fq(body) == {(p, q), (q, p)} and _wf(body)
        case Par(l, r):
            return _wf(l) and _wf(r) and not (fq(l) & fq(r))
        case If(_, a, b):
            return not fq(a) and not fq(b) and _wf(a) and _wf(b)
        case Def(_, _, _, body, scope):
            return not fq(body) and _wf(body) and _wf(scope)
        case Branch(_, _, alts):
            return all(not fq(a.body) and _wf(a.body) for a in alts)
        case Timeout(_, _, alts, after):
            return all(not fq(a.body) and _wf(a.body) for a in alts) and not fq(after) and _wf(after)
        case SetTimer(_, b) | Send(_, _, _, b) | DelayC(_, b) | Delay(_, b):
            return not fq(b) and _wf(b)
    return True


def wf_process(P: Process, closed: bool = True) -> bool:
    """No free queues (when ``closed``) and every scope owns exactly its two queues."""
    return _wf(P) and (not closed or not fq(P))


def wait_set(P: Process) -> frozenset:
    match P:
        case Branch(p, _, _) | Timeout(p, _, _, _):
            return frozenset({p})
        case Scope(p, q, body, _):
            return wait_set(body) - {p, q}
        case Par(l, r):
            return wait_set(l) | wait_set(r)
        case Def(_, _, _, _, scope):
            return wait_set(scope)
    return frozenset()


def neq_set(P: Process) -> frozenset:
    match P:
        case Queue(_, d, items):
            return frozenset({d}) if items else frozenset()
        case Scope(p, q, body, _):
            return neq_set(body) - {p, q}
        case Par(l, r):
            return neq_set(l) | neq_set(r)
        case Def(_, _, _, _, scope):
            return neq_set(scope)
    return frozenset()


# ---------------------------------------------------------------------------
# time passing


def time_pass(P: Process, t) -> Process | None:
    """The partial time-passing function; ``None`` when time cannot pass."""
    t = as_time(t)
    if t < 0:
        raise ValueError("negative delay")
    if t == 0:
        return P
    match P:
        case Term() | Queue():
            return P
        case Branch(p, e, alts):
            if e.infinite:
                return P
            return Branch(p, e.shrink(t), alts) if e.holds(t) else None
        case Timeout(p, e, alts, after):
            if e.holds(t):
                return Timeout(p, e.shrink(t), alts, after)
            return time_pass(after, t - e.bound)
        case Delay(d, body):
            if d >= t:
                return delay(d - t, body)
            return time_pass(body, t - d)
        case Par(l, r):
            if wait_set(l) & neq_set(r) or wait_set(r) & neq_set(l):
                return None
            l2 = time_pass(l, t)
            if l2 is None:
                return None
            r2 = time_pass(r, t)
            return None if r2 is None else Par(l2, r2)
        case Scope(p, q, body, ann):
            b = time_pass(body, t)
            return None if b is None else Scope(p, q, b, ann)
        case Def(x, vs, rs, body, scope):
            s = time_pass(scope, t)
            return None if s is None else Def(x, vs, rs, body, s)
    return None


# ---------------------------------------------------------------------------
# substitution


def proc_free_names(P: Process) -> frozenset:
    """Names occurring free in value or role position."""
    match P:
        case Term():
            return frozenset()
        case Queue(s, d, items):
            return frozenset({s, d}) | {v.name for _, v in items if isinstance(v, SessionRef)}
        case SetTimer(_, b):
            return proc_free_names(b)
        case Send(p, _, v, b):
            out = proc_free_names(b) | {p}
            return out | {v.name} if isinstance(v, SessionRef) else out
        case Branch(p, _, alts):
            return _alts_names(alts) | {p}
        case Timeout(p, _, alts, after):
            return _alts_names(alts) | {p} | proc_free_names(after)
        case If(_, a, b):
            return proc_free_names(a) | proc_free_names(b)
        case DelayC(_, b) | Delay(_, b):
            return proc_free_names(b)
        case Def(_, vs, rs, body, scope):
            return (proc_free_names(body) - set(vs) - set(rs)) | proc_free_names(scope)
        case Call(_, vargs, rargs):
            return frozenset(rargs) | {v.name for v in vargs if isinstance(v, SessionRef)}
        case Scope(p, q, body, _):
            return proc_free_names(body) - {p, q}
        case Par(l, r):
            return proc_free_names(l) | proc_free_names(r)
    raise TypeError(P)


def _alts_names(alts) -> frozenset:
    out = frozenset()
    for a in alts:
        out |= proc_free_names(a.body) - ({a.binder} if a.binder else set())
    return out


_fresh_counter = [0]


def _fresh(base: str, avoid) -> str:
    while True:
        _fresh_counter[0] += 1
        cand = f"{base}_{_fresh_counter[0]}"
        if cand not in avoid:
            return cand


def subst(P: Process, m: dict) -> Process:
    """Replace free names: ``m`` maps a name to a Value (or a role name string).

    A SessionRef or a string image also renames role positions.  Binders
    that would capture an incoming name are renamed first.
    """
    if not m:
        return P
    incoming = set()
    for v in m.values():
        if isinstance(v, str):
            incoming.add(v)
        elif isinstance(v, SessionRef):
            incoming.add(v.name)

    def role(r: str) -> str:
        v = m.get(r)
        if v is None:
            return r
        if isinstance(v, str):
            return v
        if isinstance(v, SessionRef):
            return v.name
        raise TypeError(f"role {r} substituted by non-session value {v!r}")

    def val(v: Value) -> Value:
        if isinstance(v, SessionRef) and v.name in m:
            w = m[v.name]
            return SessionRef(w) if isinstance(w, str) else w
        return v

    def under(binders: Iterable[str], body: Process):
        """Map for a body under ``binders``, plus renamings that avoid capture."""
        binders = [b for b in binders if b]
        inner = {k: v for k, v in m.items() if k not in binders}
        ren = {}
        for b in binders:
            if b in incoming and inner:
                nb = _fresh(b.split("_")[0], incoming | proc_free_names(body) | set(m))
                ren[b] = nb
        return ren, inner

    match P:
        case Term():
            return P
        case Queue(s, d, items):
            return Queue(role(s), role(d), tuple((l, val(v)) for l, v in items))
        case SetTimer(x, b):
            return SetTimer(x, subst(b, m))
        case Send(p, l, v, b):
            return Send(role(p), l, val(v), subst(b, m))
        case Branch(p, e, alts):
            return Branch(role(p), e, tuple(_subst_alt(a, m, under) for a in alts))
        case Timeout(p, e, alts, after):
            return Timeout(role(p), e, tuple(_subst_alt(a, m, under) for a in alts), subst(after, m))
        case If(c, a, b):
            return If(c, subst(a, m), subst(b, m))
        case DelayC(c, b):
            return DelayC(c, subst(b, m))
        case Delay(t, b):
            return Delay(t, subst(b, m))
        case Def(x, vs, rs, body, scope):
            ren, inner = under(tuple(vs) + tuple(rs), body)
            if ren:
                body = subst(body, dict(ren))
                vs = tuple(ren.get(v, v) for v in vs)
                rs = tuple(ren.get(r, r) for r in rs)
            return Def(x, vs, rs, subst(body, inner), subst(scope, m))
        case Call(x, vargs, rargs):
            return Call(x, tuple(val(v) for v in vargs), tuple(role(r) for r in rargs))
        case Scope(p, q, body, ann):
            ren, inner = under((p, q), body)
            if ren:
                body = subst(body, dict(ren))
                p, q = ren.get(p, p), ren.get(q, q)
            return Scope(p, q, subst(body, inner), ann)
        case Par(l, r):
            return Par(subst(l, m), subst(r, m))
    raise TypeError(P)


def _subst_alt(a: Alt, m: dict, under) -> Alt:
    if a.binder is None:
        return Alt(a.label, None, subst(a.body, m))
    ren, inner = under((a.binder,), a.body)
    body, binder = a.body, a.binder
    if ren:
        body = subst(body, dict(ren))
        binder = ren[binder]
    return Alt(a.label, binder, subst(body, inner))


# ---------------------------------------------------------------------------
# measuring


def process_max_constant(P: Process) -> int:
    m = 0
    for node in walk(P):
        match node:
            case Branch(_, e, _) | Timeout(_, e, _, _):
                if not e.infinite:
                    m = max(m, math.ceil(e.bound))
            case If(c, _, _) | DelayC(c, _):
                m = max(m, _cmax(c))
            case Delay(t, _):
                m = max(m, math.ceil(t))
    return m


def walk(P: Process):
    yield P
    match P:
        case SetTimer(_, b) | Send(_, _, _, b) | DelayC(_, b) | Delay(_, b):
            yield from walk(b)
        case Branch(_, _, alts):
            for a in alts:
                yield from walk(a.body)
        case Timeout(_, _, alts, after):
            for a in alts:
                yield from walk(a.body)
            yield from walk(after)
        case If(_, a, b) | Par(a, b):
            yield from walk(a)
            yield from walk(b)
        case Def(_, _, _, body, scope):
            yield from walk(body)
            yield from walk(scope)
        case Scope(_, _, body, _):
            yield from walk(body)


def timers_of(P: Process) -> frozenset:
    out = set()
    for node in walk(P):
        match node:
            case SetTimer(x, _):
                out.add(x)
            case If(c, _, _):
                out |= clocks_of(c)
    return frozenset(out)


def live_timers(P: Process, defs: dict | None = None) -> frozenset:
    """Timers that ``P`` may read before setting them.

    ``defs`` maps process variables to their bodies so calls are followed.
    """
    defs = dict(defs or {})
    seen = set()

    def go(P, env):
        match P:
            case SetTimer(x, body):
                return go(body, env) - {x}
            case If(c, a, b):
                return clocks_of(c) | go(a, env) | go(b, env)
            case Def(name, _, _, body, scope):
                env = {**env, name: body}
                return go(scope, env)
            case Call(name, _, _):
                key = (name, id(env.get(name)))
                if key in seen or name not in env:
                    return frozenset()
                seen.add(key)
                return go(env[name], env)
            case Send(_, _, _, body) | DelayC(_, body) | Delay(_, body):
                return go(body, env)
            case Branch(_, _, alts):
                return frozenset().union(*(go(a.body, env) for a in alts))
            case Timeout(_, _, alts, after):
                return frozenset().union(go(after, env), *(go(a.body, env) for a in alts))
            case Scope(_, _, body, _):
                return go(body, env)
            case Par(l, r):
                return go(l, env) | go(r, env)
        return frozenset()

    return frozenset(go(P, defs))


for _cls in (Term, SetTimer, Send, Branch, Timeout, If, DelayC, Delay, Def, Call, Scope, Par, Queue):
    _cls.max_constant = process_max_constant


# ---------------------------------------------------------------------------
# reduction


@dataclass(frozen=True)
class StepLabel:
    rule: str
    role: str | None = None
    detail: str = ""

    def __str__(self):
        who = self.role or "-"
        return f"{who} {self.rule}" + (f" {self.detail}" if self.detail else "")


def _leaves(P: Process, path=(), scopes=(), defs=()):
    """Active positions: (path, node, enclosing scopes, enclosing defs)."""
    match P:
        case Par(l, r):
            yield from _leaves(l, path + (0,), scopes, defs)
            yield from _leaves(r, path + (1,), scopes, defs)
        case Scope(p, q, body, _):
            yield from _leaves(body, path + (0,), scopes + ((path, p, q),), defs)
        case Def(x, vs, rs, body, scope):
            yield from _leaves(scope, path + (0,), scopes, defs + ((x, vs, rs, body),))
        case _:
            yield path, P, scopes, defs


def _binder(scopes, role):
    for path, p, q in reversed(scopes):
        if role in (p, q):
            return path
    return None


def _replace(P: Process, path, new: Process) -> Process:
    if not path:
        return new
    i, rest = path[0], path[1:]
    match P:
        case Par(l, r):
            return Par(_replace(l, rest, new), r) if i == 0 else Par(l, _replace(r, rest, new))
        case Scope(p, q, body, ann):
            return Scope(p, q, _replace(body, rest, new), ann)
        case Def(x, vs, rs, body, scope):
            return Def(x, vs, rs, body, _replace(scope, rest, new))
    raise ValueError(f"bad path into {type(P).__name__}")


def reduce_step(theta: dict, P: Process, M: int | None = None) -> list[tuple[StepLabel, dict, Process]]:
    """All instantaneous successors of ``(theta, P)``."""
    if M is None:
        M = process_max_constant(P)
    leaves = list(_leaves(P))
    out = []
    for path, node, scopes, defs in leaves:
        match node:
            case Send(p, l, v, body):
                b = _binder(scopes, p)
                hit = _find_queue(leaves, b, lambda q, p=p: q.src == p, lambda q: q.src)
                if hit is None:
                    continue
                qpath, qn = hit
                P2 = _replace(_replace(P, path, body), qpath, Queue(qn.src, qn.dst, qn.items + ((l, v),)))
                out.append((StepLabel("Send", p, f"{l}({_vstr(v)})"), theta, P2))
            case Branch(p, _, alts) | Timeout(p, _, alts, _):
                b = _binder(scopes, p)
                hit = _find_queue(leaves, b, lambda q, p=p: q.dst == p and bool(q.items), lambda q: q.dst)
                if hit is None:
                    continue
                qpath, qn = hit
                (l, v), rest = qn.items[0], qn.items[1:]
                alt = next((a for a in alts if a.label == l), None)
                if alt is None:
                    continue
                cont = subst(alt.body, {alt.binder: v}) if alt.binder else alt.body
                P2 = _replace(_replace(P, path, cont), qpath, Queue(qn.src, qn.dst, rest))
                rule = "Recv" if isinstance(node, Branch) else "RecvT"
                out.append((StepLabel(rule, p, f"{l}({_vstr(v)})"), theta, P2))
            case SetTimer(x, body):
                th = dict(theta)
                th[x] = Fraction(0)
                out.append((StepLabel("Set", None, x), th, _replace(P, path, body)))
            case If(c, a, b):
                missing = clocks_of(c) - set(theta)
                if missing:
                    raise KeyError(f"if-condition reads undefined timer(s) {sorted(missing)}")
                if sat(theta, c):
                    out.append((StepLabel("IfT"), theta, _replace(P, path, a)))
                else:
                    out.append((StepLabel("IfF"), theta, _replace(P, path, b)))
            case DelayC(c, body):
                for t in representative_delays(c, M):
                    out.append((StepLabel("Det", None, fmt_time(t)), theta, _replace(P, path, delay(t, body))))
            case Call(x, vargs, rargs):
                d = next((d for d in reversed(defs) if d[0] == x), None)
                if d is None:
                    raise KeyError(f"call to undefined process variable {x}")
                _, vs, rs, body = d
                if len(vs) != len(vargs) or len(rs) != len(rargs):
                    raise ValueError(f"arity mismatch calling {x}")
                m = dict(zip(vs, vargs))
                m.update(zip(rs, rargs))
                out.append((StepLabel("Call", None, x), theta, prune_defs(_replace(P, path, subst(body, m)))))
    return out


def free_calls(P: Process) -> frozenset:
    """Process variables called in ``P`` and not defined around the call."""
    match P:
        case Call(x, _, _):
            return frozenset({x})
        case Def(x, _, _, body, scope):
            return (free_calls(body) | free_calls(scope)) - {x}
        case Par(l, r):
            return free_calls(l) | free_calls(r)
        case If(_, a, b):
            return free_calls(a) | free_calls(b)
        case Branch(_, _, alts):
            return frozenset().union(*(free_calls(a.body) for a in alts))
        case Timeout(_, _, alts, after):
            return frozenset().union(free_calls(after), *(free_calls(a.body) for a in alts))
        case SetTimer(_, b) | Send(_, _, _, b) | DelayC(_, b) | Delay(_, b) | Scope(_, _, b, _):
            return free_calls(b)
    return frozenset()


def prune_defs(P: Process) -> Process:
    """Drop active definitions that their scope no longer calls."""
    match P:
        case Par(l, r):
            return Par(prune_defs(l), prune_defs(r))
        case Scope(p, q, body, ann):
            return Scope(p, q, prune_defs(body), ann)
        case Def(x, vs, rs, body, scope):
            scope = prune_defs(scope)
            return Def(x, vs, rs, body, scope) if x in free_calls(scope) else scope
    return P


def _find_queue(leaves, binder, pred, role_of):
    for path, node, scopes, _ in leaves:
        if isinstance(node, Queue) and pred(node) and _binder(scopes, role_of(node)) == binder:
            return path, node
    return None


def _vstr(v: Value) -> str:
    from .surface import pretty_value

    return pretty_value(v)


def reduce_delay(theta: dict, P: Process, t) -> tuple[dict, Process] | None:
    t = as_time(t)
    P2 = time_pass(P, t)
    if P2 is None:
        return None
    return {k: v + t for k, v in theta.items()}, P2


def delay_options(P: Process, M: int) -> list[Fraction]:
    """Positive half-integer delays up to ``M+1`` for which time can pass."""
    return [Fraction(k, 2) for k in range(1, 2 * M + 3) if time_pass(P, Fraction(k, 2)) is not None]


# ---------------------------------------------------------------------------
# running


def is_final(P: Process) -> bool:
    """Only terminated processes and empty queues remain (inside any scopes)."""
    return all(isinstance(n, Term) or (isinstance(n, Queue) and not n.items) for _, n, _, _ in _leaves(P))


def digest(theta: dict, P: Process) -> str:
    text = repr(sorted((k, str(v)) for k, v in theta.items())) + "|" + str(P)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def canon_theta(theta: dict, M: int, diagonal: bool = False) -> dict:
    """Timers above ``M`` are indistinguishable; pin them at ``M+1``.

    Conditions comparing two timers need their difference, so then the
    difference-preserving region representative is used instead.
    """
    if diagonal:
        return region_canon(theta, M, diagonal=True)
    return {k: (v if v <= M else Fraction(M + 1)) for k, v in theta.items()}


@dataclass
class TraceEntry:
    step: int
    label: str
    theta: dict
    process: Process


@dataclass
class RunReport:
    trace: list[TraceEntry]
    status: str  # "final", "stuck", "fuel" or "explored"
    states: int = 0
    finals: int = 0
    stuck: list = field(default_factory=list)


def successors(theta, P, M):
    for lab, th, P2 in reduce_step(theta, P, M):
        yield str(lab), th, P2
    for t in delay_options(P, M):
        th, P2 = reduce_delay(theta, P, t)
        yield f"- Delay {fmt_time(t)}", th, P2


def run(theta: dict, P: Process, schedule: str = "random", fuel: int = 50, seed: int = 0) -> RunReport:
    """Drive ``(theta, P)`` for ``fuel`` steps.

    ``random`` follows one seeded path; ``exhaustive`` explores every
    successor breadth-first (states identified up to timers above ``M``)
    and reports reachable final and stuck states.
    """
    theta = {k: as_time(v) for k, v in theta.items()}
    M = process_max_constant(P)
    diag = has_diagonal(P)
    if schedule == "random":
        rng = random.Random(seed)
        trace = []
        for k in range(fuel):
            if is_final(P):
                return RunReport(trace, "final")
            succ = list(successors(theta, P, M))
            if not succ:
                return RunReport(trace, "stuck")
            lab, theta, P = rng.choice(succ)
            if not diag:
                theta = canon_theta(theta, M)
            trace.append(TraceEntry(k + 1, lab, theta, P))
        return RunReport(trace, "final" if is_final(P) else "fuel")
    if schedule != "exhaustive":
        raise ValueError(f"unknown schedule {schedule!r}")
    start = (tuple(sorted(theta.items())), P)
    seen = {start}
    frontier = deque([(start, 0, None)])
    parent = {start: None}
    finals = 0
    stuck = []
    exhausted = False
    while frontier:
        (th, Q), depth, _ = frontier.popleft()
        if is_final(Q):
            finals += 1
            continue
        succ = list(successors(dict(th), Q, M))
        if not succ:
            stuck.append((dict(th), Q))
            continue
        if depth >= fuel:
            exhausted = True
            continue
        for lab, th2, Q2 in succ:
            key = (tuple(sorted(canon_theta(th2, M, diag).items())), Q2)
            if key in seen:
                continue
            seen.add(key)
            parent[key] = ((th, Q), lab)
            frontier.append((key, depth + 1, None))
    status = "stuck" if stuck else ("fuel" if exhausted else "explored")
    trace = []
    if stuck:
        trace = _path_to(parent, (tuple(sorted(stuck[0][0].items())), stuck[0][1]))
    return RunReport(trace, status, len(seen), finals, stuck)


def _path_to(parent, key) -> list[TraceEntry]:
    chain = []
    while parent.get(key) is not None:
        prev, lab = parent[key]
        chain.append((lab, key))
        key = prev
    chain.reverse()
    return [TraceEntry(i + 1, lab, dict(k[0]), k[1]) for i, (lab, k) in enumerate(chain)]
