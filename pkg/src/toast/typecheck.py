"""Type checking processes against session types.

Judgments have the form ``Gamma, theta |- P |> Delta`` where ``theta`` maps
timers to times and ``Delta`` is a :class:`~toast.semantics.SessionEnv`.
:func:`typecheck` returns a derivation tree whose nodes name the rule used;
a rejected judgment carries the deepest failing premise.

Quantified premises (``forall t in delta``, ``forall t in e``) are checked
at one delay per clock region of the joint timer/clock valuation.  Rule
Rec collects the call sites of a process variable up to region equivalence
and checks the body once per site, iterating to a fixpoint.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from .calculus import (
    Alt,
    Branch,
    Call,
    Deadline,
    Def,
    Delay,
    DelayC,
    If,
    Par,
    Process,
    Queue,
    Scope,
    Send,
    SessionRef,
    SetTimer,
    Term,
    Timeout,
    Value,
    _leaves,
    delay,
    delay_options,
    fq,
    is_final,
    live_timers,
    process_max_constant,
    reduce_delay,
    reduce_step,
    timers_of,
    walk,
    wf_process,
)
from .semantics import (
    Configuration,
    QueuedConfig,
    SessionEnv,
    can_receive,
    cfg_delay,
    compatible,
    config,
    enabling_delays,
    session_step,
    value_sort,
)
from .timelogic import (
    IntervalSet,
    Valuation,
    as_time,
    clocks_of,
    delay_candidates,
    delay_set,
    fmt_time,
    normalize,
    has_diagonal,
    region_canon,
    sat,
    show,
)
from .typesys import (
    RECV,
    SEND,
    Base,
    Choice,
    Delegate,
    Option,
    head,
    is_end,
    type_clocks,
    unfold_equiv,
)
from .wellformed import wf_config

# ---------------------------------------------------------------------------
# environments


@dataclass
class ProcEntry:
    """What Gamma records for a process variable: sorts and call sites."""

    vparams: tuple
    rparams: tuple
    body: Process
    sorts: tuple | None = None
    sites: dict = field(default_factory=dict)  # key -> (theta, configs)
    order: list = field(default_factory=list)


@dataclass(frozen=True)
class Gamma:
    values: tuple = ()  # ((name, sort), ...)
    procs: tuple = ()  # ((name, ProcEntry), ...)

    def value(self, name):
        for n, s in reversed(self.values):
            if n == name:
                return s
        return None

    def proc(self, name):
        for n, e in reversed(self.procs):
            if n == name:
                return e
        return None

    def bind_value(self, name, sort) -> "Gamma":
        return Gamma(self.values + ((name, sort),), self.procs)

    def bind_proc(self, name, entry) -> "Gamma":
        return Gamma(self.values, self.procs + ((name, entry),))

    def __str__(self):
        parts = [f"{n}:{s}" for n, s in self.values] + [n for n, _ in self.procs]
        return ", ".join(parts) if parts else "."


def theta_advance(theta: dict, t) -> dict:
    t = as_time(t)
    return {k: v + t for k, v in theta.items()}


def delta_advance(delta: SessionEnv, t) -> SessionEnv:
    return delta.advance(t)


def _theta_str(theta) -> str:
    return "{" + ", ".join(f"{k}:{fmt_time(v)}" for k, v in sorted(theta.items())) + "}"


# ---------------------------------------------------------------------------
# predicates on session environments


def _interval(bound) -> IntervalSet:
    if isinstance(bound, Deadline):
        return bound.interval()
    return IntervalSet.below(as_time(bound), False)


def t_reading(delta: SessionEnv, bound) -> bool:
    """Some role could receive after a delay ``t' < t`` (or ``t'`` within a deadline)."""
    window = _interval(bound)
    return any(enabling_delays(c, RECV).intersect(window) for _, c in delta.roles)


def reading_witness(delta: SessionEnv, bound):
    window = _interval(bound)
    for r, c in delta.roles:
        hit = enabling_delays(c, RECV).intersect(window)
        if hit:
            p = hit.parts[0]
            t = p.lo if p.lo_closed else (p.lo + (p.hi if p.hi is not None else p.lo + 1)) / 2
            return r, t
    return None


def wf_session(delta: SessionEnv) -> bool:
    return all(wf_config(c.nu, c.type) for _, c in delta.roles)


def delayable(delta: SessionEnv) -> bool:
    roles = delta.role_names()
    return all(not items or dst not in roles for (src, dst), items in delta.queues)


def balanced(delta: SessionEnv) -> bool:
    roles = delta.role_map()
    queues = delta.queue_map()
    # heads of inbound queues are receivable, and the residue stays balanced
    for (src, dst), items in queues.items():
        if items and dst in roles:
            c2 = can_receive(roles[dst], items[0])
            if c2 is None:
                return False
            if not balanced(delta.with_role(dst, c2).with_queue((src, dst), items[1:])):
                return False
    for (q, p), w1 in queues.items():
        if p not in roles or q not in roles:
            continue
        w2 = queues.get((p, q))
        if w2 is None:
            # some partner queue must make the pair compatible; the empty one
            # is the only candidate tried
            if not compatible(QueuedConfig(roles[p], w1), QueuedConfig(roles[q], ())):
                return False
        elif not compatible(QueuedConfig(roles[p], w1), QueuedConfig(roles[q], w2)):
            return False
    return True


def fully_balanced(delta: SessionEnv) -> bool:
    if not balanced(delta):
        return False
    roles = delta.role_names()
    keys = delta.queue_keys()
    for p in roles:
        if not any((q, p) in keys and (p, q) in keys for q in roles if q != p):
            return False
    for q, p in keys:
        if p not in roles or q not in roles or (p, q) not in keys:
            return False
    return True


# ---------------------------------------------------------------------------
# derivations


@dataclass
class Node:
    rule: str
    judgment: str
    children: list = field(default_factory=list)
    status: str = "ok"
    premise: str = ""

    def to_json(self) -> dict:
        out = {
            "rule": self.rule,
            "judgment": str(self.judgment),
            "children": [c.to_json() for c in self.children],
            "status": self.status,
        }
        if self.premise:
            out["premise"] = self.premise
        return out

    def preorder(self):
        yield self
        for c in self.children:
            yield from c.preorder()

    def render(self, indent: int = 0) -> list[str]:
        mark = "" if self.status == "ok" else f"  <-- {self.premise}"
        lines = ["  " * indent + f"[{self.rule}] {self.judgment}{mark}"]
        for c in self.children:
            lines.extend(c.render(indent + 1))
        return lines


@dataclass
class TypeReport:
    accepted: bool
    tree: Node
    failing: tuple | None = None  # (rule, premise, judgment)

    def rules(self) -> list[str]:
        return [n.rule for n in self.tree.preorder()]

    def to_json(self) -> dict:
        out = {"verdict": "accepted" if self.accepted else "rejected", "derivation": self.tree.to_json()}
        if self.failing:
            rule, premise, judgment = self.failing
            out["failing_premise"] = {"rule": rule, "premise": premise, "judgment": str(judgment)}
        return out


class _Judgment:
    """A judgment rendered only when somebody looks at it."""

    __slots__ = ("parts", "_text")

    def __init__(self, G, theta, P, D):
        self.parts = (G, dict(theta), P, D)
        self._text = None

    def __str__(self):
        if self._text is None:
            G, theta, P, D = self.parts
            self._text = f"{G}; {_theta_str(theta)} |- {_short(P)} |> {D}"
        return self._text

    def __repr__(self):
        return repr(str(self))

    def __eq__(self, other):
        return str(self) == str(other)

    def __hash__(self):
        return hash(str(self))


def _short(P: Process, width: int = 72) -> str:
    s = str(P)
    return s if len(s) <= width else s[: width - 3] + "..."


_MEMO: dict = {}
_MEMO_LIMIT = 200_000


class _Checker:
    def __init__(self, M: int, cap: int, diagonal: bool = False):
        self.M = M
        self.cap = cap
        self.diagonal = diagonal
        self.failing = None

    # -- helpers
    def judgment(self, G, theta, P, D) -> "_Judgment":
        return _Judgment(G, theta, P, D)

    def fail(self, rule, premise, j, children=()) -> Node:
        n = Node(rule, j, list(children), "fail", premise)
        if self.failing is None:
            self.failing = (rule, premise, j)
        return n

    def up(self, rule, j, children) -> Node:
        """A node whose status is that of its children."""
        bad = next((c for c in children if c.status != "ok"), None)
        if bad is not None:
            return Node(rule, j, list(children), "fail", bad.premise)
        return Node(rule, j, list(children))

    def live(self, G, theta, P) -> dict:
        """``theta`` restricted to the timers ``P`` may read before setting."""
        defs = {n: e.body for n, e in G.procs}
        keep = live_timers(P, defs)
        return {k: v for k, v in theta.items() if k in keep}

    def candidates(self, G, theta, P, D, within: IntervalSet):
        vals = list(self.live(G, theta, P).values()) + D.values()
        return delay_candidates(vals, self.M, within)

    def vsort(self, G, v: Value):
        s = value_sort(v)
        if s is None and isinstance(v, SessionRef):
            return G.value(v.name)
        return s

    def weaken(self, rule_node_fn, G, theta, P, D, keep):
        """Drop end roles outside ``keep`` by rule Weak, then build the rest."""
        dropped = [r for r, c in D.roles if r not in keep and is_end(c.type)]
        D2 = D
        for r in dropped:
            D2 = D2.without_role(r)
        node = rule_node_fn(D2)
        for r in reversed(dropped):
            D2 = D2.with_role(r, D.get(r))
            node = self.up("Weak", self.judgment(G, theta, P, D2), [node])
        return node

    # -- dispatch
    def check(self, G: Gamma, theta: dict, P: Process, D: SessionEnv) -> Node:
        """Memoized :meth:`_check`.

        A judgment's verdict depends only on its parts, but checking it may
        record call sites in the entries of Gamma; those recordings are
        replayed on a cache hit.
        """
        gkey = (G.values, tuple((n, e.vparams, e.rparams, e.body, e.sorts) for n, e in G.procs))
        key = (self.M, self.diagonal, self.cap, gkey, tuple(sorted(theta.items())), P, D)
        hit = _MEMO.get(key)
        entries = [e for _, e in G.procs]
        if hit is not None:
            node, effects, failing = hit
            for i, sorts, sites in effects:
                e = entries[i]
                if e.sorts is None:
                    e.sorts = sorts
                for k, v in sites:
                    if k not in e.sites:
                        e.sites[k] = v
                        e.order.append(k)
            if failing is not None and self.failing is None:
                self.failing = failing
            return node
        before = [len(e.order) for e in entries]
        sorts_before = [e.sorts for e in entries]
        had_failing = self.failing is not None
        node = self._check(G, theta, P, D)
        effects = []
        for i, e in enumerate(entries):
            new = [(k, e.sites[k]) for k in e.order[before[i]:]]
            if new or e.sorts != sorts_before[i]:
                effects.append((i, e.sorts, tuple(new)))
        failing = None if had_failing else self.failing
        if len(_MEMO) > _MEMO_LIMIT:
            _MEMO.clear()
        _MEMO[key] = (node, tuple(effects), failing)
        return node

    def _check(self, G: Gamma, theta: dict, P: Process, D: SessionEnv) -> Node:
        j = self.judgment(G, theta, P, D)
        match P:
            case Term():
                return self.weaken(lambda D2: self.end(G, theta, P, D2), G, theta, P, D, ())
            case Queue():
                return self.weaken(lambda D2: self.queue(G, theta, P, D2), G, theta, P, D, _queue_roles(P))
            case Par(l, r):
                return self.par(G, theta, l, r, D, j)
            case Scope():
                return self.res(G, theta, P, D, j)
            case SetTimer(x, body):
                if x not in theta:
                    return self.fail("Timer", f"Timer: timer {x} is not declared in theta", j)
                return self.up("Timer", j, [self.check(G, {**theta, x: Fraction(0)}, body, D)])
            case DelayC(c, body):
                return self.del_delta(G, theta, c, body, D, j)
            case Delay(t, body):
                return self.del_t(G, theta, t, body, D, j)
            case If(c, a, b):
                missing = clocks_of(c) - set(theta)
                if missing:
                    return self.fail("IfTrue", f"IfTrue: condition reads undeclared timers {sorted(missing)}", j)
                if sat(theta, c):
                    return self.up("IfTrue", j, [self.check(G, theta, a, D)])
                return self.up("IfFalse", j, [self.check(G, theta, b, D)])
            case Send():
                return self.send(G, theta, P, D, j)
            case Timeout(p, e, alts, after):
                first = self.receive(G, theta, Branch(p, e, alts), D)
                if first.status != "ok":
                    return self.up("Timeout", j, [first])
                n = e.bound
                second = self.check(G, theta_advance(theta, n), after, D.advance(n))
                return self.up("Timeout", j, [first, second])
            case Branch():
                return self.receive(G, theta, P, D)
            case Def():
                return self.rec(G, theta, P, D, j)
            case Call():
                return self.var(G, theta, P, D, j)
        raise TypeError(f"not a process: {P!r}")

    # -- standard rules
    def end(self, G, theta, P, D) -> Node:
        j = self.judgment(G, theta, P, D)
        live = [r for r, c in D.roles if not is_end(c.type)]
        if live:
            return self.fail("End", f"End: Delta is not end (role {live[0]})", j)
        if D.queues:
            return self.fail("End", "End: Delta is not end (it still holds queues)", j)
        return Node("End", j)

    def queue(self, G, theta, P: Queue, D) -> Node:
        j = self.judgment(G, theta, P, D)
        key = (P.src, P.dst)
        w = D.queue(key)
        if w is None:
            return self.fail("Empty", f"Empty: Delta has no queue {P.src}{P.dst}", j)
        if not P.items:
            extra = [r for r, _ in D.roles] + [f"{s}{d}" for s, d in D.queue_keys() if (s, d) != key]
            if w:
                return self.fail("Empty", f"Empty: queue {P.src}{P.dst} is empty but Delta holds {len(w)} message(s)", j)
            if extra:
                return self.fail("Empty", f"Empty: Delta has more than the queue ({extra[0]})", j)
            return Node("Empty", j)
        if not w:
            return self.fail("VQue", f"VQue: Delta has no message for {P.items[0][0]}", j)
        (l, v), m = P.items[0], w[0]
        rest = Queue(P.src, P.dst, P.items[1:])
        if l != m.label:
            return self.fail("VQue", f"VQue: queued label {l} does not match {m.label} in Delta", j)
        D2 = D.with_queue(key, w[1:])
        if isinstance(m.payload, Delegate):
            if not isinstance(v, SessionRef) or D.get(v.name) is None:
                return self.fail("DQue", "DQue: queued value is not a session in Delta", j)
            c = D.get(v.name)
            if not sat(c.nu, m.payload.init):
                return self.fail("DQue", "DQue: nu |= delta' fails for the delegated session", j)
            if not unfold_equiv(c.type, m.payload.protocol):
                return self.fail("DQue", "DQue: delegated session has the wrong type", j)
            return self.up("DQue", j, [self.check(G, theta, rest, D2.without_role(v.name))])
        if not isinstance(m.payload, Base) or self.vsort(G, v) != m.payload:
            return self.fail("VQue", f"VQue: Gamma |- v : {m.payload} fails", j)
        return self.up("VQue", j, [self.check(G, theta, rest, D2)])

    def par(self, G, theta, l, r, D, j) -> Node:
        rl, ql = _uses(l)
        rr, qr = _uses(r)
        both = (rl & rr) & D.role_names()
        if both:
            return self.fail("Par", f"Par: role {sorted(both)[0]} is used on both sides", j)
        if ql & qr:
            return self.fail("Par", "Par: a queue occurs on both sides", j)
        tl_, tr_ = timers_of(l), timers_of(r)
        shared = tl_ & tr_ & set(theta)
        if shared:
            return self.fail("Par", f"Par: timer {sorted(shared)[0]} is shared by both sides", j)
        droles = D.role_names()
        dkeys = D.queue_keys()
        right_roles = (rr & droles) - rl
        right_keys = {k for k in dkeys if k in qr}
        D2 = D.restrict(right_roles, right_keys)
        D1 = D.restrict(droles - right_roles, dkeys - right_keys)
        th2 = {k: v for k, v in theta.items() if k in tr_}
        th1 = {k: v for k, v in theta.items() if k not in tr_}
        left = self.check(G, th1, l, D1)
        if left.status != "ok":
            return self.up("Par", j, [left])
        return self.up("Par", j, [left, self.check(G, th2, r, D2)])

    def res(self, G, theta, P: Scope, D, j) -> Node:
        p, q, body, ann = P.p, P.q, P.body, P.ann
        if ann is None:
            return self.fail("Res", f"Res: no session types given for ({p} {q})", j)
        if p in D.role_names() or q in D.role_names():
            return self.fail("Res", f"Res: role of ({p} {q}) already in Delta", j)
        cp, cq = ann.get(p), ann.get(q)
        if cp is None or cq is None:
            return self.fail("Res", f"Res: annotation lacks role {p if cp is None else q}", j)
        w1 = ann.queue((q, p)) or ()
        w2 = ann.queue((p, q)) or ()
        if not compatible(QueuedConfig(cp, w1), QueuedConfig(cq, w2)):
            return self.fail("Res", f"Res: ({p}) and ({q}) are not compatible", j)
        for r, c in ((p, cp), (q, cq)):
            if not wf_config(c.nu, c.type):
                return self.fail("Res", f"Res: type of {r} is not well-formed against its valuation", j)
        inner = D.union(SessionEnv.make({p: cp, q: cq}, {(q, p): w1, (p, q): w2}))
        return self.up("Res", j, [self.check(G, theta, body, inner)])

    # -- time
    def del_delta(self, G, theta, c, body, D, j) -> Node:
        cs = clocks_of(c)
        if len(cs) > 1:
            return self.fail("Del[δ]", "Del[δ]: delay constraint mentions several variables", j)
        within = delay_set({next(iter(cs)): Fraction(0)}, c) if cs else (
            IntervalSet.everything() if sat({}, c) else IntervalSet()
        )
        kids = []
        for t in self.candidates(G, theta, body, D, within):
            kid = self.check(G, theta, delay(t, body), D)
            kids.append(kid)
            if kid.status != "ok":
                break
        return self.up("Del[δ]", j, kids)

    def del_t(self, G, theta, t, body, D, j) -> Node:
        if t_reading(D, t):
            r, w = reading_witness(D, t)
            return self.fail("Del[t]", f"Del[t]: Δ not t-reading (role {r} can receive after {fmt_time(w)})", j)
        return self.up("Del[t]", j, [self.check(G, theta_advance(theta, t), body, D.advance(t))])

    # -- communication
    def send(self, G, theta, P: Send, D, j) -> Node:
        p, l, v, body = P.role, P.label, P.value, P.body
        c = D.get(p)
        if c is None:
            return self.fail("VSend", f"VSend: role {p} is not in Delta", j)
        h = head(c.type)
        opts = h.options if isinstance(h, Choice) else ()
        o = next((o for o in opts if o.label == l and o.direction == SEND), None)
        if o is None:
            return self.fail("VSend", f"VSend: no option !{l} in the type of {p}", j)
        rule = "DSend" if isinstance(o.payload, Delegate) else "VSend"
        if not sat(c.nu, o.guard):
            return self.fail(rule, f"{rule}: nu |= delta fails for !{l} at {c.nu!r}", j)
        D2 = D.with_role(p, Configuration(c.nu.reset(o.resets), o.cont))
        if rule == "DSend":
            if not isinstance(v, SessionRef) or D.get(v.name) is None or v.name == p:
                return self.fail(rule, "DSend: sent value is not a session in Delta", j)
            cb = D.get(v.name)
            if not sat(cb.nu, o.payload.init):
                return self.fail(rule, "DSend: nu' |= delta' fails for the delegated session", j)
            if not unfold_equiv(cb.type, o.payload.protocol):
                return self.fail(rule, "DSend: delegated session has the wrong type", j)
            D2 = D2.without_role(v.name)
        elif self.vsort(G, v) != o.payload:
            return self.fail(rule, f"VSend: Gamma |- v : {o.payload} fails", j)
        return self.up(rule, j, [self.check(G, theta, body, D2)])

    def receive(self, G, theta, P: Branch, D) -> Node:
        j = self.judgment(G, theta, P, D)
        p, e, alts = P.role, P.deadline, P.alts
        c = D.get(p)
        if c is None:
            return self.fail("Branch", f"Branch: role {p} is not in Delta", j)
        h = head(c.type)
        if not isinstance(h, Choice):
            return self.fail("Branch", f"Branch: role {p} has no choice to receive from", j)
        if len(h.options) == 1 and len(alts) == 1:
            return self.single(G, theta, p, e, alts[0], h.options[0], D, j)
        kids = []
        for o in h.options:
            if not sat(c.nu, o.guard):
                continue
            if o.direction != RECV:
                return self.fail("Branch", f"Branch: enabled option !{o.label} is not a receive", j, kids)
            a = next((a for a in alts if a.label == o.label), None)
            if a is None:
                return self.fail("Branch", f"Branch: no branch for enabled ?{o.label}", j, kids)
            sub = Branch(p, e, (a,))
            Dj = D.with_role(p, Configuration(c.nu, Choice((o,))))
            kid = self.check(G, theta, sub, Dj)
            kids.append(kid)
            if kid.status != "ok":
                break
        return self.up("Branch", j, kids)

    def single(self, G, theta, p, e, a: Alt, o: Option, D, j) -> Node:
        c = D.get(p)
        rule = "DRecv" if isinstance(o.payload, Delegate) else "VRecv"
        if o.direction != RECV:
            return self.fail(rule, f"{rule}: option !{o.label} is not a receive", j)
        if o.label != a.label:
            return self.fail(rule, f"{rule}: branch {a.label} does not match ?{o.label}", j)
        rest = D.without_role(p)
        if t_reading(rest, e):
            r, w = reading_witness(rest, e)
            return self.fail(rule, f"{rule}: Δ not e-reading (role {r} can receive after {fmt_time(w)})", j)
        window = e.interval()
        if delay_set(c.nu, o.guard) != window:
            return self.fail(rule, f"{rule}: ∀t: ν+t ⊨ δ ⟺ t ∈ e fails ({show(o.guard)} against {e})", j)
        G2 = G
        extra = None
        if rule == "DRecv":
            q = a.binder
            if q is None or q in D.role_names():
                return self.fail(rule, "DRecv: the received session needs a fresh role name", j)
            dnf = normalize(o.payload.init, type_clocks(o.payload.protocol) | clocks_of(o.payload.init))
            if dnf.is_empty():
                return self.fail(rule, "DRecv: nu' |= delta' is unsatisfiable", j)
            extra = (q, config(o.payload.protocol, dnf.zones[0].witness()))
        elif a.binder is not None:
            G2 = G.bind_value(a.binder, o.payload)
        kids = []
        for t in self.candidates(G2, theta, a.body, D, window):
            ct = cfg_delay(c, t)
            Dt = rest.advance(t).with_role(p, Configuration(ct.nu.reset(o.resets), o.cont))
            if extra:
                Dt = Dt.with_role(*extra)
            kid = self.check(G2, theta_advance(theta, t), a.body, Dt)
            kids.append(kid)
            if kid.status != "ok":
                break
        return self.up(rule, j, kids)

    # -- recursion
    def site_key(self, theta, configs):
        vals = {f"t.{k}": v for k, v in theta.items()}
        for i, c in enumerate(configs):
            vals.update({f"{i}.{k}": v for k, v in c.nu.items()})
        canon = region_canon(vals, self.M, self.diagonal)
        th = {k[2:]: v for k, v in canon.items() if k.startswith("t.")}
        cs = tuple(
            Configuration(
                Valuation({k.split(".", 1)[1]: v for k, v in canon.items() if k.split(".", 1)[0] == str(i)}), c.type
            )
            for i, c in enumerate(configs)
        )
        return (tuple(sorted(th.items())), cs), th, cs

    def var(self, G, theta, P: Call, D, j) -> Node:
        e = G.proc(P.name)
        if e is None:
            return self.fail("Var", f"Var: process variable {P.name} is not defined", j)
        if len(e.vparams) != len(P.vargs) or len(e.rparams) != len(P.rargs):
            return self.fail("Var", f"Var: wrong number of arguments for {P.name}", j)
        sorts = tuple(self.vsort(G, v) for v in P.vargs)
        if None in sorts:
            return self.fail("Var", "Var: Gamma |- v : T fails for an argument", j)
        if e.sorts is None:
            e.sorts = sorts
        elif e.sorts != sorts:
            return self.fail("Var", f"Var: argument sorts differ from the first call of {P.name}", j)

        def finish(D2):
            jj = self.judgment(G, theta, P, D2)
            if D2.queues or D2.role_names() != set(P.rargs):
                return self.fail("Var", f"Var: Delta does not match the roles of {P.name}", jj)
            # timers the body sets before reading are pinned at 0
            live = live_timers(P, {n: en.body for n, en in G.procs})
            th0 = {k: (v if k in live else Fraction(0)) for k, v in theta.items()}
            key, th, cs = self.site_key(th0, [D2.get(r) for r in P.rargs])
            if key not in e.sites:
                e.sites[key] = (th, cs)
                e.order.append(key)
            return Node("Var", jj)

        return self.weaken(finish, G, theta, P, D, set(P.rargs))

    def rec(self, G, theta, P: Def, D, j) -> Node:
        e = ProcEntry(P.vparams, P.rparams, P.body)
        G2 = G.bind_proc(P.name, e)
        scope = self.check(G2, theta, P.scope, D)
        kids = [scope]
        if scope.status != "ok":
            return self.up("Rec", j, kids)
        i = 0
        while i < len(e.order):
            if i >= self.cap:
                return self.fail("Rec", f"Rec: more than {self.cap} call sites for {P.name}", j, kids)
            th, cs = e.sites[e.order[i]]
            Gb = G2
            for name, s in zip(e.vparams, e.sorts or ()):
                Gb = Gb.bind_value(name, s)
            Db = SessionEnv.make(dict(zip(e.rparams, cs)))
            kid = self.check(Gb, dict(th), P.body, Db)
            kids.append(kid)
            if kid.status != "ok":
                break
            i += 1
        return self.up("Rec", j, kids)


def _queue_roles(P: Queue):
    return {v.name for _, v in P.items if isinstance(v, SessionRef)}


def _uses(P: Process):
    """Roles a process acts on and the queues it owns (both free)."""
    roles = set()
    for n in walk(P):
        match n:
            case Send(p, _, v, _):
                roles.add(p)
                if isinstance(v, SessionRef):
                    roles.add(v.name)
            case Branch(p, _, _) | Timeout(p, _, _, _):
                roles.add(p)
            case Call(_, vargs, rargs):
                roles.update(rargs)
                roles.update(v.name for v in vargs if isinstance(v, SessionRef))
            case Queue(_, _, items):
                roles.update(v.name for _, v in items if isinstance(v, SessionRef))
    # names bound inside (scopes, binders, parameters) cannot clash with Delta
    # roles because Delta roles are free; keep the free ones only
    from .calculus import proc_free_names

    return frozenset(roles & proc_free_names(P)), fq(P)


def _bound(P: Process, theta: dict, D: SessionEnv) -> int:
    m = process_max_constant(P)
    m = max(m, D.max_constant())
    for n in walk(P):
        if isinstance(n, Scope) and n.ann is not None:
            m = max(m, n.ann.max_constant())
    return m


def _diagonal(G, P: Process, D: SessionEnv) -> bool:
    if has_diagonal(P) or has_diagonal(G):
        return True
    if any(has_diagonal(c.type) for _, c in D.roles):
        return True
    return any(isinstance(n, Scope) and n.ann is not None and has_diagonal(n.ann) for n in walk(P))


def typecheck(G: Gamma | None, theta: dict, P: Process, D: SessionEnv | None = None, cap: int = 500) -> TypeReport:
    G = G or Gamma()
    D = D or SessionEnv()
    theta = {k: as_time(v) for k, v in theta.items()}
    ck = _Checker(_bound(P, theta, D), cap, _diagonal(G, P, D))
    tree = ck.check(G, theta, P, D)
    failing = ck.failing and (ck.failing[0], ck.failing[1], str(ck.failing[2]))
    return TypeReport(tree.status == "ok", tree, failing)


# ---------------------------------------------------------------------------
# subject reduction


@dataclass
class SRViolation:
    kind: str
    step: str
    state: str
    detail: str = ""


@dataclass
class SRReport:
    status: str  # "ok", "violation", "fuel" or "rejected"
    states: int = 0
    steps: int = 0
    delays: int = 0
    violations: list = field(default_factory=list)
    message: str = ""

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "states": self.states,
            "steps": self.steps,
            "delays": self.delays,
            "message": self.message,
            "violations": [{"kind": v.kind, "step": v.step, "state": v.state, "detail": v.detail} for v in self.violations],
        }


def _scopes(P: Process, path=()):
    match P:
        case Par(l, r):
            yield from _scopes(l, path + (0,))
            yield from _scopes(r, path + (1,))
        case Scope(_, _, body, _):
            yield path, P
            yield from _scopes(body, path + (0,))
        case Def(_, _, _, _, scope):
            yield from _scopes(scope, path + (0,))


def _set_ann(P: Process, path, ann) -> Process:
    if not path:
        return Scope(P.p, P.q, P.body, ann)
    i, rest = path[0], path[1:]
    match P:
        case Par(l, r):
            return Par(_set_ann(l, rest, ann), r) if i == 0 else Par(l, _set_ann(r, rest, ann))
        case Scope(p, q, body, a):
            return Scope(p, q, _set_ann(body, rest, ann), a)
        case Def(x, vs, rs, body, scope):
            return Def(x, vs, rs, body, _set_ann(scope, rest, ann))
    raise ValueError("bad scope path")


def _map_anns(P: Process, f) -> Process:
    for path, s in list(_scopes(P)):
        if s.ann is not None:
            P = _set_ann(P, path, f(s.ann))
    return P


def _pin(ann: SessionEnv, M: int) -> SessionEnv:
    """Clock values above ``M`` are indistinguishable; pin them at ``M+1``."""
    top = Fraction(M + 1)
    return SessionEnv(
        tuple(
            (r, Configuration(Valuation({k: (v if v <= M else top) for k, v in c.nu.items()}), c.type))
            for r, c in ann.roles
        ),
        ann.queues,
    )


def _env_steps(ann: SessionEnv, depth: int):
    out = [ann]
    frontier = [ann]
    for _ in range(depth):
        nxt = []
        for d in frontier:
            nxt.extend(session_step(d))
        out.extend(nxt)
        frontier = nxt
    seen = set()
    for d in out:
        if d not in seen:
            seen.add(d)
            yield d


def subject_reduction_harness(
    P: Process, theta: dict, fuel: int = 50, seed: int = 0, mode: str = "exhaustive", depth: int = 2
) -> SRReport:
    """Check that every reduct of a well-typed closed process is well-typed.

    After an instantaneous step the scope owning the acting role gets its
    session environment from ``session_step`` applied at most ``depth``
    times; after a delay every scope environment is advanced by the delay.
    The Time Step side conditions (fully balanced, well-formed, delayable)
    are asserted at every delay.
    """
    theta = {k: as_time(v) for k, v in theta.items()}
    if not wf_process(P):
        return SRReport("rejected", message="process is not well-formed")
    first = typecheck(None, theta, P)
    if not first.accepted:
        rule, premise, _ = first.failing or ("?", "?", "")
        return SRReport("rejected", message=f"initial judgment rejected: {premise}")
    M = _bound(P, theta, SessionEnv())
    # pinning forgets clock differences; with difference atoms fuel alone bounds the search
    pin = not _diagonal(Gamma(), P, SessionEnv())
    rep = SRReport("ok")
    start = (tuple(sorted(theta.items())), P)
    seen = {start}
    frontier = deque([(start, 0)])
    rng = random.Random(seed)
    exhausted = False

    def violate(kind, label, state, detail=""):
        rep.violations.append(SRViolation(kind, label, state, detail))

    while frontier:
        (th_items, Q), d = frontier.popleft() if mode == "exhaustive" else frontier.pop()
        th = dict(th_items)
        if is_final(Q):
            continue
        succ = []
        for lab, th2, Q2 in reduce_step(th, Q, M):
            found = _match_action(lab, th2, Q2, depth)
            if found is None:
                violate("action-step", str(lab), str(Q2))
                continue
            succ.append((str(lab), th2, found))
            rep.steps += 1
        for t in delay_options(Q, M):
            anns = [s.ann for _, s in _scopes(Q) if s.ann is not None]
            for a in anns:
                if not (fully_balanced(a) and wf_session(a)):
                    violate("time-step-pre", f"delay {fmt_time(t)}", str(a), "Delta not fully balanced and wf")
                if not delayable(a):
                    violate("delayable", f"delay {fmt_time(t)}", str(a), "Delta not delayable")
            th2, Q2 = reduce_delay(th, Q, t)
            Q2 = _map_anns(Q2, lambda a: a.advance(t))
            rep.delays += 1
            after = [s.ann for _, s in _scopes(Q2) if s.ann is not None]
            if not all(fully_balanced(a) and wf_session(a) for a in after):
                violate("time-step", f"delay {fmt_time(t)}", str(Q2), "Delta+t not fully balanced and wf")
            r = typecheck(None, th2, Q2)
            if not r.accepted:
                violate("time-step", f"delay {fmt_time(t)}", str(Q2), r.failing[1] if r.failing else "")
                continue
            succ.append((f"delay {fmt_time(t)}", th2, Q2))
        if rep.violations:
            break
        if d >= fuel:
            if succ:
                exhausted = True
            continue
        if mode != "exhaustive" and succ:
            succ = [rng.choice(succ)]
        for _, th2, Q2 in succ:
            if pin:
                Q2 = _map_anns(Q2, lambda a: _pin(a, M))
                th2 = {k: (v if v <= M else Fraction(M + 1)) for k, v in th2.items()}
            key = (tuple(sorted(th2.items())), Q2)
            if key not in seen:
                seen.add(key)
                frontier.append((key, d + 1))
    rep.states = len(seen)
    if rep.violations:
        rep.status = "violation"
    elif exhausted:
        rep.status = "fuel"
    return rep


def _match_action(lab, theta, Q: Process, depth: int):
    """``Q`` with scope environments under which it re-typechecks, or None."""
    if lab.role is None:
        return Q if typecheck(None, theta, Q).accepted else None
    targets = [(path, s) for path, s in _scopes(Q) if lab.role in (s.p, s.q) and s.ann is not None]
    if not targets:
        return Q if typecheck(None, theta, Q).accepted else None
    path, s = targets[-1]
    for cand in _env_steps(s.ann, depth):
        if not (balanced(cand) and wf_session(cand)):
            continue
        Q2 = _set_ann(Q, path, cand)
        if typecheck(None, theta, Q2).accepted:
            return Q2
    return None
