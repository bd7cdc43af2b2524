"""Type-level semantics: configurations, queued configurations and systems.

A configuration ``(nu, S)`` acts on the options of ``S`` whose guard holds
now.  A queued configuration owns the FIFO of messages it has received but
not yet processed.  A system pairs two queued configurations; sending on one
side enqueues on the other.

Time steps on a queued configuration obey two side conditions:

* persistency: if some action is reachable by waiting before the delay, some
  action is still reachable by waiting after it;
* urgency: no instant strictly inside the delay lets the queue head be
  received.

Both are decided exactly from the interval of delays enabling each guard.
"""

from __future__ import annotations

import hashlib
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from .timelogic import (
    IntervalSet,
    Valuation,
    as_time,
    delay_candidates,
    delay_set,
    fmt_time,
    has_diagonal,
    region_canon,
    sat,
    show,
)
from .typesys import (
    NONE,
    RECV,
    SEND,
    Base,
    Choice,
    Delegate,
    SessionType,
    dual,
    head,
    is_end,
    sort_equiv,
    type_clocks,
    type_max_constant,
    unfold_equiv,
)
from .wellformed import wf_config

# ---------------------------------------------------------------------------
# messages and labels


@dataclass(frozen=True)
class Message:
    label: str
    payload: object = NONE

    def __post_init__(self):
        if not self.label:
            raise ValueError("empty message label")

    def __str__(self):
        if self.payload == NONE:
            return self.label
        from .surface import pretty_sort

        return f"{self.label}<{pretty_sort(self.payload)}>"

    def matches(self, other: "Message") -> bool:
        return self.label == other.label and sort_equiv(self.payload, other.payload)


@dataclass(frozen=True)
class SendM:
    msg: Message

    def __str__(self):
        return f"!{self.msg}"


@dataclass(frozen=True)
class RecvM:
    msg: Message

    def __str__(self):
        return f"?{self.msg}"


@dataclass(frozen=True)
class Tau:
    def __str__(self):
        return "tau"


@dataclass(frozen=True)
class DelayL:
    t: Fraction

    def __post_init__(self):
        object.__setattr__(self, "t", as_time(self.t))
        if self.t < 0:
            raise ValueError("negative delay")

    def __str__(self):
        return f"delay {fmt_time(self.t)}"


TAU = Tau()

# ---------------------------------------------------------------------------
# configurations


@dataclass(frozen=True)
class Configuration:
    nu: Valuation
    type: SessionType

    def __str__(self):
        return f"({self.nu!r}, {self.type})"


def config(S: SessionType, nu=None) -> Configuration:
    """``(nu, S)`` with ``nu`` extended by zeros to every clock of ``S``."""
    nu = Valuation(nu or {}).extend(type_clocks(S))
    return Configuration(nu, S)


def _options(c: Configuration):
    h = head(c.type)
    return h.options if isinstance(h, Choice) else ()


def cfg_actions(c: Configuration) -> list[tuple[object, Configuration]]:
    """Communication steps available now (rule act, through unfold)."""
    out = []
    for o in _options(c):
        if sat(c.nu, o.guard):
            m = Message(o.label, o.payload)
            lab = SendM(m) if o.direction == SEND else RecvM(m)
            out.append((lab, Configuration(c.nu.reset(o.resets), o.cont)))
    return out


def cfg_delay(c: Configuration, t) -> Configuration:
    return Configuration(c.nu.advance(t), c.type)


def enabling_delays(c: Configuration, direction: str | None = None, msg: Message | None = None) -> IntervalSet:
    """Delays after which some matching option becomes enabled."""
    out = IntervalSet()
    for o in _options(c):
        if direction is not None and o.direction != direction:
            continue
        if msg is not None and not msg.matches(Message(o.label, o.payload)):
            continue
        out = out.union(delay_set(c.nu, o.guard))
    return out


def future_enabled(c: Configuration) -> str:
    """``none``, ``send``, ``recv`` or ``both``."""
    s = bool(enabling_delays(c, SEND))
    r = bool(enabling_delays(c, RECV))
    return {(False, False): "none", (True, False): "send", (False, True): "recv", (True, True): "both"}[(s, r)]


def can_receive(c: Configuration, msg: Message) -> Configuration | None:
    for lab, c2 in cfg_actions(c):
        if isinstance(lab, RecvM) and lab.msg.matches(msg):
            return c2
    return None


# ---------------------------------------------------------------------------
# queued configurations


@dataclass(frozen=True)
class QueuedConfig:
    cfg: Configuration
    queue: tuple = ()

    def __str__(self):
        return f"({self.cfg.nu!r}, {self.cfg.type}, [{'; '.join(map(str, self.queue))}])"


def time_ok(q: QueuedConfig, t) -> bool:
    t = as_time(t)
    if t == 0:
        return True
    c = q.cfg
    if future_enabled(c) != "none" and future_enabled(cfg_delay(c, t)) == "none":
        return False
    if q.queue:
        window = IntervalSet.below(t, False)
        if enabling_delays(c, RECV, q.queue[0]).intersect(window):
            return False
    return True


def qc_step(q: QueuedConfig, label) -> QueuedConfig | None:
    match label:
        case SendM(m):
            for lab, c2 in cfg_actions(q.cfg):
                if isinstance(lab, SendM) and lab.msg.matches(m):
                    return QueuedConfig(c2, q.queue)
            return None
        case Tau():
            if not q.queue:
                return None
            c2 = can_receive(q.cfg, q.queue[0])
            return None if c2 is None else QueuedConfig(c2, q.queue[1:])
        case RecvM(m):
            return QueuedConfig(q.cfg, q.queue + (m,))
        case DelayL(t):
            return QueuedConfig(cfg_delay(q.cfg, t), q.queue) if time_ok(q, t) else None
    raise TypeError(f"not a transition label: {label!r}")


def is_final_qc(q: QueuedConfig) -> bool:
    return not q.queue and is_end(q.cfg.type)


# ---------------------------------------------------------------------------
# systems


@dataclass(frozen=True)
class SystemState:
    left: QueuedConfig
    right: QueuedConfig

    def __str__(self):
        return f"{self.left} | {self.right}"

    def digest(self) -> str:
        return hashlib.sha256(str(self).encode()).hexdigest()[:12]


def initial_system(S1: SessionType, S2: SessionType | None = None) -> SystemState:
    S2 = dual(S1) if S2 is None else S2
    return SystemState(QueuedConfig(config(S1)), QueuedConfig(config(S2)))


def sys_delay(s: SystemState, t) -> SystemState | None:
    """Rule wait: both sides let ``t`` pass."""
    l = qc_step(s.left, DelayL(t))
    r = qc_step(s.right, DelayL(t))
    if l is None or r is None:
        return None
    return SystemState(l, r)


def sys_steps(s: SystemState, delays=()) -> list[tuple[str, object, SystemState]]:
    """All tau steps plus a joint delay for each requested ``t``.

    Each entry is ``(side, label, state)`` with side ``left``, ``right`` or
    ``joint``; communication labels record the send that caused them.
    """
    out = []
    for side, me, other in (("left", s.left, s.right), ("right", s.right, s.left)):
        for lab, c2 in cfg_actions(me.cfg):
            if isinstance(lab, SendM):
                a = QueuedConfig(c2, me.queue)
                b = qc_step(other, RecvM(lab.msg))
                out.append((side, lab, SystemState(a, b) if side == "left" else SystemState(b, a)))
        a = qc_step(me, TAU)
        if a is not None:
            lab = RecvM(me.queue[0])
            out.append((side, lab, SystemState(a, other) if side == "left" else SystemState(other, a)))
    for t in delays:
        t = as_time(t)
        if t > 0:
            s2 = sys_delay(s, t)
            if s2 is not None:
                out.append(("joint", DelayL(t), s2))
    return out


def is_final_sys(s: SystemState) -> bool:
    return is_final_qc(s.left) and is_final_qc(s.right)


def system_bound(s: SystemState) -> int:
    return max(type_max_constant(s.left.cfg.type), type_max_constant(s.right.cfg.type))


def _joint_values(s: SystemState) -> dict:
    out = {f"L.{k}": v for k, v in s.left.cfg.nu.items()}
    out.update({f"R.{k}": v for k, v in s.right.cfg.nu.items()})
    return out


def canon_system(s: SystemState, M: int) -> SystemState:
    """Replace both valuations by the representative of their joint region."""
    diag = has_diagonal(s.left.cfg.type) or has_diagonal(s.right.cfg.type)
    vals = region_canon(_joint_values(s), M, diag)
    nl = Valuation({k[2:]: v for k, v in vals.items() if k.startswith("L.")})
    nr = Valuation({k[2:]: v for k, v in vals.items() if k.startswith("R.")})
    return SystemState(
        QueuedConfig(Configuration(nl, s.left.cfg.type), s.left.queue),
        QueuedConfig(Configuration(nr, s.right.cfg.type), s.right.queue),
    )


def system_delays(s: SystemState, M: int) -> list[Fraction]:
    return delay_candidates(_joint_values(s).values(), M)


def can_progress(s: SystemState, M: int) -> bool:
    """Some delay (possibly zero) followed by a tau step is possible."""
    for t in system_delays(s, M):
        s2 = s if t == 0 else sys_delay(s, t)
        if s2 is not None and any(side != "joint" for side, _, _ in sys_steps(s2)):
            return True
    return False


# ---------------------------------------------------------------------------
# compatibility


def compatible(q1: QueuedConfig, q2: QueuedConfig) -> bool:
    """Greatest-fixpoint check; revisiting a pair counts as success."""
    seen = set()

    def go(a: QueuedConfig, b: QueuedConfig) -> bool:
        if (a, b) in seen:
            return True
        seen.add((a, b))
        if a.queue and b.queue:
            return False
        if a.queue:
            c = can_receive(a.cfg, a.queue[0])
            return c is not None and go(QueuedConfig(c, a.queue[1:]), b)
        if b.queue:
            c = can_receive(b.cfg, b.queue[0])
            return c is not None and go(a, QueuedConfig(c, b.queue[1:]))
        return a.cfg.nu == b.cfg.nu and unfold_equiv(a.cfg.type, dual(b.cfg.type))

    return go(q1, q2)


# ---------------------------------------------------------------------------
# progress exploration


@dataclass
class Step:
    k: int
    side: str
    label: str
    digest: str

    def line(self) -> str:
        return f"STEP {self.k}: {self.side} {self.label} :: {self.digest}"


@dataclass
class ProgressReport:
    status: str  # "ok", "stuck", "violation" or "rejected"
    states: int = 0
    depth: int = 0
    stuck: list = field(default_factory=list)  # (state, trace)
    violations: list = field(default_factory=list)  # (kind, state, trace)
    message: str = ""

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "states": self.states,
            "depth": self.depth,
            "message": self.message,
            "stuck": [{"state": str(s), "trace": [x.line() for x in tr]} for s, tr in self.stuck],
            "violations": [{"kind": k, "state": str(s), "trace": [x.line() for x in tr]} for k, s, tr in self.violations],
        }


def _check_state(s: SystemState) -> str | None:
    if not compatible(s.left, s.right):
        return "compatibility"
    for q in (s.left, s.right):
        if not wf_config(q.cfg.nu, q.cfg.type):
            return "well-formedness"
    return None


def progress_explore(
    S: SessionType,
    horizon: int = 40,
    mode: str = "exhaustive",
    seed: int = 0,
    override_wf: bool = False,
    partner: SessionType | None = None,
) -> ProgressReport:
    """Search ``(nu0, S, []) | (nu0, dual S, [])`` for stuck states.

    ``horizon`` bounds the number of transitions along any path.  Delays are
    drawn from the delay candidates of the current joint region, and states
    are identified up to region equivalence.  Unless ``override_wf`` is set,
    compatibility and well-formedness are asserted at every visited state.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if mode not in ("exhaustive", "random"):
        raise ValueError(f"unknown mode {mode!r}")
    s0 = initial_system(S, partner)
    if not override_wf and not wf_config(s0.left.cfg.nu, S):
        return ProgressReport("rejected", message="type is not well-formed against nu0")
    M = system_bound(s0)
    s0 = canon_system(s0, M)
    rep = ProgressReport("ok")
    parent = {s0: None}

    def trace(s):
        chain = []
        while parent[s] is not None:
            prev, side, lab = parent[s]
            chain.append((side, lab, s))
            s = prev
        chain.reverse()
        return [Step(i + 1, side, lab, st.digest()) for i, (side, lab, st) in enumerate(chain)]

    def visit(s) -> bool:
        """Record problems with ``s``; False stops a random walk."""
        if not override_wf:
            bad = _check_state(s)
            if bad:
                rep.violations.append((bad, s, trace(s)))
                return False
        if is_final_sys(s):
            return False
        if not can_progress(s, M):
            rep.stuck.append((s, trace(s)))
            return False
        return True

    def succ(s):
        for side, lab, s2 in sys_steps(s, system_delays(s, M)):
            yield side, str(lab), canon_system(s2, M)

    if mode == "exhaustive":
        frontier = deque([(s0, 0)])
        while frontier:
            s, d = frontier.popleft()
            rep.depth = max(rep.depth, d)
            if not visit(s) or d >= horizon:
                continue
            for side, lab, s2 in succ(s):
                if s2 not in parent:
                    parent[s2] = (s, side, lab)
                    frontier.append((s2, d + 1))
    else:
        rng = random.Random(seed)
        s = s0
        for d in range(horizon + 1):
            rep.depth = d
            if not visit(s) or d == horizon:
                break
            options = list(succ(s))
            side, lab, s2 = rng.choice(options)
            if s2 not in parent:
                parent[s2] = (s, side, lab)
            s = s2
    rep.states = len(parent)
    if rep.violations:
        rep.status = "violation"
    elif rep.stuck:
        rep.status = "stuck"
    return rep


# ---------------------------------------------------------------------------
# session environments


def value_sort(v):
    """The base sort of a runtime value, or None for a session reference."""
    from .calculus import BoolV, NatV, StringV, UnitV
    from .typesys import BOOL, NAT, STRING

    match v:
        case NatV():
            return NAT
        case BoolV():
            return BOOL
        case StringV():
            return STRING
        case UnitV():
            return NONE
    return None


@dataclass(frozen=True)
class SessionEnv:
    """Roles mapped to configurations and queues ``(src, dst)`` to messages.

    The queue ``(q, p)`` holds what ``q`` sent and ``p`` has yet to read.
    """

    roles: tuple = ()  # ((name, Configuration), ...) sorted by name
    queues: tuple = ()  # (((src, dst), (Message, ...)), ...) sorted

    @classmethod
    def make(cls, roles: dict | None = None, queues: dict | None = None) -> "SessionEnv":
        return cls(
            tuple(sorted((roles or {}).items())),
            tuple(sorted((k, tuple(v)) for k, v in (queues or {}).items())),
        )

    @classmethod
    def for_scope(cls, p, Sp, nup, q, Sq, nuq, queues: dict | None = None) -> "SessionEnv":
        qs = {(q, p): (), (p, q): ()}
        qs.update(queues or {})
        return cls.make({p: config(Sp, nup), q: config(Sq, nuq)}, qs)

    def role_map(self) -> dict:
        return dict(self.roles)

    def queue_map(self) -> dict:
        return dict(self.queues)

    def role_names(self) -> frozenset:
        return frozenset(r for r, _ in self.roles)

    def queue_keys(self) -> frozenset:
        return frozenset(k for k, _ in self.queues)

    def get(self, p) -> Configuration | None:
        return self.role_map().get(p)

    def queue(self, key) -> tuple | None:
        return self.queue_map().get(key)

    def is_empty(self) -> bool:
        return not self.roles and not self.queues

    def with_role(self, p, c: Configuration) -> "SessionEnv":
        m = self.role_map()
        m[p] = c
        return SessionEnv.make(m, self.queue_map())

    def without_role(self, p) -> "SessionEnv":
        m = self.role_map()
        m.pop(p, None)
        return SessionEnv.make(m, self.queue_map())

    def with_queue(self, key, items) -> "SessionEnv":
        m = self.queue_map()
        m[key] = tuple(items)
        return SessionEnv.make(self.role_map(), m)

    def without_queue(self, key) -> "SessionEnv":
        m = self.queue_map()
        m.pop(key, None)
        return SessionEnv.make(self.role_map(), m)

    def restrict(self, roles, queues) -> "SessionEnv":
        return SessionEnv.make(
            {r: c for r, c in self.roles if r in roles}, {k: v for k, v in self.queues if k in queues}
        )

    def union(self, other: "SessionEnv") -> "SessionEnv":
        if self.role_names() & other.role_names() or self.queue_keys() & other.queue_keys():
            raise ValueError("session environments overlap")
        return SessionEnv.make({**self.role_map(), **other.role_map()}, {**self.queue_map(), **other.queue_map()})

    def advance(self, t) -> "SessionEnv":
        t = as_time(t)
        if t == 0:
            return self
        return SessionEnv(tuple((r, cfg_delay(c, t)) for r, c in self.roles), self.queues)

    def values(self) -> list[Fraction]:
        return [v for _, c in self.roles for _, v in c.nu.items()]

    def max_constant(self) -> int:
        return max((type_max_constant(c.type) for _, c in self.roles), default=0)

    def __str__(self):
        parts = [f"{r}:{c}" for r, c in self.roles]
        parts += [f"{s}{d}:[{'; '.join(map(str, items))}]" for (s, d), items in self.queues]
        return ", ".join(parts) if parts else "."


def session_step(delta: SessionEnv) -> list[SessionEnv]:
    """One-step reductions of a session environment (send or dequeue)."""
    out = []
    roles = delta.role_map()
    queues = delta.queue_map()
    for p, c in delta.roles:
        for lab, c2 in cfg_actions(c):
            if isinstance(lab, SendM):
                for (src, dst), items in queues.items():
                    if src == p:
                        out.append(delta.with_role(p, c2).with_queue((src, dst), items + (lab.msg,)))
        for (src, dst), items in queues.items():
            if dst == p and items:
                c2 = can_receive(c, items[0])
                if c2 is not None:
                    out.append(delta.with_role(p, c2).with_queue((src, dst), items[1:]))
    return out
