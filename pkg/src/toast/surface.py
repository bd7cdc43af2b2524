"""Textual syntax: lexer, parser and pretty printers.

A source file is a sequence of declarations::

    type S = { !data<string>(x<3).end, ?timeout(x>4).end };
    process P = p!data("hi").0;
    system Sys = new (p q) (P | Q | qp:[] | pq:[]) with p: S, q: dual S, timers {z: 0};
    check C = P with p: S @ {x: 0}, timers {z: 0};

``//`` and ``/* */`` comments are allowed anywhere.  Every printer in this
module emits text that parses back to an identical tree.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction

from . import timelogic as tl
from .calculus import (
    INF,
    Alt,
    BoolV,
    Branch,
    Call,
    Deadline,
    Def,
    Delay,
    DelayC,
    If,
    NatV,
    Par,
    Process,
    Queue,
    Scope,
    Send,
    SessionRef,
    SetTimer,
    StringV,
    Term,
    Timeout,
    UNIT,
    UnitV,
    Value,
    delay,
)
from .timelogic import Constraint, Valuation, fmt_time, show
from .typesys import (
    BASE_SORTS,
    NONE,
    RECV,
    SEND,
    Base,
    Choice,
    Delegate,
    End,
    Option,
    Rec,
    SessionType,
    Var,
    dual,
    free_names,
    is_contractive,
)

# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class Diagnostic:
    severity: str
    span: tuple[int, int]  # byte offsets into the UTF-8 source
    message: str
    rule: str | None = None

    def render(self, text: str, path: str = "<input>") -> str:
        raw = text.encode()
        line = raw[: self.span[0]].count(b"\n") + 1
        col = self.span[0] - (raw.rfind(b"\n", 0, self.span[0]) + 1) + 1
        return f"{path}:{line}:{col}: {self.severity}: {self.message}"

    def to_json(self) -> dict:
        return {"severity": self.severity, "span": list(self.span), "message": self.message}


class ParseError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(d.message for d in diagnostics))


# ---------------------------------------------------------------------------
# lexer

KEYWORDS = {
    "type", "process", "system", "check", "end", "rec", "dual", "true", "false", "after",
    "set", "delay", "if", "else", "def", "in", "new", "with", "timers", "inf",
}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|//[^\n]*|/\*.*?\*/)
  | (?P<num>\d+)
  | (?P<str>"(?:[^"\\]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>&&|\|\||<=|>=|!=|->|[{}()\[\]<>=!?.,;:|/\-@])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass
class Tok:
    kind: str  # num, str, ident, kw, op, eof
    text: str
    start: int  # character offsets
    end: int


def lex(text: str) -> list[Tok]:
    toks = []
    i = 0
    n = len(text)
    while i < n:
        if text.startswith("/*", i) and text.find("*/", i + 2) < 0:
            raise ParseError([Diagnostic("error", _bspan(text, i, n), "unterminated comment")])
        m = _TOKEN.match(text, i)
        if not m:
            raise ParseError([Diagnostic("error", _bspan(text, i, i + 1), f"unexpected character {text[i]!r}")])
        kind = m.lastgroup
        if kind != "ws":
            t = m.group()
            if kind == "ident" and t in KEYWORDS:
                kind = "kw"
            toks.append(Tok(kind, t, i, m.end()))
        i = m.end()
    toks.append(Tok("eof", "", n, n))
    return toks


def _bspan(text: str, a: int, b: int) -> tuple[int, int]:
    return (len(text[:a].encode()), len(text[:b].encode()))


# ---------------------------------------------------------------------------
# declarations


@dataclass
class RoleBinding:
    role: str
    type: SessionType
    valuation: Valuation | None = None


@dataclass
class System:
    """A closed composition plus the types and timers it is checked with."""

    process: Process
    timers: dict
    bindings: list[RoleBinding] = field(default_factory=list)


@dataclass
class Check:
    """An open judgment ``., theta |- P |> Delta``."""

    process: Process
    timers: dict
    bindings: list[RoleBinding] = field(default_factory=list)


@dataclass
class SourceFile:
    types: dict = field(default_factory=dict)
    processes: dict = field(default_factory=dict)
    systems: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    order: list = field(default_factory=list)  # (kind, name)
    spans: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = lex(text)
        self.i = 0

    # -- helpers
    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def peek(self, k=1) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str, kind: str | None = None) -> bool:
        t = self.tok
        return t.text == text and (kind is None or t.kind == kind) and t.kind in ("op", "kw")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def error(self, msg: str, tok: Tok | None = None):
        tok = tok or self.tok
        end = tok.end if tok.end > tok.start else tok.start
        raise ParseError([Diagnostic("error", _bspan(self.text, tok.start, end), msg)])

    def expect(self, text: str) -> Tok:
        if not self.at(text):
            found = self.tok.text or "end of input"
            self.error(f"expected {text!r} but found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self, what="identifier") -> str:
        t = self.tok
        if t.kind != "ident":
            self.error(f"expected {what} but found {t.text or 'end of input'!r}")
        self.i += 1
        return t.text

    def nat(self) -> int:
        t = self.tok
        if t.kind != "num":
            self.error(f"expected a natural number but found {t.text or 'end of input'!r}")
        self.i += 1
        return int(t.text)

    def time(self) -> Fraction:
        n = Fraction(self.nat())
        if self.at("/") and self.peek().kind == "num":
            self.i += 1
            d = self.nat()
            if d == 0:
                self.error("zero denominator")
            n = n / d
        return n

    # -- constraints
    def constraint(self) -> Constraint:
        c = self.conj()
        while self.accept("||"):
            c = tl.or_(c, self.conj())
        return c

    def conj(self) -> Constraint:
        c = self.unary()
        while self.accept("&&"):
            c = tl.And(c, self.unary())
        return c

    def unary(self) -> Constraint:
        if self.accept("!"):
            return tl.Not(self.unary())
        if self.at("("):
            self.i += 1
            c = self.constraint()
            self.expect(")")
            return c
        return self.atom()

    _REL = ("<", "<=", ">", ">=", "=", "!=")

    def relop(self) -> str:
        t = self.tok
        if t.kind == "op" and t.text in self._REL:
            self.i += 1
            return t.text
        self.error(f"expected a comparison but found {t.text or 'end of input'!r}")

    def atom(self) -> Constraint:
        t = self.tok
        if self.accept("true"):
            return tl.TRUE
        if self.accept("false"):
            return tl.FALSE
        if t.kind == "num":
            n = self.nat()
            op = self.relop()
            if op not in ("<", "<="):
                self.error("a constant on the left must be followed by < or <=", t)
            x = self.ident("clock")
            lower = tl.Gt(x, n) if op == "<" else tl.ge(x, n)
            if self.tok.kind == "op" and self.tok.text in ("<", "<="):
                op2 = self.relop()
                m = self.nat()
                return tl.And(lower, tl.lt(x, m) if op2 == "<" else tl.le(x, m))
            return lower
        if t.kind == "ident":
            x = self.ident("clock")
            if self.accept("-"):
                y = self.ident("clock")
                op = self.relop()
                n = self.nat()
                return {
                    ">": lambda: tl.DiffGt(x, y, n),
                    "=": lambda: tl.DiffEq(x, y, n),
                    "<": lambda: tl.diff_lt(x, y, n),
                    "<=": lambda: tl.diff_le(x, y, n),
                    ">=": lambda: tl.diff_ge(x, y, n),
                    "!=": lambda: tl.Not(tl.DiffEq(x, y, n)),
                }[op]()
            op = self.relop()
            n = self.nat()
            return {
                ">": lambda: tl.Gt(x, n),
                "=": lambda: tl.Eq(x, n),
                "<": lambda: tl.lt(x, n),
                "<=": lambda: tl.le(x, n),
                ">=": lambda: tl.ge(x, n),
                "!=": lambda: tl.Not(tl.Eq(x, n)),
            }[op]()
        self.error(f"expected a clock constraint but found {t.text or 'end of input'!r}")

    # -- types
    def stype(self) -> SessionType:
        t = self.tok
        if self.accept("end"):
            return End()
        if self.accept("rec"):
            a = self.ident("recursion variable")
            self.expect(".")
            return Rec(a, self.stype())
        if self.accept("dual"):
            inner = self.stype()
            return _DualOf(inner) if _unresolved(inner) else dual(inner)
        if self.at("("):
            self.i += 1
            s = self.stype()
            self.expect(")")
            return s
        if self.at("{"):
            self.i += 1
            opts = [self.option()]
            while self.accept(","):
                opts.append(self.option())
            self.expect("}")
            return self._choice(opts, t)
        if self.at("!") or self.at("?"):
            return self._choice([self.option()], t)
        if t.kind == "ident":
            self.i += 1
            return Var(t.text)
        self.error(f"expected a session type but found {t.text or 'end of input'!r}")

    def _choice(self, opts, t) -> Choice:
        try:
            return Choice(tuple(opts))
        except ValueError as e:
            self.error(str(e), t)

    def option(self) -> Option:
        t = self.tok
        if self.accept("!"):
            d = SEND
        elif self.accept("?"):
            d = RECV
        else:
            self.error(f"expected '!' or '?' to start an option but found {t.text or 'end of input'!r}")
        label = self.ident("label")
        payload = NONE
        if self.accept("<"):
            payload = self.sort()
            self.expect(">")
        guard, resets = tl.TRUE, frozenset()
        if self.accept("("):
            if self.at("{"):
                resets = self.clockset()
            else:
                guard = self.constraint()
                if self.accept(","):
                    resets = self.clockset()
            self.expect(")")
        cont = self.stype() if self.accept(".") else End()
        return Option(d, label, payload, guard, resets, cont)

    def clockset(self) -> frozenset:
        self.expect("{")
        out = []
        if not self.at("}"):
            out.append(self.ident("clock"))
            while self.accept(","):
                out.append(self.ident("clock"))
        self.expect("}")
        return frozenset(out)

    def sort(self):
        t = self.tok
        if t.kind == "ident" and t.text in BASE_SORTS:
            self.i += 1
            return BASE_SORTS[t.text]
        if self.accept("("):
            c = self.constraint()
            self.expect(",")
            s = self.stype()
            self.expect(")")
            return Delegate(c, s)
        self.error(f"expected a payload sort but found {t.text or 'end of input'!r}")

    # -- values
    def value(self) -> Value:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return NatV(int(t.text))
        if t.kind == "str":
            self.i += 1
            return StringV(json.loads(t.text))
        if self.accept("true"):
            return BoolV(True)
        if self.accept("false"):
            return BoolV(False)
        if self.at("(") and self.peek().text == ")":
            self.i += 2
            return UNIT
        if t.kind == "ident":
            self.i += 1
            return SessionRef(t.text)
        self.error(f"expected a value but found {t.text or 'end of input'!r}")

    # -- processes
    def process(self) -> Process:
        p = self.seq()
        while self.accept("|"):
            p = Par(p, self.seq())
        return p

    def deadline(self) -> Deadline | None:
        if self.at("<") and self.peek().text == "inf":
            self.i += 2
            self.expect(">")
            return INF
        if self.accept("<"):
            t = self.tok
            n = self.time()
            if n == 0:
                self.error("deadline <0 is empty; use <=0", t)
            return Deadline("<", n)
        if self.accept("<="):
            return Deadline("<=", self.time())
        return None

    def seq(self) -> Process:
        t = self.tok
        if t.kind == "num" and t.text == "0":
            self.i += 1
            return Term()
        if self.accept("("):
            p = self.process()
            self.expect(")")
            return p
        if self.accept("set"):
            self.expect("(")
            x = self.ident("timer")
            self.expect(")")
            self.expect(".")
            return SetTimer(x, self.seq())
        if self.accept("if"):
            self.expect("(")
            c = self.constraint()
            self.expect(")")
            a = self.seq()
            self.expect("else")
            return If(c, a, self.seq())
        if self.accept("delay"):
            self.expect("(")
            if self.tok.kind == "num" and self.peek().text in (")", "/"):
                amount = self.time()
                self.expect(")")
                self.expect(".")
                return Delay(amount, self.seq()) if amount else delay(0, self.seq())
            c = self.constraint()
            if len(tl.clocks_of(c)) > 1:
                self.error("a delay constraint may mention only one variable", t)
            self.expect(")")
            self.expect(".")
            return DelayC(c, self.seq())
        if self.accept("def"):
            name = self.ident("process variable")
            self.expect("(")
            vs, rs = self.params()
            self.expect(")")
            self.expect("=")
            body = self.process()
            self.expect("in")
            return Def(name, vs, rs, body, self.seq())
        if self.accept("new"):
            self.expect("(")
            p = self.ident("role")
            q = self.ident("role")
            self.expect(")")
            return Scope(p, q, self.seq())
        if t.kind == "ident":
            nxt = self.peek()
            if nxt.text == "!":
                return self.send()
            if nxt.text == "?":
                return self.receive()
            if nxt.text == "(":
                return self.call()
            if nxt.text in (":", "->"):
                return self.queue()
            self.i += 1
            return _Ref(t.text, t.start, t.end)
        self.error(f"expected a process but found {t.text or 'end of input'!r}")

    def params(self):
        vs, rs = [], []
        if self.tok.kind == "ident":
            vs.append(self.ident())
            while self.accept(","):
                vs.append(self.ident())
        if self.accept(";"):
            if self.tok.kind == "ident":
                rs.append(self.ident())
                while self.accept(","):
                    rs.append(self.ident())
        return tuple(vs), tuple(rs)

    def call(self) -> Call:
        name = self.ident()
        self.expect("(")
        vs, rs = [], []
        if not self.at(")") and not self.at(";"):
            vs.append(self.value())
            while self.accept(","):
                vs.append(self.value())
        if self.accept(";"):
            rs.append(self.ident("role"))
            while self.accept(","):
                rs.append(self.ident("role"))
        self.expect(")")
        return Call(name, tuple(vs), tuple(rs))

    def send(self) -> Send:
        p = self.ident("role")
        self.expect("!")
        l = self.ident("label")
        v = UNIT
        if self.accept("("):
            v = UNIT if self.at(")") else self.value()
            self.expect(")")
        self.expect(".")
        return Send(p, l, v, self.seq())

    def alt(self, bare: bool) -> Alt:
        l = self.ident("label")
        b = None
        if self.accept("("):
            b = self.ident("binder")
            self.expect(")")
        self.expect(":")
        return Alt(l, b, self.seq() if bare else self.process())

    def receive(self) -> Process:
        start = self.tok
        p = self.ident("role")
        self.expect("?")
        e = self.deadline()
        if self.accept("{"):
            alts = [self.alt(False)]
            while self.accept(","):
                alts.append(self.alt(False))
            self.expect("}")
        else:
            alts = [self.alt(True)]
        labels = [a.label for a in alts]
        if len(set(labels)) != len(labels):
            self.error(f"duplicate branch labels {labels}", start)
        if self.accept("after"):
            t = self.tok
            e2 = self.deadline()
            if e2 is not None and e is not None and e2 != e:
                self.error("conflicting deadlines", t)
            e = e2 or e
            if e is None or e.infinite:
                self.error("a timeout needs a finite deadline", t)
            return Timeout(p, e, tuple(alts), self.seq())
        return Branch(p, e or INF, tuple(alts))

    def queue(self) -> Queue:
        t = self.tok
        name = self.ident("queue")
        if self.accept("->"):
            src, dst = name, self.ident("role")
        else:
            if len(name) != 2:
                self.error("write a queue as pq:[...] (one-letter roles) or p->q:[...]", t)
            src, dst = name[0], name[1]
        self.expect(":")
        self.expect("[")
        items = []
        if not self.at("]"):
            items.append(self.item())
            while self.accept(","):
                items.append(self.item())
        self.expect("]")
        return Queue(src, dst, tuple(items))

    def item(self):
        l = self.ident("label")
        if self.at(",") or self.at("]"):
            return (l, UNIT)
        return (l, self.value())

    # -- declarations
    def valuation(self) -> dict:
        self.expect("{")
        out = {}
        if not self.at("}"):
            while True:
                x = self.ident("clock")
                self.expect(":")
                out[x] = self.time()
                if not self.accept(","):
                    break
        self.expect("}")
        return out

    def bindings(self):
        roles, timers = [], {}
        if not self.accept("with"):
            return roles, timers
        while True:
            if self.accept("timers"):
                timers.update(self.valuation())
            else:
                r = self.ident("role")
                self.expect(":")
                s = self.stype()
                nu = None
                if self.accept("@"):
                    nu = Valuation(self.valuation())
                roles.append(RoleBinding(r, s, nu))
            if not self.accept(","):
                break
        return roles, timers

    def file(self) -> tuple[list, list[Diagnostic]]:
        decls, diags = [], []
        while self.tok.kind != "eof":
            start = self.tok
            try:
                kind = self.tok.text
                if self.tok.kind != "kw" or kind not in ("type", "process", "system", "check"):
                    self.error(f"expected a declaration (type, process, system, check) but found {kind!r}")
                self.i += 1
                name = self.ident("name")
                self.expect("=")
                if kind == "type":
                    body = self.stype()
                    extra = None
                else:
                    body = self.process()
                    extra = self.bindings() if kind in ("system", "check") else None
                self.expect(";")
                decls.append((kind, name, body, extra, _bspan(self.text, start.start, self.toks[self.i - 1].end)))
            except ParseError as e:
                diags.extend(e.diagnostics)
                # recover at the next declaration boundary
                while self.tok.kind != "eof" and not self.at(";"):
                    self.i += 1
                self.accept(";")
        return decls, diags


@dataclass(frozen=True)
class _Ref(Process):
    """A reference to a declared process, replaced during resolution."""

    name: str
    start: int = 0
    end: int = 0


@dataclass(frozen=True)
class _DualOf(SessionType):
    """``dual T`` over a type name, applied once the name is resolved."""

    inner: SessionType


def _unresolved(s) -> bool:
    try:
        return bool(free_names(s))
    except TypeError:
        return True


# ---------------------------------------------------------------------------
# resolution of names across declarations


def _resolve_type(s: SessionType, types: dict, bound=frozenset(), stack=()) -> SessionType:
    match s:
        case End():
            return s
        case Var(a):
            if a in bound:
                return s
            if a in types:
                if a in stack:
                    raise ValueError(f"type {a} refers to itself; use rec")
                return types[a]
            raise ValueError(f"unbound type name {a}")
        case _DualOf(inner):
            return dual(_resolve_type(inner, types, bound, stack))
        case Rec(a, body):
            return Rec(a, _resolve_type(body, types, bound | {a}, stack))
        case Choice(opts):
            out = []
            for o in opts:
                pay = o.payload
                if isinstance(pay, Delegate):
                    pay = Delegate(pay.init, _resolve_type(pay.protocol, types, frozenset(), stack))
                out.append(Option(o.direction, o.label, pay, o.guard, o.resets, _resolve_type(o.cont, types, bound, stack)))
            return Choice(tuple(out))
    raise TypeError(s)


def _resolve_proc(P: Process, procs: dict) -> Process:
    match P:
        case _Ref(name):
            if name not in procs:
                raise ValueError(f"unknown process {name}")
            return procs[name]
        case Term() | Call() | Queue():
            return P
        case SetTimer(x, b):
            return SetTimer(x, _resolve_proc(b, procs))
        case Send(p, l, v, b):
            return Send(p, l, v, _resolve_proc(b, procs))
        case Branch(p, e, alts):
            return Branch(p, e, tuple(Alt(a.label, a.binder, _resolve_proc(a.body, procs)) for a in alts))
        case Timeout(p, e, alts, after):
            return Timeout(
                p, e, tuple(Alt(a.label, a.binder, _resolve_proc(a.body, procs)) for a in alts), _resolve_proc(after, procs)
            )
        case If(c, a, b):
            return If(c, _resolve_proc(a, procs), _resolve_proc(b, procs))
        case DelayC(c, b):
            return DelayC(c, _resolve_proc(b, procs))
        case Delay(t, b):
            return Delay(t, _resolve_proc(b, procs))
        case Def(x, vs, rs, body, scope):
            return Def(x, vs, rs, _resolve_proc(body, procs), _resolve_proc(scope, procs))
        case Scope(p, q, body, ann):
            return Scope(p, q, _resolve_proc(body, procs), ann)
        case Par(l, r):
            return Par(_resolve_proc(l, procs), _resolve_proc(r, procs))
    raise TypeError(P)


def walk_active(P: Process):
    """Nodes in parallel position, looking through scopes and definitions."""
    match P:
        case Par(l, r):
            yield from walk_active(l)
            yield from walk_active(r)
        case Scope(_, _, body, _):
            yield from walk_active(body)
        case Def(_, _, _, _, scope):
            yield from walk_active(scope)
        case _:
            yield P


def annotate_scopes(P: Process, bindings: list[RoleBinding]) -> Process:
    """Attach role types from ``bindings`` to the scopes that bind those roles."""
    from .semantics import Message, SessionEnv, value_sort

    by_role = {b.role: b for b in bindings}

    def queues(body):
        out = {}
        for n in walk_active(body):
            if isinstance(n, Queue) and n.items:
                sorts = [value_sort(v) for _, v in n.items]
                if None in sorts:
                    raise ValueError("a queued session reference needs an explicit environment")
                out[(n.src, n.dst)] = tuple(Message(l, s) for (l, _), s in zip(n.items, sorts))
        return out

    def go(P):
        match P:
            case Scope(p, q, body, ann):
                if p in by_role and q in by_role:
                    bp, bq = by_role[p], by_role[q]
                    qs = {k: v for k, v in queues(body).items() if set(k) == {p, q}}
                    ann = SessionEnv.for_scope(p, bp.type, bp.valuation, q, bq.type, bq.valuation, qs)
                return Scope(p, q, go(body), ann)
            case Par(l, r):
                return Par(go(l), go(r))
            case Def(x, vs, rs, body, scope):
                return Def(x, vs, rs, body, go(scope))
        return P

    return go(P)


def parse(text: str) -> SourceFile:
    """Parse a whole source file, raising :class:`ParseError` with every diagnostic."""
    p = _Parser(text)
    decls, diags = p.file()
    sf = SourceFile()
    for kind, name, body, extra, span in decls:
        try:
            if name in sf.spans:
                raise ValueError(f"{name} is declared twice")
            sf.spans[name] = span
            if kind == "type":
                s = _resolve_type(body, sf.types, stack=(name,))
                if free_names(s):
                    raise ValueError(f"type {name} has free variables {sorted(free_names(s))}")
                if not is_contractive(s):
                    raise ValueError(f"type {name} is not contractive")
                sf.types[name] = s
            elif kind == "process":
                sf.processes[name] = _resolve_proc(body, sf.processes)
            else:
                roles, timers = extra
                roles = [RoleBinding(b.role, _closed_type(b.type, sf.types), b.valuation) for b in roles]
                proc = _resolve_proc(body, sf.processes)
                if kind == "system":
                    sf.systems[name] = System(annotate_scopes(proc, roles), timers, roles)
                else:
                    sf.checks[name] = Check(proc, timers, roles)
            sf.order.append((kind, name))
        except ValueError as e:
            diags.append(Diagnostic("error", span, str(e)))
    if diags:
        raise ParseError(diags)
    return sf


def _closed_type(s, types):
    s = _resolve_type(s, types)
    if free_names(s) or not is_contractive(s):
        raise ValueError("role types must be closed and contractive")
    return s


def _single(text: str, rule):
    p = _Parser(text)
    out = rule(p)
    if p.tok.kind != "eof":
        p.error(f"unexpected trailing input {p.tok.text!r}")
    return out


def parse_constraint(text: str) -> Constraint:
    return _single(text, _Parser.constraint)


def parse_type(text: str, types: dict | None = None) -> SessionType:
    s = _single(text, _Parser.stype)
    try:
        s = _resolve_type(s, types or {})
    except ValueError as e:
        raise ParseError([Diagnostic("error", (0, len(text.encode())), str(e))])
    if not is_contractive(s):
        raise ParseError([Diagnostic("error", (0, len(text.encode())), "type is not contractive")])
    return s


def parse_process(text: str, procs: dict | None = None) -> Process:
    P = _single(text, _Parser.process)
    try:
        return _resolve_proc(P, procs or {})
    except ValueError as e:
        raise ParseError([Diagnostic("error", (0, len(text.encode())), str(e))])


# ---------------------------------------------------------------------------
# printers


def pretty_sort(s) -> str:
    if isinstance(s, Base):
        return s.name
    if isinstance(s, Delegate):
        return f"({show(s.init)}, {pretty_type(s.protocol)})"
    raise TypeError(s)


def pretty_option(o: Option) -> str:
    out = f"{o.direction}{o.label}"
    if o.payload != NONE:
        out += f"<{pretty_sort(o.payload)}>"
    if o.resets:
        out += f"({show(o.guard)}, {{{', '.join(sorted(o.resets))}}})"
    elif o.guard != tl.TRUE:
        out += f"({show(o.guard)})"
    return out + "." + pretty_type(o.cont)


def pretty_type(s: SessionType) -> str:
    match s:
        case End():
            return "end"
        case Var(a):
            return a
        case Rec(a, body):
            return f"rec {a} . {pretty_type(body)}"
        case Choice(opts):
            if len(opts) == 1:
                return pretty_option(opts[0])
            return "{ " + ", ".join(pretty_option(o) for o in opts) + " }"
    raise TypeError(s)


def pretty_value(v: Value) -> str:
    match v:
        case NatV(n):
            return str(n)
        case BoolV(b):
            return "true" if b else "false"
        case StringV(s):
            return json.dumps(s)
        case UnitV():
            return "()"
        case SessionRef(n):
            return n
    raise TypeError(v)


def _dl(e: Deadline) -> str:
    return "<inf>" if e.infinite else f"{e.kind}{fmt_time(e.bound)}"


def _alts(alts) -> str:
    return "{" + ", ".join(
        f"{a.label}" + (f"({a.binder})" if a.binder else "") + f": {pretty_process(a.body)}" for a in alts
    ) + "}"


def pretty_process(P: Process, level: int = 0) -> str:
    match P:
        case Term():
            return "0"
        case SetTimer(x, b):
            return f"set({x}).{pretty_process(b, 1)}"
        case Send(p, l, v, b):
            arg = "" if isinstance(v, UnitV) else f"({pretty_value(v)})"
            return f"{p}!{l}{arg}.{pretty_process(b, 1)}"
        case Branch(p, e, alts):
            return f"{p}?{'' if e.infinite else _dl(e)}{_alts(alts)}"
        case Timeout(p, e, alts, after):
            return f"{p}?{_alts(alts)} after{_dl(e)} {pretty_process(after, 1)}"
        case If(c, a, b):
            return f"if ({show(c)}) {pretty_process(a, 1)} else {pretty_process(b, 1)}"
        case DelayC(c, b):
            return f"delay({show(c)}).{pretty_process(b, 1)}"
        case Delay(t, b):
            return f"delay({fmt_time(t)}).{pretty_process(b, 1)}"
        case Def(x, vs, rs, body, scope):
            return f"def {x}({_params(vs, rs)}) = {pretty_process(body)} in {pretty_process(scope, 1)}"
        case Call(x, vs, rs):
            args = ", ".join(pretty_value(v) for v in vs)
            if rs:
                args += ("; " if args else ";") + ", ".join(rs)
            return f"{x}({args})"
        case Scope(p, q, body, _):
            return f"new ({p} {q}) {pretty_process(body, 1)}"
        case Par(l, r):
            s = f"{pretty_process(l, 0)} | {pretty_process(r, 1)}"
            return s if level == 0 else f"({s})"
        case Queue(s, d, items):
            name = f"{s}{d}" if len(s) == 1 and len(d) == 1 else f"{s}->{d}"
            its = ", ".join(l if isinstance(v, UnitV) else f"{l} {pretty_value(v)}" for l, v in items)
            return f"{name}:[{its}]"
    raise TypeError(P)


def _params(vs, rs) -> str:
    out = ", ".join(vs)
    if rs:
        out += ("; " if out else ";") + ", ".join(rs)
    return out


def _valuation(d) -> str:
    return "{" + ", ".join(f"{k}: {fmt_time(v)}" for k, v in sorted(dict(d).items())) + "}"


def _bindings(roles, timers) -> str:
    parts = []
    for b in roles:
        s = f"{b.role}: {pretty_type(b.type)}"
        if b.valuation is not None:
            s += f" @ {_valuation(b.valuation)}"
        parts.append(s)
    if timers:
        parts.append(f"timers {_valuation(timers)}")
    return (" with " + ", ".join(parts)) if parts else ""


def pretty_file(sf: SourceFile) -> str:
    lines = []
    for kind, name in sf.order:
        if kind == "type":
            lines.append(f"type {name} = {pretty_type(sf.types[name])};")
        elif kind == "process":
            lines.append(f"process {name} = {pretty_process(sf.processes[name])};")
        elif kind == "system":
            s = sf.systems[name]
            lines.append(f"system {name} = {pretty_process(s.process)}{_bindings(s.bindings, s.timers)};")
        else:
            c = sf.checks[name]
            lines.append(f"check {name} = {pretty_process(c.process)}{_bindings(c.bindings, c.timers)};")
    return "\n".join(lines) + "\n"


def pretty(node) -> str:
    if isinstance(node, Constraint):
        return show(node)
    if isinstance(node, SessionType):
        return pretty_type(node)
    if isinstance(node, Process):
        return pretty_process(node)
    if isinstance(node, SourceFile):
        return pretty_file(node)
    if isinstance(node, Value):
        return pretty_value(node)
    raise TypeError(f"cannot print {type(node).__name__}")
