"""Formation rules for session types.

``wf_judgment`` decides ``Theta; delta |- S`` and explains rejections.  The
constraint a rule assigns to a type is computed by :func:`canonical`:
``true`` for ``end``, the past of the guards' disjunction for a choice, the
body's constraint for a recursion and the registered constraint for a
variable.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

from .timelogic import (
    TRUE,
    And,
    Constraint,
    Valuation,
    clocks_of,
    constraint_reset,
    disj,
    entails,
    future,
    normalize,
    past,
    sat,
    show,
)
from .typesys import Choice, Delegate, End, Option, Rec, SessionType, Var, type_clocks

FEASIBILITY = "feasibility"
MIXED = "mixed-choice"
DELEGATION = "delegation"
VAR_UNDEFINED = "var-undefined"


class Unbound(Exception):
    pass


@dataclass
class WfStep:
    rule: str
    judgment: str
    ok: bool
    note: str = ""


@dataclass
class WfFailure:
    rule: str
    premise: str
    message: str
    witness: dict | None = None


@dataclass
class WfReport:
    accepted: bool
    trace: list[WfStep] = field(default_factory=list)
    failing: WfFailure | None = None
    constraint: Constraint | None = None

    def to_json(self) -> dict:
        out = {
            "verdict": "accepted" if self.accepted else "rejected",
            "trace": [{"rule": s.rule, "judgment": s.judgment, "ok": s.ok, "note": s.note} for s in self.trace],
        }
        if self.constraint is not None:
            out["constraint"] = show(self.constraint)
        if self.failing:
            f = self.failing
            out["failing_premise"] = {
                "rule": f.rule,
                "premise": f.premise,
                "message": f.message,
                "witness": {k: str(v) for k, v in (f.witness or {}).items()},
            }
        return out


def canonical(theta: Mapping[str, Constraint], s: SessionType) -> Constraint:
    match s:
        case End():
            return TRUE
        case Choice(opts):
            return past(disj(o.guard for o in opts))
        case Rec(_, body):
            return canonical(theta, body)
        case Var(a):
            if a not in theta:
                raise Unbound(a)
            return theta[a]
    raise TypeError(f"not a session type: {s!r}")


def future_env(o: Option) -> Constraint:
    return constraint_reset(o.guard, o.resets)


def _theta_str(theta) -> str:
    if not theta:
        return "."
    return ", ".join(f"{a}:{show(d)}" for a, d in theta.items())


class _Checker:
    def __init__(self, clocks):
        self.clocks = tuple(sorted(clocks))
        self.trace: list[WfStep] = []
        self.failing: WfFailure | None = None

    def fail(self, rule, premise, message, witness=None, judgment=""):
        self.trace.append(WfStep(rule, judgment, False, f"{premise}: {message}"))
        if self.failing is None:
            self.failing = WfFailure(rule, premise, message, witness)
        return False

    def check(self, theta: dict, delta: Constraint, s: SessionType) -> bool:
        j = f"{_theta_str(theta)}; {show(delta)} |- {s}"
        match s:
            case End():
                self.trace.append(WfStep("end", j, True))
                return True
            case Var(a):
                if a not in theta:
                    return self.fail("var", VAR_UNDEFINED, f"recursion variable {a} is not bound", judgment=j)
                if not entails(delta, theta[a]):
                    return self.fail(
                        "var", FEASIBILITY, f"{show(delta)} does not entail {show(theta[a])} registered for {a}",
                        judgment=j,
                    )
                self.trace.append(WfStep("var", j, True))
                return True
            case Rec(a, body):
                try:
                    inv = canonical(theta, body)
                except Unbound as e:
                    return self.fail("rec", VAR_UNDEFINED, f"recursion variable {e} is not bound", judgment=j)
                if not entails(delta, inv):
                    return self.fail("rec", FEASIBILITY, f"{show(delta)} does not entail {show(inv)}", judgment=j)
                self.trace.append(WfStep("rec", j, True, f"{a}:{show(inv)}"))
                # the body is entered again at every unfolding, so it is checked
                # under the invariant rather than the (stronger) entry constraint
                return self.check({**theta, a: inv}, inv, body)
            case Choice(opts):
                return self.check_choice(theta, delta, opts, j)
        raise TypeError(f"not a session type: {s!r}")

    def check_choice(self, theta, delta, opts, j) -> bool:
        inv = past(disj(o.guard for o in opts))
        if not entails(delta, inv):
            return self.fail("choice", FEASIBILITY, f"{show(delta)} does not entail {show(inv)}", judgment=j)
        # mixed choice: overlapping guards of opposite direction, among the
        # valuations reachable from the context by letting time pass
        reach = future(delta, self.clocks)
        for a in range(len(opts)):
            for b in range(a + 1, len(opts)):
                oa, ob = opts[a], opts[b]
                if oa.direction == ob.direction:
                    continue
                dnf = normalize(And(reach, And(oa.guard, ob.guard)), self.clocks)
                if not dnf.is_empty():
                    w = dnf.zones[0].witness()
                    return self.fail(
                        "choice", MIXED,
                        f"{oa.direction}{oa.label} and {ob.direction}{ob.label} are both enabled at "
                        + ", ".join(f"{k}={v}" for k, v in w.items()),
                        w, judgment=j,
                    )
        self.trace.append(WfStep("choice", j, True, show(inv)))
        for o in opts:
            fut = future_env(o)
            try:
                need = canonical(theta, o.cont)
            except Unbound as e:
                return self.fail("choice", VAR_UNDEFINED, f"recursion variable {e} is not bound", judgment=j)
            if not entails(fut, need):
                return self.fail(
                    "choice", FEASIBILITY,
                    f"after {o.direction}{o.label}: {show(fut)} does not entail {show(need)}",
                    judgment=j,
                )
            if isinstance(o.payload, Delegate):
                sub = wf_judgment({}, o.payload.init, o.payload.protocol)
                if not sub.accepted:
                    self.trace.extend(sub.trace)
                    msg = sub.failing.message if sub.failing else "delegated protocol rejected"
                    return self.fail("choice", DELEGATION, f"payload of {o.label}: {msg}", judgment=j)
            if not self.check(theta, fut, o.cont):
                return False
        return True


def wf_judgment(theta: Mapping[str, Constraint], delta: Constraint, s: SessionType) -> WfReport:
    clocks = set(type_clocks(s)) | clocks_of(delta)
    for d in theta.values():
        clocks |= clocks_of(d)
    c = _Checker(clocks)
    ok = c.check(dict(theta), delta, s)
    return WfReport(ok, c.trace, c.failing, delta)


def wf_type(s: SessionType) -> WfReport:
    """Check ``s`` under the constraint its own shape assigns."""
    try:
        d = canonical({}, s)
    except Unbound as e:
        return WfReport(False, [], WfFailure("var", VAR_UNDEFINED, f"recursion variable {e} is not bound"))
    return wf_judgment({}, d, s)


def wf_config(nu, s: SessionType) -> bool:
    rep = wf_type(s)
    if not rep.accepted:
        return False
    nu = Valuation(nu).extend(type_clocks(s))
    return sat(nu, rep.constraint)
