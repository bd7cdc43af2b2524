"""Command line front end for ``.toast`` files.

Exit codes: 0 pass, 1 rejection or property violation, 2 input error,
3 inconclusive (fuel exhausted).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .calculus import digest, run, wf_process
from .semantics import SessionEnv, config, progress_explore
from .surface import ParseError, SourceFile, parse, pretty_type
from .typecheck import subject_reduction_harness, typecheck
from .typesys import dual
from .wellformed import wf_type

OK, FAIL, INPUT, INCONCLUSIVE = 0, 1, 2, 3
CORPUS_ENV = "TOAST_CORPUS"


class InputError(Exception):
    pass


def _resolve(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    base = os.environ.get(CORPUS_ENV)
    if base and not p.is_absolute() and (Path(base) / p).exists():
        return Path(base) / p
    raise InputError(f"{path}: no such file")


def _load(path: str) -> SourceFile:
    p = _resolve(path)
    text = p.read_text(encoding="utf-8")
    try:
        return parse(text)
    except ParseError as e:
        raise InputError("\n".join(d.render(text, str(p)) for d in e.diagnostics)) from None


def _pick(table: dict, name: str | None, what: str, path: str) -> list:
    if name is None:
        if not table:
            raise InputError(f"{path}: no {what} declarations")
        return list(table.items())
    if name not in table:
        raise InputError(f"{path}: no {what} named {name!r}")
    return [(name, table[name])]


def _emit(args, payload: dict, lines: list[str]):
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for line in lines:
            print(line)


# ---------------------------------------------------------------------------
# commands


def cmd_check(args) -> int:
    results, lines, code = [], [], OK
    for path in args.paths:
        sf = _load(path)
        for name, s in sf.types.items():
            rep = wf_type(s)
            results.append({"file": path, "type": name, **rep.to_json()})
            if rep.accepted:
                lines.append(f"{path}: {name}: well-formed")
            else:
                code = FAIL
                f = rep.failing
                lines.append(f"{path}: {name}: rejected ({f.premise}) {f.message}")
    _emit(args, {"command": "check", "exit": code, "results": results}, lines)
    return code


def cmd_dual(args) -> int:
    sf = _load(args.path)
    if args.name not in sf.types:
        raise InputError(f"{args.path}: no type named {args.name!r}")
    text = pretty_type(dual(sf.types[args.name]))
    _emit(args, {"command": "dual", "exit": OK, "type": args.name, "dual": text}, [text])
    return OK


def cmd_progress(args) -> int:
    if args.horizon < 1:
        raise InputError("--horizon must be at least 1")
    sf = _load(args.path)
    results, lines, code = [], [], OK
    for name, s in _pick(sf.types, args.name, "type", args.path):
        rep = progress_explore(s, args.horizon, args.mode, args.seed, override_wf=args.override_wf)
        results.append({"type": name, **rep.to_json()})
        lines.append(f"{name}: {rep.status} ({rep.states} states, depth {rep.depth})")
        if rep.message:
            lines.append(f"  {rep.message}")
        for state, trace in rep.stuck:
            lines.append(f"  stuck at {state}")
            lines.extend("    " + st.line() for st in trace)
        for kind, state, trace in rep.violations:
            lines.append(f"  {kind} violated at {state}")
            lines.extend("    " + st.line() for st in trace)
        if rep.status != "ok":
            code = FAIL
    _emit(args, {"command": "progress", "exit": code, "results": results}, lines)
    return code


def _targets(sf: SourceFile, name, path):
    table = {n: ("check", c) for n, c in sf.checks.items()}
    table.update({n: ("system", s) for n, s in sf.systems.items()})
    return _pick(table, name, "check or system", path)


def _check_env(decl) -> SessionEnv:
    from .calculus import proc_free_names

    bound = {}
    for b in decl.bindings:
        bound[b.role] = config(b.type, b.valuation)
    free = proc_free_names(decl.process) - set(bound)
    # bound value names cannot be free in a closed declaration, so anything
    # left over is a role without a binding
    if free:
        raise InputError(f"no session type bound for {', '.join(sorted(free))}")
    return SessionEnv.make(bound)


def cmd_typecheck(args) -> int:
    sf = _load(args.path)
    results, lines, code = [], [], OK
    for name, (kind, decl) in _targets(sf, args.name, args.path):
        D = _check_env(decl) if kind == "check" else SessionEnv()
        rep = typecheck(None, decl.timers, decl.process, D)
        results.append({"name": name, **rep.to_json()})
        if rep.accepted:
            lines.append(f"{name}: accepted")
        else:
            code = FAIL
            rule, premise, judgment = rep.failing
            lines.append(f"{name}: rejected at [{rule}] {premise}")
            lines.append(f"  {judgment}")
        if args.tree:
            lines.extend("  " + x for x in rep.tree.render())
    _emit(args, {"command": "typecheck", "exit": code, "results": results}, lines)
    return code


def _step_line(entry) -> str:
    side, _, rest = entry.label.partition(" ")
    side = "joint" if side == "-" else side
    return f"STEP {entry.step}: {side} {rest} :: {digest(entry.theta, entry.process)}"


def cmd_simulate(args) -> int:
    sf = _load(args.path)
    results, lines, code = [], [], OK
    for name, s in _pick(sf.systems, args.name, "system", args.path):
        if not wf_process(s.process):
            raise InputError(f"{name}: process is not well-formed")
        rep = run(s.timers, s.process, args.mode, args.fuel, args.seed)
        trace = [_step_line(e) for e in rep.trace]
        results.append({"name": name, "status": rep.status, "states": rep.states, "trace": trace})
        lines.append(f"{name}: {rep.status}")
        lines.extend(trace)
        for th, P in rep.stuck:
            lines.append(f"  stuck: {th} {P}")
        if rep.status == "stuck":
            code = FAIL
        elif rep.status == "fuel" and code == OK:
            code = INCONCLUSIVE
    _emit(args, {"command": "simulate", "exit": code, "results": results}, lines)
    return code


def cmd_sr(args) -> int:
    sf = _load(args.path)
    results, lines, code = [], [], OK
    for name, s in _pick(sf.systems, args.name, "system", args.path):
        rep = subject_reduction_harness(s.process, s.timers, args.fuel, args.seed, args.mode)
        results.append({"name": name, **rep.to_json()})
        lines.append(f"{name}: {rep.status} ({rep.states} states, {rep.steps} steps, {rep.delays} delays)")
        if rep.message:
            lines.append(f"  {rep.message}")
        for v in rep.violations:
            lines.append(f"  {v.kind} after {v.step}: {v.detail}")
            lines.append(f"    {v.state}")
        if rep.status in ("violation", "rejected"):
            code = FAIL
        elif rep.status == "fuel" and code == OK:
            code = INCONCLUSIVE
    _emit(args, {"command": "sr", "exit": code, "results": results}, lines)
    return code


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="toast", description="Timed asynchronous session types with timeouts.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--json", action="store_true", help="print JSON instead of text")

    p = sub.add_parser("check", help="well-formedness of every declared type")
    p.add_argument("paths", nargs="+")
    common(p)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("dual", help="print the dual of a declared type")
    p.add_argument("path")
    p.add_argument("name")
    common(p)
    p.set_defaults(fn=cmd_dual)

    p = sub.add_parser("progress", help="explore S | dual(S) for stuck states")
    p.add_argument("path")
    p.add_argument("name", nargs="?")
    p.add_argument("--horizon", type=int, default=40)
    p.add_argument("--mode", choices=("exhaustive", "random"), default="exhaustive")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--override-wf", action="store_true", help="explore types that are not well-formed")
    common(p)
    p.set_defaults(fn=cmd_progress)

    p = sub.add_parser("typecheck", help="type check check and system declarations")
    p.add_argument("path")
    p.add_argument("name", nargs="?")
    p.add_argument("--tree", action="store_true", help="print the derivation tree")
    common(p)
    p.set_defaults(fn=cmd_typecheck)

    for cmd, fn, text in (
        ("simulate", cmd_simulate, "run a closed system"),
        ("sr", cmd_sr, "subject reduction harness on a closed system"),
    ):
        p = sub.add_parser(cmd, help=text)
        p.add_argument("path")
        p.add_argument("name", nargs="?")
        p.add_argument("--fuel", type=int, default=50)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--mode", choices=("exhaustive", "random"), default="random" if cmd == "simulate" else "exhaustive")
        common(p)
        p.set_defaults(fn=fn)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return INPUT if e.code else OK
    try:
        return args.fn(args)
    except InputError as e:
        if getattr(args, "json", False):
            print(json.dumps({"command": args.command, "exit": INPUT, "error": str(e)}, indent=2, sort_keys=True))
        else:
            print(f"error: {e}", file=sys.stderr)
        return INPUT


if __name__ == "__main__":
    sys.exit(main())
