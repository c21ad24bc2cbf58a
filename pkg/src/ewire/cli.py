"""Command-line front end: ``ewirec {check,run,denote,normalize,equiv}``.

Exit codes: 0 success, 1 type or equivalence failure, 2 resource or
step limits, 3 usage errors.  All numeric output uses 12 significant
digits and identical inputs (file, flags, seed) produce byte-identical
output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import algebra
from .algebra import ResourceLimit, is_cp, is_subunital, is_unital, superop_to_json
from .denote import (
    BOTTOM, CircV, DistV, IntV, Mode, PairV, UnitV, call_with_stack,
    evaluate_program, sample,
)
from .normalize import (
    StepLimit, check_equiv, normalize, purify_host, unfold_definitions,
)
from .parser import ParseError, parse_program
from .qlist import QListError, monomorphize
from .syntax import (
    Box, CircDecl, CircT, DefDecl, TensorW, UnitW, pretty_print,
)
from .typecheck import CheckedProgram, TypeCheckError, check_program, elaborate_sugar


class UsageError(Exception):
    pass


def _fmt(x: float) -> float:
    return float(f"{x:.12g}")


def _value_str(v) -> str:
    if v == ():
        return "()"
    if isinstance(v, tuple):
        return f"({_value_str(v[0])}, {_value_str(v[1])})"
    return str(v)


def _host_value_plain(hv):
    match hv:
        case UnitV():
            return ()
        case IntV(n):
            return n
        case PairV(a, b):
            return (_host_value_plain(a), _host_value_plain(b))
    raise UsageError(f"entry produced a non-printable value {hv!r}")


def _load(path: str, qlist_size, entry):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e}")
    prog = parse_program(text)
    if qlist_size is not None:
        prog, entry = monomorphize(prog, qlist_size, entry)
    prog = elaborate_sugar(prog)
    return check_program(prog), entry


def _mode_of(args) -> Mode:
    if args.mode == "cpsu":
        return Mode.cpsu(args.fuel)
    return Mode.cpu()


def _entry_value(checked: CheckedProgram, entry: str, mode: Mode):
    decl = checked.program.find(entry)
    if decl is None:
        raise UsageError(f"no declaration named {entry!r}")
    ev, gamma, env = evaluate_program(checked, mode=mode)
    if isinstance(decl, DefDecl):
        return ev, env[decl.name]
    # a closed circuit declaration: run it
    context, w = checked.circ_types[decl.name]
    if context:
        raise UsageError(f"{entry!r} has a non-empty wire context")
    op = ev.denote_circuit(gamma, (), decl.term, env)
    dist = ev.run_circuit(op, w)
    from .denote import decode_value

    return ev, DistV({decode_value(w, k): p for k, p in dist.items()})


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_check(args) -> int:
    checked, _ = _load(args.file, args.qlist_size, None)
    lines = []
    for d in checked.program.decls:
        if isinstance(d, DefDecl):
            lines.append((d.name, str(checked.def_types[d.name])))
        elif isinstance(d, CircDecl):
            ctx_ty, w = checked.circ_types[d.name]
            dom = UnitW()
            for _, ty in reversed(ctx_ty):
                dom = ty if isinstance(dom, UnitW) else TensorW(ty, dom)
            lines.append((d.name, str(CircT(dom, w))))
    if args.json:
        print(json.dumps({"ok": True, "declarations": [
            {"name": n, "type": t} for n, t in lines
        ]}))
    else:
        for n, t in lines:
            print(f"{n} : {t}")
    return 0


def cmd_run(args) -> int:
    mode = _mode_of(args)
    checked, entry = _load(args.file, args.qlist_size, args.entry)
    ev, value = call_with_stack(lambda: _entry_value(checked, entry, mode))
    if not isinstance(value, DistV):
        raise UsageError(f"{entry!r} is not a computation (type T(...))")
    outcomes = {}
    for hv, w in value.weights.items():
        outcomes[_value_str(_host_value_plain(hv))] = _fmt(w)
    mass = sum(value.weights.values())
    diverge = max(0.0, 1.0 - mass)
    if diverge < 1e-12:
        diverge = 0.0
    payload = {
        "outcomes": outcomes,
        "diverge_mass": _fmt(diverge),
    }
    if args.shots:
        from .algebra import Distribution

        plain = {_value_str(_host_value_plain(hv)): w for hv, w in value.weights.items()}
        counts = sample(Distribution(plain), args.seed, args.shots)
        payload["shots"] = args.shots
        payload["seed"] = args.seed
        payload["counts"] = {str(k): v for k, v in counts.items()}
    if args.json:
        print(json.dumps(payload))
    else:
        for k, v in payload["outcomes"].items():
            print(f"{k}\t{v}")
        if payload["diverge_mass"] > 0:
            print(f"{BOTTOM}\t{payload['diverge_mass']}")
        if args.shots:
            print("counts:")
            for k, v in payload["counts"].items():
                print(f"  {k}\t{v}")
    return 0


def cmd_denote(args) -> int:
    mode = _mode_of(args)
    checked, entry = _load(args.file, args.qlist_size, args.entry)
    ev, value = call_with_stack(lambda: _entry_value(checked, entry, mode))
    if not isinstance(value, CircV):
        raise UsageError(f"{entry!r} is not a circuit value (type Circ(...))")
    payload = superop_to_json(value.op)
    payload["signature"] = {
        "in": str(value.w_in),
        "out": str(value.w_out),
    }
    payload["matrix"] = [[_fmt(re), _fmt(im)] for re, im in payload["matrix"]]
    payload["report"] = {
        "is_cp": is_cp(value.op, args.tol),
        "is_unital": is_unital(value.op, args.tol),
        "is_subunital": is_subunital(value.op, args.tol),
    }
    print(json.dumps(payload))
    return 0


def _entry_circuit(checked: CheckedProgram, entry: str):
    """Resolve an entry to ``(context, circuit term)`` for rewriting."""
    decl = checked.program.find(entry)
    if decl is None:
        raise UsageError(f"no declaration named {entry!r}")
    if isinstance(decl, CircDecl):
        ctx_ty, _ = checked.circ_types[decl.name]
        return list(ctx_ty), decl.term
    ty = checked.def_types[decl.name]
    if not isinstance(ty, CircT):
        raise UsageError(f"{entry!r} is not a circuit declaration")
    defs = {
        d.name: d.term
        for d in checked.program.decls
        if isinstance(d, DefDecl) and d.name != decl.name
    }
    term = purify_host(unfold_definitions(decl.term, defs))
    if not isinstance(term, Box):
        raise UsageError(
            f"{entry!r} does not reduce to a literal box; cannot rewrite it"
        )
    from .typecheck import bind_pattern

    return bind_pattern(term.pat, term.w_in), term.body


def cmd_normalize(args) -> int:
    checked, entry = _load(args.file, args.qlist_size, args.entry)
    context, term = _entry_circuit(checked, entry)
    out, trace = normalize(term, max_steps=args.max_steps,
                           copower_rules=args.copower_rules)
    if args.trace:
        for line in trace.to_json_lines():
            print(json.dumps(line))
    header = ", ".join(f"{w} : {ty}" for w, ty in context)
    prefix = f"circ {entry}" + (f" ({header})" if header else "")
    print(f"{prefix} = {pretty_print(out)}")
    return 0


def cmd_equiv(args) -> int:
    mode = _mode_of(args)
    checked, _ = _load(args.file, args.qlist_size, None)
    ctx1, t1 = _entry_circuit(checked, args.left)
    ctx2, t2 = _entry_circuit(checked, args.right)
    if [ty for _, ty in ctx1] != [ty for _, ty in ctx2]:
        print(json.dumps({"equivalent": False, "reason": "different contexts"}))
        return 1
    # compare at a shared context: rename the second circuit's wires to
    # the first's, simultaneously (names may permute)
    from .syntax import PairP, WireP, subst_pattern

    if [w for w, _ in ctx1] != [w for w, _ in ctx2]:
        olds = [WireP(w) for w, _ in ctx2]
        news = [WireP(w) for w, _ in ctx1]

        def nest(ps):
            out = ps[0]
            for p in ps[1:]:
                out = PairP(out, p)
            return out

        t2 = subst_pattern(t2, nest(olds), nest(news))
    _, gamma, env = evaluate_program(checked, mode=mode)
    ok = call_with_stack(
        lambda: check_equiv(
            t1, t2, gamma=gamma, omega=tuple(ctx1), env=env,
            tol=args.tol, mode=mode, ctx=checked.ctx,
        )
    )
    print(json.dumps({"equivalent": bool(ok), "tol": _fmt(args.tol)}))
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(sub, shots=False):
    sub.add_argument("file", help="an .ew source file")
    sub.add_argument("--mode", choices=["cpu", "cpsu"], default="cpu")
    sub.add_argument("--fuel", type=int, default=10_000)
    sub.add_argument("--qlist-size", type=int, default=None, dest="qlist_size")
    sub.add_argument("--tol", type=float, default=1e-9)
    sub.add_argument("--json", action="store_true")
    if shots:
        sub.add_argument("--shots", type=int, default=0)
        sub.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ewirec", description=__doc__)
    subs = p.add_subparsers(dest="command", required=True)

    c = subs.add_parser("check", help="typecheck all declarations")
    _common(c)

    r = subs.add_parser("run", help="evaluate an entry of type T(...)")
    _common(r, shots=True)
    r.add_argument("--entry", default="main")

    d = subs.add_parser("denote", help="print the superoperator of a Circ entry")
    _common(d)
    d.add_argument("--entry", default="main")

    n = subs.add_parser("normalize", help="rewrite a circuit to normal form")
    _common(n)
    n.add_argument("--entry", default="main")
    n.add_argument("--trace", action="store_true")
    n.add_argument("--copower-rules", action="store_true", dest="copower_rules")
    n.add_argument("--max-steps", type=int, default=1000, dest="max_steps")

    e = subs.add_parser("equiv", help="numeric equivalence of two circuits")
    _common(e)
    e.add_argument("left")
    e.add_argument("right")
    return p


def main(argv=None) -> int:
    if "EWIREC_MAX_DIM" in os.environ:
        try:
            algebra.set_max_dim(int(os.environ["EWIREC_MAX_DIM"]))
        except ValueError:
            print("EWIREC_MAX_DIM must be an integer", file=sys.stderr)
            return 3
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 3
    handlers = {
        "check": cmd_check,
        "run": cmd_run,
        "denote": cmd_denote,
        "normalize": cmd_normalize,
        "equiv": cmd_equiv,
    }
    try:
        return handlers[args.command](args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 3
    except ParseError as e:
        _diag(args, "ParseError", str(e), [e.line, e.col])
        return 1
    except TypeCheckError as e:
        _diag(args, e.kind, e.message, [e.loc.line, e.loc.col] if e.loc else None)
        return 1
    except QListError as e:
        _diag(args, "QListError", str(e), None)
        return 1
    except StepLimit as e:
        print(f"step limit reached; partial result:\n{pretty_print(e.partial)}",
              file=sys.stderr)
        return 2
    except ResourceLimit as e:
        print(f"resource limit: {e}", file=sys.stderr)
        return 2


def _diag(args, kind, message, span):
    if getattr(args, "json", False):
        print(json.dumps({"kind": kind, "span": span, "message": message}))
    else:
        at = f" at {span[0]}:{span[1]}" if span else ""
        print(f"error[{kind}]{at}: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
