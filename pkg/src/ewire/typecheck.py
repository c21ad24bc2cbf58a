"""Linear typechecker for circuits and simply-typed checking for hosts.

Circuit judgments ``Gamma; Omega |- C : W`` manage an ordered wire
context with exchange applied silently: context splits are inferred by
input/output threading (the first subterm of a sequence receives
exactly the wires it mentions, in context order, the continuation the
remainder), which is equivalent to searching over rule-level splits.

Also elaborates the measurement sugar (``qrun``, ``qlift``) into core
syntax, generating the structural measure/prepare circuits by induction
on the wire type.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import algebra
from .syntax import (
    App, Ascribe, ArrowT, Bind, Box, CircDecl, ClassicalDecl,
    ClassicalLit, ClassicalT, CircT, Compose, DefDecl, Fix, Gate,
    GateDecl, GateFam, GateRef, HostTerm, HostType, If, Init, IntLit,
    Lam, Lift, MonadT, NotClassicalError, Output, Pair, PairElim, PairP,
    Pattern, Prim, Program, Proj, ProductT, QListW, QUBIT, QuantumW,
    QLift, QRun, Ret, Run, Span, TensorW, UnitElim, UnitP, UnitT,
    UnitVal, UnitW, Unbox, Var, WireP, WireType, classicalize,
    free_wires, is_classical, lift_type, pattern_linear, pattern_wires,
    unlift_type,
)

# error kinds
LINEARITY = "LinearityViolation"
UNBOUND_WIRE = "UnboundWire"
UNUSED_WIRE = "UnusedWire"
NOT_CLASSICAL = "NotClassical"
MISMATCH = "Mismatch"
EFFECTFUL_UNBOX = "EffectfulUnbox"
GATE_SIGNATURE = "GateSignature"
PATTERN_SHAPE = "PatternShape"


class TypeCheckError(Exception):
    def __init__(self, kind: str, message: str, loc: Optional[Span] = None):
        super().__init__(f"{kind}: {message}" + (f" (at {loc})" if loc else ""))
        self.kind = kind
        self.message = message
        self.loc = loc

    def to_json(self) -> dict:
        span = [self.loc.line, self.loc.col] if self.loc else None
        return {"kind": self.kind, "span": span, "message": self.message}


WireContext = tuple  # tuple[(str, WireType), ...]
HostContext = dict  # str -> HostType


@dataclass
class CheckContext:
    """Program-level tables consulted during checking."""

    bases: dict
    gates: dict
    table: dict  # id(node) -> (node, info); info depends on the node kind

    def record(self, node, info):
        self.table[id(node)] = (node, info)

    def lookup(self, node):
        hit = self.table.get(id(node))
        return hit[1] if hit is not None and hit[0] is node else None


def _default_ctx() -> CheckContext:
    from .syntax import DEFAULT_INT_CARDINALITY

    return CheckContext(
        bases={"bit": 2, "int": DEFAULT_INT_CARDINALITY}, gates={}, table={}
    )


def _int_type(ctx: CheckContext) -> ClassicalT:
    return ClassicalT("int", ctx.bases.get("int", 64))


def _no_qlist(w: WireType, loc=None):
    match w:
        case QListW():
            raise TypeCheckError(
                MISMATCH, "qlist must be instantiated with --qlist-size", loc
            )
        case TensorW(l, r):
            _no_qlist(l, loc)
            _no_qlist(r, loc)
        case _:
            pass


# ---------------------------------------------------------------------------
# The pattern relation
# ---------------------------------------------------------------------------


def pattern_type(types: dict, p: Pattern, loc=None) -> WireType:
    """The wire type a pattern assembles from declared wire types."""
    match p:
        case WireP(x):
            if x not in types:
                raise TypeCheckError(UNBOUND_WIRE, f"unbound wire {x!r}", loc)
            return types[x]
        case UnitP():
            return UnitW()
        case PairP(l, r):
            return TensorW(pattern_type(types, l, loc), pattern_type(types, r, loc))
    raise TypeCheckError(PATTERN_SHAPE, f"not a pattern: {p!r}", loc)


def match_pattern(omega: WireContext, p: Pattern) -> WireType:
    """Decide the pattern relation: ``p`` must consume ``omega`` exactly
    (up to exchange) and the assembled wire type is returned."""
    if not pattern_linear(p):
        raise TypeCheckError(PATTERN_SHAPE, f"duplicate wire in pattern {p}")
    names = pattern_wires(p)
    declared = dict(omega)
    if len(declared) != len(omega):
        raise TypeCheckError(LINEARITY, "duplicate wire name in context")
    missing = [x for x in names if x not in declared]
    if missing:
        raise TypeCheckError(UNBOUND_WIRE, f"unbound wire {missing[0]!r}")
    unused = [x for x, _ in omega if x not in set(names)]
    if unused:
        raise TypeCheckError(UNUSED_WIRE, f"wire {unused[0]!r} left unused")
    return pattern_type(declared, p)


def bind_pattern(p: Pattern, w: WireType, loc=None) -> list:
    """Split a wire type along a binder pattern, yielding the bound
    wires in pattern order with their component types."""
    out = []

    def go(q, ty):
        match q:
            case WireP(x):
                out.append((x, ty))
            case UnitP():
                if not isinstance(ty, UnitW):
                    raise TypeCheckError(
                        PATTERN_SHAPE, f"pattern () does not match {ty}", loc
                    )
            case PairP(l, r):
                if not isinstance(ty, TensorW):
                    raise TypeCheckError(
                        PATTERN_SHAPE, f"pair pattern does not match {ty}", loc
                    )
                go(l, ty.left)
                go(r, ty.right)
            case _:
                raise TypeCheckError(PATTERN_SHAPE, f"not a pattern: {q!r}", loc)

    if not pattern_linear(p):
        raise TypeCheckError(PATTERN_SHAPE, f"duplicate wire in pattern {p}", loc)
    go(p, w)
    return out


# ---------------------------------------------------------------------------
# Circuit judgment
# ---------------------------------------------------------------------------


def _select(omega: WireContext, names: set, loc, spent: frozenset):
    missing = [x for x in names if x not in {w for w, _ in omega}]
    if missing:
        kind = LINEARITY if missing[0] in spent else UNBOUND_WIRE
        verb = "already consumed" if kind == LINEARITY else "not in scope"
        raise TypeCheckError(kind, f"wire {missing[0]!r} {verb}", loc)
    sel = tuple(b for b in omega if b[0] in names)
    rest = tuple(b for b in omega if b[0] not in names)
    return sel, rest


def _bindings_fresh(bindings, rest, loc):
    live = {w for w, _ in rest}
    for x, _ in bindings:
        if x in live:
            raise TypeCheckError(
                LINEARITY, f"wire {x!r} rebound while still live", loc
            )


def check_circuit(
    gamma: HostContext,
    omega: WireContext,
    term,
    ctx: CheckContext | None = None,
    spent: frozenset = frozenset(),
) -> WireType:
    """Check ``gamma; omega |- term : W`` and return W.

    Every wire of ``omega`` must be consumed exactly once.
    """
    ctx = ctx or _default_ctx()
    omega = tuple(omega)
    for _, ty in omega:
        _no_qlist(ty)
    match term:
        case Output(p):
            return _checked_consume_all(omega, p, term.loc, spent)
        case Unbox(t, p):
            ty = check_host(gamma, t, ctx)
            if isinstance(ty, MonadT) and isinstance(ty.inner, CircT):
                raise TypeCheckError(
                    EFFECTFUL_UNBOX,
                    "cannot unbox an effectful circuit computation; bind it first",
                    term.loc,
                )
            if not isinstance(ty, CircT):
                raise TypeCheckError(
                    MISMATCH, f"unbox expects a Circ value, got {ty}", term.loc
                )
            got = _checked_consume_all(omega, p, term.loc, spent)
            if got != ty.w_in:
                raise TypeCheckError(
                    MISMATCH,
                    f"unbox argument wires have type {got}, circuit expects {ty.w_in}",
                    term.loc,
                )
            return ty.w_out
        case Init(t):
            if omega:
                raise TypeCheckError(
                    UNUSED_WIRE,
                    f"wire {omega[0][0]!r} left unused by init",
                    term.loc,
                )
            ty = check_host(gamma, t, ctx)
            try:
                v = unlift_type(ty)
            except NotClassicalError:
                raise TypeCheckError(
                    NOT_CLASSICAL, f"init needs a first-order value, got {ty}",
                    term.loc,
                )
            ctx.record(term, v)
            return v
        case Compose(p, first, rest):
            fw = free_wires(first)
            sel, remaining = _select(omega, fw, term.loc, spent)
            w1 = check_circuit(gamma, sel, first, ctx, spent)
            ctx.record(term, w1)
            bindings = bind_pattern(p, w1, term.loc)
            _bindings_fresh(bindings, remaining, term.loc)
            new_spent = (spent | {w for w, _ in sel}) - {x for x, _ in bindings}
            return check_circuit(
                gamma, tuple(bindings) + remaining, rest, ctx, new_spent
            )
        case UnitElim(p, rest):
            names = set(pattern_wires(p))
            sel, remaining = _select(omega, names, term.loc, spent)
            got = match_pattern(sel, p)
            if not isinstance(got, UnitW):
                raise TypeCheckError(
                    MISMATCH, f"() <- pattern of type {got}", term.loc
                )
            return check_circuit(
                gamma, remaining, rest, ctx, spent | {w for w, _ in sel}
            )
        case PairElim(w1, w2, p, rest):
            if w1 == w2:
                raise TypeCheckError(
                    PATTERN_SHAPE, f"duplicate wire {w1!r} in pair binder", term.loc
                )
            names = set(pattern_wires(p))
            sel, remaining = _select(omega, names, term.loc, spent)
            got = match_pattern(sel, p)
            if not isinstance(got, TensorW):
                raise TypeCheckError(
                    MISMATCH, f"(w1, w2) <- pattern of type {got}", term.loc
                )
            bindings = [(w1, got.left), (w2, got.right)]
            _bindings_fresh(bindings, remaining, term.loc)
            new_spent = (spent | {w for w, _ in sel}) - {w1, w2}
            return check_circuit(
                gamma, tuple(bindings) + remaining, rest, ctx, new_spent
            )
        case Gate(out_p, g, in_p, rest):
            try:
                w_in, w_out = algebra.gate_signature(g, ctx.gates)
            except algebra.UnknownGate as e:
                raise TypeCheckError(GATE_SIGNATURE, str(e.args[0]), term.loc)
            names = set(pattern_wires(in_p))
            sel, remaining = _select(omega, names, term.loc, spent)
            got = match_pattern(sel, in_p)
            if got != w_in:
                raise TypeCheckError(
                    GATE_SIGNATURE,
                    f"gate {g} expects {w_in}, applied at {got}",
                    term.loc,
                )
            bindings = bind_pattern(out_p, w_out, term.loc)
            _bindings_fresh(bindings, remaining, term.loc)
            new_spent = (spent | {w for w, _ in sel}) - {x for x, _ in bindings}
            return check_circuit(
                gamma, tuple(bindings) + remaining, rest, ctx, new_spent
            )
        case Lift(x, p, rest) | QLift(x, p, rest):
            names = set(pattern_wires(p))
            sel, remaining = _select(omega, names, term.loc, spent)
            v = match_pattern(sel, p)
            sugar = isinstance(term, QLift)
            if sugar:
                ctx.record(term, v)
                v = classicalize(v)
            elif not is_classical(v):
                raise TypeCheckError(
                    NOT_CLASSICAL, f"cannot lift wire of type {v}", term.loc
                )
            gamma2 = dict(gamma)
            gamma2[x] = lift_type(v)
            return check_circuit(
                gamma2, remaining, rest, ctx, spent | {w for w, _ in sel}
            )
    raise TypeCheckError(MISMATCH, f"not a circuit term: {term!r}")


def _checked_consume_all(omega, p, loc, spent):
    if not pattern_linear(p):
        raise TypeCheckError(PATTERN_SHAPE, f"duplicate wire in pattern {p}", loc)
    names = pattern_wires(p)
    declared = dict(omega)
    missing = [x for x in names if x not in declared]
    if missing:
        kind = LINEARITY if missing[0] in spent else UNBOUND_WIRE
        verb = "already consumed" if kind == LINEARITY else "not in scope"
        raise TypeCheckError(kind, f"wire {missing[0]!r} {verb}", loc)
    unused = [x for x, _ in omega if x not in set(names)]
    if unused:
        raise TypeCheckError(
            LINEARITY, f"wire {unused[0]!r} is dropped", loc
        )
    return pattern_type(declared, p, loc)


# ---------------------------------------------------------------------------
# Host judgment
# ---------------------------------------------------------------------------


def check_host(
    gamma: HostContext,
    term: HostTerm,
    ctx: CheckContext | None = None,
    expected: HostType | None = None,
) -> HostType:
    """Check ``gamma |- term : A`` and return A.

    ``expected`` steers only the typing of numeric literals; the final
    type is always compared against it when given.
    """
    ctx = ctx or _default_ctx()
    ty = _infer_host(gamma, term, ctx, expected)
    if expected is not None and ty != expected:
        raise TypeCheckError(
            MISMATCH, f"expected {expected}, got {ty}", getattr(term, "loc", None)
        )
    return ty


def _infer_host(gamma, term, ctx, expected):
    match term:
        case Var(x):
            if x not in gamma:
                raise TypeCheckError(
                    MISMATCH, f"unbound host variable {x!r}", term.loc
                )
            return gamma[x]
        case Lam(x, ann, body):
            _check_host_type(ann, term.loc)
            gamma2 = dict(gamma)
            gamma2[x] = ann
            inner_expected = (
                expected.result if isinstance(expected, ArrowT) else None
            )
            return ArrowT(ann, check_host(gamma2, body, ctx, inner_expected))
        case App(f, a):
            fty = check_host(gamma, f, ctx)
            if not isinstance(fty, ArrowT):
                raise TypeCheckError(
                    MISMATCH, f"cannot apply a value of type {fty}", term.loc
                )
            check_host(gamma, a, ctx, fty.arg)
            return fty.result
        case UnitVal():
            return UnitT()
        case Pair(l, r):
            le = expected.left if isinstance(expected, ProductT) else None
            re_ = expected.right if isinstance(expected, ProductT) else None
            return ProductT(
                check_host(gamma, l, ctx, le), check_host(gamma, r, ctx, re_)
            )
        case Proj(side, t):
            ty = check_host(gamma, t, ctx)
            if not isinstance(ty, ProductT):
                raise TypeCheckError(
                    MISMATCH, f"projection from non-product {ty}", term.loc
                )
            return ty.left if side == 1 else ty.right
        case Ret(t):
            inner = expected.inner if isinstance(expected, MonadT) else None
            return MonadT(check_host(gamma, t, ctx, inner))
        case Bind(t, x, u):
            tty = check_host(gamma, t, ctx)
            if not isinstance(tty, MonadT):
                raise TypeCheckError(
                    MISMATCH, f"let <= needs a computation, got {tty}", term.loc
                )
            ctx.record(term, tty.inner)
            gamma2 = dict(gamma)
            gamma2[x] = tty.inner
            uty = check_host(gamma2, u, ctx, expected if isinstance(expected, MonadT) else None)
            if not isinstance(uty, MonadT):
                raise TypeCheckError(
                    MISMATCH, f"body of let <= must be a computation, got {uty}",
                    term.loc,
                )
            return uty
        case Box(p, w, body):
            _no_qlist(w, term.loc)
            bindings = bind_pattern(p, w, term.loc)
            w2 = check_circuit(gamma, tuple(bindings), body, ctx)
            ctx.record(term, (w, w2))
            return CircT(w, w2)
        case Run(c):
            w = check_circuit(gamma, (), c, ctx)
            if not is_classical(w):
                raise TypeCheckError(
                    NOT_CLASSICAL,
                    f"run needs a classical output type, got {w} "
                    "(use qrun to measure implicitly)",
                    term.loc,
                )
            ctx.record(term, w)
            return MonadT(lift_type(w))
        case QRun(c):
            w = check_circuit(gamma, (), c, ctx)
            ctx.record(term, w)
            return MonadT(lift_type(classicalize(w)))
        case IntLit(n):
            if isinstance(expected, ClassicalT) and expected.name != "int":
                if not (0 <= n < expected.cardinality):
                    raise TypeCheckError(
                        MISMATCH,
                        f"literal {n} out of range for {expected.name} "
                        f"(cardinality {expected.cardinality})",
                        term.loc,
                    )
                return expected
            return _int_type(ctx)
        case ClassicalLit(base, card, v):
            if not (0 <= v < card):
                raise TypeCheckError(
                    MISMATCH, f"literal {v} out of range for {base}", term.loc
                )
            return ClassicalT(base, card)
        case If(c, t, e):
            cty = check_host(gamma, c, ctx, ClassicalT("bit", 2))
            tty = check_host(gamma, t, ctx, expected)
            ety = check_host(gamma, e, ctx, expected or tty)
            if tty != ety:
                raise TypeCheckError(
                    MISMATCH, f"if branches disagree: {tty} vs {ety}", term.loc
                )
            return tty
        case Prim("=", l, r):
            lty = check_host(gamma, l, ctx)
            if not isinstance(lty, ClassicalT):
                raise TypeCheckError(
                    MISMATCH, f"= compares classical values, got {lty}", term.loc
                )
            check_host(gamma, r, ctx, lty)
            return ClassicalT("bit", 2)
        case Prim(op, l, r):
            it = _int_type(ctx)
            check_host(gamma, l, ctx, it)
            check_host(gamma, r, ctx, it)
            return it
        case Fix(a, w1, w2):
            _check_host_type(a, term.loc)
            _no_qlist(w1, term.loc)
            _no_qlist(w2, term.loc)
            rec = ArrowT(a, CircT(w1, w2))
            return ArrowT(ArrowT(rec, rec), rec)
        case GateFam(name, ix):
            check_host(gamma, ix, ctx, _int_type(ctx))
            if name == "CR":
                qq = TensorW(QUBIT, QUBIT)
                return CircT(qq, qq)
            if name == "R":
                return CircT(QUBIT, QUBIT)
            raise TypeCheckError(
                GATE_SIGNATURE, f"unknown gate family {name!r}", term.loc
            )
        case Ascribe(t, ann):
            _check_host_type(ann, term.loc)
            return check_host(gamma, t, ctx, ann)
    raise TypeCheckError(MISMATCH, f"not a host term: {term!r}")


def _check_host_type(a: HostType, loc=None):
    match a:
        case UnitT() | ClassicalT():
            pass
        case ProductT(l, r) | ArrowT(l, r):
            _check_host_type(l, loc)
            _check_host_type(r, loc)
        case MonadT(i):
            _check_host_type(i, loc)
        case CircT(w1, w2):
            _no_qlist(w1, loc)
            _no_qlist(w2, loc)
        case _:
            raise TypeCheckError(MISMATCH, f"not a host type: {a!r}", loc)


# ---------------------------------------------------------------------------
# Whole programs
# ---------------------------------------------------------------------------


@dataclass
class CheckedProgram:
    program: Program
    def_types: dict  # name -> HostType
    circ_types: dict  # name -> (context, WireType)
    ctx: CheckContext


def check_program(prog: Program) -> CheckedProgram:
    """Check declarations in order; later ones may use earlier ones."""
    ctx = CheckContext(bases=prog.classical_bases(), gates=prog.declared_gates(),
                       table={})
    gamma: dict = {}
    def_types: dict = {}
    circ_types: dict = {}
    for d in prog.decls:
        match d:
            case ClassicalDecl() | GateDecl():
                continue
            case DefDecl(name, ann, term):
                if ann is not None:
                    _check_host_type(ann, d.loc)
                ty = check_host(gamma, term, ctx, ann)
                gamma[name] = ty
                def_types[name] = ty
            case CircDecl(name, context, ann, term):
                for _, wt in context:
                    _no_qlist(wt, d.loc)
                w = check_circuit(gamma, tuple(context), term, ctx)
                if ann is not None and ann != w:
                    raise TypeCheckError(
                        MISMATCH,
                        f"circuit {name!r} declared {ann}, has type {w}",
                        d.loc,
                    )
                circ_types[name] = (tuple(context), w)
    return CheckedProgram(prog, def_types, circ_types, ctx)


# ---------------------------------------------------------------------------
# Measurement sugar
# ---------------------------------------------------------------------------


def generate_meas_circuit(w: WireType) -> Box:
    """The measuring circuit Circ(W, classicalize(W)), by induction on W:
    identity on classical types, the meas gate on qubits, and the
    left-to-right tensor recursion otherwise."""
    match w:
        case _ if is_classical(w):
            return Box(WireP("w"), w, Output(WireP("w")))
        case QuantumW(_, 2):
            return Box(
                WireP("p"),
                w,
                Gate(WireP("p'"), GateRef("meas"), WireP("p"), Output(WireP("p'"))),
            )
        case TensorW(l, r):
            ml = generate_meas_circuit(l)
            mr = generate_meas_circuit(r)
            body = Compose(
                WireP("x"),
                Unbox(ml, WireP("w")),
                Compose(
                    WireP("x'"),
                    Unbox(mr, WireP("w'")),
                    Output(PairP(WireP("x"), WireP("x'"))),
                ),
            )
            return Box(PairP(WireP("w"), WireP("w'")), w, body)
    raise NotClassicalError(f"no measurement circuit for {w}")


def generate_new_circuit(w: WireType) -> Box:
    """The preparing circuit Circ(classicalize(W), W), dual to the
    measuring one."""
    cw = classicalize(w)
    match w:
        case _ if is_classical(w):
            return Box(WireP("w"), w, Output(WireP("w")))
        case QuantumW(_, 2):
            return Box(
                WireP("p"),
                cw,
                Gate(WireP("p'"), GateRef("new"), WireP("p"), Output(WireP("p'"))),
            )
        case TensorW(l, r):
            nl = generate_new_circuit(l)
            nr = generate_new_circuit(r)
            body = Compose(
                WireP("x"),
                Unbox(nl, WireP("w")),
                Compose(
                    WireP("x'"),
                    Unbox(nr, WireP("w'")),
                    Output(PairP(WireP("x"), WireP("x'"))),
                ),
            )
            return Box(PairP(WireP("w"), WireP("w'")), cw, body)
    raise NotClassicalError(f"no preparation circuit for {w}")


def _fresh_wire(base: str, avoid: set) -> str:
    if base not in avoid:
        return base
    i = 1
    while f"{base}{i}" in avoid:
        i += 1
    return f"{base}{i}"


def elaborate_sugar(prog: Program) -> Program:
    """Expand qrun/qlift into core syntax using generated measurement
    circuits; the result contains no sugar constructors and typechecks
    at the same declaration types."""
    checked = check_program(prog)
    ctx = checked.ctx

    def circ(c):
        match c:
            case Output(_):
                return c
            case Unbox(t, p):
                return Unbox(host(t), p, loc=c.loc)
            case Init(t):
                return Init(host(t), loc=c.loc)
            case Compose(p, first, rest):
                return Compose(p, circ(first), circ(rest), loc=c.loc)
            case UnitElim(p, rest):
                return UnitElim(p, circ(rest), loc=c.loc)
            case PairElim(w1, w2, p, rest):
                return PairElim(w1, w2, p, circ(rest), loc=c.loc)
            case Gate(op, g, ip, rest):
                return Gate(op, g, ip, circ(rest), loc=c.loc)
            case Lift(x, p, rest):
                return Lift(x, p, circ(rest), loc=c.loc)
            case QLift(x, p, rest):
                w = ctx.lookup(c)
                assert w is not None, "sugar node escaped the checking pass"
                meas = generate_meas_circuit(w)
                y = _fresh_wire("y", free_wires(rest) | set(pattern_wires(p)))
                return Compose(
                    WireP(y),
                    Unbox(meas, p),
                    Lift(x, WireP(y), circ(rest)),
                    loc=c.loc,
                )
        raise TypeError(f"not a circuit term: {c!r}")

    def host(t):
        match t:
            case QRun(c):
                w = ctx.lookup(t)
                assert w is not None, "sugar node escaped the checking pass"
                meas = generate_meas_circuit(w)
                x = _fresh_wire("x", free_wires(c))
                return Run(
                    Compose(WireP(x), circ(c), Unbox(meas, WireP(x))), loc=t.loc
                )
            case Run(c):
                return Run(circ(c), loc=t.loc)
            case Box(p, w, body):
                return Box(p, w, circ(body), loc=t.loc)
            case Lam(x, a, body):
                return Lam(x, a, host(body), loc=t.loc)
            case App(f, a):
                return App(host(f), host(a), loc=t.loc)
            case Pair(l, r):
                return Pair(host(l), host(r), loc=t.loc)
            case Proj(s, u):
                return Proj(s, host(u), loc=t.loc)
            case Ret(u):
                return Ret(host(u), loc=t.loc)
            case Bind(u, x, v):
                return Bind(host(u), x, host(v), loc=t.loc)
            case If(c, a, b):
                return If(host(c), host(a), host(b), loc=t.loc)
            case Prim(op, l, r):
                return Prim(op, host(l), host(r), loc=t.loc)
            case Ascribe(u, a):
                return Ascribe(host(u), a, loc=t.loc)
            case GateFam(n, ix):
                return GateFam(n, host(ix), loc=t.loc)
            case _:
                return t

    decls = []
    for d in prog.decls:
        match d:
            case DefDecl(name, ann, term):
                decls.append(DefDecl(name, ann, host(term), loc=d.loc))
            case CircDecl(name, context, ann, term):
                decls.append(CircDecl(name, context, ann, circ(term), loc=d.loc))
            case _:
                decls.append(d)
    return Program(tuple(decls))


def has_sugar(node) -> bool:
    """True if any qrun/qlift constructor remains in the term."""
    match node:
        case QRun(_) | QLift():
            return True
        case Compose(_, a, b):
            return has_sugar(a) or has_sugar(b)
        case (
            UnitElim(_, rest)
            | PairElim(_, _, _, rest)
            | Gate(_, _, _, rest)
            | Lift(_, _, rest)
        ):
            return has_sugar(rest)
        case Unbox(t, _) | Init(t):
            return has_sugar(t)
        case Output(_):
            return False
        case Lam(_, _, b) | Proj(_, b) | Ret(b) | Ascribe(b, _) | GateFam(_, b):
            return has_sugar(b)
        case App(a, b) | Pair(a, b):
            return has_sugar(a) or has_sugar(b)
        case Bind(a, _, b):
            return has_sugar(a) or has_sugar(b)
        case If(a, b, c):
            return has_sugar(a) or has_sugar(b) or has_sugar(c)
        case Box(_, _, c) | Run(c):
            return has_sugar(c)
        case Program(decls):
            return any(
                has_sugar(d.term)
                for d in decls
                if isinstance(d, (DefDecl, CircDecl))
            )
        case _:
            return False
