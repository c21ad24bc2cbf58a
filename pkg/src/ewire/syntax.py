"""Abstract syntax for EWire.

EWire is a two-level language: a first-order *circuit* language with a
linear type discipline over wire types, embedded in a higher-order
monadic *host* language.  Wire types classify linear circuit data
(qubits, classical wires, tensors); host types classify ordinary
functional values, including a type ``Circ(W1, W2)`` of boxed circuits
and a monad ``T`` of probabilistic computations.

All syntax values are immutable after construction; operations here are
pure and safe to run concurrently on shared terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


@dataclass(frozen=True)
class Span:
    """Source position (1-indexed line, 0-indexed column)."""

    line: int
    col: int

    def __str__(self):
        return f"{self.line}:{self.col}"


def _loc_field():
    return field(default=None, compare=False, repr=False)


# ---------------------------------------------------------------------------
# Wire types
# ---------------------------------------------------------------------------


class WireType:
    """Base class of wire types: I, tensors, classical and quantum bases."""

    def __str__(self):
        return pretty_print(self)


@dataclass(frozen=True)
class UnitW(WireType):
    """The unit wire type I."""


@dataclass(frozen=True)
class TensorW(WireType):
    left: WireType
    right: WireType


@dataclass(frozen=True)
class ClassicalW(WireType):
    """A classical base wire type with a finite number of values.

    Cardinality must be at least 1; denotation requires enumerating the
    values, so every classical base is declared with an explicit size.
    """

    name: str
    cardinality: int


@dataclass(frozen=True)
class QuantumW(WireType):
    """A circuit-only base type, interpreted as a full matrix algebra."""

    name: str
    dimension: int


@dataclass(frozen=True)
class QListW(WireType):
    """Placeholder for the qubit-list type before size instantiation.

    Rejected by the typechecker; the CLI's ``--qlist-size`` preprocessing
    replaces it with a right-nested tensor of qubits.
    """


BIT = ClassicalW("bit", 2)
QUBIT = QuantumW("qubit", 2)

DEFAULT_INT_CARDINALITY = 64


def int_base(cardinality: int = DEFAULT_INT_CARDINALITY) -> ClassicalW:
    return ClassicalW("int", cardinality)


def is_classical(w: WireType) -> bool:
    """True iff ``w`` contains no quantum base leaf."""
    match w:
        case UnitW() | ClassicalW():
            return True
        case TensorW(l, r):
            return is_classical(l) and is_classical(r)
        case _:
            return False


def classicalize(w: WireType) -> WireType:
    """Replace every quantum base by a classical base of the same size.

    Homomorphic on tensors and the unit; the identity on classical
    types, hence idempotent.  A 2-dimensional quantum base becomes bit.
    """
    match w:
        case UnitW() | ClassicalW():
            return w
        case TensorW(l, r):
            return TensorW(classicalize(l), classicalize(r))
        case QuantumW(name, dim):
            return BIT if dim == 2 else ClassicalW(name, dim)
        case _:
            raise NotClassicalError(f"cannot classicalize {w!r}")


class NotClassicalError(ValueError):
    """Raised when a classical wire type was required."""


# ---------------------------------------------------------------------------
# Host types
# ---------------------------------------------------------------------------


class HostType:
    def __str__(self):
        return pretty_print(self)


@dataclass(frozen=True)
class UnitT(HostType):
    """The host unit type, written 1."""


@dataclass(frozen=True)
class ProductT(HostType):
    left: HostType
    right: HostType


@dataclass(frozen=True)
class ArrowT(HostType):
    arg: HostType
    result: HostType


@dataclass(frozen=True)
class MonadT(HostType):
    """T(A): probabilistic computations returning A."""

    inner: HostType


@dataclass(frozen=True)
class CircT(HostType):
    """Circ(W1, W2): boxed circuits from W1 to W2."""

    w_in: WireType
    w_out: WireType


@dataclass(frozen=True)
class ClassicalT(HostType):
    """A classical base shared between wire and host levels."""

    name: str
    cardinality: int


def lift_type(v: WireType) -> HostType:
    """The host type |V| of a classical wire type V.

    |I| = 1, |V (x) V'| = |V| x |V'| and each classical base is shared.
    Raises NotClassicalError on a quantum leaf.
    """
    match v:
        case UnitW():
            return UnitT()
        case TensorW(l, r):
            return ProductT(lift_type(l), lift_type(r))
        case ClassicalW(name, card):
            return ClassicalT(name, card)
        case _:
            raise NotClassicalError(f"{pretty_print(v)} is not a classical wire type")


def unlift_type(a: HostType) -> WireType:
    """Inverse of lift_type on first-order host types."""
    match a:
        case UnitT():
            return UnitW()
        case ProductT(l, r):
            return TensorW(unlift_type(l), unlift_type(r))
        case ClassicalT(name, card):
            return ClassicalW(name, card)
        case _:
            raise NotClassicalError(f"{pretty_print(a)} is not a first-order host type")


# ---------------------------------------------------------------------------
# Patterns
# ---------------------------------------------------------------------------


class Pattern:
    def __str__(self):
        return pretty_print(self)


@dataclass(frozen=True)
class WireP(Pattern):
    name: str


@dataclass(frozen=True)
class UnitP(Pattern):
    pass


@dataclass(frozen=True)
class PairP(Pattern):
    left: Pattern
    right: Pattern


def pattern_wires(p: Pattern) -> list[str]:
    """Wire names of ``p``, left to right."""
    match p:
        case WireP(x):
            return [x]
        case UnitP():
            return []
        case PairP(l, r):
            return pattern_wires(l) + pattern_wires(r)
    raise TypeError(f"not a pattern: {p!r}")


def pattern_linear(p: Pattern) -> bool:
    """True iff wire names within ``p`` are pairwise distinct."""
    ws = pattern_wires(p)
    return len(ws) == len(set(ws))


class ShapeMismatch(ValueError):
    """Pattern shapes cannot be aligned for substitution or binding."""


# ---------------------------------------------------------------------------
# Circuit terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GateRef:
    """Reference to a gate: a bare name, an indexed rotation family
    member, or a (classically/quantum) controlled gate."""

    name: str
    index: Optional[int] = None
    sub: Optional["GateRef"] = None

    def __str__(self):
        return pretty_print(self)


class CircuitTerm:
    def __str__(self):
        return pretty_print(self)


@dataclass(frozen=True)
class Output(CircuitTerm):
    pat: Pattern
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class Compose(CircuitTerm):
    """p <- C1; C2 — run C1, bind its output wires through p."""

    pat: Pattern
    first: CircuitTerm
    rest: CircuitTerm
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class UnitElim(CircuitTerm):
    """() <- p; C — eliminate a unit-typed pattern."""

    pat: Pattern
    rest: CircuitTerm
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class PairElim(CircuitTerm):
    """(w1, w2) <- p; C — split a tensor-typed pattern into two wires."""

    left: str
    right: str
    pat: Pattern
    rest: CircuitTerm
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class Gate(CircuitTerm):
    """p2 <- gate g p1; C."""

    out_pat: Pattern
    gate: GateRef
    in_pat: Pattern
    rest: CircuitTerm
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class Unbox(CircuitTerm):
    """unbox t p — splice a boxed circuit onto the wires of p."""

    term: "HostTerm"
    pat: Pattern
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class Lift(CircuitTerm):
    """x <= lift p; C — read a classical wire into host variable x."""

    var: str
    pat: Pattern
    rest: CircuitTerm
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class Init(CircuitTerm):
    """init t — create a classical wire holding the value of t."""

    term: "HostTerm"
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class QLift(CircuitTerm):
    """x <= qlift p; C — sugar: measure p, then lift the result."""

    var: str
    pat: Pattern
    rest: CircuitTerm
    loc: Optional[Span] = _loc_field()


# ---------------------------------------------------------------------------
# Host terms
# ---------------------------------------------------------------------------


class HostTerm:
    def __str__(self):
        return pretty_print(self)


@dataclass(frozen=True)
class Var(HostTerm):
    name: str
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class Lam(HostTerm):
    var: str
    ann: HostType
    body: HostTerm
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class App(HostTerm):
    fn: HostTerm
    arg: HostTerm
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class UnitVal(HostTerm):
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class Pair(HostTerm):
    left: HostTerm
    right: HostTerm
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class Proj(HostTerm):
    """fst t / snd t."""

    side: int  # 1 or 2
    arg: HostTerm
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class Ret(HostTerm):
    """return t — unit of the computation monad."""

    arg: HostTerm
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class Bind(HostTerm):
    """let x <= t in u — monadic bind."""

    arg: HostTerm
    var: str
    body: HostTerm
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class Box(HostTerm):
    """box (p : W) => C — reify a circuit as host data."""

    pat: Pattern
    w_in: WireType
    body: CircuitTerm
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class Run(HostTerm):
    """run C — execute a closed classical-output circuit."""

    circuit: CircuitTerm
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class IntLit(HostTerm):
    value: int
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class ClassicalLit(HostTerm):
    """A literal of a named classical base, e.g. (1 : bit)."""

    base: str
    cardinality: int
    value: int
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class If(HostTerm):
    cond: HostTerm
    then: HostTerm
    orelse: HostTerm
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class Prim(HostTerm):
    """Binary arithmetic or comparison: +, -, =."""

    op: str
    left: HostTerm
    right: HostTerm
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class Fix(HostTerm):
    """The fixed-point combinator at type
    ((A -> Circ(W1, W2)) -> (A -> Circ(W1, W2))) -> A -> Circ(W1, W2)."""

    arg_type: HostType
    w_in: WireType
    w_out: WireType
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class GateFam(HostTerm):
    """An indexed gate family applied to a host index, e.g. CR n."""

    name: str
    index: HostTerm
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class Ascribe(HostTerm):
    term: HostTerm
    ann: HostType
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class QRun(HostTerm):
    """qrun C — sugar: run C after measuring its output wires."""

    circuit: CircuitTerm
    loc: Optional[Span] = _loc_field()


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassicalDecl:
    name: str
    cardinality: int
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class GateDecl:
    name: str
    w_in: WireType
    w_out: WireType
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class DefDecl:
    name: str
    ann: Optional[HostType]
    term: HostTerm
    loc: Optional[Span] = _loc_field()


@dataclass(frozen=True)
class CircDecl:
    """A named circuit with an explicit (possibly empty) wire context."""

    name: str
    context: tuple  # tuple[(str, WireType), ...]
    ann: Optional[WireType]
    term: CircuitTerm
    loc: Optional[Span] = _loc_field()


Decl = Union[ClassicalDecl, GateDecl, DefDecl, CircDecl]


@dataclass(frozen=True)
class Program:
    decls: tuple

    def classical_bases(self) -> dict[str, int]:
        bases = {"bit": 2, "int": DEFAULT_INT_CARDINALITY}
        for d in self.decls:
            if isinstance(d, ClassicalDecl):
                bases[d.name] = d.cardinality
        return bases

    def declared_gates(self) -> dict[str, tuple[WireType, WireType]]:
        return {
            d.name: (d.w_in, d.w_out)
            for d in self.decls
            if isinstance(d, GateDecl)
        }

    def find(self, name: str):
        for d in self.decls:
            if isinstance(d, (DefDecl, CircDecl)) and d.name == name:
                return d
        return None


# ---------------------------------------------------------------------------
# Free variables
# ---------------------------------------------------------------------------


def free_wires(c: CircuitTerm) -> set[str]:
    """Wires consumed by ``c`` that it does not bind itself."""
    match c:
        case Output(p) | Unbox(_, p):
            return set(pattern_wires(p))
        case Init(_):
            return set()
        case Compose(p, first, rest):
            return free_wires(first) | (free_wires(rest) - set(pattern_wires(p)))
        case UnitElim(p, rest):
            return set(pattern_wires(p)) | free_wires(rest)
        case PairElim(w1, w2, p, rest):
            return set(pattern_wires(p)) | (free_wires(rest) - {w1, w2})
        case Gate(out_p, _, in_p, rest):
            return set(pattern_wires(in_p)) | (
                free_wires(rest) - set(pattern_wires(out_p))
            )
        case Lift(_, p, rest) | QLift(_, p, rest):
            return set(pattern_wires(p)) | free_wires(rest)
    raise TypeError(f"not a circuit term: {c!r}")


def free_host_vars(node) -> set[str]:
    """Free host-language variables of a host or circuit term."""
    match node:
        case Var(x):
            return {x}
        case Lam(x, _, body):
            return free_host_vars(body) - {x}
        case App(f, a) | Prim(_, f, a) | Pair(f, a):
            return free_host_vars(f) | free_host_vars(a)
        case Proj(_, t) | Ret(t) | Ascribe(t, _) | GateFam(_, t):
            return free_host_vars(t)
        case Bind(t, x, u):
            return free_host_vars(t) | (free_host_vars(u) - {x})
        case If(c, t, e):
            return free_host_vars(c) | free_host_vars(t) | free_host_vars(e)
        case Box(_, _, body) | Run(body) | QRun(body):
            return free_host_vars(body)
        case UnitVal() | IntLit(_) | ClassicalLit() | Fix():
            return set()
        case Init(t):
            return free_host_vars(t)
        case Output(_):
            return set()
        case Compose(_, first, rest):
            return free_host_vars(first) | free_host_vars(rest)
        case UnitElim(_, rest) | PairElim(_, _, _, rest) | Gate(_, _, _, rest):
            return free_host_vars(rest)
        case Unbox(t, _):
            return free_host_vars(t)
        case Lift(x, _, rest) | QLift(x, _, rest):
            return free_host_vars(rest) - {x}
    raise TypeError(f"no host variables in {node!r}")


# ---------------------------------------------------------------------------
# Wire substitution
# ---------------------------------------------------------------------------


def _wire_binding(src: Pattern, dst: Pattern) -> dict[str, Pattern]:
    """Align ``src`` against ``dst`` leafwise.

    Succeeds when the shapes match or ``src`` is a single wire (which
    then maps onto the whole of ``dst``).
    """
    match src:
        case WireP(x):
            return {x: dst}
        case UnitP():
            if isinstance(dst, UnitP):
                return {}
            raise ShapeMismatch(f"cannot bind () to {dst}")
        case PairP(l, r):
            if isinstance(dst, PairP):
                b = _wire_binding(l, dst.left)
                b.update(_wire_binding(r, dst.right))
                return b
            raise ShapeMismatch(f"cannot bind {src} to {dst}")
    raise TypeError(f"not a pattern: {src!r}")


def _subst_in_pattern(p: Pattern, binding: dict[str, Pattern]) -> Pattern:
    match p:
        case WireP(x):
            return binding.get(x, p)
        case UnitP():
            return p
        case PairP(l, r):
            return PairP(_subst_in_pattern(l, binding), _subst_in_pattern(r, binding))
    raise TypeError(f"not a pattern: {p!r}")


def _fresh_name(base: str, avoid: set[str]) -> str:
    if base not in avoid:
        return base
    i = 1
    while f"{base}_{i}" in avoid:
        i += 1
    return f"{base}_{i}"


def subst_pattern(c: CircuitTerm, src: Pattern, dst: Pattern) -> CircuitTerm:
    """Capture-avoiding replacement of the wires of ``src`` by ``dst``.

    The wires of ``src`` must be free in ``c``; internal wire binders
    that would capture a wire of ``dst`` are renamed first.
    """
    binding = _wire_binding(src, dst)
    return _subst_wires(c, binding)


def _subst_wires(c: CircuitTerm, binding: dict[str, Pattern]) -> CircuitTerm:
    if not binding:
        return c
    introduced = {w for p in binding.values() for w in pattern_wires(p)}
    match c:
        case Output(p):
            return Output(_subst_in_pattern(p, binding), loc=c.loc)
        case Unbox(t, p):
            return Unbox(t, _subst_in_pattern(p, binding), loc=c.loc)
        case Init(_):
            return c
        case Compose(p, first, rest):
            first2 = _subst_wires(first, binding)
            p2, rest2 = _under_binder(p, rest, binding, introduced)
            return Compose(p2, first2, rest2, loc=c.loc)
        case UnitElim(p, rest):
            return UnitElim(_subst_in_pattern(p, binding), _subst_wires(rest, binding), loc=c.loc)
        case PairElim(w1, w2, p, rest):
            p2 = _subst_in_pattern(p, binding)
            bp, rest2 = _under_binder(PairP(WireP(w1), WireP(w2)), rest, binding, introduced)
            assert isinstance(bp, PairP) and isinstance(bp.left, WireP)
            return PairElim(bp.left.name, bp.right.name, p2, rest2, loc=c.loc)
        case Gate(out_p, g, in_p, rest):
            in2 = _subst_in_pattern(in_p, binding)
            out2, rest2 = _under_binder(out_p, rest, binding, introduced)
            return Gate(out2, g, in2, rest2, loc=c.loc)
        case Lift(x, p, rest):
            return Lift(x, _subst_in_pattern(p, binding), _subst_wires(rest, binding), loc=c.loc)
        case QLift(x, p, rest):
            return QLift(x, _subst_in_pattern(p, binding), _subst_wires(rest, binding), loc=c.loc)
    raise TypeError(f"not a circuit term: {c!r}")


def _under_binder(bound_pat, rest, binding, introduced):
    """Substitute in the scope of a wire binder.

    Names bound here drop out of the substitution; binders clashing with
    wires introduced by the substitution are alpha-renamed.
    """
    bound = set(pattern_wires(bound_pat))
    inner = {x: p for x, p in binding.items() if x not in bound}
    clash = bound & introduced
    if clash:
        taken = introduced | bound | free_wires(rest) | set(inner)
        renaming: dict[str, Pattern] = {}

        def freshen(q):
            match q:
                case WireP(x) if x in clash:
                    y = _fresh_name(x, taken)
                    taken.add(y)
                    renaming[x] = WireP(y)
                    return WireP(y)
                case PairP(l, r):
                    return PairP(freshen(l), freshen(r))
                case _:
                    return q

        bound_pat = freshen(bound_pat)
        rest = _subst_wires(rest, renaming)
        bound = set(pattern_wires(bound_pat))
        inner = {x: p for x, p in binding.items() if x not in bound}
    return bound_pat, _subst_wires(rest, inner)


# ---------------------------------------------------------------------------
# Host-variable substitution inside terms
# ---------------------------------------------------------------------------


def subst_host(node, var: str, repl: HostTerm):
    """Substitute host term ``repl`` for ``var``, avoiding capture of
    the free host variables of ``repl`` by lambda/let/lift binders."""
    fv = free_host_vars(repl)

    def go(n):
        match n:
            case Var(x):
                return repl if x == var else n
            case Lam(x, a, body):
                if x == var:
                    return n
                if x in fv:
                    y = _fresh_name(x, fv | free_host_vars(body) | {var})
                    body = subst_host(body, x, Var(y))
                    x = y
                return Lam(x, a, go(body), loc=n.loc)
            case Bind(t, x, u):
                t2 = go(t)
                if x == var:
                    return Bind(t2, x, u, loc=n.loc)
                if x in fv:
                    y = _fresh_name(x, fv | free_host_vars(u) | {var})
                    u = subst_host(u, x, Var(y))
                    x = y
                return Bind(t2, x, go(u), loc=n.loc)
            case App(f, a):
                return App(go(f), go(a), loc=n.loc)
            case Pair(l, r):
                return Pair(go(l), go(r), loc=n.loc)
            case Prim(op, l, r):
                return Prim(op, go(l), go(r), loc=n.loc)
            case Proj(s, t):
                return Proj(s, go(t), loc=n.loc)
            case Ret(t):
                return Ret(go(t), loc=n.loc)
            case Ascribe(t, a):
                return Ascribe(go(t), a, loc=n.loc)
            case GateFam(name, t):
                return GateFam(name, go(t), loc=n.loc)
            case If(c, t, e):
                return If(go(c), go(t), go(e), loc=n.loc)
            case Box(p, w, body):
                return Box(p, w, go(body), loc=n.loc)
            case Run(body):
                return Run(go(body), loc=n.loc)
            case QRun(body):
                return QRun(go(body), loc=n.loc)
            case UnitVal() | IntLit(_) | ClassicalLit() | Fix():
                return n
            # circuit constructors
            case Output(_):
                return n
            case Init(t):
                return Init(go(t), loc=n.loc)
            case Compose(p, first, rest):
                return Compose(p, go(first), go(rest), loc=n.loc)
            case UnitElim(p, rest):
                return UnitElim(p, go(rest), loc=n.loc)
            case PairElim(w1, w2, p, rest):
                return PairElim(w1, w2, p, go(rest), loc=n.loc)
            case Gate(op, g, ip, rest):
                return Gate(op, g, ip, go(rest), loc=n.loc)
            case Unbox(t, p):
                return Unbox(go(t), p, loc=n.loc)
            case Lift(x, p, rest):
                if x == var:
                    return n
                if x in fv:
                    y = _fresh_name(x, fv | free_host_vars(rest) | {var})
                    rest = subst_host(rest, x, Var(y))
                    x = y
                return Lift(x, p, go(rest), loc=n.loc)
            case QLift(x, p, rest):
                if x == var:
                    return n
                if x in fv:
                    y = _fresh_name(x, fv | free_host_vars(rest) | {var})
                    rest = subst_host(rest, x, Var(y))
                    x = y
                return QLift(x, p, go(rest), loc=n.loc)
        raise TypeError(f"cannot substitute in {n!r}")

    return go(node)


# ---------------------------------------------------------------------------
# Alpha equivalence
# ---------------------------------------------------------------------------


def alpha_equiv(a, b) -> bool:
    """Equality of terms up to consistent renaming of bound wires and
    bound host variables."""
    return _alpha(a, b, {}, {})


def _alpha_pat(p, q, wmap):
    match (p, q):
        case (WireP(x), WireP(y)):
            wmap[x] = y
            return True
        case (UnitP(), UnitP()):
            return True
        case (PairP(l1, r1), PairP(l2, r2)):
            return _alpha_pat(l1, l2, wmap) and _alpha_pat(r1, r2, wmap)
    return False


def _pat_eq(p, q, wm):
    match (p, q):
        case (WireP(x), WireP(y)):
            return wm.get(x, x) == y
        case (UnitP(), UnitP()):
            return True
        case (PairP(l1, r1), PairP(l2, r2)):
            return _pat_eq(l1, l2, wm) and _pat_eq(r1, r2, wm)
    return False


def _alpha(a, b, wm, hm):
    """wm maps wire names of a to those of b; hm likewise for host vars."""
    if type(a) is not type(b):
        return False
    match (a, b):
        case (Var(x), Var(y)):
            return hm.get(x, x) == y
        case (Lam(x1, t1, b1), Lam(x2, t2, b2)):
            return t1 == t2 and _alpha(b1, b2, wm, {**hm, x1: x2})
        case (App(f1, a1), App(f2, a2)) | (Pair(f1, a1), Pair(f2, a2)):
            return _alpha(f1, f2, wm, hm) and _alpha(a1, a2, wm, hm)
        case (Prim(o1, l1, r1), Prim(o2, l2, r2)):
            return o1 == o2 and _alpha(l1, l2, wm, hm) and _alpha(r1, r2, wm, hm)
        case (Proj(s1, t1), Proj(s2, t2)):
            return s1 == s2 and _alpha(t1, t2, wm, hm)
        case (Ret(t1), Ret(t2)) | (Run(t1), Run(t2)) | (QRun(t1), QRun(t2)):
            return _alpha(t1, t2, wm, hm)
        case (Ascribe(t1, a1), Ascribe(t2, a2)):
            return a1 == a2 and _alpha(t1, t2, wm, hm)
        case (GateFam(n1, t1), GateFam(n2, t2)):
            return n1 == n2 and _alpha(t1, t2, wm, hm)
        case (Bind(t1, x1, u1), Bind(t2, x2, u2)):
            return _alpha(t1, t2, wm, hm) and _alpha(u1, u2, wm, {**hm, x1: x2})
        case (If(c1, t1, e1), If(c2, t2, e2)):
            return all(_alpha(p, q, wm, hm) for p, q in [(c1, c2), (t1, t2), (e1, e2)])
        case (UnitVal(), UnitVal()):
            return True
        case (IntLit(v1), IntLit(v2)):
            return v1 == v2
        case (ClassicalLit(b1, c1, v1), ClassicalLit(b2, c2, v2)):
            return (b1, c1, v1) == (b2, c2, v2)
        case (Fix(a1, i1, o1), Fix(a2, i2, o2)):
            return (a1, i1, o1) == (a2, i2, o2)
        case (Box(p1, w1, c1), Box(p2, w2, c2)):
            if w1 != w2:
                return False
            wm2 = dict(wm)
            return _alpha_pat(p1, p2, wm2) and _alpha(c1, c2, wm2, hm)
        # circuits
        case (Output(p1), Output(p2)):
            return _pat_eq(p1, p2, wm)
        case (Init(t1), Init(t2)):
            return _alpha(t1, t2, wm, hm)
        case (Unbox(t1, p1), Unbox(t2, p2)):
            return _alpha(t1, t2, wm, hm) and _pat_eq(p1, p2, wm)
        case (Compose(p1, f1, r1), Compose(p2, f2, r2)):
            if not _alpha(f1, f2, wm, hm):
                return False
            wm2 = dict(wm)
            return _alpha_pat(p1, p2, wm2) and _alpha(r1, r2, wm2, hm)
        case (UnitElim(p1, r1), UnitElim(p2, r2)):
            return _pat_eq(p1, p2, wm) and _alpha(r1, r2, wm, hm)
        case (PairElim(w1, v1, p1, r1), PairElim(w2, v2, p2, r2)):
            if not _pat_eq(p1, p2, wm):
                return False
            return _alpha(r1, r2, {**wm, w1: w2, v1: v2}, hm)
        case (Gate(o1, g1, i1, r1), Gate(o2, g2, i2, r2)):
            if g1 != g2 or not _pat_eq(i1, i2, wm):
                return False
            wm2 = dict(wm)
            return _alpha_pat(o1, o2, wm2) and _alpha(r1, r2, wm2, hm)
        case (Lift(x1, p1, r1), Lift(x2, p2, r2)) | (
            QLift(x1, p1, r1),
            QLift(x2, p2, r2),
        ):
            return _pat_eq(p1, p2, wm) and _alpha(r1, r2, wm, {**hm, x1: x2})
    return False


# ---------------------------------------------------------------------------
# Pretty printer
# ---------------------------------------------------------------------------


def pretty_print(node) -> str:
    """Render any syntax node back to concrete syntax.

    Printing a well-formed term and reparsing it yields an
    alpha-equivalent term.
    """
    match node:
        case UnitW():
            return "I"
        case TensorW(l, r):
            ls = pretty_print(l)
            if isinstance(l, TensorW):
                ls = f"({ls})"
            return f"{ls} * {pretty_print(r)}"
        case ClassicalW(name, _) | QuantumW(name, _):
            return name
        case QListW():
            return "qlist"
        case UnitT():
            return "1"
        case ProductT(l, r):
            ls = pretty_print(l)
            if isinstance(l, (ProductT, ArrowT)):
                ls = f"({ls})"
            rs = pretty_print(r)
            if isinstance(r, ArrowT):
                rs = f"({rs})"
            return f"{ls} * {rs}"
        case ArrowT(a, b):
            asrc = pretty_print(a)
            if isinstance(a, ArrowT):
                asrc = f"({asrc})"
            return f"{asrc} -> {pretty_print(b)}"
        case MonadT(a):
            return f"T({pretty_print(a)})"
        case CircT(w1, w2):
            return f"Circ({pretty_print(w1)}, {pretty_print(w2)})"
        case ClassicalT(name, _):
            return name
        case WireP(x):
            return x
        case UnitP():
            return "()"
        case PairP(l, r):
            return f"({pretty_print(l)}, {pretty_print(r)})"
        case GateRef("bit-control", _, sub):
            return f"bit-control {pretty_print(sub)}"
        case GateRef("control", _, sub):
            return f"control {pretty_print(sub)}"
        case GateRef(name, None, None):
            return name
        case GateRef(name, ix, None):
            return f"{name} {ix}"
        case _ if isinstance(node, CircuitTerm):
            return _print_circuit(node)
        case _ if isinstance(node, HostTerm):
            return _print_host(node, 0)
        case Program(decls):
            return "\n".join(_print_decl(d) for d in decls) + "\n"
        case _:
            if isinstance(
                node, (ClassicalDecl, GateDecl, DefDecl, CircDecl)
            ):
                return _print_decl(node)
    raise TypeError(f"cannot print {node!r}")


def _gate_spec(g: GateRef) -> str:
    s = pretty_print(g)
    return f"({s})" if (g.sub is not None or g.index is not None) else s


def _rhs(c: CircuitTerm) -> str:
    """Print a circuit in right-hand-side position of a binding."""
    match c:
        case Output(p):
            return f"output {pretty_print(p)}"
        case Unbox(t, p):
            return f"unbox {_atom(t)} {pretty_print(p)}"
        case Init(t):
            return f"init {_atom(t)}"
        case _:
            return f"({_print_circuit(c)})"


def _print_circuit(c: CircuitTerm) -> str:
    parts = []
    while True:
        match c:
            case Output(p):
                parts.append(f"output {pretty_print(p)}")
                break
            case Unbox(t, p):
                parts.append(f"unbox {_atom(t)} {pretty_print(p)}")
                break
            case Init(t):
                parts.append(f"init {_atom(t)}")
                break
            case Compose(p, first, rest):
                parts.append(f"{pretty_print(p)} <- {_rhs(first)}")
                c = rest
            case UnitElim(p, rest):
                parts.append(f"() <- {pretty_print(p)}")
                c = rest
            case PairElim(w1, w2, p, rest):
                parts.append(f"({w1}, {w2}) <- {pretty_print(p)}")
                c = rest
            case Gate(out_p, g, in_p, rest):
                parts.append(
                    f"{pretty_print(out_p)} <- gate {_gate_spec(g)} {pretty_print(in_p)}"
                )
                c = rest
            case Lift(x, p, rest):
                parts.append(f"{x} <= lift {pretty_print(p)}")
                c = rest
            case QLift(x, p, rest):
                parts.append(f"{x} <= qlift {pretty_print(p)}")
                c = rest
            case _:
                raise TypeError(f"cannot print circuit {c!r}")
    return "; ".join(parts)


def _annotated_pattern(p: Pattern, w: WireType) -> str:
    match p:
        case WireP(x):
            return f"{x} : {pretty_print(w)}"
        case UnitP():
            return "()"
        case PairP(l, r):
            if not isinstance(w, TensorW):
                raise ShapeMismatch(f"pattern {p} at non-tensor type {w}")
            return f"({_annotated_pattern(l, w.left)}, {_annotated_pattern(r, w.right)})"
    raise TypeError(f"not a pattern: {p!r}")


def _atom(t: HostTerm) -> str:
    s = _print_host(t, 10)
    return s


def _print_host(t: HostTerm, prec: int) -> str:
    # precedence levels: 0 open, 2 comparison, 4 additive, 6 application,
    # 10 atom
    def wrap(level, s):
        return f"({s})" if prec > level else s

    match t:
        case Var(x):
            return x
        case IntLit(v):
            return str(v) if v >= 0 else f"({v})"
        case ClassicalLit(base, _, v):
            return f"({v} : {base})"
        case UnitVal():
            return "()"
        case Pair(l, r):
            return f"({_print_host(l, 0)}, {_print_host(r, 0)})"
        case Lam(x, a, body):
            return wrap(0, f"lambda {x} : {pretty_print(a)} . {_print_host(body, 0)}")
        case Bind(arg, x, body):
            return wrap(
                0, f"let {x} <= {_print_host(arg, 2)} in {_print_host(body, 0)}"
            )
        case If(c, th, el):
            return wrap(
                0,
                f"if {_print_host(c, 2)} then {_print_host(th, 2)}"
                f" else {_print_host(el, 2)}",
            )
        case Ret(arg):
            return wrap(5, f"return {_print_host(arg, 6)}")
        case Run(circ):
            return wrap(5, f"run ({_print_circuit(circ)})")
        case QRun(circ):
            return wrap(5, f"qrun ({_print_circuit(circ)})")
        case Box(p, w, body):
            return wrap(
                0, f"box {_annotated_pattern(p, w)} => ({_print_circuit(body)})"
            )
        case Prim("=", l, r):
            return wrap(2, f"{_print_host(l, 3)} = {_print_host(r, 3)}")
        case Prim(op, l, r):
            return wrap(4, f"{_print_host(l, 4)} {op} {_print_host(r, 5)}")
        case App(f, a):
            return wrap(6, f"{_print_host(f, 6)} {_print_host(a, 7)}")
        case Proj(side, arg):
            kw = "fst" if side == 1 else "snd"
            return wrap(6, f"{kw} {_print_host(arg, 7)}")
        case GateFam(name, ix):
            return wrap(6, f"{name} {_print_host(ix, 7)}")
        case Fix(a, w1, w2):
            return (
                f"Y[{pretty_print(a)}, {pretty_print(w1)}, {pretty_print(w2)}]"
            )
        case Ascribe(term, a):
            return f"({_print_host(term, 0)} : {pretty_print(a)})"
    raise TypeError(f"cannot print host term {t!r}")


def _print_decl(d) -> str:
    match d:
        case ClassicalDecl(name, card):
            return f"classical {name} {card}"
        case GateDecl(name, w1, w2):
            return f"gate {name} : {pretty_print(w1)} -> {pretty_print(w2)}"
        case DefDecl(name, ann, term):
            anns = f" : {pretty_print(ann)}" if ann is not None else ""
            return f"def {name}{anns} = {_print_host(term, 0)}"
        case CircDecl(name, ctx, ann, term):
            ctxs = ""
            if ctx:
                inner = ", ".join(f"{w} : {pretty_print(ty)}" for w, ty in ctx)
                ctxs = f" ({inner})"
            anns = f" : {pretty_print(ann)}" if ann is not None else ""
            return f"circ {name}{ctxs}{anns} = {_print_circuit(term)}"
    raise TypeError(f"cannot print declaration {d!r}")
