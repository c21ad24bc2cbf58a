"""Exact denotational interpreter.

Well-typed circuits denote completely positive (sub)unital maps in the
Heisenberg direction (see ``algebra``); host terms evaluate call-by-value
to host values, with probabilistic computations realised as finitely
supported distributions.

Two modes are supported: ``cpu`` interprets circuits as unital maps and
total probability distributions; ``cpsu`` admits subunital maps, where
the missing mass is the probability of divergence, and enables the
fixed-point combinator with a global fuel budget.  When the fuel runs
out while a recursive definition is producing a circuit, that circuit
denotes the zero map — the bottom element of the Loewner order — rather
than raising an error, so fueled results are finite approximants of the
true fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import algebra
from .algebra import (
    Distribution, FdAlgebra, NonClassicalSource, SCALARS, SuperOp,
    alg_tensor, compose_tensored, copower_stack, factor_permutation,
    gate_denotation, op_zero, state_to_distribution, tensor_many,
)
from .syntax import (
    App, Ascribe, Bind, Box, ClassicalLit, ClassicalW, Compose, DefDecl,
    CircDecl, Fix, Gate, GateFam, GateRef, If, Init, IntLit, Lam, Lift,
    Output, Pair, PairElim, PairP, Pattern, Prim, Program, Proj, QuantumW,
    QLift, QRun, Ret, Run, TensorW, UnitElim, UnitP, UnitVal,
    UnitW, Unbox, Var, WireP, WireType, free_wires, lift_type,
    pattern_wires, pretty_print,
)
from .typecheck import (
    CheckContext, CheckedProgram, bind_pattern, check_circuit,
    _default_ctx,
)


class EvalError(RuntimeError):
    pass


class FuelExhausted(EvalError):
    """Fuel ran out somewhere a bottom circuit could not absorb it."""


class PartialityError(EvalError):
    """A boundary crossing left the declared classical range (an
    out-of-range init or rotation index).  In cpsu mode such a branch
    denotes the zero map; in cpu mode it is an error."""


# ---------------------------------------------------------------------------
# Values
# ---------------------------------------------------------------------------


class HostValue:
    pass


@dataclass(frozen=True)
class UnitV(HostValue):
    pass


@dataclass(frozen=True)
class IntV(HostValue):
    value: int


@dataclass(frozen=True)
class PairV(HostValue):
    left: HostValue
    right: HostValue


@dataclass(frozen=True, eq=False)
class ClosureV(HostValue):
    var: str
    ann: object
    body: object
    env: dict
    gamma: dict


@dataclass(frozen=True, eq=False)
class CircV(HostValue):
    """A boxed circuit: its wire signature and Heisenberg map."""

    w_in: WireType
    w_out: WireType
    op: SuperOp


@dataclass(frozen=True, eq=False)
class FixCombV(HostValue):
    arg_type: object
    w_in: WireType
    w_out: WireType


@dataclass(frozen=True, eq=False)
class FixV(HostValue):
    """A recursive function value: unfolds on application, one unit of
    fuel per unfolding."""

    functional: HostValue
    arg_type: object
    w_in: WireType
    w_out: WireType


@dataclass(frozen=True, eq=False)
class DistV(HostValue):
    """A computation: a finitely supported subdistribution on values."""

    weights: dict  # HostValue -> float

    def mass(self):
        return float(sum(self.weights.values()))


@dataclass(frozen=True)
class Mode:
    kind: str  # 'cpu' | 'cpsu'
    fuel: int = 10_000

    @staticmethod
    def cpu() -> "Mode":
        return Mode("cpu", 0)

    @staticmethod
    def cpsu(fuel: int = 10_000) -> "Mode":
        return Mode("cpsu", fuel)

    @property
    def is_cpsu(self):
        return self.kind == "cpsu"


BOTTOM = "⊥"  # reserved divergence outcome in sampled counts


# ---------------------------------------------------------------------------
# Classical enumeration and value coding
# ---------------------------------------------------------------------------


def enumerate_classical(v: WireType) -> list:
    """All values of a classical wire type, lexicographically with the
    left tensor factor most significant — the same order as the block
    layout of the denoted algebra."""
    match v:
        case UnitW():
            return [()]
        case ClassicalW(_, k):
            return list(range(k))
        case TensorW(l, r):
            return [(a, b) for a in enumerate_classical(l) for b in enumerate_classical(r)]
    raise NonClassicalSource(f"{pretty_print(v)} is not classical")


def classical_size(v: WireType) -> int:
    match v:
        case UnitW():
            return 1
        case ClassicalW(_, k):
            return k
        case TensorW(l, r):
            return classical_size(l) * classical_size(r)
    raise NonClassicalSource(f"{pretty_print(v)} is not classical")


def classical_index(v: WireType, value) -> int:
    """Position of a plain classical value in the enumeration of V."""
    match v:
        case UnitW():
            if value != ():
                raise EvalError(f"expected (), got {value!r}")
            return 0
        case ClassicalW(name, k):
            if not isinstance(value, int) or not (0 <= value < k):
                raise PartialityError(
                    f"value {value!r} out of range for {name} (cardinality {k})"
                )
            return value
        case TensorW(l, r):
            a, b = value
            return classical_index(l, a) * classical_size(r) + classical_index(r, b)
    raise NonClassicalSource(f"{pretty_print(v)} is not classical")


def decode_value(v: WireType, plain) -> HostValue:
    match v:
        case UnitW():
            return UnitV()
        case ClassicalW():
            return IntV(plain)
        case TensorW(l, r):
            return PairV(decode_value(l, plain[0]), decode_value(r, plain[1]))
    raise NonClassicalSource(f"{pretty_print(v)} is not classical")


def encode_value(v: WireType, hv: HostValue):
    match (v, hv):
        case (UnitW(), UnitV()):
            return ()
        case (ClassicalW(), IntV(n)):
            return n
        case (TensorW(l, r), PairV(a, b)):
            return (encode_value(l, a), encode_value(r, b))
    raise EvalError(f"value {hv!r} does not inhabit {pretty_print(v)}")


# ---------------------------------------------------------------------------
# Wire type denotation
# ---------------------------------------------------------------------------


def denote_wire(w: WireType) -> FdAlgebra:
    """The algebra of a wire type: scalars for I, the k-fold sum of
    scalars for a classical base of size k, a full matrix block for a
    quantum base, tensors structurally."""
    match w:
        case UnitW():
            return SCALARS
        case ClassicalW(_, k):
            return FdAlgebra((1,) * k)
        case QuantumW(_, d):
            return FdAlgebra((d,))
        case TensorW(l, r):
            return alg_tensor(denote_wire(l), denote_wire(r))
    raise EvalError(f"no denotation for wire type {w!r}")


def denote_context(omega) -> FdAlgebra:
    return tensor_many([denote_wire(ty) for _, ty in omega])


# ---------------------------------------------------------------------------
# Evaluator
# ---------------------------------------------------------------------------


def _memo_key(hv: HostValue):
    match hv:
        case IntV(n):
            return ("i", n)
        case UnitV():
            return ("u",)
        case PairV(a, b):
            ka, kb = _memo_key(a), _memo_key(b)
            if ka is None or kb is None:
                return None
            return ("p", ka, kb)
        case _:
            return None


class Evaluator:
    """Call-by-value evaluation plus compositional circuit denotation.

    A single evaluator holds the mode, the remaining fuel (shared by all
    fixed points unfolded under one top-level evaluation) and the type
    table of the checked program it runs.
    """

    def __init__(self, ctx: CheckContext | None = None, mode: Mode | None = None,
                 memoize: bool = True):
        self.ctx = ctx or _default_ctx()
        self.mode = mode or Mode.cpu()
        self.fuel = self.mode.fuel
        self.memoize = memoize
        self._app_cache: dict = {}

    # -- host evaluation ---------------------------------------------------

    def eval_host(self, gamma: dict, term, env: dict) -> HostValue:
        match term:
            case Var(x):
                try:
                    return env[x]
                except KeyError:
                    raise EvalError(f"unbound variable {x!r}")
            case Lam(x, a, body):
                return ClosureV(x, a, body, env, gamma)
            case App(f, a):
                fv = self.eval_host(gamma, f, env)
                av = self.eval_host(gamma, a, env)
                return self.apply(fv, av)
            case UnitVal():
                return UnitV()
            case Pair(l, r):
                return PairV(self.eval_host(gamma, l, env), self.eval_host(gamma, r, env))
            case Proj(side, t):
                v = self.eval_host(gamma, t, env)
                if not isinstance(v, PairV):
                    raise EvalError(f"projection from non-pair {v!r}")
                return v.left if side == 1 else v.right
            case Ret(t):
                return DistV({self.eval_host(gamma, t, env): 1.0})
            case Bind(t, x, u):
                d = self.eval_host(gamma, t, env)
                if not isinstance(d, DistV):
                    raise EvalError(f"let <= of a non-computation {d!r}")
                a = self.ctx.lookup(term)
                gamma2 = dict(gamma)
                if a is not None:
                    gamma2[x] = a
                out: dict = {}
                for hv, w in d.weights.items():
                    env2 = dict(env)
                    env2[x] = hv
                    d2 = self.eval_host(gamma2, u, env2)
                    if not isinstance(d2, DistV):
                        raise EvalError("body of let <= must be a computation")
                    for hv2, w2 in d2.weights.items():
                        out[hv2] = out.get(hv2, 0.0) + w * w2
                return DistV(out)
            case Box(p, w, body):
                sig = self.ctx.lookup(term)
                bindings = bind_pattern(p, w)
                op = self.denote_circuit(gamma, tuple(bindings), body, env)
                w2 = sig[1] if sig else check_circuit(gamma, tuple(bindings), body, self.ctx)
                return CircV(w, w2, op)
            case Run(c):
                v = self.ctx.lookup(term)
                if v is None:
                    v = check_circuit(gamma, (), c, self.ctx)
                op = self.denote_circuit(gamma, (), c, env)
                dist = self.run_circuit(op, v)
                return DistV({decode_value(v, k): w for k, w in dist.items()})
            case IntLit(n):
                return IntV(n)
            case ClassicalLit(_, _, n):
                return IntV(n)
            case If(c, t, e):
                cv = self.eval_host(gamma, c, env)
                if not isinstance(cv, IntV):
                    raise EvalError(f"condition evaluated to {cv!r}")
                return self.eval_host(gamma, t if cv.value != 0 else e, env)
            case Prim(op, l, r):
                lv = self.eval_host(gamma, l, env)
                rv = self.eval_host(gamma, r, env)
                if not (isinstance(lv, IntV) and isinstance(rv, IntV)):
                    raise EvalError(f"arithmetic on non-numbers {lv!r}, {rv!r}")
                if op == "+":
                    return IntV(lv.value + rv.value)
                if op == "-":
                    return IntV(lv.value - rv.value)
                if op == "=":
                    return IntV(1 if lv.value == rv.value else 0)
                raise EvalError(f"unknown primitive {op!r}")
            case Fix(a, w1, w2):
                if not self.mode.is_cpsu:
                    raise EvalError(
                        "the fixed-point combinator requires cpsu mode"
                    )
                return FixCombV(a, w1, w2)
            case GateFam(name, ix):
                n = self.eval_host(gamma, ix, env)
                if not isinstance(n, IntV):
                    raise EvalError("gate family index must be a number")
                if n.value < 0:
                    raise PartialityError(
                        f"gate family {name} rejects negative index {n.value}"
                    )
                g = GateRef(name, index=n.value)
                w_in, w_out = algebra.gate_signature(g)
                return CircV(w_in, w_out, gate_denotation(g))
            case Ascribe(t, _):
                return self.eval_host(gamma, t, env)
            case QRun(_):
                raise EvalError("qrun must be elaborated before evaluation")
        raise EvalError(f"cannot evaluate {term!r}")

    def apply(self, fv: HostValue, av: HostValue) -> HostValue:
        match fv:
            case ClosureV(x, a, body, cenv, cgamma):
                key = None
                if self.memoize:
                    k = _memo_key(av)
                    if k is not None:
                        key = (id(fv), k)
                        hit = self._app_cache.get(key)
                        # the cached closure is pinned so its id cannot
                        # be recycled by a different closure
                        if hit is not None and hit[0] is fv:
                            return hit[1]
                env2 = dict(cenv)
                env2[x] = av
                gamma2 = dict(cgamma)
                gamma2[x] = a
                out = self.eval_host(gamma2, body, env2)
                if key is not None:
                    self._app_cache[key] = (fv, out)
                return out
            case FixCombV(a, w1, w2):
                return FixV(av, a, w1, w2)
            case FixV(func, _, w1, w2):
                if self.fuel <= 0:
                    return CircV(
                        w1, w2, op_zero(denote_wire(w2), denote_wire(w1))
                    )
                self.fuel -= 1
                unfolded = self.apply(func, fv)
                return self.apply(unfolded, av)
        raise EvalError(f"cannot apply non-function {fv!r}")

    # -- circuit denotation --------------------------------------------------

    def denote_circuit(self, gamma: dict, omega, term, env: dict) -> SuperOp:
        """The Heisenberg map of ``gamma; omega |- term : W``, from the
        algebra of W to the algebra of the ordered context."""
        omega = tuple(omega)
        match term:
            case Output(p):
                return self._collect(omega, p)
            case Unbox(t, p):
                v = self.eval_host(gamma, t, env)
                if isinstance(v, FixV):
                    # a recursive function is not a circuit; applying it
                    # happens in host syntax, so this is unreachable when
                    # the term is well-typed
                    raise EvalError("unbox of a non-circuit value")
                if not isinstance(v, CircV):
                    raise EvalError(f"unbox of non-circuit value {v!r}")
                return self._reorder_like(omega, pattern_bindings(omega, p), v.op)
            case Init(t):
                if omega:
                    raise EvalError("init consumes no wires")
                v = self.ctx.lookup(term)
                if v is None:
                    v = check_circuit(gamma, (), term, self.ctx)
                hv = self.eval_host(gamma, t, env)
                idx = classical_index(v, encode_value(v, hv))
                src = denote_wire(v)
                row = np.zeros((1, src.dim))
                row[0, idx] = 1.0
                return SuperOp(src, SCALARS, row)
            case Compose(p, first, rest):
                fw = free_wires(first)
                sel = tuple(b for b in omega if b[0] in fw)
                remaining = tuple(b for b in omega if b[0] not in fw)
                f1 = self.denote_circuit(gamma, sel, first, env)
                w1 = self.ctx.lookup(term)
                if w1 is None:
                    w1 = check_circuit(gamma, sel, first, self.ctx)
                bindings = bind_pattern(p, w1)
                f2 = self.denote_circuit(
                    gamma, tuple(bindings) + remaining, rest, env
                )
                h = compose_tensored(f1, denote_context(remaining), f2)
                return self._reorder_like(omega, list(sel) + list(remaining), h)
            case UnitElim(_, rest):
                names = set(pattern_wires(term.pat))
                remaining = tuple(b for b in omega if b[0] not in names)
                f = self.denote_circuit(gamma, remaining, rest, env)
                return SuperOp(f.source, denote_context(omega), f.matrix)
            case PairElim(w1, w2, p, rest):
                sel = pattern_bindings(omega, p)
                remaining = tuple(b for b in omega if b[0] not in {n for n, _ in sel})
                ty = _pattern_type(dict(omega), p)
                bindings = ((w1, ty.left), (w2, ty.right))
                f = self.denote_circuit(gamma, bindings + remaining, rest, env)
                return self._reorder_like(omega, list(sel) + list(remaining), f)
            case Gate(out_p, g, in_p, rest):
                gop = gate_denotation(g, self.ctx.gates)
                sel = pattern_bindings(omega, in_p)
                remaining = tuple(
                    b for b in omega if b[0] not in {n for n, _ in sel}
                )
                w_in, w_out = algebra.gate_signature(g, self.ctx.gates)
                bindings = bind_pattern(out_p, w_out)
                f2 = self.denote_circuit(
                    gamma, tuple(bindings) + remaining, rest, env
                )
                h = compose_tensored(gop, denote_context(remaining), f2)
                return self._reorder_like(omega, list(sel) + list(remaining), h)
            case Lift(x, p, rest):
                sel = pattern_bindings(omega, p)
                remaining = tuple(
                    b for b in omega if b[0] not in {n for n, _ in sel}
                )
                v = _pattern_type(dict(omega), p)
                values = enumerate_classical(v)
                gamma2 = dict(gamma)
                gamma2[x] = lift_type(v)
                branches = []
                for val in values:
                    env2 = dict(env)
                    env2[x] = decode_value(v, val)
                    try:
                        branches.append(
                            self.denote_circuit(gamma2, remaining, rest, env2)
                        )
                    except PartialityError:
                        if not self.mode.is_cpsu:
                            raise
                        w = check_circuit(gamma2, remaining, rest, self.ctx)
                        branches.append(
                            op_zero(denote_wire(w), denote_context(remaining))
                        )
                stacked = copower_stack(branches)
                # the copower of the remaining context is literally the
                # algebra of V (x) remaining
                lifted = SuperOp(
                    stacked.source,
                    alg_tensor(denote_wire(v), denote_context(remaining)),
                    stacked.matrix,
                )
                return self._reorder_like(omega, list(sel) + list(remaining), lifted)
            case QLift(_, _, _):
                raise EvalError("qlift must be elaborated before evaluation")
        raise EvalError(f"cannot denote {term!r}")

    def _collect(self, omega, p: Pattern) -> SuperOp:
        """Denotation of output: the structural permutation mapping the
        pattern-ordered tensor onto the context order."""
        sel = pattern_bindings(omega, p)
        algs = [denote_wire(ty) for _, ty in sel]
        src = tensor_many(algs)
        names = [n for n, _ in sel]
        pos = {n: i for i, n in enumerate(names)}
        order = [pos[w] for w, _ in omega if w in pos]
        if order == list(range(len(order))) and len(order) == len(omega):
            return SuperOp(src, denote_context(omega), np.eye(src.dim))
        perm = factor_permutation(algs, order)
        m = np.zeros((src.dim, src.dim))
        m[perm, np.arange(src.dim)] = 1.0
        return SuperOp(src, denote_context(omega), m)

    def _reorder_like(self, omega, factors, h: SuperOp) -> SuperOp:
        """Permute the rows of ``h`` (whose target is the tensor of
        ``factors`` in listed order) into the order of ``omega``."""
        names = [n for n, _ in factors]
        pos = {n: i for i, n in enumerate(names)}
        order = [pos[w] for w, _ in omega]
        tgt = denote_context(omega)
        if order == list(range(len(order))):
            return SuperOp(h.source, tgt, h.matrix)
        algs = [denote_wire(ty) for _, ty in factors]
        perm = factor_permutation(algs, order)
        out = np.empty_like(h.matrix)
        out[perm, :] = h.matrix
        return SuperOp(h.source, tgt, out)

    # -- running -------------------------------------------------------------

    def run_circuit(self, op: SuperOp, v: WireType) -> Distribution:
        """Read the output distribution of a closed circuit of classical
        type; total mass 1 in cpu mode, at most 1 in cpsu mode."""
        values = enumerate_classical(v)
        dist = state_to_distribution(op, values=values)
        mass = dist.mass()
        if self.mode.is_cpsu:
            if mass > 1 + 1e-9:
                raise EvalError(f"distribution mass {mass} exceeds 1")
        else:
            if abs(mass - 1) > 1e-9:
                raise EvalError(
                    f"cpu-mode circuit produced total mass {mass}, expected 1"
                )
        return dist


def pattern_bindings(omega, p: Pattern):
    """The wires of ``p`` with their context types, in pattern order."""
    declared = dict(omega)
    return [(n, declared[n]) for n in pattern_wires(p)]


def _pattern_type(declared: dict, p: Pattern) -> WireType:
    match p:
        case WireP(x):
            return declared[x]
        case UnitP():
            return UnitW()
        case PairP(l, r):
            return TensorW(_pattern_type(declared, l), _pattern_type(declared, r))
    raise EvalError(f"not a pattern: {p!r}")


# ---------------------------------------------------------------------------
# Module-level entry points
# ---------------------------------------------------------------------------


def denote_circuit(gamma, omega, term, env=None, mode: Mode | None = None,
                   ctx: CheckContext | None = None) -> SuperOp:
    ev = Evaluator(ctx=ctx, mode=mode or Mode.cpu())
    return ev.denote_circuit(dict(gamma), tuple(omega), term, dict(env or {}))


def eval_host(gamma, term, env=None, mode: Mode | None = None,
              ctx: CheckContext | None = None) -> HostValue:
    ev = Evaluator(ctx=ctx, mode=mode or Mode.cpu())
    return ev.eval_host(dict(gamma), term, dict(env or {}))


def run_circuit(op: SuperOp, v: WireType, mode: Mode | None = None) -> Distribution:
    ev = Evaluator(mode=mode or Mode.cpu())
    return ev.run_circuit(op, v)


def fix_eval(functional: HostValue, arg: HostValue, mode: Mode,
             arg_type=None, w_in=None, w_out=None,
             evaluator: Evaluator | None = None) -> HostValue:
    """Apply the fixed point of ``functional`` to ``arg`` under a fuel
    budget; bottoming out yields the zero circuit."""
    ev = evaluator or Evaluator(mode=mode)
    if isinstance(functional, FixV):
        fv = functional
    else:
        if w_in is None or w_out is None:
            raise EvalError("fix_eval needs the circuit signature")
        fv = FixV(functional, arg_type, w_in, w_out)
    return ev.apply(fv, arg)


def evaluate_program(checked: CheckedProgram, mode: Mode | None = None,
                     memoize: bool | None = None):
    """Evaluate all host declarations in order.

    Returns ``(evaluator, gamma, env)``.  Memoisation of pure function
    applications is enabled automatically for programs that contain no
    fixed-point combinator (whose fuel accounting it would disturb).
    """
    prog = checked.program
    if memoize is None:
        memoize = not _contains_fix(prog)
    ev = Evaluator(ctx=checked.ctx, mode=mode or Mode.cpu(), memoize=memoize)
    gamma: dict = {}
    env: dict = {}
    for d in prog.decls:
        if isinstance(d, DefDecl):
            # the fuel budget is global within one top-level evaluation
            ev.fuel = ev.mode.fuel
            env[d.name] = ev.eval_host(gamma, d.term, env)
            gamma[d.name] = checked.def_types[d.name]
    ev.fuel = ev.mode.fuel
    return ev, gamma, env


def _contains_fix(node) -> bool:
    match node:
        case Fix():
            return True
        case Program(decls):
            return any(
                _contains_fix(d.term)
                for d in decls
                if isinstance(d, (DefDecl, CircDecl))
            )
        case Lam(_, _, b) | Proj(_, b) | Ret(b) | Ascribe(b, _) | GateFam(_, b):
            return _contains_fix(b)
        case App(a, b) | Pair(a, b):
            return _contains_fix(a) or _contains_fix(b)
        case Bind(a, _, b):
            return _contains_fix(a) or _contains_fix(b)
        case If(a, b, c):
            return _contains_fix(a) or _contains_fix(b) or _contains_fix(c)
        case Box(_, _, c) | Run(c) | QRun(c):
            return _contains_fix(c)
        case Compose(_, a, b):
            return _contains_fix(a) or _contains_fix(b)
        case (
            UnitElim(_, rest)
            | PairElim(_, _, _, rest)
            | Gate(_, _, _, rest)
            | Lift(_, _, rest)
            | QLift(_, _, rest)
        ):
            return _contains_fix(rest)
        case Unbox(t, _) | Init(t):
            return _contains_fix(t)
        case _:
            return False


def call_with_stack(fn, stack_bytes: int = 256 * 1024 * 1024,
                    recursion_limit: int = 4_000_000):
    """Run ``fn`` on a thread with a large stack and recursion limit;
    deeply fueled fixed points recurse far beyond the defaults."""
    import sys as sys_mod
    import threading

    box = {}

    def target():
        old = sys_mod.getrecursionlimit()
        try:
            sys_mod.setrecursionlimit(recursion_limit)
            box["value"] = fn()
        except BaseException as exc:
            box["error"] = exc
        finally:
            sys_mod.setrecursionlimit(old)

    try:
        old_size = threading.stack_size(stack_bytes)
    except (ValueError, RuntimeError):
        old_size = None
    try:
        t = threading.Thread(target=target)
        t.start()
        t.join()
    finally:
        if old_size is not None:
            threading.stack_size(old_size)
    if "error" in box:
        raise box["error"]
    return box["value"]


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def _splitmix64_stream(seed: int):
    state = seed & 0xFFFFFFFFFFFFFFFF
    mask = 0xFFFFFFFFFFFFFFFF
    while True:
        state = (state + 0x9E3779B97F4A7C15) & mask
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        z = z ^ (z >> 31)
        yield (z >> 11) * (2.0 ** -53)


def sample(dist: Distribution, seed: int, shots: int) -> dict:
    """Empirical counts from ``shots`` draws of a splitmix64-fed
    inverse-CDF sampler; residual (diverging) mass lands on the reserved
    outcome.  Bit-exact across platforms for a fixed (seed, shots)."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    outcomes = list(dist.items())
    counts = {k: 0 for k, _ in outcomes}
    diverge = 0
    stream = _splitmix64_stream(seed)
    for _ in range(shots):
        u = next(stream)
        acc = 0.0
        hit = None
        for k, w in outcomes:
            acc += w
            if u < acc:
                hit = k
                break
        if hit is None:
            diverge += 1
        else:
            counts[hit] += 1
    if diverge:
        counts[BOTTOM] = diverge
    return counts
