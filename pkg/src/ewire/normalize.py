"""Rewrite engine for the sound circuit equations.

Eight structural rules (box elimination, output substitution, the
commuting conversions for gates, lifts and the two eliminators, and the
two eliminator eta rules) plus two optional rules relating lift and
init, which come from the copower structure and are disabled by default
because the init/lift direction duplicates the initialising host term.

The strategy is leftmost-outermost with the rules tried in a fixed
priority order at each position; every run is audited by a trace that
replays to the same result.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .algebra import frobenius_distance
from .denote import Evaluator, Mode
from .syntax import (
    App, Ascribe, Box, ClassicalLit, Compose, Gate, HostTerm, If, Init,
    IntLit, Lam, Lift, Output, Pair, PairElim, PairP, Pattern, Prim, Proj,
    QLift, ShapeMismatch, UnitElim, UnitP, Unbox, Var, WireP,
    free_host_vars, free_wires, pattern_wires, subst_host, subst_pattern,
)
from .typecheck import CheckContext, check_circuit


class NoMatch(Exception):
    """The rewrite rule does not apply at this position."""


class StepLimit(Exception):
    def __init__(self, partial, trace):
        super().__init__(f"rewriting stopped after {len(trace.steps)} steps")
        self.partial = partial
        self.trace = trace


@dataclass
class Trace:
    steps: list = field(default_factory=list)  # (index, rule name, location)
    hit_limit: bool = False

    def record(self, rule: str, loc):
        self.steps.append((len(self.steps), rule, str(loc) if loc else "?"))

    def to_json_lines(self):
        return [
            {"step": i, "rule": r, "span": s} for i, r, s in self.steps
        ]


def _fresh(base: str, avoid: set) -> str:
    if base not in avoid:
        return base
    i = 1
    while f"{base}_{i}" in avoid:
        i += 1
    return f"{base}_{i}"


def _freshen_binders(pat: Pattern, scope, avoid: set):
    """Rename the wires of a binder pattern away from ``avoid``,
    substituting consistently in its scope."""
    clash = set(pattern_wires(pat)) & avoid
    if not clash:
        return pat, scope
    taken = set(avoid) | set(pattern_wires(pat)) | free_wires(scope)
    mapping = {}

    def go(q):
        match q:
            case WireP(x) if x in clash:
                y = _fresh(x, taken)
                taken.add(y)
                mapping[x] = WireP(y)
                return WireP(y)
            case PairP(l, r):
                return PairP(go(l), go(r))
            case _:
                return q

    new_pat = go(pat)
    new_scope = subst_pattern(scope, _mapping_pattern(mapping), _mapping_target(mapping))
    return new_pat, new_scope


def _mapping_pattern(mapping):
    pats = [WireP(x) for x in mapping]
    return _pair_up(pats)


def _mapping_target(mapping):
    return _pair_up(list(mapping.values()))


def _pair_up(ps):
    out = ps[0]
    for p in ps[1:]:
        out = PairP(out, p)
    return out


# ---------------------------------------------------------------------------
# The rules
# ---------------------------------------------------------------------------


def _rule_unbox_box(c):
    match c:
        case Unbox(Box(w_pat, _, body), p):
            try:
                return subst_pattern(body, w_pat, p)
            except ShapeMismatch:
                raise NoMatch
    raise NoMatch


def _rule_output_subst(c):
    match c:
        case Compose(p, Output(p2), rest):
            try:
                return subst_pattern(rest, p, p2)
            except ShapeMismatch:
                raise NoMatch
    raise NoMatch


def _rule_gate_commute(c):
    match c:
        case Compose(w, Gate(p2, g, p1, n), rest):
            p2f, nf = _freshen_binders(
                p2, n, free_wires(rest) | set(pattern_wires(w))
            )
            return Gate(p2f, g, p1, Compose(w, nf, rest, loc=c.loc), loc=c.loc)
    raise NoMatch


def _rule_lift_commute(c):
    match c:
        case Compose(w, Lift(x, p, n), rest):
            if x in free_host_vars(rest):
                y = _fresh(x, free_host_vars(rest) | free_host_vars(n) | {x})
                n = subst_host(n, x, Var(y))
                x = y
            return Lift(x, p, Compose(w, n, rest, loc=c.loc), loc=c.loc)
    raise NoMatch


def _rule_unit_eta(c):
    match c:
        case UnitElim(UnitP(), rest):
            return rest
    raise NoMatch


def _rule_pair_eta(c):
    match c:
        case PairElim(w1, w2, PairP(p1, p2), rest):
            try:
                return subst_pattern(
                    rest, PairP(WireP(w1), WireP(w2)), PairP(p1, p2)
                )
            except ShapeMismatch:
                raise NoMatch
    raise NoMatch


def _rule_unit_commute(c):
    match c:
        case Compose(w, UnitElim(p, n), rest):
            return UnitElim(p, Compose(w, n, rest, loc=c.loc), loc=c.loc)
    raise NoMatch


def _rule_pair_commute(c):
    match c:
        case Compose(w, PairElim(w1, w2, p, n), rest):
            binder = PairP(WireP(w1), WireP(w2))
            bf, nf = _freshen_binders(
                binder, n, free_wires(rest) | set(pattern_wires(w))
            )
            assert isinstance(bf, PairP)
            return PairElim(
                bf.left.name, bf.right.name, p,
                Compose(w, nf, rest, loc=c.loc), loc=c.loc,
            )
    raise NoMatch


def _rule_lift_init(c):
    # x <= lift p; init x  ==  output p
    match c:
        case Lift(x, p, Init(Var(y))) if x == y:
            return Output(p, loc=c.loc)
    raise NoMatch


def _rule_init_lift(c):
    # p <- init t; x <= lift p; C  ==  C[x := t]
    match c:
        case Compose(WireP(w), Init(t), Lift(x, WireP(w2), rest)) if w == w2:
            return subst_host(rest, x, t)
    raise NoMatch


@dataclass(frozen=True)
class RewriteRule:
    name: str
    apply_at: object  # CircuitTerm -> CircuitTerm, raising NoMatch


STRUCTURAL_RULES = (
    RewriteRule("UnboxBox", _rule_unbox_box),
    RewriteRule("OutputSubst", _rule_output_subst),
    RewriteRule("GateCommute", _rule_gate_commute),
    RewriteRule("LiftCommute", _rule_lift_commute),
    RewriteRule("UnitEta", _rule_unit_eta),
    RewriteRule("PairEta", _rule_pair_eta),
    RewriteRule("UnitCommute", _rule_unit_commute),
    RewriteRule("PairCommute", _rule_pair_commute),
)

COPOWER_RULES = (
    RewriteRule("LiftInit", _rule_lift_init),
    RewriteRule("InitLift", _rule_init_lift),
)

RULES_BY_NAME = {r.name: r for r in STRUCTURAL_RULES + COPOWER_RULES}


def apply_rule(rule: RewriteRule, term):
    """One leftmost-outermost application of a single rule; raises
    NoMatch if the rule applies nowhere in the term."""
    done = _rewrite_first(term, (rule,), Trace())
    if done is None:
        raise NoMatch(rule.name)
    return done


def _rewrite_first(term, rules, trace: Trace):
    for rule in rules:
        try:
            out = rule.apply_at(term)
        except NoMatch:
            continue
        trace.record(rule.name, getattr(term, "loc", None))
        return out
    # descend, leftmost child first
    match term:
        case Compose(p, first, rest):
            out = _rewrite_first(first, rules, trace)
            if out is not None:
                return Compose(p, out, rest, loc=term.loc)
            out = _rewrite_first(rest, rules, trace)
            if out is not None:
                return Compose(p, first, out, loc=term.loc)
        case UnitElim(p, rest):
            out = _rewrite_first(rest, rules, trace)
            if out is not None:
                return UnitElim(p, out, loc=term.loc)
        case PairElim(w1, w2, p, rest):
            out = _rewrite_first(rest, rules, trace)
            if out is not None:
                return PairElim(w1, w2, p, out, loc=term.loc)
        case Gate(op, g, ip, rest):
            out = _rewrite_first(rest, rules, trace)
            if out is not None:
                return Gate(op, g, ip, out, loc=term.loc)
        case Lift(x, p, rest):
            out = _rewrite_first(rest, rules, trace)
            if out is not None:
                return Lift(x, p, out, loc=term.loc)
    return None


def normalize(term, max_steps: int = 1000, copower_rules: bool = False):
    """Rewrite to a normal form; returns ``(term, trace)``.

    Raises StepLimit (carrying the partial result and trace) when
    ``max_steps`` rewrites did not reach a normal form.
    """
    rules = STRUCTURAL_RULES + (COPOWER_RULES if copower_rules else ())
    trace = Trace()
    current = term
    for _ in range(max_steps):
        out = _rewrite_first(current, rules, trace)
        if out is None:
            return current, trace
        current = out
    if _rewrite_first(current, rules, Trace()) is None:
        return current, trace
    trace.hit_limit = True
    raise StepLimit(current, trace)


# ---------------------------------------------------------------------------
# Numeric equivalence oracle
# ---------------------------------------------------------------------------


def check_equiv(c1, c2, gamma=None, omega=(), env=None, tol: float = 1e-9,
                mode: Mode | None = None, ctx: CheckContext | None = None) -> bool:
    """Do the two circuits denote the same map at the same judgment?"""
    gamma = dict(gamma or {})
    omega = tuple(omega)
    ctx = ctx or CheckContext(bases={"bit": 2, "int": 64}, gates={}, table={})
    w1 = check_circuit(gamma, omega, c1, ctx)
    w2 = check_circuit(gamma, omega, c2, ctx)
    if w1 != w2:
        return False
    mode = mode or Mode.cpu()
    ev1 = Evaluator(ctx=ctx, mode=mode)
    ev2 = Evaluator(ctx=ctx, mode=mode)
    f1 = ev1.denote_circuit(gamma, omega, c1, dict(env or {}))
    f2 = ev2.denote_circuit(gamma, omega, c2, dict(env or {}))
    return frobenius_distance(f1, f2) < tol


# ---------------------------------------------------------------------------
# Pure host simplification (definition unfolding for normalize entries)
# ---------------------------------------------------------------------------


def purify_host(term: HostTerm, max_steps: int = 10_000) -> HostTerm:
    """Reduce the pure, effect-free redexes of a host term: beta steps,
    projections of literal pairs, conditionals on literal bits,
    arithmetic on literals and ascription erasure.  Used to expose a
    literal box before circuit normalization; does not evaluate run,
    return, bind or the fixed-point combinator."""
    budget = [max_steps]

    def go(t):
        if budget[0] <= 0:
            return t
        match t:
            case App(f, a):
                f2, a2 = go(f), go(a)
                if isinstance(f2, Lam) and budget[0] > 0:
                    budget[0] -= 1
                    return go(subst_host(f2.body, f2.var, a2))
                return App(f2, a2, loc=t.loc)
            case Proj(side, u):
                u2 = go(u)
                if isinstance(u2, Pair):
                    budget[0] -= 1
                    return u2.left if side == 1 else u2.right
                return Proj(side, u2, loc=t.loc)
            case If(c, a, b):
                c2 = go(c)
                if isinstance(c2, (IntLit, ClassicalLit)):
                    budget[0] -= 1
                    return go(a) if c2.value != 0 else go(b)
                return If(c2, go(a), go(b), loc=t.loc)
            case Prim(op, l, r):
                l2, r2 = go(l), go(r)
                if isinstance(l2, IntLit) and isinstance(r2, IntLit):
                    budget[0] -= 1
                    if op == "+":
                        return IntLit(l2.value + r2.value)
                    if op == "-":
                        return IntLit(l2.value - r2.value)
                    if op == "=":
                        return ClassicalLit("bit", 2, int(l2.value == r2.value))
                return Prim(op, l2, r2, loc=t.loc)
            case Ascribe(u, _):
                return go(u)
            case Pair(l, r):
                return Pair(go(l), go(r), loc=t.loc)
            case Lam(x, a, b):
                return Lam(x, a, go(b), loc=t.loc)
            case Box(p, w, body):
                return Box(p, w, go_circ(body), loc=t.loc)
            case _:
                return t

    def go_circ(c):
        match c:
            case Unbox(u, p):
                return Unbox(go(u), p, loc=c.loc)
            case Init(u):
                return Init(go(u), loc=c.loc)
            case Compose(p, a, b):
                return Compose(p, go_circ(a), go_circ(b), loc=c.loc)
            case UnitElim(p, rest):
                return UnitElim(p, go_circ(rest), loc=c.loc)
            case PairElim(w1, w2, p, rest):
                return PairElim(w1, w2, p, go_circ(rest), loc=c.loc)
            case Gate(op, g, ip, rest):
                return Gate(op, g, ip, go_circ(rest), loc=c.loc)
            case Lift(x, p, rest):
                return Lift(x, p, go_circ(rest), loc=c.loc)
            case QLift(x, p, rest):
                return QLift(x, p, go_circ(rest), loc=c.loc)
            case _:
                return c

    return go(term)


def unfold_definitions(term: HostTerm, defs: dict) -> HostTerm:
    """Substitute named definitions (closed host terms) into a term."""
    out = term
    for _ in range(len(defs) + 1):
        fv = free_host_vars(out)
        hit = [x for x in fv if x in defs]
        if not hit:
            return out
        for x in hit:
            out = subst_host(out, x, defs[x])
    return out
