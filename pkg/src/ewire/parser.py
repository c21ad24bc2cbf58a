"""Concrete grammar and parser for ``.ew`` source files.

The surface syntax is line-oriented inside circuits (statements joined
by ``;``) with an ML-flavoured host language.  Comments run from ``--``
to end of line.  Header directives::

    classical <name> <cardinality>
    gate <name> : <W> -> <W>

Wire and host variables live in separate namespaces.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .syntax import (
    App, Ascribe, ArrowT, Bind, Box, CircDecl, CircT, ClassicalDecl,
    ClassicalLit, ClassicalT, ClassicalW, Compose, DefDecl,
    DEFAULT_INT_CARDINALITY, Fix, Gate, GateDecl, GateFam, GateRef,
    HostTerm, HostType, If, Init, IntLit, Lam, Lift, MonadT, Output, Pair,
    PairElim, PairP, Pattern, Prim, Program, Proj, ProductT, QListW, QUBIT,
    QLift, QRun, Ret, Run, Span, TensorW, UnitElim, UnitP, UnitT,
    UnitVal, UnitW, Unbox, Var, WireP, WireType, pattern_linear,
)


class ParseError(Exception):
    def __init__(self, message, line=0, col=0, expected=()):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col
        self.expected = tuple(expected)


KEYWORDS = {
    "output", "gate", "unbox", "box", "lift", "qlift", "init", "run",
    "qrun", "lambda", "let", "in", "return", "if", "then", "else", "fst",
    "snd", "def", "circ", "rec", "classical", "Y", "Circ", "T",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>--[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<punct>=>|<-|<=|->|[()\[\],;:.*+\-=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # 'int' | 'ident' | keyword | punct string | 'eof'
    text: str
    line: int
    col: int

    @property
    def span(self):
        return Span(self.line, self.col)


def tokenize(text: str) -> list[Token]:
    toks = []
    line, col, i = 1, 0, 0
    n = len(text)
    while i < n:
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise ParseError(f"unexpected character {text[i]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind in ("ws", "comment"):
            nl = value.count("\n")
            if nl:
                line += nl
                col = len(value) - value.rfind("\n") - 1
            else:
                col += len(value)
        else:
            if kind == "ident" and value in KEYWORDS:
                toks.append(Token(value, value, line, col))
            elif kind == "punct":
                toks.append(Token(value, value, line, col))
            else:
                toks.append(Token(kind, value, line, col))
            col += len(value)
        i = m.end()
    toks.append(Token("eof", "", line, col))
    return toks


# statement right-hand sides that begin a circuit term
_CIRCUIT_KEYWORDS = {"output", "gate", "unbox", "init"}


class Parser:
    def __init__(self, tokens: list[Token], bases: dict[str, int]):
        self.toks = tokens
        self.pos = 0
        self.bases = dict(bases)

    # -- token plumbing ---------------------------------------------------

    def peek(self, k=0) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.peek()
        self.pos += 1
        return t

    def at(self, kind) -> bool:
        return self.peek().kind == kind

    def accept(self, kind):
        if self.at(kind):
            return self.next()
        return None

    def expect(self, kind) -> Token:
        t = self.peek()
        if t.kind != kind:
            raise ParseError(
                f"expected {kind!r}, found {t.text!r}", t.line, t.col, [kind]
            )
        return self.next()

    def fail(self, message, expected=()):
        t = self.peek()
        raise ParseError(message, t.line, t.col, expected)

    # -- wire types -------------------------------------------------------

    def wire_type(self) -> WireType:
        left = self.wire_atom()
        if self.accept("*"):
            return TensorW(left, self.wire_type())
        return left

    def wire_atom(self) -> WireType:
        t = self.peek()
        if t.kind == "(":
            self.next()
            w = self.wire_type()
            self.expect(")")
            return w
        if t.kind == "ident":
            self.next()
            if t.text == "I":
                return UnitW()
            if t.text == "qubit":
                return QUBIT
            if t.text == "qlist":
                return QListW()
            if t.text in self.bases:
                return ClassicalW(t.text, self.bases[t.text])
            raise ParseError(
                f"unknown wire type {t.text!r} (declare it with 'classical')",
                t.line, t.col,
            )
        self.fail("expected a wire type", ["I", "qubit", "bit", "("])

    # -- host types --------------------------------------------------------

    def host_type(self) -> HostType:
        left = self.host_product()
        if self.accept("->"):
            return ArrowT(left, self.host_type())
        return left

    def host_product(self) -> HostType:
        left = self.host_type_atom()
        if self.accept("*"):
            return ProductT(left, self.host_product())
        return left

    def host_type_atom(self) -> HostType:
        t = self.peek()
        if t.kind == "int" and t.text == "1":
            self.next()
            return UnitT()
        if t.kind == "T":
            self.next()
            self.expect("(")
            a = self.host_type()
            self.expect(")")
            return MonadT(a)
        if t.kind == "Circ":
            self.next()
            self.expect("(")
            w1 = self.wire_type()
            self.expect(",")
            w2 = self.wire_type()
            self.expect(")")
            return CircT(w1, w2)
        if t.kind == "(":
            self.next()
            a = self.host_type()
            self.expect(")")
            return a
        if t.kind == "ident":
            self.next()
            if t.text in self.bases:
                return ClassicalT(t.text, self.bases[t.text])
            raise ParseError(f"unknown host type {t.text!r}", t.line, t.col)
        self.fail("expected a host type", ["1", "T", "Circ", "("])

    # -- patterns -----------------------------------------------------------

    def pattern(self) -> Pattern:
        t = self.peek()
        if t.kind == "(":
            self.next()
            if self.accept(")"):
                return UnitP()
            p = self.pattern()
            if self.accept(","):
                q = self.pattern()
                self.expect(")")
                return PairP(p, q)
            self.expect(")")
            return p
        if t.kind == "ident":
            self.next()
            return WireP(t.text)
        self.fail("expected a pattern", ["(", "identifier"])

    def annotated_pattern(self):
        """Pattern with per-leaf or whole ': W' annotations; returns the
        pattern together with the fully determined wire type."""
        p, ty = self._ann_pattern_inner()
        if self.accept(":"):
            w = self.wire_type()
            ty = self._merge_annotation(p, ty, w)
        if ty is None or _has_hole(ty):
            self.fail("box pattern needs a complete type annotation")
        return p, _strip(ty)

    def _ann_pattern_inner(self):
        t = self.peek()
        if t.kind == "(":
            self.next()
            if self.accept(")"):
                return UnitP(), UnitW_INSTANCE
            p, ty = self._ann_pattern_inner()
            if self.accept(":"):
                w = self.wire_type()
                ty = self._merge_annotation(p, ty, w)
            if self.accept(","):
                q, ty2 = self._ann_pattern_inner()
                if self.accept(":"):
                    w2 = self.wire_type()
                    ty2 = self._merge_annotation(q, ty2, w2)
                self.expect(")")
                return PairP(p, q), _Hole() if ty is None or ty2 is None else TensorW(ty, ty2)
            self.expect(")")
            return p, ty
        if t.kind == "ident":
            self.next()
            return WireP(t.text), None
        self.fail("expected a pattern", ["(", "identifier"])

    def _merge_annotation(self, p, partial, w):
        # an explicit annotation must agree with and complete any inner ones
        if partial is None or isinstance(partial, _Hole):
            return w
        if isinstance(partial, TensorW) and isinstance(w, TensorW):
            return TensorW(
                self._merge_annotation(None, partial.left, w.left),
                self._merge_annotation(None, partial.right, w.right),
            )
        if _strip(partial) != w:
            self.fail(f"conflicting pattern annotations: {partial} vs {w}")
        return w

    # -- circuits ------------------------------------------------------------

    def circuit(self):
        t = self.peek()
        if t.kind == "output":
            self.next()
            return Output(self.pattern(), loc=t.span)
        if t.kind == "unbox":
            self.next()
            term = self.host_atom()
            return Unbox(term, self.pattern(), loc=t.span)
        if t.kind == "init":
            self.next()
            return Init(self.host_atom(), loc=t.span)
        if t.kind == "(" and not self._paren_starts_pattern_stmt():
            self.next()
            c = self.circuit()
            self.expect(")")
            return c
        # otherwise: a binding statement
        return self.statement()

    def _paren_starts_pattern_stmt(self) -> bool:
        """Lookahead: does '(' open the pattern of a binding statement
        rather than a parenthesized circuit?"""
        depth = 0
        k = 0
        while True:
            t = self.peek(k)
            if t.kind == "(":
                depth += 1
            elif t.kind == ")":
                depth -= 1
                if depth == 0:
                    nxt = self.peek(k + 1)
                    return nxt.kind in ("<-", "<=")
            elif t.kind in ("ident", ","):
                pass
            elif t.kind == "eof":
                return False
            else:
                # a keyword or other token inside the parens: a circuit
                return False
            k += 1

    def statement(self):
        t = self.peek()
        pat = self.pattern()
        if self.accept("<="):
            kw = self.peek()
            if kw.kind not in ("lift", "qlift"):
                self.fail("expected 'lift' or 'qlift' after '<='")
            self.next()
            if not isinstance(pat, WireP):
                raise ParseError(
                    "lift binds a single host variable", t.line, t.col
                )
            src = self.pattern()
            self.expect(";")
            rest = self.circuit()
            cls = Lift if kw.kind == "lift" else QLift
            return cls(pat.name, src, rest, loc=t.span)
        self.expect("<-")
        rhs_tok = self.peek()
        if rhs_tok.kind == "gate":
            self.next()
            g = self.gate_spec()
            in_pat = self.pattern()
            self.expect(";")
            rest = self.circuit()
            self._check_pattern(pat, t)
            return Gate(pat, g, in_pat, rest, loc=t.span)
        first = self._binding_rhs(pat, t)
        if isinstance(first, Pattern):
            # eliminator form: () <- p  |  (w1, w2) <- p
            self.expect(";")
            rest = self.circuit()
            if isinstance(pat, UnitP):
                return UnitElim(first, rest, loc=t.span)
            if (
                isinstance(pat, PairP)
                and isinstance(pat.left, WireP)
                and isinstance(pat.right, WireP)
            ):
                return PairElim(pat.left.name, pat.right.name, first, rest, loc=t.span)
            raise ParseError(
                "left side of a pattern elimination must be () or a pair of wires",
                t.line, t.col,
            )
        self.expect(";")
        rest = self.circuit()
        self._check_pattern(pat, t)
        return Compose(pat, first, rest, loc=t.span)

    def _check_pattern(self, pat, tok):
        if not pattern_linear(pat):
            raise ParseError(
                f"duplicate wire name in pattern {pat}", tok.line, tok.col
            )

    def _binding_rhs(self, lhs, tok):
        """After 'p <-': a circuit right-hand side, or a pattern for the
        unit/pair eliminators."""
        t = self.peek()
        if t.kind in ("output", "unbox", "init"):
            return self.circuit()
        if t.kind == "(":
            if not self._paren_is_circuit():
                return self.pattern()
            self.next()
            c = self.circuit()
            self.expect(")")
            return c
        if t.kind == "ident":
            return self.pattern()
        self.fail("expected a circuit or pattern after '<-'")

    def _paren_is_circuit(self) -> bool:
        """Lookahead inside '( ...': distinguish '(a, b)' from '(a <- ...)'."""
        k = 1
        depth = 1
        while True:
            t = self.peek(k)
            if t.kind in _CIRCUIT_KEYWORDS or t.kind in ("lift", "qlift"):
                return True
            if t.kind == "(":
                depth += 1
            elif t.kind == ")":
                depth -= 1
                if depth == 0:
                    return False
            elif t.kind in ("<-", "<="):
                return True
            elif t.kind in ("ident", ","):
                pass
            else:
                return True
            k += 1

    def gate_spec(self) -> GateRef:
        t = self.peek()
        if t.kind == "(":
            self.next()
            g = self.gate_spec()
            self.expect(")")
            return g
        if t.kind == "ident" and t.text == "bit" and self.peek(1).kind == "-":
            self.next()
            self.expect("-")
            ctrl = self.expect("ident")
            if ctrl.text != "control":
                raise ParseError("expected 'control' after 'bit-'", ctrl.line, ctrl.col)
            return GateRef("bit-control", sub=self.gate_spec())
        if t.kind == "ident" and t.text == "control":
            self.next()
            return GateRef("control", sub=self.gate_spec())
        # Y is both a gate name and the fixed-point keyword; in gate
        # position only the gate reading makes sense
        if t.kind == "Y":
            self.next()
            return GateRef("Y")
        name = self.expect("ident")
        if self.at("int"):
            ix = int(self.next().text)
            return GateRef(name.text, index=ix)
        return GateRef(name.text)

    # -- host terms ------------------------------------------------------------

    def host_term(self) -> HostTerm:
        t = self.peek()
        if t.kind == "lambda":
            self.next()
            x = self.expect("ident")
            self.expect(":")
            a = self.host_type()
            self.expect(".")
            return Lam(x.text, a, self.host_term(), loc=t.span)
        if t.kind == "let":
            self.next()
            x = self.expect("ident")
            self.expect("<=")
            arg = self.host_term()
            self.expect("in")
            return Bind(arg, x.text, self.host_term(), loc=t.span)
        if t.kind == "if":
            self.next()
            c = self.host_cmp()
            self.expect("then")
            th = self.host_term()
            self.expect("else")
            return If(c, th, self.host_term(), loc=t.span)
        if t.kind == "return":
            self.next()
            return Ret(self.host_app(), loc=t.span)
        if t.kind == "box":
            self.next()
            p, w = self.annotated_pattern()
            if not pattern_linear(p):
                raise ParseError(f"duplicate wire in pattern {p}", t.line, t.col)
            self.expect("=>")
            body = self.circuit()
            return Box(p, w, body, loc=t.span)
        if t.kind in ("run", "qrun"):
            self.next()
            circ = self._run_argument()
            cls = Run if t.kind == "run" else QRun
            return cls(circ, loc=t.span)
        return self.host_cmp()

    def _run_argument(self):
        t = self.peek()
        if t.kind == "(":
            self.next()
            c = self.circuit()
            self.expect(")")
            return c
        if t.kind == "ident":
            name = self.next().text
            circ = self.circ_decls.get(name)
            if circ is None:
                raise ParseError(
                    f"'run' expects a circuit or the name of a 'circ' declaration;"
                    f" {name!r} is neither", t.line, t.col,
                )
            return circ
        return self.circuit()

    def host_cmp(self) -> HostTerm:
        left = self.host_add()
        t = self.peek()
        if self.accept("="):
            return Prim("=", left, self.host_add(), loc=t.span)
        return left

    def host_add(self) -> HostTerm:
        left = self.host_app()
        while self.peek().kind in ("+", "-"):
            op = self.next()
            left = Prim(op.kind, left, self.host_app(), loc=op.span)
        return left

    def host_app(self) -> HostTerm:
        t = self.peek()
        if t.kind in ("fst", "snd"):
            self.next()
            f = Proj(1 if t.kind == "fst" else 2, self.host_atom(), loc=t.span)
        elif t.kind == "ident" and t.text in ("CR", "R") and self._atom_follows(1):
            self.next()
            f = GateFam(t.text, self.host_atom(), loc=t.span)
        else:
            f = self.host_atom()
        while self._atom_follows(0):
            f = App(f, self.host_atom(), loc=self.peek().span)
        return f

    def _atom_follows(self, k) -> bool:
        t = self.peek(k)
        if t.kind in ("ident", "int", "Y"):
            return True
        if t.kind == "(":
            return True
        return False

    def host_atom(self) -> HostTerm:
        t = self.peek()
        if t.kind == "ident":
            self.next()
            return Var(t.text, loc=t.span)
        if t.kind == "int":
            self.next()
            return IntLit(int(t.text), loc=t.span)
        if t.kind == "Y":
            self.next()
            self.expect("[")
            a = self.host_type()
            self.expect(",")
            w1 = self.wire_type()
            self.expect(",")
            w2 = self.wire_type()
            self.expect("]")
            return Fix(a, w1, w2, loc=t.span)
        if t.kind == "(":
            self.next()
            if self.accept(")"):
                return UnitVal(loc=t.span)
            if self.at("-") and self.peek(1).kind == "int":
                self.next()
                v = self.next()
                self.expect(")")
                return IntLit(-int(v.text), loc=t.span)
            inner = self.host_term()
            if self.accept(","):
                right = self.host_term()
                self.expect(")")
                return Pair(inner, right, loc=t.span)
            if self.accept(":"):
                ann = self.host_type()
                self.expect(")")
                if isinstance(inner, IntLit) and isinstance(ann, ClassicalT):
                    return ClassicalLit(ann.name, ann.cardinality, inner.value, loc=t.span)
                return Ascribe(inner, ann, loc=t.span)
            self.expect(")")
            return inner
        self.fail("expected a host term", ["identifier", "literal", "("])

    # -- declarations -----------------------------------------------------------

    def program(self) -> Program:
        self.circ_decls: dict = {}
        decls = []
        names = set()
        while not self.at("eof"):
            d = self.declaration()
            if isinstance(d, (DefDecl, CircDecl)):
                if d.name in names:
                    raise ParseError(
                        f"duplicate declaration {d.name!r}", d.loc.line, d.loc.col
                    )
                names.add(d.name)
            decls.append(d)
        return Program(tuple(decls))

    def declaration(self):
        t = self.peek()
        if t.kind == "classical":
            self.next()
            name = self.expect("ident")
            card = self.expect("int")
            if int(card.text) < 1:
                raise ParseError("cardinality must be >= 1", card.line, card.col)
            self.bases[name.text] = int(card.text)
            return ClassicalDecl(name.text, int(card.text), loc=t.span)
        if t.kind == "gate":
            self.next()
            name = self.expect("ident")
            self.expect(":")
            w1 = self.wire_type()
            self.expect("->")
            w2 = self.wire_type()
            return GateDecl(name.text, w1, w2, loc=t.span)
        if t.kind == "def":
            self.next()
            if self.accept("rec"):
                return self._rec_def(t)
            name = self.expect("ident")
            ann = None
            if self.accept(":"):
                ann = self.host_type()
            self.expect("=")
            term = self.host_term()
            return DefDecl(name.text, ann, term, loc=t.span)
        if t.kind == "circ":
            self.next()
            name = self.expect("ident")
            ctx = []
            if self.at("(") and self.peek(1).kind == "ident" and self.peek(2).kind == ":":
                self.next()
                while True:
                    w = self.expect("ident")
                    self.expect(":")
                    ty = self.wire_type()
                    ctx.append((w.text, ty))
                    if not self.accept(","):
                        break
                self.expect(")")
            ann = None
            if self.accept(":"):
                ann = self.wire_type()
            self.expect("=")
            term = self.circuit()
            d = CircDecl(name.text, tuple(ctx), ann, term, loc=t.span)
            if not ctx:
                self.circ_decls[name.text] = term
            return d
        self.fail("expected a declaration", ["def", "circ", "classical", "gate"])

    def _rec_def(self, t):
        """def rec f : A -> Circ(W1, W2) = t  desugars to the fixed-point
        combinator applied to 'lambda f . t'."""
        name = self.expect("ident")
        self.expect(":")
        ann = self.host_type()
        if not (isinstance(ann, ArrowT) and isinstance(ann.result, CircT)):
            raise ParseError(
                "recursive definitions must have type A -> Circ(W1, W2)",
                t.line, t.col,
            )
        self.expect("=")
        body = self.host_term()
        fix = Fix(ann.arg, ann.result.w_in, ann.result.w_out, loc=t.span)
        term = App(fix, Lam(name.text, ann, body, loc=t.span), loc=t.span)
        return DefDecl(name.text, ann, term, loc=t.span)


class _Hole:
    """Marks a missing part of a partially annotated pattern type."""


def _has_hole(ty):
    if ty is None or isinstance(ty, _Hole):
        return True
    if isinstance(ty, TensorW):
        return _has_hole(ty.left) or _has_hole(ty.right)
    return False


def _strip(ty):
    return ty


def parse_program(text: str) -> Program:
    """Parse a complete ``.ew`` source file."""
    bases = {"bit": 2, "int": DEFAULT_INT_CARDINALITY}
    p = Parser(tokenize(text), bases)
    return p.program()


def parse_circuit(text: str, bases: dict[str, int] | None = None):
    """Parse a bare circuit term (mainly for tests and tooling)."""
    p = Parser(tokenize(text), bases or {"bit": 2, "int": DEFAULT_INT_CARDINALITY})
    p.circ_decls = {}
    c = p.circuit()
    p.expect("eof")
    return c


def parse_host_term(text: str, bases: dict[str, int] | None = None) -> HostTerm:
    """Parse a bare host term."""
    p = Parser(tokenize(text), bases or {"bit": 2, "int": DEFAULT_INT_CARDINALITY})
    p.circ_decls = {}
    t = p.host_term()
    p.expect("eof")
    return t
