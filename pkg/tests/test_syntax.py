import pytest
from hypothesis import given, strategies as st

from ewire.parser import ParseError, parse_circuit, parse_host_term, parse_program
from ewire.syntax import (
    BIT, QUBIT, ClassicalT, ClassicalW, NotClassicalError, Output, PairP,
    ProductT, QuantumW, ShapeMismatch, TensorW, UnitP, UnitT, UnitW,
    WireP, alpha_equiv, classicalize, free_wires, is_classical,
    lift_type, pattern_wires, pretty_print, subst_pattern, unlift_type,
)

FLIP = "a <- gate init0 (); a' <- gate H a; b <- gate meas a'; output b"


# -- type translations --------------------------------------------------------


def test_lift_type_unit():
    assert lift_type(UnitW()) == UnitT()


def test_lift_type_tensor():
    assert lift_type(TensorW(BIT, BIT)) == ProductT(
        ClassicalT("bit", 2), ClassicalT("bit", 2)
    )


def test_lift_type_rejects_quantum():
    with pytest.raises(NotClassicalError):
        lift_type(QUBIT)


def test_classicalize_qubit():
    assert classicalize(QUBIT) == BIT


def test_classicalize_unit():
    assert classicalize(UnitW()) == UnitW()


def test_classicalize_mixed_tensor():
    assert classicalize(TensorW(QUBIT, BIT)) == TensorW(BIT, BIT)


wire_types = st.recursive(
    st.sampled_from([UnitW(), BIT, QUBIT, ClassicalW("int", 8), QuantumW("qutrit", 3)]),
    lambda inner: st.builds(TensorW, inner, inner),
    max_leaves=6,
)


@given(wire_types)
def test_classicalize_idempotent(w):
    cw = classicalize(w)
    assert is_classical(cw)
    assert classicalize(cw) == cw


@given(wire_types)
def test_lift_of_classicalize_total(w):
    lift_type(classicalize(w))


@given(wire_types.filter(is_classical))
def test_unlift_inverts_lift(v):
    assert unlift_type(lift_type(v)) == v


# -- parsing and printing ------------------------------------------------------


def test_parse_smallest_circuit():
    c = parse_circuit("output w")
    assert c == Output(WireP("w"))


def test_parse_flip_shape():
    c = parse_circuit(FLIP)
    # four constructors: three gates and an output
    names = []
    while hasattr(c, "rest"):
        names.append(c.gate.name)
        c = c.rest
    assert names == ["init0", "H", "meas"]
    assert isinstance(c, Output)


def test_parse_box_pair_annotation():
    t = parse_host_term("box (a : qubit, b : qubit) => output (a, b)")
    assert t.w_in == TensorW(QUBIT, QUBIT)
    assert t.pat == PairP(WireP("a"), WireP("b"))


def test_pretty_print_output():
    assert pretty_print(Output(WireP("w"))) == "output w"


def test_pretty_print_pattern():
    assert pretty_print(PairP(UnitP(), WireP("w"))) == "((), w)"


def test_parse_error_has_position():
    with pytest.raises(ParseError) as e:
        parse_circuit("output ,")
    assert e.value.line == 1
    assert e.value.col > 0


ROUNDTRIP_CIRCUITS = [
    "output w",
    "output ((), w)",
    FLIP,
    "x <- gate meas a; (x, y) <- gate (bit-control X) (x, b); () <- gate discard x; output y",
    "w <- (p2 <- gate H p1; output p2); output w",
    "x <= lift b; n <- init x; output n",
    "u <- unbox (box q : qubit => output q) v; output u",
    "(w1, w2) <- p; output (w2, w1)",
    "() <- u; output q",
    "q <- gate (control H) (c, t); output q",
    "r <- gate (R 3) q; output r",
]


@pytest.mark.parametrize("text", ROUNDTRIP_CIRCUITS)
def test_circuit_roundtrip(text):
    c = parse_circuit(text)
    again = parse_circuit(pretty_print(c))
    assert alpha_equiv(c, again)


ROUNDTRIP_HOSTS = [
    "lambda x : int . x + 1",
    "let x <= run (b <- init (0 : bit); output b) in return x",
    "if n = 0 then box q : qubit => output q else box q : qubit => output q",
    "box (v : bit, w : qubit) => (x <= lift v; unbox (f x) w)",
    "(fst c) (snd c)",
    "Y[int, qubit, qubit] (lambda f : int -> Circ(qubit, qubit) . lambda n : int . f n)",
    "CR (m - n)",
    "(3 : int)",
    "return (1, ())",
]


@pytest.mark.parametrize("text", ROUNDTRIP_HOSTS)
def test_host_roundtrip(text):
    t = parse_host_term(text)
    again = parse_host_term(pretty_print(t))
    assert alpha_equiv(t, again)


def test_program_roundtrip():
    src = """
classical trit 3
gate mygate : qubit -> trit

circ flip : bit =
  a <- gate init0 (); a' <- gate H a; b <- gate meas a'; output b

def main : T(bit) = run flip
"""
    p = parse_program(src)
    p2 = parse_program(pretty_print(p))
    assert len(p.decls) == len(p2.decls)
    for d, d2 in zip(p.decls, p2.decls):
        if hasattr(d, "term"):
            assert alpha_equiv(d.term, d2.term)


def test_comments_and_directives():
    p = parse_program("classical digit 10 -- a decimal base\n")
    assert p.classical_bases()["digit"] == 10


# -- substitution ---------------------------------------------------------------


def test_subst_single_wire():
    c = parse_circuit("output w")
    assert subst_pattern(c, WireP("w"), WireP("v")) == parse_circuit("output v")


def test_subst_componentwise():
    c = parse_circuit("q <- gate H w1; output (q, w2)")
    out = subst_pattern(
        c, PairP(WireP("w1"), WireP("w2")), PairP(WireP("p1"), WireP("p2"))
    )
    assert alpha_equiv(out, parse_circuit("q <- gate H p1; output (q, p2)"))


def test_subst_shape_mismatch():
    c = parse_circuit("output (w1, w2)")
    with pytest.raises(ShapeMismatch):
        subst_pattern(c, PairP(WireP("w1"), WireP("w2")), WireP("v"))


def test_subst_splices_composite_for_wire():
    c = parse_circuit("(a, b) <- w; output (b, a)")
    out = subst_pattern(c, WireP("w"), PairP(WireP("x"), WireP("y")))
    assert alpha_equiv(out, parse_circuit("(a, b) <- (x, y); output (b, a)"))


def test_subst_avoids_binder_capture():
    # substituting v for w must not let the inner binder v capture it
    c = parse_circuit("v <- gate H w; output (v, u)")
    out = subst_pattern(c, WireP("u"), WireP("v"))
    assert "v" in free_wires(out)
    binder = out.out_pat
    assert binder != WireP("v")
    assert alpha_equiv(out, parse_circuit("z <- gate H w; output (z, v)"))


def test_subst_under_lift_keeps_host_binder():
    c = parse_circuit("x <= lift b; n <- init x; output (n, w)")
    out = subst_pattern(c, WireP("w"), WireP("v"))
    assert alpha_equiv(
        out, parse_circuit("x <= lift b; n <- init x; output (n, v)")
    )


def test_free_wires():
    c = parse_circuit("q <- gate H q; output (q, r)")
    assert free_wires(c) == {"q", "r"}


def test_pattern_wires_order():
    p = PairP(PairP(WireP("a"), UnitP()), WireP("b"))
    assert pattern_wires(p) == ["a", "b"]


# -- properties over generated terms ------------------------------------------


@pytest.mark.parametrize("seed", range(20))
def test_roundtrip_on_generated_circuits(seed):
    from tests.gen import random_circuit

    _, term = random_circuit(seed + 4000)
    again = parse_circuit(pretty_print(term))
    assert alpha_equiv(term, again)


@pytest.mark.parametrize("seed", range(15))
def test_subst_preserves_typing(seed):
    from tests.gen import random_circuit
    from ewire.typecheck import check_circuit

    omega, term = random_circuit(seed + 6000)
    if not omega:
        pytest.skip("closed circuit")
    w = check_circuit({}, omega, term)
    old = omega[0][0]
    renamed_ctx = ((old + "_renamed", omega[0][1]),) + tuple(omega[1:])
    renamed = subst_pattern(term, WireP(old), WireP(old + "_renamed"))
    assert check_circuit({}, renamed_ctx, renamed) == w


@given(st.text(max_size=60))
def test_parser_never_crashes_on_junk(text):
    try:
        parse_program(text)
    except ParseError:
        pass


@given(st.text(alphabet="abqw<->=();:,*. 0123456789", max_size=40))
def test_circuit_parser_never_crashes_on_near_miss(text):
    try:
        parse_circuit(text)
    except ParseError:
        pass
