"""Finite-dimensional operator algebras and completely positive maps.

A finite-dimensional C*-algebra is a direct sum of square matrix blocks
and is represented here by its list of block sizes.  Elements are
block-diagonal matrices, stored as one complex vector: the row-major
vectorisations of the blocks, concatenated in order.

Circuits denote maps in the Heisenberg (observable-transformer)
direction: a circuit from W to W' denotes a completely positive
(sub)unital linear map from the algebra of W' to the algebra of W.  A
``SuperOp`` stores that linear map as a dense matrix acting on
vectorised elements, of shape ``target.dim x source.dim``.

Conventions used throughout:

* ``A (x) B`` has one block per pair ``(i, j)`` of blocks of A and B,
  ordered lexicographically, of size ``n_i * m_j``; on elements the
  embedding is the blockwise Kronecker product.
* direct sums and copowers concatenate block lists; the copower
  ``n . A`` is n repetitions of A's blocks.
* structural isomorphisms (symmetry, copower distribution) are
  materialised as explicit permutation maps so that equalities of
  denotations hold as literal matrix equalities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .syntax import BIT, QUBIT, GateRef, TensorW, UnitW, pretty_print


class DimensionMismatch(ValueError):
    pass


class ResourceLimit(RuntimeError):
    """The requested algebra exceeds the configured element-space cap."""


class ZeroCopower(ValueError):
    """Copowers by zero are rejected: the zero algebra is not allowed."""


class NonClassicalSource(ValueError):
    pass


class UnknownGate(KeyError):
    pass


_DEFAULT_MAX_DIM = 4096
_max_dim = _DEFAULT_MAX_DIM


def set_max_dim(n: int) -> None:
    """Set the element-space dimension cap (see also EWIREC_MAX_DIM)."""
    global _max_dim
    _max_dim = int(n)


def max_dim() -> int:
    return _max_dim


def _check_dim(dim: int, what: str):
    if dim > _max_dim:
        raise ResourceLimit(
            f"{what} needs element-space dimension {dim}, over the cap "
            f"{_max_dim} (raise it with EWIREC_MAX_DIM or set_max_dim)"
        )


# ---------------------------------------------------------------------------
# Algebras
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FdAlgebra:
    """A direct sum of full matrix algebras, as its block sizes."""

    blocks: tuple

    def __post_init__(self):
        if len(self.blocks) == 0:
            raise ValueError("the zero algebra is not allowed")
        if any(n < 1 for n in self.blocks):
            raise ValueError(f"invalid block sizes {self.blocks}")

    @property
    def dim(self) -> int:
        """Dimension of the element space, sum of squared block sizes."""
        return sum(n * n for n in self.blocks)

    def offsets(self) -> list[int]:
        out, acc = [], 0
        for n in self.blocks:
            out.append(acc)
            acc += n * n
        return out

    def __str__(self):
        return "(+)".join(f"M{n}" if n > 1 else "C" for n in self.blocks)


def alg(*blocks: int) -> FdAlgebra:
    return FdAlgebra(tuple(blocks))


SCALARS = FdAlgebra((1,))


def alg_tensor(a: FdAlgebra, b: FdAlgebra) -> FdAlgebra:
    """Tensor product: blocks ``n_i * m_j`` ordered lexicographically."""
    blocks = tuple(n * m for n in a.blocks for m in b.blocks)
    out = FdAlgebra(blocks)
    _check_dim(out.dim, "tensor product")
    return out


def alg_direct_sum(a: FdAlgebra, b: FdAlgebra) -> FdAlgebra:
    out = FdAlgebra(a.blocks + b.blocks)
    _check_dim(out.dim, "direct sum")
    return out


def alg_copower(n: int, a: FdAlgebra) -> FdAlgebra:
    """The n-fold direct sum of ``a`` with itself."""
    if n < 1:
        raise ZeroCopower(f"copower index must be >= 1, got {n}")
    out = FdAlgebra(a.blocks * n)
    _check_dim(out.dim, "copower")
    return out


def tensor_many(algs: Sequence[FdAlgebra]) -> FdAlgebra:
    out = SCALARS
    for a in algs:
        out = alg_tensor(out, a)
    return out


# ---------------------------------------------------------------------------
# Elements
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AlgElement:
    """A block-diagonal element of a finite-dimensional algebra."""

    algebra: FdAlgebra
    vec: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vec, dtype=complex).reshape(-1)
        if v.shape[0] != self.algebra.dim:
            raise DimensionMismatch(
                f"vector of length {v.shape[0]} for algebra of dim {self.algebra.dim}"
            )
        object.__setattr__(self, "vec", v)

    def block(self, i: int) -> np.ndarray:
        n = self.algebra.blocks[i]
        off = self.algebra.offsets()[i]
        return self.vec[off : off + n * n].reshape(n, n)

    def blocks_list(self) -> list[np.ndarray]:
        return [self.block(i) for i in range(len(self.algebra.blocks))]

    def is_selfadjoint(self, tol: float = 1e-12) -> bool:
        return all(
            np.allclose(b, b.conj().T, atol=tol) for b in self.blocks_list()
        )

    def is_positive(self, tol: float = 1e-9) -> bool:
        if not self.is_selfadjoint(math.sqrt(tol)):
            return False
        return all(
            np.linalg.eigvalsh((b + b.conj().T) / 2).min() >= -tol
            for b in self.blocks_list()
        )


def element_from_blocks(algebra: FdAlgebra, mats: Iterable[np.ndarray]) -> AlgElement:
    vec = np.concatenate([np.asarray(m, dtype=complex).reshape(-1) for m in mats])
    return AlgElement(algebra, vec)


def unit_element(algebra: FdAlgebra) -> AlgElement:
    return element_from_blocks(algebra, [np.eye(n) for n in algebra.blocks])


# ---------------------------------------------------------------------------
# Superoperators
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class SuperOp:
    """A linear map between algebras, as a matrix on vectorised elements.

    For a circuit the ``source`` is the algebra of the *output* wire
    type and the ``target`` the algebra of the *input* wire type — the
    Heisenberg direction.
    """

    source: FdAlgebra
    target: FdAlgebra
    matrix: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=complex)
        if m.shape != (self.target.dim, self.source.dim):
            raise DimensionMismatch(
                f"matrix {m.shape} does not map dim {self.source.dim} "
                f"to dim {self.target.dim}"
            )
        m.flags.writeable = False
        self.matrix = m

    def __call__(self, x: AlgElement) -> AlgElement:
        if x.algebra != self.source:
            raise DimensionMismatch("element not in the source algebra")
        return AlgElement(self.target, self.matrix @ x.vec)

    def __repr__(self):
        return f"SuperOp({self.source} -> {self.target})"


def op_identity(a: FdAlgebra) -> SuperOp:
    return SuperOp(a, a, np.eye(a.dim))


def op_zero(source: FdAlgebra, target: FdAlgebra) -> SuperOp:
    return SuperOp(source, target, np.zeros((target.dim, source.dim)))


def op_compose(f: SuperOp, g: SuperOp) -> SuperOp:
    """The composite ``g . f`` (apply f, then g) on algebra elements."""
    if f.target != g.source:
        raise DimensionMismatch(f"cannot compose {f!r} with {g!r}")
    return SuperOp(f.source, g.target, g.matrix @ f.matrix)


def op_add(f: SuperOp, g: SuperOp) -> SuperOp:
    if f.source != g.source or f.target != g.target:
        raise DimensionMismatch("sum of maps with different signatures")
    return SuperOp(f.source, f.target, f.matrix + g.matrix)


def op_scale(c: float, f: SuperOp) -> SuperOp:
    return SuperOp(f.source, f.target, c * f.matrix)


def frobenius_distance(f: SuperOp, g: SuperOp) -> float:
    if f.source != g.source or f.target != g.target:
        raise DimensionMismatch("maps with different signatures")
    return float(np.linalg.norm(f.matrix - g.matrix))


# -- index machinery ---------------------------------------------------------

_pair_map_cache: dict = {}


def tensor_pair_map(a: FdAlgebra, b: FdAlgebra) -> np.ndarray:
    """Index map of the element-space isomorphism vec(A (x) B) =
    vec(A) (x) vec(B).

    Returns an integer array P of shape (a.dim, b.dim) with
    ``P[alpha, beta]`` the canonical index in ``alg_tensor(a, b)`` of the
    product of basis elements alpha of A and beta of B.
    """
    key = (a.blocks, b.blocks)
    hit = _pair_map_cache.get(key)
    if hit is not None:
        return hit
    t = alg_tensor(a, b)
    toff = t.offsets()
    nb = len(b.blocks)
    P = np.empty((a.dim, b.dim), dtype=np.int64)
    aoff = a.offsets()
    boff = b.offsets()
    for i, n in enumerate(a.blocks):
        for j, m in enumerate(b.blocks):
            tb = i * nb + j
            base = toff[tb]
            nm = n * m
            # alpha = (i, r, s) and beta = (j, t, u) land in block (i, j)
            # at row r*m+t and column s*m+u
            rs = np.arange(n * n)
            tu = np.arange(m * m)
            rr, ss = rs // n, rs % n
            ttt, uu = tu // m, tu % m
            canon = (
                base
                + (rr[:, None] * m + ttt[None, :]) * nm
                + (ss[:, None] * m + uu[None, :])
            )
            P[np.ix_(aoff[i] + rs, boff[j] + tu)] = canon
    P.flags.writeable = False
    _pair_map_cache[key] = P
    return P


def op_tensor(f: SuperOp, g: SuperOp) -> SuperOp:
    """Tensor product of maps, consistent with ``alg_tensor`` ordering."""
    src = alg_tensor(f.source, g.source)
    tgt = alg_tensor(f.target, g.target)
    pin = tensor_pair_map(f.source, g.source).reshape(-1)
    pout = tensor_pair_map(f.target, g.target).reshape(-1)
    k = np.kron(f.matrix, g.matrix)
    out = np.empty((tgt.dim, src.dim), dtype=complex)
    out[np.ix_(pout, pin)] = k
    return SuperOp(src, tgt, out)


def compose_tensored(f: SuperOp, rest: FdAlgebra | None, g: SuperOp) -> SuperOp:
    """Compute ``(f (x) id_rest) . g`` without materialising the Kronecker
    product; with ``rest`` None this is plain composition."""
    if rest is None:
        return op_compose(g, f)
    src_mid = alg_tensor(f.source, rest)
    if g.target != src_mid:
        raise DimensionMismatch("continuation does not produce f.source (x) rest")
    pin = tensor_pair_map(f.source, rest).reshape(-1)
    pout = tensor_pair_map(f.target, rest).reshape(-1)
    r = rest.dim
    ncols = g.matrix.shape[1]
    gk = g.matrix[pin, :].reshape(f.source.dim, r * ncols)
    hk = (f.matrix @ gk).reshape(f.target.dim * r, ncols)
    out = np.empty((f.target.dim * r, ncols), dtype=complex)
    out[pout, :] = hk
    tgt = alg_tensor(f.target, rest)
    return SuperOp(g.source, tgt, out)


def factor_index_map(algs: Sequence[FdAlgebra]) -> np.ndarray:
    """Array of shape (dim_1, ..., dim_n) giving the canonical index in
    ``tensor_many(algs)`` of each tuple of factor basis indices."""
    m = np.zeros((1,), dtype=np.int64)
    acc = SCALARS
    for a in algs:
        pm = tensor_pair_map(acc, a)
        m = pm[m]
        acc = alg_tensor(acc, a)
    return m.reshape(tuple(a.dim for a in algs) if algs else (1,))


def factor_permutation(algs: Sequence[FdAlgebra], new_order: Sequence[int]) -> np.ndarray:
    """Index permutation reordering tensor factors.

    Returns an array ``p`` with ``p[src] = tgt``: the canonical index
    ``src`` in ``tensor_many(algs)`` corresponds to ``tgt`` in
    ``tensor_many([algs[i] for i in new_order])``.
    """
    n = len(algs)
    assert sorted(new_order) == list(range(n))
    src_map = factor_index_map(algs)
    tgt_map = factor_index_map([algs[i] for i in new_order])
    src_perm = np.transpose(src_map, axes=tuple(new_order)) if n else src_map
    p = np.empty(src_map.size, dtype=np.int64)
    p[src_perm.reshape(-1)] = tgt_map.reshape(-1)
    return p


def permutation_superop(algs: Sequence[FdAlgebra], new_order: Sequence[int]) -> SuperOp:
    """The *-isomorphism reordering tensor factors, as a SuperOp from
    ``tensor_many(algs)`` to the reordered tensor."""
    p = factor_permutation(algs, new_order)
    src = tensor_many(algs)
    tgt = tensor_many([algs[i] for i in new_order])
    m = np.zeros((tgt.dim, src.dim))
    m[p, np.arange(src.dim)] = 1.0
    return SuperOp(src, tgt, m)


def block_permutation_superop(a: FdAlgebra, perm: Sequence[int]) -> SuperOp:
    """The isomorphism sending block i of ``a`` to position ``perm[i]``
    of the permuted algebra."""
    blocks = list(a.blocks)
    tgt_blocks = [None] * len(blocks)
    for i, j in enumerate(perm):
        tgt_blocks[j] = blocks[i]
    tgt = FdAlgebra(tuple(tgt_blocks))
    m = np.zeros((tgt.dim, a.dim))
    soff = a.offsets()
    toff = tgt.offsets()
    for i, j in enumerate(perm):
        n2 = blocks[i] ** 2
        m[toff[j] : toff[j] + n2, soff[i] : soff[i] + n2] = np.eye(n2)
    return SuperOp(a, tgt, m)


def copower_sum_iso(n: int, a: FdAlgebra, b: FdAlgebra) -> SuperOp:
    """Permutation witnessing n.(A (+) B) = (n.A) (+) (n.B)."""
    ka, kb = len(a.blocks), len(b.blocks)
    perm = []
    for r in range(n):
        for i in range(ka):
            perm.append(r * ka + i)
        for j in range(kb):
            perm.append(n * ka + r * kb + j)
    src = alg_copower(n, alg_direct_sum(a, b))
    return block_permutation_superop(src, perm)


def tensor_copower_iso(a: FdAlgebra, n: int, b: FdAlgebra) -> SuperOp:
    """Permutation witnessing A (x) (n.B) = n.(A (x) B)."""
    ka, kb = len(a.blocks), len(b.blocks)
    perm = []
    # source blocks ordered (i, (r, j)); target ordered (r, (i, j))
    for i in range(ka):
        for r in range(n):
            for j in range(kb):
                perm.append(r * (ka * kb) + i * kb + j)
    src = alg_tensor(a, alg_copower(n, b))
    return block_permutation_superop(src, perm)


def copower_stack(fs: Sequence[SuperOp]) -> SuperOp:
    """Assemble maps f_v : X -> Y into the single map X -> (n . Y) whose
    v-th summand is f_v."""
    if not fs:
        raise ZeroCopower("cannot stack zero maps")
    src = fs[0].source
    tgt = fs[0].target
    for f in fs:
        if f.source != src or f.target != tgt:
            raise DimensionMismatch("stacked maps must share a signature")
    return SuperOp(src, alg_copower(len(fs), tgt), np.vstack([f.matrix for f in fs]))


# ---------------------------------------------------------------------------
# Verification predicates
# ---------------------------------------------------------------------------


def choi_matrix(f: SuperOp) -> np.ndarray:
    """Block-diagonal assembly of the Choi matrices of all block
    components of ``f``; positive semidefiniteness of this matrix is
    equivalent to complete positivity of ``f``."""
    pieces = []
    soff = f.source.offsets()
    toff = f.target.offsets()
    for i, a in enumerate(f.source.blocks):
        for j, b in enumerate(f.target.blocks):
            c = np.zeros((a * b, a * b), dtype=complex)
            for r in range(a):
                for s in range(a):
                    col = f.matrix[:, soff[i] + r * a + s]
                    blk = col[toff[j] : toff[j] + b * b].reshape(b, b)
                    c[r * b : (r + 1) * b, s * b : (s + 1) * b] = blk
            pieces.append(c)
    total = sum(p.shape[0] for p in pieces)
    out = np.zeros((total, total), dtype=complex)
    k = 0
    for p in pieces:
        d = p.shape[0]
        out[k : k + d, k : k + d] = p
        k += d
    return out


def _choi_blocks(f: SuperOp):
    soff = f.source.offsets()
    toff = f.target.offsets()
    for i, a in enumerate(f.source.blocks):
        for j, b in enumerate(f.target.blocks):
            c = np.zeros((a * b, a * b), dtype=complex)
            for r in range(a):
                for s in range(a):
                    col = f.matrix[:, soff[i] + r * a + s]
                    blk = col[toff[j] : toff[j] + b * b].reshape(b, b)
                    c[r * b : (r + 1) * b, s * b : (s + 1) * b] = blk
            yield c


def is_cp(f: SuperOp, tol: float = 1e-9) -> bool:
    """Complete positivity, via the least eigenvalue of each Choi block."""
    for c in _choi_blocks(f):
        h = (c + c.conj().T) / 2
        if np.linalg.norm(c - h) > max(tol, 1e-9) * max(1.0, np.linalg.norm(c)):
            return False
        if np.linalg.eigvalsh(h).min() < -tol:
            return False
    return True


def apply_to_unit(f: SuperOp) -> AlgElement:
    return f(unit_element(f.source))


def is_unital(f: SuperOp, tol: float = 1e-9) -> bool:
    u = apply_to_unit(f)
    return bool(np.linalg.norm(u.vec - unit_element(f.target).vec) <= tol)


def is_subunital(f: SuperOp, tol: float = 1e-9) -> bool:
    """f(1) <= 1, i.e. 1 - f(1) is positive semidefinite blockwise."""
    gap = unit_element(f.target).vec - apply_to_unit(f).vec
    return AlgElement(f.target, gap).is_positive(tol)


def loewner_leq(f: SuperOp, g: SuperOp, tol: float = 1e-9, complete: bool = True) -> bool:
    """Order on maps: f <= g iff g - f is a (completely) positive map.

    With ``complete`` (the default) the difference is tested for complete
    positivity via its Choi blocks; ``complete=False`` samples positivity
    on random rank-one positive inputs, a heuristic check of the weaker
    order.
    """
    if f.source != g.source or f.target != g.target:
        raise DimensionMismatch("maps with different signatures")
    diff = SuperOp(f.source, f.target, g.matrix - f.matrix)
    if complete:
        return is_cp(diff, tol)
    rng = np.random.default_rng(0)
    for _ in range(64):
        mats = []
        for n in diff.source.blocks:
            v = rng.normal(size=n) + 1j * rng.normal(size=n)
            mats.append(np.outer(v, v.conj()))
        x = element_from_blocks(diff.source, mats)
        if not diff(x).is_positive(tol):
            return False
    return True


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Distribution:
    """A finitely supported subprobability distribution.

    Keys are decoded classical values (ints, () and nested pairs); the
    weights are non-negative and sum to at most 1, with the deficit the
    probability of divergence.
    """

    weights: dict

    def mass(self) -> float:
        return float(sum(self.weights.values()))

    def diverge_mass(self) -> float:
        return max(0.0, 1.0 - self.mass())

    def items(self):
        return self.weights.items()

    def __getitem__(self, k):
        return self.weights.get(k, 0.0)


def state_to_distribution(f: SuperOp, values: Sequence | None = None,
                          tol: float = 1e-9) -> Distribution:
    """Read off the subprobability vector of a state on a classical
    algebra: the i-th weight is f applied to the i-th coordinate basis
    element.  ``values`` names the outcomes (defaults to 0..n-1)."""
    if any(n != 1 for n in f.source.blocks):
        raise NonClassicalSource(f"source {f.source} is not commutative")
    if f.target.blocks != (1,):
        raise NonClassicalSource("target must be the scalars")
    row = f.matrix[0]
    if np.abs(row.imag).max(initial=0.0) > tol:
        raise ValueError("state has complex weights")
    w = row.real.copy()
    if w.min(initial=0.0) < -tol:
        raise ValueError(f"state has negative weight {w.min()}")
    w = np.clip(w, 0.0, None)
    if values is None:
        values = range(len(w))
    return Distribution({v: float(x) for v, x in zip(values, w)})


# ---------------------------------------------------------------------------
# Gate library
# ---------------------------------------------------------------------------

_H = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]])
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)

def _rotation(n: int) -> np.ndarray:
    if n < 0:
        raise UnknownGate(f"rotation index must be >= 0, got {n}")
    return np.array([[1, 0], [0, np.exp(2j * np.pi / 2**n)]])


_UNITARIES = {"H": _H, "X": _X, "Y": _Y, "Z": _Z, "CNOT": _CNOT}

_FIXED_SIGNATURES = {
    "meas": (QUBIT, BIT),
    "new": (BIT, QUBIT),
    "init0": (UnitW(), QUBIT),
    "init1": (UnitW(), QUBIT),
    "discard": (BIT, UnitW()),
    "H": (QUBIT, QUBIT),
    "X": (QUBIT, QUBIT),
    "Y": (QUBIT, QUBIT),
    "Z": (QUBIT, QUBIT),
    "CNOT": (TensorW(QUBIT, QUBIT), TensorW(QUBIT, QUBIT)),
}


def gate_signature(g: GateRef, declared: dict | None = None):
    """Input/output wire types of a gate reference.

    ``declared`` maps names of header-declared gates to signatures.
    Raises UnknownGate if the name does not resolve.
    """
    declared = declared or {}
    if g.sub is not None:
        sub_in, sub_out = gate_signature(g.sub, declared)
        if sub_in != sub_out:
            raise UnknownGate(
                f"controlled gate must have equal input and output types, "
                f"got {pretty_print(sub_in)} -> {pretty_print(sub_out)}"
            )
        ctl = BIT if g.name == "bit-control" else QUBIT
        w = TensorW(ctl, sub_in)
        return (w, w)
    if g.name in ("R", "CR"):
        if g.index is None:
            raise UnknownGate(f"{g.name} needs a rotation index")
        if g.name == "R":
            return (QUBIT, QUBIT)
        return (TensorW(QUBIT, QUBIT), TensorW(QUBIT, QUBIT))
    if g.name in _FIXED_SIGNATURES:
        return _FIXED_SIGNATURES[g.name]
    if g.name in declared:
        return declared[g.name]
    raise UnknownGate(f"unknown gate {pretty_print(g)}")


def _unitary_of(g: GateRef) -> np.ndarray:
    if g.name in _UNITARIES:
        return _UNITARIES[g.name]
    if g.name == "R":
        return _rotation(g.index)
    if g.name == "CR":
        u = np.eye(4, dtype=complex)
        u[2:, 2:] = _rotation(g.index)
        return u
    if g.name == "control":
        sub = _unitary_of(g.sub)
        d = sub.shape[0]
        u = np.eye(2 * d, dtype=complex)
        u[d:, d:] = sub
        return u
    raise UnknownGate(f"{pretty_print(g)} is not a unitary gate")


def unitary_channel(u: np.ndarray) -> SuperOp:
    """The Heisenberg map x -> u* x u of a unitary on one matrix block."""
    d = u.shape[0]
    m = np.kron(u.conj().T, u.T)
    return SuperOp(alg(d), alg(d), m)


def gate_denotation(g: GateRef, declared: dict | None = None) -> SuperOp:
    """Heisenberg-direction denotation of a built-in gate."""
    if g.name == "meas":
        m = np.zeros((4, 2))
        m[0, 0] = 1.0
        m[3, 1] = 1.0
        return SuperOp(alg(1, 1), alg(2), m)
    if g.name == "new":
        # unitality forces reading both diagonal entries
        m = np.zeros((2, 4))
        m[0, 0] = 1.0
        m[1, 3] = 1.0
        return SuperOp(alg(2), alg(1, 1), m)
    if g.name == "init0":
        return SuperOp(alg(2), alg(1), np.array([[1.0, 0, 0, 0]]))
    if g.name == "init1":
        return SuperOp(alg(2), alg(1), np.array([[0, 0, 0, 1.0]]))
    if g.name == "discard":
        return SuperOp(alg(1), alg(1, 1), np.array([[1.0], [1.0]]))
    if g.name == "bit-control":
        sub = gate_denotation(g.sub, declared)
        if sub.source != sub.target:
            raise UnknownGate("bit-control needs an endo-gate")
        d = sub.source.dim
        m = np.zeros((2 * d, 2 * d), dtype=complex)
        m[:d, :d] = np.eye(d)
        m[d:, d:] = sub.matrix
        a = alg_tensor(alg(1, 1), sub.source)
        return SuperOp(a, a, m)
    if g.name in _UNITARIES or g.name in ("R", "CR", "control"):
        return unitary_channel(_unitary_of(g))
    raise UnknownGate(f"no denotation for gate {pretty_print(g)}")


BUILTIN_GATES = [
    GateRef("meas"), GateRef("new"), GateRef("init0"), GateRef("init1"),
    GateRef("discard"), GateRef("H"), GateRef("X"), GateRef("Y"),
    GateRef("Z"), GateRef("CNOT"), GateRef("R", index=1),
    GateRef("R", index=2), GateRef("CR", index=1), GateRef("CR", index=2),
    GateRef("bit-control", sub=GateRef("X")),
    GateRef("control", sub=GateRef("H")),
]


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def superop_to_json(f: SuperOp) -> dict:
    """JSON form: block lists plus the matrix as [re, im] pairs, row-major."""
    return {
        "source_blocks": list(f.source.blocks),
        "target_blocks": list(f.target.blocks),
        "matrix": [[float(z.real), float(z.imag)] for z in f.matrix.reshape(-1)],
    }
