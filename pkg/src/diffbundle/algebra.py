"""Exact commutative-algebra models of forward and reverse differentiation.

Two carriers, both over the rationals with zero-tolerance arithmetic:

* ``PolyAlgebra(n)`` -- the polynomial ring Q[x0..x_{n-1}], elements are
  ``poly.Polynomial`` values.
* ``FinDimAlgebra(m)`` -- the quotient Q[x]/(m(x)) for a monic m, elements are
  coefficient tuples of length deg m.

On these we build: the dual-numbers tangent (pairs (a, b) with b the
infinitesimal part), the differential-form tangent on polynomial rings
(adjoined d-generators with the Leibniz total differential), the Q-linear
dual involution on free modules over finite-dimensional algebras, and the
derivations-based reverse tangent on polynomial rings.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .poly import Polynomial


@dataclass(frozen=True)
class PolyAlgebra:
    ngens: int

    def zero(self) -> Polynomial:
        return Polynomial.constant(self.ngens, 0)

    def one(self) -> Polynomial:
        return Polynomial.constant(self.ngens, 1)

    def constant(self, value) -> Polynomial:
        return Polynomial.constant(self.ngens, value)

    def gen(self, i: int) -> Polynomial:
        return Polynomial.variable(self.ngens, i)

    def gens(self) -> list[Polynomial]:
        return [self.gen(i) for i in range(self.ngens)]

    def add(self, a, b):
        return a + b

    def mul(self, a, b):
        return a * b

    def neg(self, a):
        return -a

    def equal(self, a, b) -> bool:
        return a == b

    def contains(self, a) -> bool:
        return isinstance(a, Polynomial) and a.nvars == self.ngens

    def __str__(self):
        return f"Q[{', '.join(f'x{i}' for i in range(self.ngens))}]"


@dataclass(frozen=True)
class FinDimAlgebra:
    """Q[x]/(m(x)) for monic m; ``modulus`` holds (c0..c_{d-1}) of
    m(x) = x^d + c_{d-1} x^{d-1} + ... + c0.  Elements are coefficient
    tuples (a0..a_{d-1}) for a0 + a1 x + ...  A free Q-module of rank d."""

    modulus: tuple

    def __post_init__(self):
        object.__setattr__(self, "modulus", tuple(Fraction(c) for c in self.modulus))
        if not self.modulus:
            raise ValueError("modulus must have degree >= 1")

    @property
    def dim(self) -> int:
        return len(self.modulus)

    def element(self, coeffs) -> tuple:
        out = [Fraction(c) for c in coeffs]
        if len(out) > self.dim:
            raise ValueError(f"element has {len(out)} coefficients, rank is {self.dim}")
        out += [Fraction(0)] * (self.dim - len(out))
        return tuple(out)

    def zero(self) -> tuple:
        return self.element([])

    def one(self) -> tuple:
        return self.element([1])

    def constant(self, value) -> tuple:
        return self.element([value])

    def gen(self, i: int = 0) -> tuple:
        if i != 0:
            raise ValueError("a quotient of Q[x] has a single generator")
        if self.dim == 1:
            # x is already reduced: x = -c0
            return self.element([-self.modulus[0]])
        return self.element([0, 1])

    def gens(self) -> list:
        return [self.gen(0)]

    def add(self, a, b) -> tuple:
        return tuple(x + y for x, y in zip(a, b))

    def neg(self, a) -> tuple:
        return tuple(-x for x in a)

    def scale(self, c, a) -> tuple:
        c = Fraction(c)
        return tuple(c * x for x in a)

    def mul(self, a, b) -> tuple:
        d = self.dim
        conv = [Fraction(0)] * (2 * d - 1)
        for i, x in enumerate(a):
            if x == 0:
                continue
            for j, y in enumerate(b):
                conv[i + j] += x * y
        # reduce x^k for k >= d using x^d = -(c_{d-1} x^{d-1} + ... + c0)
        for k in range(2 * d - 2, d - 1, -1):
            top = conv[k]
            if top == 0:
                continue
            conv[k] = Fraction(0)
            for j, c in enumerate(self.modulus):
                conv[k - d + j] -= top * c
        return tuple(conv[:d])

    def power(self, a, n: int) -> tuple:
        out = self.one()
        base = a
        while n:
            if n & 1:
                out = self.mul(out, base)
            base = self.mul(base, base)
            n >>= 1
        return out

    def equal(self, a, b) -> bool:
        return tuple(a) == tuple(b)

    def contains(self, a) -> bool:
        return isinstance(a, tuple) and len(a) == self.dim

    def regular_representation(self, a) -> list:
        """d x d matrix of multiplication by a in the basis 1, x, .., x^{d-1}."""
        cols = []
        for k in range(self.dim):
            basis = self.element([0] * k + [1])
            cols.append(self.mul(a, basis))
        return [[cols[j][i] for j in range(self.dim)] for i in range(self.dim)]

    def __str__(self):
        terms = [f"{c}" if k == 0 else f"{c}*x^{k}" for k, c in enumerate(self.modulus) if c != 0]
        m = " + ".join([f"x^{self.dim}"] + terms) if terms else f"x^{self.dim}"
        return f"Q[x]/({m})"


@dataclass(frozen=True)
class AlgebraMorphism:
    """Generator-image presentation of an algebra map; composition is
    substitution, written diagrammatically (compose(f, g) = f then g)."""

    source: object
    target: object
    images: tuple

    def __post_init__(self):
        object.__setattr__(self, "images", tuple(self.images))
        ngens = self.source.ngens if isinstance(self.source, PolyAlgebra) else 1
        if len(self.images) != ngens:
            raise ValueError(f"need {ngens} generator image(s), got {len(self.images)}")
        for im in self.images:
            if not self.target.contains(im):
                raise ValueError("generator image does not lie in the target algebra")
        if isinstance(self.source, FinDimAlgebra):
            # well-definedness on the quotient: m(f(x)) = 0 in the target
            acc = _eval_monic(self.source.modulus, self.images[0], self.target)
            if not self.target.equal(acc, self.target.zero()):
                raise ValueError("morphism is not well defined: m(f(x)) != 0 in the target")

    def apply(self, element):
        if isinstance(self.source, PolyAlgebra):
            if not self.source.contains(element):
                raise ValueError("element does not lie in the source algebra")
            return _eval_polynomial(element, list(self.images), self.target)
        if not self.source.contains(element):
            raise ValueError("element does not lie in the source algebra")
        out = self.target.zero()
        img = self.images[0]
        power = self.target.one()
        for c in element:
            if c != 0:
                term = power
                if isinstance(self.target, PolyAlgebra):
                    term = term.scale(c)
                else:
                    term = self.target.scale(c, term)
                out = self.target.add(out, term)
            power = self.target.mul(power, img)
        return out

    def __call__(self, element):
        return self.apply(element)


def _eval_polynomial(p: Polynomial, images: list, target):
    out = target.zero()
    for mono, c in p.coeffs.items():
        if isinstance(target, PolyAlgebra):
            term = target.constant(c)
        else:
            term = target.constant(c)
        for i, e in enumerate(mono):
            for _ in range(e):
                term = target.mul(term, images[i])
        out = target.add(out, term)
    return out


def _eval_monic(modulus: tuple, img, target):
    """Evaluate x^d + c_{d-1}x^{d-1} + .. + c0 at img inside the target."""
    d = len(modulus)
    acc = target.one()
    powers = [target.one()]
    for _ in range(d):
        powers.append(target.mul(powers[-1], img))
    acc = powers[d]
    for k, c in enumerate(modulus):
        if c == 0:
            continue
        term = powers[k]
        if isinstance(target, PolyAlgebra):
            term = term.scale(c)
        else:
            term = target.scale(c, term)
        acc = target.add(acc, term)
    return acc


def identity_morphism(algebra) -> AlgebraMorphism:
    return AlgebraMorphism(algebra, algebra, tuple(algebra.gens()))


def compose_morphisms(f: AlgebraMorphism, g: AlgebraMorphism) -> AlgebraMorphism:
    """Diagrammatic composite: apply f's images, then push through g."""
    if f.target != g.source:
        raise ValueError("morphisms do not compose: target/source mismatch")
    return AlgebraMorphism(f.source, g.target, tuple(g.apply(im) for im in f.images))


# --- dual numbers -----------------------------------------------------------


class DualModel:
    """Dual numbers A[e] over an algebra A: pairs (a, b) = a + b e with
    e^2 = 0; second-order elements are 4-tuples over A[e][e']."""

    def __init__(self, algebra):
        self.algebra = algebra

    # pairs ------------------------------------------------------------
    def pair_add(self, p, q):
        a = self.algebra
        return (a.add(p[0], q[0]), a.add(p[1], q[1]))

    def pair_mul(self, p, q):
        a = self.algebra
        return (a.mul(p[0], q[0]), a.add(a.mul(p[0], q[1]), a.mul(p[1], q[0])))

    def pair_equal(self, p, q) -> bool:
        a = self.algebra
        return a.equal(p[0], q[0]) and a.equal(p[1], q[1])

    # triples over the fibre product T2(A) ------------------------------
    def triple_mul(self, p, q):
        a = self.algebra
        base = a.mul(p[0], q[0])
        return (
            base,
            a.add(a.mul(p[0], q[1]), a.mul(p[1], q[0])),
            a.add(a.mul(p[0], q[2]), a.mul(p[2], q[0])),
        )

    # 4-tuples a + b e + c e' + d e e' ----------------------------------
    def quad_mul(self, p, q):
        a = self.algebra
        mul, add = a.mul, a.add
        return (
            mul(p[0], q[0]),
            add(mul(p[0], q[1]), mul(p[1], q[0])),
            add(mul(p[0], q[2]), mul(p[2], q[0])),
            add(
                add(mul(p[0], q[3]), mul(p[3], q[0])),
                add(mul(p[1], q[2]), mul(p[2], q[1])),
            ),
        )

    def quad_equal(self, p, q) -> bool:
        return all(self.algebra.equal(x, y) for x, y in zip(p, q))

    # structure maps ----------------------------------------------------
    def projection(self, p):
        return p[0]

    def zero_section(self, a):
        return (a, self.algebra.zero())

    def fibre_sum(self, t):
        return (t[0], self.algebra.add(t[1], t[2]))

    def vertical_lift(self, p):
        z = self.algebra.zero()
        return (p[0], z, z, p[1])

    def canonical_flip(self, q):
        return (q[0], q[2], q[1], q[3])


def dualnum_tangent(f: AlgebraMorphism):
    """The dual-numbers lift of f: (a, b) -> (f(a), f(b)).  Exact and
    functorial; e^2 = 0 is enforced by the pair representation."""

    def lifted(pair):
        return (f.apply(pair[0]), f.apply(pair[1]))

    return lifted


def dualnum_second_tangent(f: AlgebraMorphism):
    def lifted(quad):
        return tuple(f.apply(x) for x in quad)

    return lifted


def dualnum_pair_tangent(f: AlgebraMorphism):
    """Induced map on the fibre product: (a, b, b') -> (f(a), f(b), f(b'))."""

    def lifted(triple):
        return tuple(f.apply(x) for x in triple)

    return lifted


# --- differential-form tangent on polynomial rings --------------------------


def form_tangent_algebra(algebra: PolyAlgebra) -> PolyAlgebra:
    """Q[x0..x_{n-1}, dx0..dx_{n-1}]: generator n+i is the differential of
    generator i."""
    return PolyAlgebra(2 * algebra.ngens)


def embed_in_tangent(p: Polynomial, total_gens: int) -> Polynomial:
    """Pad exponent tuples so p lives in the enlarged ring."""
    if p.nvars > total_gens:
        raise ValueError("cannot embed into a smaller ring")
    pad = total_gens - p.nvars
    return Polynomial(total_gens, {m + (0,) * pad: c for m, c in p.coeffs.items()})


def total_differential(p: Polynomial) -> Polynomial:
    """d(p) = sum_i dp/dx_i dx_i inside Q[x.., dx..]; satisfies d(1) = 0,
    additivity, and the Leibniz rule exactly."""
    n = p.nvars
    big = PolyAlgebra(2 * n)
    out = big.zero()
    for i in range(n):
        out = out + embed_in_tangent(p.partial(i), 2 * n) * big.gen(n + i)
    return out


def kahler_tangent(f: AlgebraMorphism) -> AlgebraMorphism:
    """Tangent lift on polynomial rings: x_i -> f(x_i), dx_i -> d(f(x_i))."""
    if not isinstance(f.source, PolyAlgebra) or not isinstance(f.target, PolyAlgebra):
        raise TypeError("the differential-form tangent is defined on polynomial rings")
    n, m = f.source.ngens, f.target.ngens
    images = [embed_in_tangent(im, 2 * m) for im in f.images]
    images += [total_differential(im) for im in f.images]
    return AlgebraMorphism(PolyAlgebra(2 * n), PolyAlgebra(2 * m), tuple(images))


@dataclass(frozen=True)
class KahlerStructure:
    """Structure maps of the differential-form tangent, written as algebra
    morphisms (they present maps of affine schemes, so they point backwards
    relative to the geometric picture)."""

    base: PolyAlgebra
    projection: AlgebraMorphism  # A -> T(A), inclusion
    zero_section: AlgebraMorphism  # T(A) -> A, dx -> 0
    fibre_sum: AlgebraMorphism  # T(A) -> T2(A), dx -> dx' + dx''
    vertical_lift: AlgebraMorphism  # T^2(A) -> T(A)
    canonical_flip: AlgebraMorphism  # T^2(A) -> T^2(A)


def kahler_structure(algebra: PolyAlgebra) -> KahlerStructure:
    n = algebra.ngens
    t = PolyAlgebra(2 * n)
    t2 = PolyAlgebra(3 * n)  # x, dx', dx''
    tt = PolyAlgebra(4 * n)  # x, dx, d'x, d'dx

    projection = AlgebraMorphism(algebra, t, tuple(t.gen(i) for i in range(n)))
    zero_section = AlgebraMorphism(
        t, algebra, tuple(algebra.gen(i) for i in range(n)) + tuple(algebra.zero() for _ in range(n))
    )
    fibre_sum = AlgebraMorphism(
        t,
        t2,
        tuple(t2.gen(i) for i in range(n))
        + tuple(t2.gen(n + i) + t2.gen(2 * n + i) for i in range(n)),
    )
    vertical_lift = AlgebraMorphism(
        tt,
        t,
        tuple(t.gen(i) for i in range(n))
        + tuple(t.zero() for _ in range(n))
        + tuple(t.zero() for _ in range(n))
        + tuple(t.gen(n + i) for i in range(n)),
    )
    canonical_flip = AlgebraMorphism(
        tt,
        tt,
        tuple(tt.gen(i) for i in range(n))
        + tuple(tt.gen(2 * n + i) for i in range(n))
        + tuple(tt.gen(n + i) for i in range(n))
        + tuple(tt.gen(3 * n + i) for i in range(n)),
    )
    return KahlerStructure(algebra, projection, zero_section, fibre_sum, vertical_lift, canonical_flip)


def kahler_second_tangent(f: AlgebraMorphism) -> AlgebraMorphism:
    return kahler_tangent(kahler_tangent(f))


# --- free modules and the Q-linear dual involution ---------------------------


def _qmat_mul(a: list, b: list) -> list:
    rows, mid, cols = len(a), len(b), len(b[0]) if b else 0
    out = [[Fraction(0)] * cols for _ in range(rows)]
    for i in range(rows):
        for k in range(mid):
            if a[i][k] == 0:
                continue
            for j in range(cols):
                out[i][j] += a[i][k] * b[k][j]
    return out


def _qmat_transpose(a: list) -> list:
    if not a:
        return []
    return [[a[i][j] for i in range(len(a))] for j in range(len(a[0]))]


@dataclass(frozen=True)
class FreeModuleMorphism:
    """A-linear map A^r -> A^s given by an s x r matrix of algebra elements."""

    algebra: FinDimAlgebra
    matrix: tuple  # s rows, r columns

    def __post_init__(self):
        object.__setattr__(self, "matrix", tuple(tuple(row) for row in self.matrix))
        for row in self.matrix:
            if len(row) != self.src_rank:
                raise ValueError("ragged matrix")
            for entry in row:
                if not self.algebra.contains(entry):
                    raise ValueError("matrix entry is not an algebra element")

    @property
    def tgt_rank(self) -> int:
        return len(self.matrix)

    @property
    def src_rank(self) -> int:
        return len(self.matrix[0]) if self.matrix else 0

    def apply(self, vector):
        a = self.algebra
        if len(vector) != self.src_rank:
            raise ValueError("vector rank mismatch")
        out = []
        for row in self.matrix:
            acc = a.zero()
            for entry, x in zip(row, vector):
                acc = a.add(acc, a.mul(entry, x))
            out.append(acc)
        return tuple(out)

    def to_qmatrix(self) -> list:
        """(s*d) x (r*d) rational matrix in the basis e_i x^k of A^r."""
        d = self.algebra.dim
        s, r = self.tgt_rank, self.src_rank
        out = [[Fraction(0)] * (r * d) for _ in range(s * d)]
        for i in range(s):
            for j in range(r):
                block = self.algebra.regular_representation(self.matrix[i][j])
                for bi in range(d):
                    for bj in range(d):
                        out[i * d + bi][j * d + bj] = block[bi][bj]
        return out


def compose_module_morphisms(g: FreeModuleMorphism, h: FreeModuleMorphism) -> FreeModuleMorphism:
    """Diagrammatic composite g then h (matrix product H * G)."""
    if g.algebra != h.algebra or g.tgt_rank != h.src_rank:
        raise ValueError("module morphisms do not compose")
    a = g.algebra
    rows = []
    for i in range(h.tgt_rank):
        row = []
        for j in range(g.src_rank):
            acc = a.zero()
            for k in range(g.tgt_rank):
                acc = a.add(acc, a.mul(h.matrix[i][k], g.matrix[k][j]))
            row.append(acc)
        rows.append(tuple(row))
    return FreeModuleMorphism(a, tuple(rows))


def identity_module_morphism(algebra: FinDimAlgebra, rank: int) -> FreeModuleMorphism:
    return FreeModuleMorphism(
        algebra,
        tuple(
            tuple(algebra.one() if i == j else algebra.zero() for j in range(rank))
            for i in range(rank)
        ),
    )


@dataclass(frozen=True)
class DualModuleMorphism:
    """Q-linear dual of a module map, stored as its rational matrix in the
    dual standard basis.  Maps (A^s)* -> (A^r)* when the original mapped
    A^r -> A^s.  The A-action on a dual is phi -> phi(a . -), whose matrix is
    the transposed regular representation."""

    algebra: FinDimAlgebra
    src_rank: int  # s: rank of the module whose dual is the source
    tgt_rank: int  # r
    qmatrix: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "qmatrix", tuple(tuple(Fraction(c) for c in row) for row in self.qmatrix)
        )

    def apply(self, qvector):
        out = []
        for row in self.qmatrix:
            out.append(sum((c * Fraction(x) for c, x in zip(row, qvector)), Fraction(0)))
        return tuple(out)


def module_dual_involution(g):
    """Transpose over Q.  FreeModuleMorphism -> DualModuleMorphism, and back:
    applying it twice returns the original A-matrix exactly."""
    if isinstance(g, FreeModuleMorphism):
        return DualModuleMorphism(
            g.algebra, g.tgt_rank, g.src_rank, tuple(map(tuple, _qmat_transpose(g.to_qmatrix())))
        )
    if isinstance(g, DualModuleMorphism):
        back = _qmat_transpose([list(r) for r in g.qmatrix])
        return _from_qmatrix(g.algebra, g.tgt_rank, g.src_rank, back)
    raise TypeError(f"cannot dualize {type(g).__name__}")


def _from_qmatrix(algebra: FinDimAlgebra, src_rank: int, tgt_rank: int, qmat: list) -> FreeModuleMorphism:
    """Reassemble an A-matrix from a rational matrix whose d x d blocks are
    regular representations (true for any double dual)."""
    d = algebra.dim
    rows = []
    for i in range(tgt_rank):
        row = []
        for j in range(src_rank):
            block = [[qmat[i * d + bi][j * d + bj] for bj in range(d)] for bi in range(d)]
            entry = tuple(block[bi][0] for bi in range(d))  # image of the basis vector 1
            if algebra.regular_representation(entry) != block:
                raise ValueError("rational matrix is not A-linear for the regular action")
            row.append(entry)
        rows.append(tuple(row))
    return FreeModuleMorphism(algebra, tuple(rows))


def compose_dual_morphisms(p: DualModuleMorphism, q: DualModuleMorphism) -> DualModuleMorphism:
    """Composite in the dual fibre: p then q as Q-linear maps."""
    if p.algebra != q.algebra or p.tgt_rank != q.src_rank:
        raise ValueError("dual morphisms do not compose")
    prod = _qmat_mul([list(r) for r in q.qmatrix], [list(r) for r in p.qmatrix])
    return DualModuleMorphism(p.algebra, p.src_rank, q.tgt_rank, tuple(map(tuple, prod)))


def dual_action_matrix(algebra: FinDimAlgebra, rank: int, a) -> list:
    """Matrix of the A-action on the dual of A^rank: block-diagonal R(a)^T."""
    d = algebra.dim
    block = _qmat_transpose(algebra.regular_representation(a))
    out = [[Fraction(0)] * (rank * d) for _ in range(rank * d)]
    for i in range(rank):
        for bi in range(d):
            for bj in range(d):
                out[i * d + bi][i * d + bj] = block[bi][bj]
    return out


def module_action_matrix(algebra: FinDimAlgebra, rank: int, a) -> list:
    """Matrix of the A-action on A^rank itself: block-diagonal R(a)."""
    d = algebra.dim
    block = algebra.regular_representation(a)
    out = [[Fraction(0)] * (rank * d) for _ in range(rank * d)]
    for i in range(rank):
        for bi in range(d):
            for bj in range(d):
                out[i * d + bi][i * d + bj] = block[bi][bj]
    return out


# --- derivations-based reverse tangent on polynomial rings -------------------


def derivations_cotangent_algebra(algebra: PolyAlgebra) -> PolyAlgebra:
    """Q[x0..x_{n-1}, D0..D_{n-1}]: generator n+i is the coordinate
    derivation d/dx_i, polynomially adjoined."""
    return PolyAlgebra(2 * algebra.ngens)


def derivations_reverse_tangent(f: AlgebraMorphism) -> AlgebraMorphism:
    """Reverse lift on polynomial rings.

    For f: Q[x..] -> Q[y..] returns the map on reverse tangent algebras
    going the other way: generators y_j keep their name, and the coordinate
    derivation D^y_j is sent to sum_i (d f(x_i) / d y_j) Dx_i.  The codomain
    Q[y.., Dx..] presents the target ring with the source's derivation
    generators adjoined (the source generators are identified with their
    images, so they need no generators of their own).
    """
    if not isinstance(f.source, PolyAlgebra) or not isinstance(f.target, PolyAlgebra):
        raise TypeError("the derivations reverse tangent is defined on polynomial rings")
    n, m = f.source.ngens, f.target.ngens
    mixed = PolyAlgebra(m + n)  # y0..y_{m-1}, Dx0..Dx_{n-1}
    images = [mixed.gen(j) for j in range(m)]
    for j in range(m):
        acc = mixed.zero()
        for i in range(n):
            coeff = embed_in_tangent(f.images[i].partial(j), m + n)
            acc = acc + coeff * mixed.gen(m + i)
        images.append(acc)
    return AlgebraMorphism(PolyAlgebra(2 * m), mixed, tuple(images))


# --- text formats ------------------------------------------------------------

_TERM_SPLIT = re.compile(r"(?=[+-])")
_FACTOR = re.compile(r"^(?:(?P<coef>-?\d+(?:/\d+)?)|(?P<var>x(?P<idx>\d+))(?:\^(?P<pow>\d+))?)$")


def parse_polynomial(text: str, nvars: int) -> Polynomial:
    """Parse 'poly: 3*x0^2*x1 + 1/2' (the 'poly:' prefix is optional)."""
    body = text.strip()
    if body.startswith("poly:"):
        body = body[len("poly:") :].strip()
    if not body:
        raise ValueError("empty polynomial text")
    out = Polynomial.constant(nvars, 0)
    for raw_term in _TERM_SPLIT.split(body.replace(" ", "")):
        if not raw_term:
            continue
        sign = Fraction(1)
        term = raw_term
        while term and term[0] in "+-":
            if term[0] == "-":
                sign = -sign
            term = term[1:]
        if not term:
            raise ValueError(f"dangling sign in polynomial text: {text!r}")
        mono = Polynomial.constant(nvars, sign)
        for factor in term.split("*"):
            m = _FACTOR.match(factor)
            if not m:
                raise ValueError(f"bad polynomial factor {factor!r}")
            if m.group("coef") is not None:
                mono = mono.scale(Fraction(m.group("coef")))
            else:
                idx = int(m.group("idx"))
                power = int(m.group("pow") or 1)
                if idx >= nvars:
                    raise ValueError(f"x{idx} out of range for {nvars} generator(s)")
                mono = mono * Polynomial.variable(nvars, idx) ** power
        out = out + mono
    return out


def parse_algebra_morphism(text: str, source: PolyAlgebra, target: PolyAlgebra) -> AlgebraMorphism:
    """Parse 'alghom: x0 -> x1^2; x1 -> x0' between polynomial rings."""
    body = text.strip()
    if body.startswith("alghom:"):
        body = body[len("alghom:") :].strip()
    images: dict[int, Polynomial] = {}
    for clause in body.split(";"):
        clause = clause.strip()
        if not clause:
            continue
        if "->" not in clause:
            raise ValueError(f"morphism clause {clause!r} lacks '->'")
        lhs, rhs = clause.split("->", 1)
        lhs = lhs.strip()
        if not re.fullmatch(r"x\d+", lhs):
            raise ValueError(f"left side {lhs!r} is not a generator")
        idx = int(lhs[1:])
        if idx >= source.ngens:
            raise ValueError(f"{lhs} out of range for the source ring")
        if idx in images:
            raise ValueError(f"duplicate image for {lhs}")
        images[idx] = parse_polynomial(rhs, target.ngens)
    missing = [i for i in range(source.ngens) if i not in images]
    if missing:
        raise ValueError(f"missing image(s) for generator(s) {missing}")
    return AlgebraMorphism(source, target, tuple(images[i] for i in range(source.ngens)))
