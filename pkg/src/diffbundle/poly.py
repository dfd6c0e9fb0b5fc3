"""Exact multivariate polynomials over the rationals.

Coefficients are Fractions keyed by exponent tuples of a fixed length (the
number of generators).  Arithmetic canonicalizes by dropping zero
coefficients, so equality of the coefficient dicts is semantic equality of
polynomials.  This is the zero-tolerance oracle behind every "exact for
polynomials" comparison in the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from . import expr as ex


@dataclass(frozen=True)
class Polynomial:
    nvars: int
    coeffs: dict = field(default_factory=dict)  # exponent tuple -> Fraction

    def __post_init__(self):
        cleaned = {}
        for mono, c in self.coeffs.items():
            c = Fraction(c)
            if len(mono) != self.nvars:
                raise ValueError(f"monomial {mono} has arity {len(mono)}, expected {self.nvars}")
            if c != 0:
                cleaned[tuple(mono)] = c
        object.__setattr__(self, "coeffs", cleaned)

    # dicts are unhashable; identity hash keeps dataclass ergonomics
    def __hash__(self):
        return hash((self.nvars, frozenset(self.coeffs.items())))

    def __eq__(self, other):
        return (
            isinstance(other, Polynomial)
            and self.nvars == other.nvars
            and self.coeffs == other.coeffs
        )

    @staticmethod
    def constant(nvars: int, value) -> "Polynomial":
        value = Fraction(value)
        return Polynomial(nvars, {} if value == 0 else {(0,) * nvars: value})

    @staticmethod
    def variable(nvars: int, index: int) -> "Polynomial":
        if not 0 <= index < nvars:
            raise ValueError(f"variable index {index} out of range for {nvars} generators")
        mono = tuple(1 if i == index else 0 for i in range(nvars))
        return Polynomial(nvars, {mono: Fraction(1)})

    def _check(self, other: "Polynomial"):
        if self.nvars != other.nvars:
            raise ValueError(f"generator count mismatch: {self.nvars} vs {other.nvars}")

    def __add__(self, other: "Polynomial") -> "Polynomial":
        self._check(other)
        out = dict(self.coeffs)
        for mono, c in other.coeffs.items():
            out[mono] = out.get(mono, Fraction(0)) + c
        return Polynomial(self.nvars, out)

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.nvars, {m: -c for m, c in self.coeffs.items()})

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        self._check(other)
        out: dict = {}
        for m1, c1 in self.coeffs.items():
            for m2, c2 in other.coeffs.items():
                mono = tuple(a + b for a, b in zip(m1, m2))
                out[mono] = out.get(mono, Fraction(0)) + c1 * c2
        return Polynomial(self.nvars, out)

    def scale(self, value) -> "Polynomial":
        value = Fraction(value)
        return Polynomial(self.nvars, {m: c * value for m, c in self.coeffs.items()})

    def __pow__(self, n: int) -> "Polynomial":
        if n < 0:
            raise ValueError("negative powers are not polynomial")
        out = Polynomial.constant(self.nvars, 1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def is_zero(self) -> bool:
        return not self.coeffs

    def degree(self) -> int:
        return max((sum(m) for m in self.coeffs), default=0)

    def partial(self, index: int) -> "Polynomial":
        out: dict = {}
        for mono, c in self.coeffs.items():
            k = mono[index]
            if k == 0:
                continue
            lowered = tuple(e - 1 if i == index else e for i, e in enumerate(mono))
            out[lowered] = out.get(lowered, Fraction(0)) + c * k
        return Polynomial(self.nvars, out)

    def substitute(self, images: list["Polynomial"]) -> "Polynomial":
        """Evaluate on polynomial images of the generators."""
        if len(images) != self.nvars:
            raise ValueError(f"need {self.nvars} images, got {len(images)}")
        nvars_out = images[0].nvars if images else 0
        for im in images:
            if im.nvars != nvars_out:
                raise ValueError("images live in different polynomial rings")
        out = Polynomial.constant(nvars_out, 0)
        for mono, c in self.coeffs.items():
            term = Polynomial.constant(nvars_out, c)
            for i, e in enumerate(mono):
                if e:
                    term = term * images[i] ** e
            out = out + term
        return out

    def eval(self, point) -> Fraction:
        total = Fraction(0)
        for mono, c in self.coeffs.items():
            term = c
            for i, e in enumerate(mono):
                if e:
                    term *= Fraction(point[i]) ** e
            total += term
        return total

    def __str__(self):
        if not self.coeffs:
            return "0"
        parts = []
        for mono in sorted(self.coeffs, key=lambda m: (sum(m), m), reverse=True):
            c = self.coeffs[mono]
            vars_part = "*".join(
                f"x{i}" if e == 1 else f"x{i}^{e}" for i, e in enumerate(mono) if e
            )
            if not vars_part:
                parts.append(str(c))
            elif c == 1:
                parts.append(vars_part)
            elif c == -1:
                parts.append(f"-{vars_part}")
            else:
                parts.append(f"{c}*{vars_part}")
        out = " + ".join(parts)
        return out.replace("+ -", "- ")


def expand_expr(e: ex.Expr, nvars: int) -> Polynomial:
    """Expand a polynomial expression into coefficient normal form.

    Raises ValueError on sin/cos/exp/recip nodes.
    """
    memo: dict[int, Polynomial] = {}

    def go(node: ex.Expr) -> Polynomial:
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, ex.Var):
            out = Polynomial.variable(nvars, node.index)
        elif isinstance(node, ex.Const):
            out = Polynomial.constant(nvars, node.value)
        elif isinstance(node, ex.Sum):
            out = Polynomial.constant(nvars, 0)
            for t in node.terms:
                out = out + go(t)
        elif isinstance(node, ex.Product):
            out = Polynomial.constant(nvars, 1)
            for f in node.factors:
                out = out * go(f)
        elif isinstance(node, ex.Neg):
            out = -go(node.arg)
        else:
            raise ValueError(f"{type(node).__name__.lower()} node is not polynomial")
        memo[key] = out
        return out

    return go(e)


def poly_to_expr(p: Polynomial) -> ex.Expr:
    """Inverse of expand_expr up to normalization."""
    terms = []
    for mono in sorted(p.coeffs):
        factors: list[ex.Expr] = [ex.Const(p.coeffs[mono])]
        for i, e in enumerate(mono):
            factors.extend([ex.Var(i)] * e)
        terms.append(ex.mul(*factors))
    return ex.add(*terms)
