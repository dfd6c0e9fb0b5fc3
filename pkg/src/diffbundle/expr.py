"""Expression DAGs for smooth maps with exact rational constants.

Node kinds: variable, rational constant, n-ary sum, n-ary product, negation,
sin, cos, exp, recip (multiplicative inverse).  Expressions are immutable and
hashable; structural equality is plain dataclass equality.  ``normalize``
flattens sums/products, folds rational constants, drops zero summands and unit
factors and sorts children, so arithmetically-trivial rearrangements become
structurally equal.  Semantic equality beyond that is *not* decided here;
callers either expand to polynomials (see ``poly``) or compare numerically.

The map DSL is an s-expression format::

    (map <dom_dim> <cod_dim> <expr> ...)     exactly cod_dim expressions
    <expr> := x<k> | <int> | <p>/<q>
            | (+ e ...) | (* e ...) | (neg e)
            | (sin e) | (cos e) | (exp e) | (recip e)

``recip`` is partial at 0; every other node is total.  All nodes are closed
under differentiation (d recip(u) = -recip(u)^2 du).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction


class DslSyntaxError(ValueError):
    """Malformed DSL text; carries a 1-based line/column position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class UnboundVariableError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    pass


class EvaluationDomainError(ArithmeticError):
    """Raised when recip is evaluated at zero."""


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Var(Expr):
    index: int


@dataclass(frozen=True)
class Const(Expr):
    value: Fraction


@dataclass(frozen=True)
class Sum(Expr):
    terms: tuple[Expr, ...]


@dataclass(frozen=True)
class Product(Expr):
    factors: tuple[Expr, ...]


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Sin(Expr):
    arg: Expr


@dataclass(frozen=True)
class Cos(Expr):
    arg: Expr


@dataclass(frozen=True)
class Exp(Expr):
    arg: Expr


@dataclass(frozen=True)
class Recip(Expr):
    arg: Expr


ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))

_UNARY = {Sin: "sin", Cos: "cos", Exp: "exp", Neg: "neg", Recip: "recip"}
_UNARY_BY_NAME = {name: cls for cls, name in _UNARY.items()}


def const(value) -> Const:
    return Const(Fraction(value))


def var(index: int) -> Var:
    if index < 0:
        raise ValueError(f"variable index must be >= 0, got {index}")
    return Var(index)


def add(*terms: Expr) -> Expr:
    """Sum with cheap folding: flattens, folds constants, drops zeros."""
    flat: list[Expr] = []
    acc = Fraction(0)
    for t in terms:
        for u in (t.terms if isinstance(t, Sum) else (t,)):
            if isinstance(u, Const):
                acc += u.value
            else:
                flat.append(u)
    if acc != 0:
        flat.append(Const(acc))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Sum(tuple(flat))


def mul(*factors: Expr) -> Expr:
    """Product with cheap folding: flattens, folds constants, drops units."""
    flat: list[Expr] = []
    acc = Fraction(1)
    for f in factors:
        for u in (f.factors if isinstance(f, Product) else (f,)):
            if isinstance(u, Const):
                acc *= u.value
            else:
                flat.append(u)
    if acc == 0:
        return ZERO
    if acc != 1:
        flat.insert(0, Const(acc))
    if not flat:
        return ONE
    if len(flat) == 1:
        return flat[0]
    return Product(tuple(flat))


def neg(e: Expr) -> Expr:
    return mul(Const(Fraction(-1)), e)


def max_var_index(e: Expr) -> int:
    """Largest variable index occurring in e, or -1 if none."""
    seen: dict[int, int] = {}

    def go(node: Expr) -> int:
        key = id(node)
        if key in seen:
            return seen[key]
        if isinstance(node, Var):
            out = node.index
        elif isinstance(node, Const):
            out = -1
        elif isinstance(node, Sum):
            out = max((go(t) for t in node.terms), default=-1)
        elif isinstance(node, Product):
            out = max((go(f) for f in node.factors), default=-1)
        else:
            out = go(node.arg)
        seen[key] = out
        return out

    return go(e)


def contains_nonpolynomial(e: Expr) -> bool:
    """True if e has a sin/cos/exp/recip node, i.e. leaves the polynomial
    fragment on which exact expansion-based comparison is available."""
    if isinstance(e, (Sin, Cos, Exp, Recip)):
        return True
    if isinstance(e, Sum):
        return any(contains_nonpolynomial(t) for t in e.terms)
    if isinstance(e, Product):
        return any(contains_nonpolynomial(f) for f in e.factors)
    if isinstance(e, Neg):
        return contains_nonpolynomial(e.arg)
    return False


def evaluate(e: Expr, point, exact: bool = False):
    """Evaluate at a point (sequence indexed by variable).

    Float mode uses math.*; exact mode keeps Fractions and rejects sin/cos/exp
    nodes.  ``recip`` raises EvaluationDomainError at zero in either mode.
    """
    memo: dict[int, object] = {}

    def go(node: Expr):
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Var):
            out = point[node.index]
        elif isinstance(node, Const):
            out = node.value if exact else float(node.value)
        elif isinstance(node, Sum):
            out = sum(go(t) for t in node.terms)
        elif isinstance(node, Product):
            out = Fraction(1) if exact else 1.0
            for f in node.factors:
                out = out * go(f)
        elif isinstance(node, Neg):
            out = -go(node.arg)
        elif isinstance(node, Recip):
            v = go(node.arg)
            if v == 0:
                raise EvaluationDomainError("recip of zero")
            out = (Fraction(1) / v) if exact else 1.0 / v
        elif exact:
            raise EvaluationDomainError(
                f"{type(node).__name__.lower()} node has no exact rational value"
            )
        elif isinstance(node, Sin):
            out = math.sin(go(node.arg))
        elif isinstance(node, Cos):
            out = math.cos(go(node.arg))
        elif isinstance(node, Exp):
            out = math.exp(go(node.arg))
        else:  # pragma: no cover
            raise TypeError(f"unknown node {node!r}")
        memo[key] = out
        return out

    return go(e)


def derivative(e: Expr, index: int) -> Expr:
    """Exact symbolic partial derivative with respect to variable ``index``."""
    memo: dict[int, Expr] = {}

    def go(node: Expr) -> Expr:
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Var):
            out = ONE if node.index == index else ZERO
        elif isinstance(node, Const):
            out = ZERO
        elif isinstance(node, Sum):
            out = add(*(go(t) for t in node.terms))
        elif isinstance(node, Product):
            parts = []
            for i, f in enumerate(node.factors):
                df = go(f)
                if df == ZERO:
                    continue
                rest = node.factors[:i] + node.factors[i + 1 :]
                parts.append(mul(df, *rest))
            out = add(*parts)
        elif isinstance(node, Neg):
            out = neg(go(node.arg))
        elif isinstance(node, Sin):
            out = mul(Cos(node.arg), go(node.arg))
        elif isinstance(node, Cos):
            out = neg(mul(Sin(node.arg), go(node.arg)))
        elif isinstance(node, Exp):
            out = mul(Exp(node.arg), go(node.arg))
        elif isinstance(node, Recip):
            out = neg(mul(Recip(node.arg), Recip(node.arg), go(node.arg)))
        else:  # pragma: no cover
            raise TypeError(f"unknown node {node!r}")
        memo[key] = out
        return out

    return go(e)


def substitute(e: Expr, images) -> Expr:
    """Replace Var(i) by images[i] everywhere (capture-free, it is a DAG)."""
    memo: dict[int, Expr] = {}

    def go(node: Expr) -> Expr:
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Var):
            out = images[node.index]
        elif isinstance(node, Const):
            out = node
        elif isinstance(node, Sum):
            out = add(*(go(t) for t in node.terms))
        elif isinstance(node, Product):
            out = mul(*(go(f) for f in node.factors))
        elif isinstance(node, Neg):
            out = neg(go(node.arg))
        elif isinstance(node, (Sin, Cos, Exp, Recip)):
            out = type(node)(go(node.arg))
        else:  # pragma: no cover
            raise TypeError(f"unknown node {node!r}")
        memo[key] = out
        return out

    return go(e)


def shift_vars(e: Expr, offset: int) -> Expr:
    """Reindex every Var(i) to Var(i + offset)."""
    memo: dict[int, Expr] = {}

    def go(node: Expr) -> Expr:
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Var):
            out = Var(node.index + offset)
        elif isinstance(node, Const):
            out = node
        elif isinstance(node, Sum):
            out = Sum(tuple(go(t) for t in node.terms))
        elif isinstance(node, Product):
            out = Product(tuple(go(f) for f in node.factors))
        elif isinstance(node, (Neg, Sin, Cos, Exp, Recip)):
            out = type(node)(go(node.arg))
        else:  # pragma: no cover
            raise TypeError(f"unknown node {node!r}")
        memo[key] = out
        return out

    return go(e)


_RANK = {Const: 0, Var: 1, Sum: 2, Product: 3, Sin: 4, Cos: 5, Exp: 6, Recip: 7, Neg: 8}


def sort_key(e: Expr):
    """Total structural order on expressions (used to sort n-ary children)."""
    if isinstance(e, Const):
        return (0, e.value.numerator, e.value.denominator)
    if isinstance(e, Var):
        return (1, e.index)
    if isinstance(e, Sum):
        return (2, len(e.terms)) + tuple(sort_key(t) for t in e.terms)
    if isinstance(e, Product):
        return (3, len(e.factors)) + tuple(sort_key(f) for f in e.factors)
    return (_RANK[type(e)],) + (sort_key(e.arg),)


def normalize(e: Expr) -> Expr:
    """Canonical form: negation folded to (-1)-products, sums/products
    flattened and sorted, rational constants folded, zero summands and unit
    factors dropped, recip of a nonzero constant folded."""
    memo: dict[int, Expr] = {}

    def go(node: Expr) -> Expr:
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, (Var, Const)):
            out = node
        elif isinstance(node, Neg):
            out = go(mul(Const(Fraction(-1)), node.arg))
        elif isinstance(node, Sum):
            folded = add(*(go(t) for t in node.terms))
            if isinstance(folded, Sum):
                folded = Sum(tuple(sorted(folded.terms, key=sort_key)))
            out = folded
        elif isinstance(node, Product):
            folded = mul(*(go(f) for f in node.factors))
            if isinstance(folded, Product):
                folded = Product(tuple(sorted(folded.factors, key=sort_key)))
            out = folded
        elif isinstance(node, Recip):
            arg = go(node.arg)
            if isinstance(arg, Const) and arg.value != 0:
                out = Const(Fraction(1) / arg.value)
            else:
                out = Recip(arg)
        elif isinstance(node, (Sin, Cos, Exp)):
            out = type(node)(go(node.arg))
        else:  # pragma: no cover
            raise TypeError(f"unknown node {node!r}")
        memo[key] = out
        return out

    return go(e)


def to_dsl(e: Expr) -> str:
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Const):
        v = e.value
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(e, Sum):
        return "(+ " + " ".join(to_dsl(t) for t in e.terms) + ")"
    if isinstance(e, Product):
        return "(* " + " ".join(to_dsl(f) for f in e.factors) + ")"
    return f"({_UNARY[type(e)]} {to_dsl(e.arg)})"


# --- DSL parsing ----------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    while i < len(source):
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch.isspace():
            col += 1
            i += 1
        elif ch in "()":
            tokens.append(_Token(ch, line, col))
            col += 1
            i += 1
        else:
            j = i
            while j < len(source) and not source[j].isspace() and source[j] not in "()":
                j += 1
            tokens.append(_Token(source[i:j], line, col))
            col += j - i
            i = j
    return tokens


class _TokenStream:
    def __init__(self, tokens: list[_Token], end_line: int, end_col: int):
        self.tokens = tokens
        self.pos = 0
        self.end = (end_line, end_col)

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self, expected: str) -> _Token:
        tok = self.peek()
        if tok is None:
            raise DslSyntaxError(f"unexpected end of input, expected {expected}", *self.end)
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.next(repr(text))
        if tok.text != text:
            raise DslSyntaxError(f"expected {text!r}, got {tok.text!r}", tok.line, tok.col)
        return tok


def _parse_atom(tok: _Token) -> Expr:
    text = tok.text
    if text.startswith("x") and text[1:].isdigit():
        return Var(int(text[1:]))
    try:
        return Const(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise DslSyntaxError(f"unrecognized atom {text!r}", tok.line, tok.col) from None


def _parse_expr(stream: _TokenStream) -> Expr:
    tok = stream.next("an expression")
    if tok.text == ")":
        raise DslSyntaxError("unexpected ')'", tok.line, tok.col)
    if tok.text != "(":
        return _parse_atom(tok)
    head = stream.next("an operator")
    args: list[Expr] = []
    while True:
        nxt = stream.peek()
        if nxt is None:
            raise DslSyntaxError("unexpected end of input, expected ')'", *stream.end)
        if nxt.text == ")":
            stream.pos += 1
            break
        args.append(_parse_expr(stream))
    if head.text in ("+", "*"):
        if not args:
            raise DslSyntaxError(f"'{head.text}' needs at least one argument", head.line, head.col)
        return Sum(tuple(args)) if head.text == "+" else Product(tuple(args))
    if head.text in _UNARY_BY_NAME:
        if len(args) != 1:
            raise DslSyntaxError(
                f"'{head.text}' takes exactly one argument, got {len(args)}", head.line, head.col
            )
        return _UNARY_BY_NAME[head.text](args[0])
    raise DslSyntaxError(f"unknown operator {head.text!r}", head.line, head.col)


def _stream(source: str) -> _TokenStream:
    lines = source.split("\n")
    return _TokenStream(_tokenize(source), len(lines), len(lines[-1]) + 1)


def parse_expr(source: str) -> Expr:
    """Parse a single DSL expression (no (map ...) header)."""
    stream = _stream(source)
    e = _parse_expr(stream)
    trailing = stream.peek()
    if trailing is not None:
        raise DslSyntaxError(f"trailing input {trailing.text!r}", trailing.line, trailing.col)
    return e


def _parse_nat(stream: _TokenStream, what: str) -> int:
    tok = stream.next(what)
    if not tok.text.isdigit():
        raise DslSyntaxError(f"expected {what} (a natural number), got {tok.text!r}", tok.line, tok.col)
    return int(tok.text)


def parse_map_source(source: str):
    """Parse '(map dom cod expr...)' and return (dom_dim, cod_dim, components).

    Raises DslSyntaxError / UnboundVariableError / DimensionMismatchError.
    """
    stream = _stream(source)
    stream.expect("(")
    head = stream.next("'map'")
    if head.text != "map":
        raise DslSyntaxError(f"expected 'map', got {head.text!r}", head.line, head.col)
    dom_dim = _parse_nat(stream, "domain dimension")
    cod_dim = _parse_nat(stream, "codomain dimension")
    components: list[Expr] = []
    while True:
        nxt = stream.peek()
        if nxt is None:
            raise DslSyntaxError("unexpected end of input, expected ')'", *stream.end)
        if nxt.text == ")":
            stream.pos += 1
            break
        components.append(_parse_expr(stream))
    trailing = stream.peek()
    if trailing is not None:
        raise DslSyntaxError(f"trailing input {trailing.text!r}", trailing.line, trailing.col)
    if len(components) != cod_dim:
        raise DimensionMismatchError(
            f"header declares {cod_dim} component(s), body has {len(components)}"
        )
    for k, comp in enumerate(components):
        top = max_var_index(comp)
        if top >= dom_dim:
            raise UnboundVariableError(
                f"component {k} uses x{top} but the domain dimension is {dom_dim}"
            )
    return dom_dim, cod_dim, tuple(components)
