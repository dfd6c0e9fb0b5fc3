"""Smooth maps R^n -> R^m as tuples of expression DAGs.

Composition is written diagrammatically throughout the package: compose(F, G)
is "F then G", so eval(compose(F, G), x) == eval(G, eval(F, x)).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import expr as ex
from . import poly
from .expr import DimensionMismatchError, Expr


@dataclass(frozen=True)
class SmoothMap:
    dom_dim: int
    cod_dim: int
    components: tuple[Expr, ...]

    def __post_init__(self):
        if len(self.components) != self.cod_dim:
            raise DimensionMismatchError(
                f"{self.cod_dim} components declared, {len(self.components)} given"
            )
        for k, comp in enumerate(self.components):
            top = ex.max_var_index(comp)
            if top >= self.dom_dim:
                raise ex.UnboundVariableError(
                    f"component {k} uses x{top} but the domain dimension is {self.dom_dim}"
                )

    def __call__(self, point, exact: bool = False):
        return eval_map(self, point, exact=exact)

    def __str__(self):
        return to_dsl_map(self)


def smooth_map(dom_dim: int, components) -> SmoothMap:
    comps = tuple(components)
    return SmoothMap(dom_dim, len(comps), comps)


def parse_map(source: str) -> SmoothMap:
    dom_dim, cod_dim, components = ex.parse_map_source(source)
    return SmoothMap(dom_dim, cod_dim, components)


def to_dsl_map(f: SmoothMap) -> str:
    parts = [f"(map {f.dom_dim} {f.cod_dim}"] + [ex.to_dsl(c) for c in f.components]
    return " ".join(parts) + ")"


def eval_map(f: SmoothMap, point, exact: bool = False):
    if len(point) != f.dom_dim:
        raise DimensionMismatchError(
            f"map expects {f.dom_dim} input(s), got {len(point)}"
        )
    if exact:
        pt = [Fraction(x) for x in point]
        return tuple(ex.evaluate(c, pt, exact=True) for c in f.components)
    pt = [float(x) for x in point]
    return tuple(ex.evaluate(c, pt) for c in f.components)


def identity_map(n: int) -> SmoothMap:
    return smooth_map(n, [ex.Var(i) for i in range(n)])


def constant_map(dom_dim: int, values) -> SmoothMap:
    return smooth_map(dom_dim, [ex.const(v) for v in values])


def projection_map(dom_dim: int, indices) -> SmoothMap:
    return smooth_map(dom_dim, [ex.Var(i) for i in indices])


def compose(f: SmoothMap, g: SmoothMap) -> SmoothMap:
    """Diagrammatic composite "f then g"."""
    if f.cod_dim != g.dom_dim:
        raise DimensionMismatchError(
            f"cannot compose {f.dom_dim}->{f.cod_dim} with {g.dom_dim}->{g.cod_dim}"
        )
    return smooth_map(f.dom_dim, [ex.substitute(c, f.components) for c in g.components])


def compose_all(*maps: SmoothMap) -> SmoothMap:
    out = maps[0]
    for m in maps[1:]:
        out = compose(out, m)
    return out


def pair_map(f: SmoothMap, g: SmoothMap) -> SmoothMap:
    """<f, g>: shared domain, stacked codomains."""
    if f.dom_dim != g.dom_dim:
        raise DimensionMismatchError("pairing needs a shared domain")
    return smooth_map(f.dom_dim, f.components + g.components)


def product_map(f: SmoothMap, g: SmoothMap) -> SmoothMap:
    """f x g on the juxtaposed domains."""
    shifted = tuple(ex.shift_vars(c, f.dom_dim) for c in g.components)
    return smooth_map(f.dom_dim + g.dom_dim, f.components + shifted)


def partial_derivative(f: SmoothMap, index: int) -> SmoothMap:
    if not 0 <= index < f.dom_dim:
        raise IndexError(f"variable index {index} out of range for domain {f.dom_dim}")
    return smooth_map(f.dom_dim, [ex.derivative(c, index) for c in f.components])


def jacobian_exprs(f: SmoothMap) -> list[list[Expr]]:
    """J[j][i] = d f_j / d x_i."""
    return [[ex.derivative(c, i) for i in range(f.dom_dim)] for c in f.components]


def jacobian_at(f: SmoothMap, point) -> np.ndarray:
    pt = [float(x) for x in point]
    return np.array(
        [[ex.evaluate(d, pt) for d in row] for row in jacobian_exprs(f)], dtype=float
    )


def finite_difference_jacobian(f: SmoothMap, point, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian: the numeric oracle for symbolic partials."""
    pt = np.array([float(x) for x in point])
    out = np.zeros((f.cod_dim, f.dom_dim))
    for i in range(f.dom_dim):
        up = pt.copy()
        dn = pt.copy()
        up[i] += h
        dn[i] -= h
        fu = np.array(eval_map(f, up))
        fd = np.array(eval_map(f, dn))
        out[:, i] = (fu - fd) / (2 * h)
    return out


def normalize_map(f: SmoothMap) -> SmoothMap:
    return smooth_map(f.dom_dim, [ex.normalize(c) for c in f.components])


def is_polynomial_map(f: SmoothMap) -> bool:
    return not any(ex.contains_nonpolynomial(c) for c in f.components)


def maps_equal_exact(f: SmoothMap, g: SmoothMap) -> bool:
    """Exact semantic equality for polynomial maps via coefficient expansion."""
    if f.dom_dim != g.dom_dim or f.cod_dim != g.cod_dim:
        return False
    return all(
        poly.expand_expr(cf, f.dom_dim) == poly.expand_expr(cg, f.dom_dim)
        for cf, cg in zip(f.components, g.components)
    )


def maps_structurally_equal(f: SmoothMap, g: SmoothMap) -> bool:
    return normalize_map(f) == normalize_map(g)


def sample_points(rng: np.random.Generator, dim: int, count: int, lo=-2.0, hi=2.0):
    """Test points drawn uniformly from [lo, hi]^dim (spec default [-2, 2])."""
    return [tuple(rng.uniform(lo, hi, size=dim)) for _ in range(count)]


def maps_agree_at(f: SmoothMap, g: SmoothMap, point, tol: float) -> bool:
    fv = np.array(eval_map(f, point))
    gv = np.array(eval_map(g, point))
    return bool(np.max(np.abs(fv - gv), initial=0.0) <= tol)


def maps_equal_sampled(f, g, rng, count: int = 100, tol: float = 1e-9):
    """Compare maps at sampled points; returns (ok, witness_or_None)."""
    if f.dom_dim != g.dom_dim or f.cod_dim != g.cod_dim:
        return False, None
    for point in sample_points(rng, f.dom_dim, count):
        if not maps_agree_at(f, g, point, tol):
            return False, point
    return True, None


def maps_equal(f, g, rng=None, count: int = 100, tol: float = 1e-9) -> bool:
    """Exact comparison on the polynomial fragment, sampled otherwise."""
    if is_polynomial_map(f) and is_polynomial_map(g):
        return maps_equal_exact(f, g)
    if rng is None:
        rng = np.random.default_rng(0)
    ok, _ = maps_equal_sampled(f, g, rng, count=count, tol=tol)
    return ok
