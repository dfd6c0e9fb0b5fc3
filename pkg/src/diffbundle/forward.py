"""Forward differential structure on smooth maps.

The forward derivative of F: R^n -> R^m is the map D[F]: R^2n -> R^m whose
j-th component is sum_i dF_j/dx_i(x) * y_i, built symbolically from exact
partials.  The tangent lift T(F)(x, v) = (F(x), D[F](x, v)) is functorial; the
five structure maps (projection, fibrewise sum, zero section, vertical lift,
canonical flip) are plain coordinate maps and every law about them is
checkable either exactly (polynomial fragment) or numerically.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import expr as ex
from . import smooth as sm
from .smooth import SmoothMap, smooth_map


def d_combinator(f: SmoothMap) -> SmoothMap:
    """Directional derivative D[F]: (x, y) -> J_F(x) . y, symbolically."""
    n = f.dom_dim
    rows = sm.jacobian_exprs(f)
    comps = [
        ex.add(*(ex.mul(row[i], ex.Var(n + i)) for i in range(n)))
        for row in rows
    ]
    return smooth_map(2 * n, comps)


def tangent_map(f: SmoothMap) -> SmoothMap:
    """T(F)(x, v) = (F(x), D[F](x, v)): R^2n -> R^2m."""
    n = f.dom_dim
    d = d_combinator(f)
    return smooth_map(2 * n, f.components + d.components)


def tangent_pair_map(f: SmoothMap) -> SmoothMap:
    """The induced map on pairs of tangent vectors: (x, v, w) -> (F(x), Dv, Dw)."""
    n, m = f.dom_dim, f.cod_dim
    d = d_combinator(f)
    first = d.components
    relabel = [ex.Var(i) for i in range(n)] + [ex.Var(2 * n + i) for i in range(n)]
    second = tuple(ex.substitute(c, relabel) for c in first)
    return smooth_map(3 * n, f.components + first + second)


def jvp(f: SmoothMap, point, vector):
    """Forward derivative evaluated at a point and tangent vector."""
    if len(vector) != f.dom_dim:
        raise ex.DimensionMismatchError(
            f"tangent vector has {len(vector)} entries, expected {f.dom_dim}"
        )
    return sm.eval_map(d_combinator(f), tuple(point) + tuple(vector))


@dataclass(frozen=True)
class TangentStructureMaps:
    """The five structure maps of the tangent bundle in dimension n.

    projection(x, v) = x                         2n -> n
    fibre_sum(x, v, w) = (x, v + w)              3n -> 2n
    zero_section(x) = (x, 0)                     n -> 2n
    vertical_lift(x, v) = (x, 0, 0, v)           2n -> 4n
    canonical_flip(x, v, w, u) = (x, w, v, u)    4n -> 4n
    """

    dim: int
    projection: SmoothMap
    fibre_sum: SmoothMap
    zero_section: SmoothMap
    vertical_lift: SmoothMap
    canonical_flip: SmoothMap


def tangent_structure(n: int) -> TangentStructureMaps:
    if n < 0:
        raise ValueError("dimension must be a natural number")
    v = ex.Var
    projection = smooth_map(2 * n, [v(i) for i in range(n)])
    fibre_sum = smooth_map(
        3 * n,
        [v(i) for i in range(n)]
        + [ex.add(v(n + i), v(2 * n + i)) for i in range(n)],
    )
    zero_section = smooth_map(n, [v(i) for i in range(n)] + [ex.ZERO] * n)
    vertical_lift = smooth_map(
        2 * n,
        [v(i) for i in range(n)] + [ex.ZERO] * (2 * n) + [v(n + i) for i in range(n)],
    )
    canonical_flip = smooth_map(
        4 * n,
        [v(i) for i in range(n)]
        + [v(2 * n + i) for i in range(n)]
        + [v(n + i) for i in range(n)]
        + [v(3 * n + i) for i in range(n)],
    )
    return TangentStructureMaps(
        n, projection, fibre_sum, zero_section, vertical_lift, canonical_flip
    )


# --- versioned generator suite for law checks ------------------------------

GENERATOR_SUITE_VERSION = 1


def generator_suite() -> list[tuple[str, SmoothMap]]:
    """Fixed family of maps used by every sampled law check.

    Identity, projections, polynomials of degree <= 3, and sin/cos/exp
    composites.  Pairwise composites are exercised by the functoriality and
    chain-rule laws, which range over all composable pairs of this family.
    """
    v, c = ex.Var, ex.const
    base: list[tuple[str, SmoothMap]] = [
        ("id1", sm.identity_map(1)),
        ("id2", sm.identity_map(2)),
        ("proj0", sm.projection_map(2, [0])),
        ("swap2", sm.projection_map(2, [1, 0])),
        ("const1", smooth_map(1, [c("3/2")])),
        ("cubic1", smooth_map(1, [ex.add(ex.mul(v(0), v(0), v(0)), ex.mul(c(-2), v(0)), c("1/2"))])),
        ("square1", smooth_map(1, [ex.mul(v(0), v(0))])),
        ("prodsum2", smooth_map(2, [ex.mul(v(0), v(1)), ex.add(v(0), v(1))])),
        ("mono21", smooth_map(2, [ex.mul(v(0), v(0), v(1))])),
        ("embed12", smooth_map(1, [v(0), ex.mul(v(0), v(0))])),
        ("mix32", smooth_map(3, [ex.add(ex.mul(v(0), v(1)), v(2)), ex.mul(v(1), v(2))])),
        ("sin1", smooth_map(1, [ex.Sin(v(0))])),
        ("cos1", smooth_map(1, [ex.Cos(v(0))])),
        ("exp1", smooth_map(1, [ex.Exp(v(0))])),
        ("sinsq1", smooth_map(1, [ex.Sin(ex.mul(v(0), v(0)))])),
        ("wave2", smooth_map(2, [ex.mul(ex.Sin(v(0)), v(1)), ex.Cos(ex.mul(v(0), v(1)))])),
    ]
    return base


def composable_pairs(suite) -> list[tuple[str, SmoothMap, str, SmoothMap]]:
    return [
        (nf, f, ng, g)
        for nf, f in suite
        for ng, g in suite
        if f.cod_dim == g.dom_dim
    ]
