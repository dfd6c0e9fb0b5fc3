"""Reverse differential structure on smooth maps.

The reverse derivative of F: R^n -> R^m is R[F]: R^(n+m) -> R^n acting by the
transposed Jacobian, R[F](x, z)_i = sum_j dF_j/dx_i(x) * z_j.  The same map is
reconstructed a second, independent way: D[F] is linear in its direction
argument, and transposing that linear argument with the fibrewise dagger gives
R[F] again.  Both routes are kept and cross-checked; neither is defined in
terms of the other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as ex
from . import forward as fw
from . import smooth as sm
from .smooth import SmoothMap, smooth_map


def r_combinator(f: SmoothMap) -> SmoothMap:
    """Transpose-Jacobian action R[F](x, z) = J_F(x)^T . z, symbolically."""
    n, m = f.dom_dim, f.cod_dim
    rows = sm.jacobian_exprs(f)  # rows[j][i] = dF_j/dx_i
    comps = [
        ex.add(*(ex.mul(rows[j][i], ex.Var(n + j)) for j in range(m)))
        for i in range(n)
    ]
    return smooth_map(n + m, comps)


def vjp(f: SmoothMap, point, covector):
    """Reverse derivative evaluated at a point and output covector."""
    if len(covector) != f.cod_dim:
        raise ex.DimensionMismatchError(
            f"covector has {len(covector)} entries, expected {f.cod_dim}"
        )
    return sm.eval_map(r_combinator(f), tuple(point) + tuple(covector))


def reverse_tangent_map(f: SmoothMap) -> SmoothMap:
    """(x, z) -> (x, R[F](x, z)): the lens-shaped reverse lift of F."""
    n = f.dom_dim
    r = r_combinator(f)
    comps = tuple(ex.Var(i) for i in range(n)) + r.components
    return smooth_map(n + f.cod_dim, comps)


@dataclass(frozen=True)
class FibreLinearMap:
    """A map (context, fibre) -> codomain that is linear in the fibre block."""

    carrier: SmoothMap
    context_dim: int
    linear_dim: int

    def __post_init__(self):
        if self.carrier.dom_dim != self.context_dim + self.linear_dim:
            raise ex.DimensionMismatchError(
                f"carrier domain {self.carrier.dom_dim} != context {self.context_dim}"
                f" + linear {self.linear_dim}"
            )

    @property
    def cod_dim(self) -> int:
        return self.carrier.cod_dim


@dataclass(frozen=True)
class LinearityResult:
    passed: bool
    witness: tuple | None
    max_error: float


def _linearity_test_map(g: SmoothMap, context_dim: int) -> SmoothMap:
    """<pi0, 0, 0, pi1> D[g]: equals g exactly when g is linear in the fibre."""
    c = context_dim
    a = g.dom_dim - c
    zero = [ex.ZERO]
    inject = smooth_map(
        g.dom_dim,
        [ex.Var(i) for i in range(c)]
        + zero * a
        + zero * c
        + [ex.Var(c + i) for i in range(a)],
    )
    return sm.compose(inject, fw.d_combinator(g))


def is_linear_in_second(
    g: SmoothMap,
    context_dim: int,
    rng=None,
    samples: int = 100,
    tol: float = 1e-9,
) -> LinearityResult:
    """Check <pi0,0,0,pi1> D[g] = g at sampled points; returns a witness on failure."""
    if rng is None:
        rng = np.random.default_rng(0)
    probe = _linearity_test_map(g, context_dim)
    worst = 0.0
    for point in sm.sample_points(rng, g.dom_dim, samples):
        gv = np.array(sm.eval_map(g, point))
        pv = np.array(sm.eval_map(probe, point))
        err = float(np.max(np.abs(gv - pv), initial=0.0))
        if err > tol:
            return LinearityResult(False, tuple(point), err)
        worst = max(worst, err)
    return LinearityResult(True, None, worst)


def fibre_matrix_exprs(g: SmoothMap, context_dim: int) -> list[list[ex.Expr]]:
    """M(x)[j][i] = d g_j / d fibre_i at fibre = 0, as expressions in the context.

    For maps linear in the fibre this is the full fibrewise matrix.
    """
    c = context_dim
    a = g.dom_dim - c
    zeroed = [ex.Var(i) for i in range(c)] + [ex.ZERO] * a
    out = []
    for comp in g.components:
        row = [
            ex.substitute(ex.derivative(comp, c + i), zeroed)
            for i in range(a)
        ]
        out.append(row)
    return out


def linear_dagger(
    g: FibreLinearMap, rng=None, samples: int = 100, tol: float = 1e-9
) -> FibreLinearMap:
    """Transpose the linear argument: g(x, a) = M(x)a |-> (x, b) -> M(x)^T b.

    Rejects carriers that fail the fibre-linearity criterion, reporting the
    witness point.
    """
    check = is_linear_in_second(g.carrier, g.context_dim, rng=rng, samples=samples, tol=tol)
    if not check.passed:
        raise ValueError(
            f"map is not linear in its fibre block: witness {check.witness},"
            f" error {check.max_error:.3e}"
        )
    return dagger_unchecked(g)


def dagger_unchecked(g: FibreLinearMap) -> FibreLinearMap:
    c, a, b = g.context_dim, g.linear_dim, g.cod_dim
    m = fibre_matrix_exprs(g.carrier, c)  # b rows, a cols
    comps = [
        ex.add(*(ex.mul(m[j][i], ex.Var(c + j)) for j in range(b)))
        for i in range(a)
    ]
    return FibreLinearMap(smooth_map(c + b, comps), c, b)


def fibre_compose(g: FibreLinearMap, h: FibreLinearMap) -> FibreLinearMap:
    """Composite over a shared context: (x, a) -> h(x, g(x, a))."""
    if g.context_dim != h.context_dim or g.cod_dim != h.linear_dim:
        raise ex.DimensionMismatchError("fibre maps do not compose")
    c = g.context_dim
    feed = smooth_map(
        c + g.linear_dim,
        [ex.Var(i) for i in range(c)] + list(g.carrier.components),
    )
    return FibreLinearMap(sm.compose(feed, h.carrier), c, g.linear_dim)


def crdc_from_involution(f: SmoothMap) -> SmoothMap:
    """Rebuild the reverse derivative as the dagger of the forward derivative.

    Independent of r_combinator; the two must agree (exactly on polynomials).
    """
    d = FibreLinearMap(fw.d_combinator(f), f.dom_dim, f.dom_dim)
    return dagger_unchecked(d).carrier
