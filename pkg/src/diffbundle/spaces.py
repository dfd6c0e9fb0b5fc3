"""Standard atlases and maps used by the test suites and the CLI demos.

Conventions chosen so every transition is exact:

* Circle: coordinates in *turns* (full angle = 1), two arc charts "front"
  (angles -0.45..0.45) and "back" (the same window around the opposite
  point), glued by half-turn translations.  Translations by 1/2 are exact
  rationals, so chart round trips are exact, not approximate.
* Torus: the product of two circles; four charts, translation gluing.
* Sphere: two stereographic charts.  "n" projects from the north pole (so it
  contains the south pole at its origin), "s" projects from the south pole.
  The transition is the plane inversion w -> w / |w|^2 in both directions.
* Euclidean space: one box chart, no transitions.
"""

from __future__ import annotations

from fractions import Fraction

from . import expr as ex
from . import smooth as sm
from .manifold import (
    Atlas,
    Chart,
    CovectorField,
    ManifoldMap,
    Representative,
    TransitionEntry,
)

CIRCLE_HALF_WIDTH = 0.45
CIRCLE_OVERLAP = (0.055, 0.445)


def _interval(lo, hi):
    return (float(lo), float(hi))


def euclidean_atlas(dim: int, half_width: float = 4.0, name: str | None = None) -> Atlas:
    chart = Chart("e0", tuple((-half_width, half_width) for _ in range(dim)))
    return Atlas(dim, (chart,), (), name=name or f"R^{dim}")


def circle_atlas(name: str = "circle") -> Atlas:
    h = CIRCLE_HALF_WIDTH
    lo, hi = CIRCLE_OVERLAP
    shift_down = sm.smooth_map(1, [ex.add(ex.Var(0), ex.const("-1/2"))])
    shift_up = sm.smooth_map(1, [ex.add(ex.Var(0), ex.const("1/2"))])
    charts = (Chart("front", ((-h, h),)), Chart("back", ((-h, h),)))
    transitions = (
        TransitionEntry("front", "back", ((lo, hi),), shift_down),
        TransitionEntry("front", "back", ((-hi, -lo),), shift_up),
        TransitionEntry("back", "front", ((lo, hi),), shift_down),
        TransitionEntry("back", "front", ((-hi, -lo),), shift_up),
    )
    return Atlas(1, charts, transitions, name=name)


def torus_atlas(name: str = "torus") -> Atlas:
    """Product of two turn-coordinate circles: charts ff, fb, bf, bb."""
    h = CIRCLE_HALF_WIDTH
    lo, hi = CIRCLE_OVERLAP
    full = (-h, h)
    halves = {"f": "b", "b": "f"}
    charts = tuple(Chart(a + b, (full, full)) for a in "fb" for b in "fb")

    def shift_expr(i, delta):
        return ex.add(ex.Var(i), ex.const(delta))

    transitions = []
    for a in "fb":
        for b in "fb":
            src = a + b
            # flip one or both circle factors
            for flip_first in (False, True):
                for flip_second in (False, True):
                    if not flip_first and not flip_second:
                        continue
                    dst = (halves[a] if flip_first else a) + (halves[b] if flip_second else b)
                    first_windows = [((lo, hi), "-1/2"), ((-hi, -lo), "1/2")] if flip_first else [(full, None)]
                    second_windows = [((lo, hi), "-1/2"), ((-hi, -lo), "1/2")] if flip_second else [(full, None)]
                    for w1, d1 in first_windows:
                        for w2, d2 in second_windows:
                            comps = [
                                shift_expr(0, d1) if d1 else ex.Var(0),
                                shift_expr(1, d2) if d2 else ex.Var(1),
                            ]
                            transitions.append(
                                TransitionEntry(src, dst, (w1, w2), sm.smooth_map(2, comps))
                            )
    return Atlas(2, charts, tuple(transitions), name=name)


SPHERE_CHART_HALF = 4.0
SPHERE_OVERLAP_INNER = 0.2
SPHERE_OVERLAP_OUTER = 5.5


def _inversion_map() -> sm.SmoothMap:
    r2 = ex.add(ex.mul(ex.Var(0), ex.Var(0)), ex.mul(ex.Var(1), ex.Var(1)))
    return sm.smooth_map(2, [ex.mul(ex.Var(0), ex.Recip(r2)), ex.mul(ex.Var(1), ex.Recip(r2))])


def sphere_atlas(name: str = "sphere") -> Atlas:
    """Two stereographic charts glued by plane inversion.

    The annular overlap is covered by four axis-aligned boxes that exclude a
    small square around the origin (the antipodal pole).  Overlap boxes stick
    out past the chart box so a descent step that just crossed the rim can
    still be transported.
    """
    h = SPHERE_CHART_HALF
    inner, outer = SPHERE_OVERLAP_INNER, SPHERE_OVERLAP_OUTER
    box = ((-h, h), (-h, h))
    charts = (Chart("n", box), Chart("s", box))
    inv = _inversion_map()
    windows = (
        ((inner, outer), (-outer, outer)),
        ((-outer, -inner), (-outer, outer)),
        ((-outer, outer), (inner, outer)),
        ((-outer, outer), (-outer, -inner)),
    )
    transitions = tuple(
        TransitionEntry(src, dst, w, inv)
        for src, dst in (("n", "s"), ("s", "n"))
        for w in windows
    )
    return Atlas(2, charts, transitions, name=name)


# --- standard maps ------------------------------------------------------------


def circle_double_cover(atlas: Atlas | None = None) -> ManifoldMap:
    """theta -> 2 theta in turn coordinates; etale with constant Jacobian 2."""
    circle = atlas or circle_atlas()
    double = sm.smooth_map(1, [ex.mul(ex.const(2), ex.Var(0))])
    double_down = sm.smooth_map(1, [ex.add(ex.mul(ex.const(2), ex.Var(0)), ex.const("-1/2"))])
    double_up = sm.smooth_map(1, [ex.add(ex.mul(ex.const(2), ex.Var(0)), ex.const("1/2"))])
    reps = (
        Representative("front", "front", ((-0.22, 0.22),), double),
        Representative("front", "back", ((0.03, 0.44),), double_down),
        Representative("front", "back", ((-0.44, -0.03),), double_up),
        Representative("back", "front", ((-0.22, 0.22),), double),
        Representative("back", "back", ((0.03, 0.44),), double_down),
        Representative("back", "back", ((-0.44, -0.03),), double_up),
    )
    return ManifoldMap(circle, circle, reps, name="double-cover")


def circle_rotation(amount="7/100", atlas: Atlas | None = None) -> ManifoldMap:
    """Rigid rotation by a rational number of turns (|amount| < 0.05 so each
    chart's in-chart representative, plus chart changes near the rim, covers
    the whole circle)."""
    circle = atlas or circle_atlas()
    delta = Fraction(amount)
    if abs(delta) >= Fraction(1, 10):
        raise ValueError("rotation amount must satisfy |amount| < 1/10 of a turn")
    h = CIRCLE_HALF_WIDTH
    shifted = sm.smooth_map(1, [ex.add(ex.Var(0), ex.Const(delta))])
    lo = max(-h, -h - float(delta)) + 1e-3
    hi = min(h, h - float(delta)) - 1e-3
    reps = (
        Representative("front", "front", ((lo, hi),), shifted),
        Representative("back", "back", ((lo, hi),), shifted),
    )
    return ManifoldMap(circle, circle, reps, name=f"rotate[{delta}]")


def d_theta_field(atlas: Atlas | None = None) -> CovectorField:
    """The standard 1-form on the circle (components 1 in both arc charts)."""
    circle = atlas or circle_atlas()
    unit = sm.smooth_map(1, [ex.ONE])
    return CovectorField(circle, {"front": unit, "back": unit}, name="dtheta")


def sphere_height_map(sphere: Atlas | None = None, target: Atlas | None = None) -> ManifoldMap:
    """Height z as a map to the line.

    In the from-north chart ("n", south pole at the origin):
        z = (r^2 - 1) / (r^2 + 1)
    and in the from-south chart the sign flips.  Heights lie in [-1, 1].
    """
    sphere = sphere or sphere_atlas()
    target = target or euclidean_atlas(1, half_width=2.0, name="line")
    r2 = ex.add(ex.mul(ex.Var(0), ex.Var(0)), ex.mul(ex.Var(1), ex.Var(1)))
    in_n = ex.mul(ex.add(r2, ex.const(-1)), ex.Recip(ex.add(r2, ex.ONE)))
    in_s = ex.mul(ex.add(ex.ONE, ex.neg(r2)), ex.Recip(ex.add(r2, ex.ONE)))
    box = sphere.chart("n").box
    reps = (
        Representative("n", "e0", box, sm.smooth_map(2, [in_n])),
        Representative("s", "e0", box, sm.smooth_map(2, [in_s])),
    )
    return ManifoldMap(sphere, target, reps, name="height")


def sphere_rotation(sphere: Atlas | None = None) -> ManifoldMap:
    """Rotation about the poles by the (3,4,5) angle: exactly orthogonal with
    rational entries, acting as the same planar rotation in both charts."""
    sphere = sphere or sphere_atlas()
    c, s = ex.const("3/5"), ex.const("4/5")
    rot = sm.smooth_map(
        2,
        [
            ex.add(ex.mul(c, ex.Var(0)), ex.neg(ex.mul(s, ex.Var(1)))),
            ex.add(ex.mul(s, ex.Var(0)), ex.mul(c, ex.Var(1))),
        ],
    )
    big = 20.0 / 7 - 0.01  # rotated box fits: |R w|_inf <= (7/5) |w|_inf
    box = ((-big, big), (-big, big))
    reps = (
        Representative("n", "n", box, rot),
        Representative("s", "s", box, rot),
    )
    return ManifoldMap(sphere, sphere, reps, name="rotate-z")


def north_offset_start(sphere: Atlas, polar_angle: float = 0.1):
    """Point a given polar angle off the north pole, in the from-south chart
    where the north pole is the origin: r = tan(angle / 2)."""
    import math

    r = math.tan(polar_angle / 2)
    return sphere.point("s", (r, 0.0))


def south_pole(sphere: Atlas):
    return sphere.point("n", (0.0, 0.0))
