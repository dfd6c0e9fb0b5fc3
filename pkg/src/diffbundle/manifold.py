"""Chart-presented smooth manifolds.

A manifold is a finite atlas of box-shaped charts glued by smooth transition
maps; points are (chart id, coordinates).  Tangent vectors push forward
through transition Jacobians, covectors pull back through inverse-transpose
Jacobians, and maps between manifolds are tables of local representatives
with declared validity boxes.  Everything numeric is sampled against the
declared boxes; nothing here assumes a global embedding.

Transition entries are directional and carry their own overlap box: a pair of
charts may need several entries when the geometric overlap is disconnected
(as for a circle presented by two arcs).  An overlap box states where the
transition formula is valid; it may stick out of the chart's own box, which
lets a step that just left a chart still be transported.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as ex
from . import smooth as sm
from .reporting import CheckReport
from .smooth import SmoothMap


class PointOutsideChartError(ValueError):
    pass


class NoTransitionError(ValueError):
    pass


class NoValidRepresentativeError(ValueError):
    pass


class BaseMismatchError(ValueError):
    pass


class StepUnderflowError(RuntimeError):
    pass


class PointLeavesAtlasError(RuntimeError):
    pass


# --- boxes ------------------------------------------------------------------


def box_contains(box, coords, margin: float = 1e-9) -> bool:
    return all(lo - margin <= x <= hi + margin for x, (lo, hi) in zip(coords, box))


def box_sample(box, rng) -> tuple:
    return tuple(rng.uniform(lo, hi) for lo, hi in box)


def box_center(box) -> tuple:
    return tuple((lo + hi) / 2 for lo, hi in box)


def box_intersect(b1, b2):
    out = []
    for (lo1, hi1), (lo2, hi2) in zip(b1, b2):
        lo, hi = max(lo1, lo2), min(hi1, hi2)
        if lo > hi:
            return None
        out.append((lo, hi))
    return tuple(out)


def box_corners(box):
    pts = [()]
    for lo, hi in box:
        pts = [p + (v,) for p in pts for v in (lo, hi)]
    return pts


# --- atlases ----------------------------------------------------------------


@dataclass(frozen=True)
class Chart:
    id: str
    box: tuple  # ((lo, hi), ...) of length dim


@dataclass(frozen=True)
class TransitionEntry:
    from_chart: str
    to_chart: str
    overlap_box: tuple
    map: SmoothMap


@dataclass(frozen=True)
class Atlas:
    dim: int
    charts: tuple
    transitions: tuple
    name: str = ""

    def __post_init__(self):
        ids = [c.id for c in self.charts]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate chart ids in atlas {self.name!r}")
        for c in self.charts:
            if len(c.box) != self.dim:
                raise ValueError(f"chart {c.id!r} box has arity {len(c.box)}, dim is {self.dim}")
        for t in self.transitions:
            if t.map.dom_dim != self.dim or t.map.cod_dim != self.dim:
                raise ValueError(
                    f"transition {t.from_chart}->{t.to_chart} is "
                    f"{t.map.dom_dim}->{t.map.cod_dim}, expected {self.dim}->{self.dim}"
                )
            self.chart(t.from_chart)
            self.chart(t.to_chart)

    def chart(self, chart_id: str) -> Chart:
        for c in self.charts:
            if c.id == chart_id:
                return c
        raise KeyError(f"no chart {chart_id!r} in atlas {self.name!r}")

    def transitions_from(self, chart_id: str):
        return [t for t in self.transitions if t.from_chart == chart_id]

    def transitions_between(self, from_chart: str, to_chart: str):
        return [t for t in self.transitions if t.from_chart == from_chart and t.to_chart == to_chart]

    def point(self, chart_id: str, coords, margin: float = 1e-9) -> "ManifoldPoint":
        chart = self.chart(chart_id)
        coords = tuple(float(x) for x in coords)
        if len(coords) != self.dim:
            raise ex.DimensionMismatchError(f"point has {len(coords)} coordinates, dim is {self.dim}")
        if not box_contains(chart.box, coords, margin):
            raise PointOutsideChartError(f"{coords} outside chart {chart_id!r} box {chart.box}")
        return ManifoldPoint(chart_id, coords)


@dataclass(frozen=True)
class ManifoldPoint:
    chart: str
    coords: tuple


@dataclass(frozen=True)
class TangentVector:
    point: ManifoldPoint
    components: tuple


@dataclass(frozen=True)
class Covector:
    point: ManifoldPoint
    components: tuple


def _entry_applicable(entry: TransitionEntry, coords, margin=1e-9) -> bool:
    return box_contains(entry.overlap_box, coords, margin)


def change_chart(atlas: Atlas, value, target_chart: str):
    """Transport a point / tangent vector / covector to another chart.

    Identity when the value already lives in the target chart.  Components
    transform by the transition Jacobian J (tangent vectors) or by the
    inverse transpose of J (covectors).
    """
    if isinstance(value, ManifoldPoint):
        point, kind, comps = value, "point", None
    elif isinstance(value, (TangentVector, Covector)):
        point, kind, comps = value.point, value, np.array(value.components, dtype=float)
    else:
        raise TypeError(f"cannot change chart of {type(value).__name__}")
    if point.chart == target_chart:
        return value
    for entry in atlas.transitions_between(point.chart, target_chart):
        if _entry_applicable(entry, point.coords):
            new_coords = sm.eval_map(entry.map, point.coords)
            new_point = atlas.point(target_chart, new_coords, margin=1e-7)
            if kind == "point":
                return new_point
            jac = sm.jacobian_at(entry.map, point.coords)
            if isinstance(value, TangentVector):
                return TangentVector(new_point, tuple(jac @ comps))
            return Covector(new_point, tuple(np.linalg.solve(jac.T, comps)))
    raise NoTransitionError(
        f"no transition {point.chart!r} -> {target_chart!r} contains {point.coords}"
    )


def charts_of_point(atlas: Atlas, point: ManifoldPoint):
    """All chart ids the point can be presented in (via one transition)."""
    out = [point.chart]
    for entry in atlas.transitions_from(point.chart):
        if _entry_applicable(entry, point.coords) and entry.to_chart not in out:
            out.append(entry.to_chart)
    return out


def points_close(atlas: Atlas, p: ManifoldPoint, q: ManifoldPoint, tol: float = 1e-9) -> bool:
    if p.chart != q.chart:
        try:
            p = change_chart(atlas, p, q.chart)
        except NoTransitionError:
            try:
                q = change_chart(atlas, q, p.chart)
            except NoTransitionError:
                return False
    return max(abs(a - b) for a, b in zip(p.coords, q.coords)) <= tol


def verify_atlas(
    atlas: Atlas,
    rng=None,
    samples: int = 20,
    tol: float = 1e-9,
    det_floor: float = 1e-8,
    seed: int | None = None,
) -> CheckReport:
    """Sampled invariants: transition Jacobians are invertible, round trips
    return the start point, and transition composites satisfy the cocycle
    identity wherever a third chart is reachable."""
    if rng is None:
        rng = np.random.default_rng(0 if seed is None else seed)
    report = CheckReport(f"atlas:{atlas.name or 'anonymous'}")
    for t_index, entry in enumerate(atlas.transitions):
        label = f"{entry.from_chart}->{entry.to_chart}#{t_index}"
        domain = box_intersect(entry.overlap_box, atlas.chart(entry.from_chart).box)
        if domain is None:
            report.add(f"atlas.domain.{label}", "overlap box meets its chart box", False, seed=seed)
            continue
        min_det = float("inf")
        worst = None
        round_trip_err = 0.0
        cocycle_err = 0.0
        for _ in range(samples):
            p = box_sample(domain, rng)
            jac = sm.jacobian_at(entry.map, p)
            det = abs(float(np.linalg.det(jac)))
            if det < min_det:
                min_det, worst = det, p
            q = sm.eval_map(entry.map, p)
            # round trip through any applicable reverse entry
            for back in atlas.transitions_between(entry.to_chart, entry.from_chart):
                if _entry_applicable(back, q):
                    p2 = sm.eval_map(back.map, q)
                    round_trip_err = max(round_trip_err, max(abs(a - b) for a, b in zip(p, p2)))
                    break
            # cocycle: from -> to -> third vs from -> third
            for onward in atlas.transitions_from(entry.to_chart):
                if onward.to_chart in (entry.from_chart,) or not _entry_applicable(onward, q):
                    continue
                r = sm.eval_map(onward.map, q)
                for direct in atlas.transitions_between(entry.from_chart, onward.to_chart):
                    if _entry_applicable(direct, p):
                        r2 = sm.eval_map(direct.map, p)
                        cocycle_err = max(
                            cocycle_err, max(abs(a - b) for a, b in zip(r, r2))
                        )
                        break
        report.add(
            f"atlas.jacobian.{label}",
            f"|det J| > {det_floor:g} on the overlap",
            min_det > det_floor,
            tolerance=det_floor,
            seed=seed,
            witness=f"min |det| = {min_det:.3e} at {worst}",
        )
        report.add(
            f"atlas.roundtrip.{label}",
            "transition followed by its reverse returns the point",
            round_trip_err <= tol,
            tolerance=tol,
            seed=seed,
            witness=f"max error {round_trip_err:.3e}",
        )
        report.add(
            f"atlas.cocycle.{label}",
            "composites of transitions agree with direct transitions",
            cocycle_err <= tol,
            tolerance=tol,
            seed=seed,
            witness=f"max error {cocycle_err:.3e}",
        )
    return report


# --- maps between manifolds --------------------------------------------------


@dataclass(frozen=True)
class Representative:
    from_chart: str
    to_chart: str
    validity_box: tuple
    map: SmoothMap


@dataclass(frozen=True)
class ManifoldMap:
    source: Atlas
    target: Atlas
    representatives: tuple
    name: str = ""

    def __post_init__(self):
        for r in self.representatives:
            self.source.chart(r.from_chart)
            self.target.chart(r.to_chart)
            if r.map.dom_dim != self.source.dim or r.map.cod_dim != self.target.dim:
                raise ValueError(
                    f"representative {r.from_chart}->{r.to_chart} has shape "
                    f"{r.map.dom_dim}->{r.map.cod_dim}, expected "
                    f"{self.source.dim}->{self.target.dim}"
                )

    def representatives_at(self, point: ManifoldPoint, to_chart: str | None = None):
        out = [
            r
            for r in self.representatives
            if r.from_chart == point.chart
            and box_contains(r.validity_box, point.coords)
            and (to_chart is None or r.to_chart == to_chart)
        ]
        return out

    def representative_at(self, point: ManifoldPoint, to_chart: str | None = None) -> Representative:
        """First representative valid at the point, looking through other
        presentations of the point if its own chart has none."""
        direct = self.representatives_at(point, to_chart)
        if direct:
            return direct[0]
        for chart_id in charts_of_point(self.source, point):
            if chart_id == point.chart:
                continue
            moved = change_chart(self.source, point, chart_id)
            alt = self.representatives_at(moved, to_chart)
            if alt:
                return alt[0]
        raise NoValidRepresentativeError(
            f"{self.name or 'map'} has no representative at {point}"
            + (f" into chart {to_chart!r}" if to_chart else "")
        )

    def apply(self, point: ManifoldPoint) -> ManifoldPoint:
        rep = self.representative_at(point)
        if rep.from_chart != point.chart:
            point = change_chart(self.source, point, rep.from_chart)
        return self.target.point(rep.to_chart, sm.eval_map(rep.map, point.coords), margin=1e-7)

    def __call__(self, point: ManifoldPoint) -> ManifoldPoint:
        return self.apply(point)


def identity_manifold_map(atlas: Atlas) -> ManifoldMap:
    reps = tuple(
        Representative(c.id, c.id, c.box, sm.identity_map(atlas.dim)) for c in atlas.charts
    )
    return ManifoldMap(atlas, atlas, reps, name=f"id_{atlas.name}")


def verify_manifold_map(
    f: ManifoldMap, rng=None, samples: int = 20, tol: float = 1e-9, seed: int | None = None
) -> CheckReport:
    """Representatives must agree wherever two of them see the same point."""
    if rng is None:
        rng = np.random.default_rng(0 if seed is None else seed)
    report = CheckReport(f"map:{f.name or 'anonymous'}")
    reps = f.representatives
    for i, r1 in enumerate(reps):
        for r2 in reps[i + 1 :]:
            if r1.from_chart != r2.from_chart:
                continue
            shared = box_intersect(r1.validity_box, r2.validity_box)
            shared = shared and box_intersect(shared, f.source.chart(r1.from_chart).box)
            if shared is None:
                continue
            worst = 0.0
            ok = True
            for _ in range(samples):
                p = box_sample(shared, rng)
                q1 = f.target.point(r1.to_chart, sm.eval_map(r1.map, p), margin=1e-6)
                q2 = f.target.point(r2.to_chart, sm.eval_map(r2.map, p), margin=1e-6)
                if not points_close(f.target, q1, q2, tol):
                    ok = False
                    worst = p
                    break
            report.add(
                f"map.overlap.{r1.from_chart}:{r1.to_chart}~{r2.to_chart}",
                "representatives agree on shared validity",
                ok,
                tolerance=tol,
                seed=seed,
                witness=None if ok else f"disagree at {worst}",
            )
    return report


def manifold_tangent_map(f: ManifoldMap, v: TangentVector) -> TangentVector:
    """Push a tangent vector forward through a local representative."""
    rep = f.representative_at(v.point)
    point = v.point
    if rep.from_chart != point.chart:
        v = change_chart(f.source, v, rep.from_chart)
        point = v.point
    jac = sm.jacobian_at(rep.map, point.coords)
    image = f.target.point(rep.to_chart, sm.eval_map(rep.map, point.coords), margin=1e-7)
    return TangentVector(image, tuple(jac @ np.array(v.components)))


def cotangent_map(f: ManifoldMap, x: ManifoldPoint, phi: Covector, tol: float = 1e-9) -> Covector:
    """Pull a covector at f(x) back to x: components transform by J^T.

    The duality pairing is preserved: <phi, T(f) v> = <pullback, v>.
    """
    image = f.apply(x)
    if not points_close(f.target, phi.point, image, max(tol, 1e-7)):
        raise BaseMismatchError(f"covector is based at {phi.point}, but f(x) = {image}")
    rep = f.representative_at(x)
    if rep.from_chart != x.chart:
        x = change_chart(f.source, x, rep.from_chart)
    phi_local = change_chart(f.target, phi, rep.to_chart)
    jac = sm.jacobian_at(rep.map, x.coords)
    return Covector(x, tuple(jac.T @ np.array(phi_local.components)))


# --- covector fields ----------------------------------------------------------


@dataclass(frozen=True)
class CovectorField:
    atlas: Atlas
    components: dict  # chart id -> SmoothMap dim->dim
    name: str = ""

    def __post_init__(self):
        for c in self.atlas.charts:
            if c.id not in self.components:
                raise ValueError(f"covector field lacks components on chart {c.id!r}")
        for chart_id, m in self.components.items():
            if m.dom_dim != self.atlas.dim or m.cod_dim != self.atlas.dim:
                raise ValueError(
                    f"field on chart {chart_id!r} is {m.dom_dim}->{m.cod_dim},"
                    f" expected {self.atlas.dim}->{self.atlas.dim}"
                )

    def __hash__(self):
        return hash((self.atlas, tuple(sorted(self.components.items())), self.name))

    def value_at(self, point: ManifoldPoint) -> Covector:
        return Covector(point, sm.eval_map(self.components[point.chart], point.coords))

    def section_map(self, chart_id: str) -> SmoothMap:
        """x -> (x, omega(x)) in chart coordinates."""
        n = self.atlas.dim
        return sm.pair_map(sm.identity_map(n), self.components[chart_id])


def verify_covector_field(
    field: CovectorField, rng=None, samples: int = 20, tol: float = 1e-9, seed: int | None = None
) -> CheckReport:
    """Section law (exact, structural) and overlap compatibility (sampled)."""
    if rng is None:
        rng = np.random.default_rng(0 if seed is None else seed)
    atlas = field.atlas
    report = CheckReport(f"covector-field:{field.name or 'anonymous'}")
    n = atlas.dim
    for chart in atlas.charts:
        section = field.section_map(chart.id)
        projected = sm.compose(section, sm.projection_map(2 * n, range(n)))
        report.add(
            f"field.section.{chart.id}",
            "projection of the section returns the point",
            sm.maps_structurally_equal(projected, sm.identity_map(n)),
            seed=seed,
        )
    for t_index, entry in enumerate(atlas.transitions):
        domain = box_intersect(entry.overlap_box, atlas.chart(entry.from_chart).box)
        if domain is None:
            continue
        worst = 0.0
        for _ in range(samples):
            p = box_sample(domain, rng)
            jac = sm.jacobian_at(entry.map, p)
            here = np.array(sm.eval_map(field.components[entry.from_chart], p))
            there = np.array(
                sm.eval_map(field.components[entry.to_chart], sm.eval_map(entry.map, p))
            )
            worst = max(worst, float(np.max(np.abs(here - jac.T @ there), initial=0.0)))
        report.add(
            f"field.overlap.{entry.from_chart}->{entry.to_chart}#{t_index}",
            "components transform by the transpose Jacobian across charts",
            worst <= tol,
            tolerance=tol,
            seed=seed,
            witness=f"max error {worst:.3e}",
        )
    return report


def covector_pullback(field: CovectorField, f: ManifoldMap) -> CovectorField:
    """Pull a covector field on the target back along f, chart by chart.

    Symbolic: the new components on a source chart are J_rep(x)^T applied to
    the target components evaluated at the representative's image.
    """
    atlas = f.source
    n, m = f.source.dim, f.target.dim
    if m != field.atlas.dim:
        raise ex.DimensionMismatchError("field lives on a different-dimensional atlas")
    out: dict[str, SmoothMap] = {}
    for chart in atlas.charts:
        candidates = [r for r in f.representatives if r.from_chart == chart.id]
        if not candidates:
            raise NoValidRepresentativeError(f"no representative on chart {chart.id!r}")
        center = box_center(chart.box)
        rep = next(
            (r for r in candidates if box_contains(r.validity_box, center)), candidates[0]
        )
        outer = field.components[rep.to_chart]
        pulled_outer = [ex.substitute(c, rep.map.components) for c in outer.components]
        jac = sm.jacobian_exprs(rep.map)  # m rows, n cols
        comps = [
            ex.add(*(ex.mul(jac[k][i], pulled_outer[k]) for k in range(m)))
            for i in range(n)
        ]
        out[chart.id] = sm.smooth_map(n, [ex.normalize(c) for c in comps])
    return CovectorField(atlas, out, name=f"{f.name}*{field.name}")


# --- etale maps ----------------------------------------------------------------


@dataclass(frozen=True)
class EtaleReport:
    etale: bool
    min_abs_det: float
    worst_point: tuple | None
    reason: str = ""


def is_etale(f: ManifoldMap, rng=None, samples: int = 50, det_floor: float = 1e-8) -> EtaleReport:
    """Sampled criterion: every local Jacobian is invertible (|det| above the
    floor).  A semi-decision: sampling cannot certify the gaps between
    samples."""
    if rng is None:
        rng = np.random.default_rng(0)
    if f.source.dim != f.target.dim:
        return EtaleReport(False, 0.0, None, "dimensions differ")
    min_det = float("inf")
    worst = None
    for rep in f.representatives:
        domain = box_intersect(rep.validity_box, f.source.chart(rep.from_chart).box)
        if domain is None:
            continue
        for _ in range(samples):
            p = box_sample(domain, rng)
            det = abs(float(np.linalg.det(sm.jacobian_at(rep.map, p))))
            if det < min_det:
                min_det, worst = det, p
    if min_det == float("inf"):
        return EtaleReport(False, 0.0, None, "no sampled representative domain")
    return EtaleReport(min_det > det_floor, min_det, worst)


def etale_cotangent_map(f: ManifoldMap, x: ManifoldPoint, phi: Covector, det_floor: float = 1e-8) -> Covector:
    """Forward action on covectors available on etale maps only:
    phi at x maps to (J^{-1})^T phi at f(x)."""
    if not points_close(f.source, phi.point, x, 1e-7):
        raise BaseMismatchError(f"covector is based at {phi.point}, expected {x}")
    rep = f.representative_at(x)
    if rep.from_chart != x.chart:
        phi = change_chart(f.source, phi, rep.from_chart)
        x = change_chart(f.source, x, rep.from_chart)
    jac = sm.jacobian_at(rep.map, x.coords)
    if abs(float(np.linalg.det(jac))) <= det_floor:
        raise ValueError(f"map is not etale at {x}: |det J| <= {det_floor:g}")
    image = f.target.point(rep.to_chart, sm.eval_map(rep.map, x.coords), margin=1e-7)
    return Covector(image, tuple(np.linalg.solve(jac.T, np.array(phi.components))))


# --- composition ----------------------------------------------------------------


def _is_affine(m: SmoothMap) -> bool:
    return all(
        isinstance(ex.normalize(ex.derivative(comp, i)), ex.Const)
        for comp in m.components
        for i in range(m.dom_dim)
    )


def _subdivide(box, cells_per_axis: int):
    axes = []
    for lo, hi in box:
        step = (hi - lo) / cells_per_axis
        axes.append([(lo + i * step, lo + (i + 1) * step) for i in range(cells_per_axis)])
    cells = [()]
    for axis in axes:
        cells = [c + (seg,) for c in cells for seg in axis]
    return cells


def compose_manifold_maps(
    f: ManifoldMap, g: ManifoldMap, cells_per_axis: int = 8, name: str = ""
) -> ManifoldMap:
    """Diagrammatic composite "f then g".

    Validity of a composite representative is a sub-box of f's validity whose
    image stays inside g's validity: for affine representatives cells are
    kept by checking their corners (exact); otherwise a sampled grid decides,
    which refines but cannot enlarge validity.
    """
    if f.target is not g.source and f.target != g.source:
        raise ValueError("maps do not compose: atlas mismatch")
    reps = []
    for rf in f.representatives:
        domain = box_intersect(rf.validity_box, f.source.chart(rf.from_chart).box)
        if domain is None:
            continue
        affine = _is_affine(rf.map)
        for rg in g.representatives:
            if rg.from_chart != rf.to_chart:
                continue
            composed = sm.compose(rf.map, rg.map)
            for cell in _subdivide(domain, cells_per_axis):
                probes = box_corners(cell) if affine else box_corners(cell) + (box_center(cell),)
                images = [sm.eval_map(rf.map, p) for p in probes]
                if all(box_contains(rg.validity_box, q, margin=0.0) for q in images):
                    reps.append(Representative(rf.from_chart, rg.to_chart, cell, composed))
    merged = _merge_adjacent(reps)
    return ManifoldMap(f.source, g.target, tuple(merged), name=name or f"{f.name};{g.name}")


def _merge_adjacent(reps):
    """Greedy merge of representative cells that share everything but one axis."""
    pool = list(reps)
    changed = True
    while changed:
        changed = False
        out = []
        used = [False] * len(pool)
        for i, r1 in enumerate(pool):
            if used[i]:
                continue
            merged = r1
            for j in range(i + 1, len(pool)):
                if used[j]:
                    continue
                r2 = pool[j]
                if (
                    r2.from_chart != merged.from_chart
                    or r2.to_chart != merged.to_chart
                    or r2.map != merged.map
                ):
                    continue
                combo = _try_merge_boxes(merged.validity_box, r2.validity_box)
                if combo is not None:
                    merged = Representative(merged.from_chart, merged.to_chart, combo, merged.map)
                    used[j] = True
                    changed = True
            out.append(merged)
        pool = out
    return pool


def _try_merge_boxes(b1, b2):
    diff_axis = None
    for k, (s1, s2) in enumerate(zip(b1, b2)):
        if s1 != s2:
            if diff_axis is not None:
                return None
            diff_axis = k
    if diff_axis is None:
        return b1
    (lo1, hi1), (lo2, hi2) = b1[diff_axis], b2[diff_axis]
    if abs(hi1 - lo2) < 1e-12 or abs(hi2 - lo1) < 1e-12:
        lo, hi = min(lo1, lo2), max(hi1, hi2)
        return b1[:diff_axis] + ((lo, hi),) + b1[diff_axis + 1 :]
    return None


# --- metric duality and gradient descent -----------------------------------------


@dataclass(frozen=True)
class MetricField:
    """Per-chart SPD matrix field, stored as a flattened row-major map."""

    atlas: Atlas
    fields: dict  # chart id -> SmoothMap dim -> dim*dim

    def __post_init__(self):
        n = self.atlas.dim
        for c in self.atlas.charts:
            if c.id not in self.fields:
                raise ValueError(f"metric lacks a field on chart {c.id!r}")
            m = self.fields[c.id]
            if m.dom_dim != n or m.cod_dim != n * n:
                raise ValueError(f"metric field on {c.id!r} must be {n}->{n * n}")

    def __hash__(self):
        return hash((self.atlas, tuple(sorted(self.fields.items()))))

    def matrix_at(self, point: ManifoldPoint) -> np.ndarray:
        n = self.atlas.dim
        flat = sm.eval_map(self.fields[point.chart], point.coords)
        return np.array(flat, dtype=float).reshape(n, n)


def identity_metric(atlas: Atlas) -> MetricField:
    n = atlas.dim
    flat = []
    for i in range(n):
        for j in range(n):
            flat.append(ex.ONE if i == j else ex.ZERO)
    field = sm.smooth_map(n, flat)
    return MetricField(atlas, {c.id: field for c in atlas.charts})


def verify_metric_spd(metric: MetricField, rng=None, samples: int = 20) -> bool:
    if rng is None:
        rng = np.random.default_rng(0)
    for chart in metric.atlas.charts:
        for _ in range(samples):
            p = metric.atlas.point(chart.id, box_sample(chart.box, rng))
            mat = metric.matrix_at(p)
            if not np.allclose(mat, mat.T, atol=1e-9):
                return False
            try:
                np.linalg.cholesky(mat)
            except np.linalg.LinAlgError:
                return False
    return True


def objective_gradient(objective: ManifoldMap, metric: MetricField, x: ManifoldPoint):
    """Differential of a scalar objective as a covector, then raised to a
    tangent vector through the inverse metric."""
    if objective.target.dim != 1:
        raise ValueError("objective must land in a 1-dimensional atlas")
    image = objective.apply(x)
    unit = Covector(image, (1.0,))
    dh = cotangent_map(objective, x, unit)
    gmat = metric.matrix_at(dh.point)
    v = np.linalg.solve(gmat, np.array(dh.components))
    return dh, TangentVector(dh.point, tuple(v))


def _relocate(atlas: Atlas, chart_id: str, coords) -> ManifoldPoint:
    """Wrap raw coordinates, re-charting if they left the chart box."""
    chart = atlas.chart(chart_id)
    if box_contains(chart.box, coords):
        return ManifoldPoint(chart_id, tuple(coords))
    for entry in atlas.transitions_from(chart_id):
        if _entry_applicable(entry, coords):
            moved = sm.eval_map(entry.map, coords)
            if box_contains(atlas.chart(entry.to_chart).box, moved):
                return ManifoldPoint(entry.to_chart, tuple(moved))
    raise PointLeavesAtlasError(f"{coords} in chart {chart_id!r} left every chart box")


def riemannian_gradient_step(
    objective: ManifoldMap,
    metric: MetricField,
    x: ManifoldPoint,
    step: float,
    max_halvings: int = 30,
):
    """One backtracking descent step; accepted steps never increase the
    objective.  The candidate walks in-chart and is re-charted when it
    leaves the box."""
    if step <= 0:
        raise ValueError("step must be positive")
    dh, v = objective_gradient(objective, metric, x)
    base = dh.point  # x, possibly re-charted to where the representative lives
    h0 = objective.apply(base).coords[0]
    vec = np.array(v.components)
    if not np.any(vec):
        return base, h0
    s = step
    for _ in range(max_halvings + 1):
        candidate_coords = tuple(np.array(base.coords) - s * vec)
        try:
            candidate = _relocate(objective.source, base.chart, candidate_coords)
            h1 = objective.apply(candidate).coords[0]
        except (PointLeavesAtlasError, NoValidRepresentativeError, PointOutsideChartError):
            s /= 2
            continue
        if h1 <= h0:
            return candidate, h1
        s /= 2
    raise StepUnderflowError(
        f"no decrease after {max_halvings} halvings at {base} (objective {h0})"
    )


def gradient_descent(
    objective: ManifoldMap,
    metric: MetricField,
    start: ManifoldPoint,
    step: float,
    iters: int,
):
    """Iterate riemannian_gradient_step; returns the trajectory and values."""
    points = [start]
    values = [objective.apply(start).coords[0]]
    x = start
    for _ in range(iters):
        x, h = riemannian_gradient_step(objective, metric, x, step)
        points.append(x)
        values.append(h)
    return points, values
