"""Polygonal mission-space geometry: feasibility, line of sight, visibility regions.

The mission space is a simple polygon (the outer boundary) minus the open
interiors of simple polygonal obstacles.  Obstacle boundary points count as
feasible, so a grazing sight line is never blocked.  All predicates here are
pure functions of immutable value objects and are safe to share across
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

# Relative geometric slack: scaled by the outer polygon's diameter to get the
# absolute back-off used for boundary classification, clip back-offs and
# degeneracy detection.
EPS_REL = 1e-9
# Angular offset for the vertex-event rays of the visibility sweep.
EPS_ANG = 1e-9


class GeometryError(ValueError):
    """Invalid polygon or mission-space construction."""


class SelfIntersectionError(GeometryError):
    """Polygon has two non-consecutive edges that intersect."""

    def __init__(self, edge_a: int, edge_b: int):
        self.edge_a = edge_a
        self.edge_b = edge_b
        super().__init__(f"polygon edges {edge_a} and {edge_b} intersect")


class PathologicalPosition(GeometryError):
    """Query point coincides with a reflex vertex (derivative undefined there)."""


class Point2(NamedTuple):
    x: float
    y: float


def _orient(ax, ay, bx, by, cx, cy) -> float:
    """Twice the signed area of triangle abc (>0 when c is left of a->b)."""
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _on_segment_collinear(px, py, ax, ay, bx, by) -> bool:
    return (min(ax, bx) <= px <= max(ax, bx)) and (min(ay, by) <= py <= max(ay, by))


def segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool:
    """True if closed segments ab and cd share at least one point."""
    o1 = _orient(a.x, a.y, b.x, b.y, c.x, c.y)
    o2 = _orient(a.x, a.y, b.x, b.y, d.x, d.y)
    o3 = _orient(c.x, c.y, d.x, d.y, a.x, a.y)
    o4 = _orient(c.x, c.y, d.x, d.y, b.x, b.y)
    if ((o1 > 0) != (o2 > 0)) and ((o3 > 0) != (o4 > 0)) and o1 != 0 and o2 != 0 and o3 != 0 and o4 != 0:
        return True
    if o1 == 0 and _on_segment_collinear(c.x, c.y, a.x, a.y, b.x, b.y):
        return True
    if o2 == 0 and _on_segment_collinear(d.x, d.y, a.x, a.y, b.x, b.y):
        return True
    if o3 == 0 and _on_segment_collinear(a.x, a.y, c.x, c.y, d.x, d.y):
        return True
    if o4 == 0 and _on_segment_collinear(b.x, b.y, c.x, c.y, d.x, d.y):
        return True
    return False


@dataclass(frozen=True)
class Polygon:
    """Simple polygon stored counter-clockwise.

    Vertices are normalized to CCW order at construction; input orientation
    does not matter.  Construction rejects degenerate (< 3 vertices, zero
    area) and self-intersecting rings.
    """

    vertices: tuple[Point2, ...]

    def __init__(self, vertices: Sequence[Sequence[float]]):
        pts = tuple(Point2(float(p[0]), float(p[1])) for p in vertices)
        if len(pts) < 3:
            raise GeometryError("polygon needs at least 3 vertices")
        for p in pts:
            if not (math.isfinite(p.x) and math.isfinite(p.y)):
                raise GeometryError("polygon vertex is not finite")
        area2 = _signed_area2(pts)
        if area2 == 0.0:
            raise GeometryError("polygon has zero signed area")
        if area2 < 0.0:
            pts = tuple(reversed(pts))
        _check_simple(pts)
        object.__setattr__(self, "vertices", pts)

    @property
    def area(self) -> float:
        return 0.5 * _signed_area2(self.vertices)

    def edges(self):
        v = self.vertices
        for i in range(len(v)):
            yield v[i], v[(i + 1) % len(v)]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    def bounding_box(self) -> tuple[float, float, float, float]:
        a = self.as_array()
        return a[:, 0].min(), a[:, 1].min(), a[:, 0].max(), a[:, 1].max()


def _signed_area2(pts: Sequence[Point2]) -> float:
    s = 0.0
    n = len(pts)
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        s += a.x * b.y - b.x * a.y
    return s


def _check_simple(pts: Sequence[Point2]) -> None:
    n = len(pts)
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        if a.x == b.x and a.y == b.y:
            raise GeometryError(f"polygon edge {i} is degenerate (repeated vertex)")
        for j in range(i + 1, n):
            # Consecutive edges share a vertex by construction; skip them.
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            c, d = pts[j], pts[(j + 1) % n]
            if segments_intersect(a, b, c, d):
                raise SelfIntersectionError(i, j)


def point_in_polygon(poly: Polygon, p: Point2, eps: float) -> int:
    """Classify p against poly: +1 strictly inside, 0 within eps of the boundary, -1 outside."""
    px, py = p
    for a, b in poly.edges():
        if _point_segment_dist2(px, py, a.x, a.y, b.x, b.y) <= eps * eps:
            return 0
    inside = False
    v = poly.vertices
    j = len(v) - 1
    for i in range(len(v)):
        xi, yi = v[i]
        xj, yj = v[j]
        if (yi > py) != (yj > py):
            x_cross = xi + (py - yi) * (xj - xi) / (yj - yi)
            if px < x_cross:
                inside = not inside
        j = i
    return 1 if inside else -1


def _point_segment_dist2(px, py, ax, ay, bx, by) -> float:
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    if L2 == 0.0:
        ex, ey = px - ax, py - ay
        return ex * ex + ey * ey
    t = ((px - ax) * dx + (py - ay) * dy) / L2
    t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    ex, ey = px - (ax + t * dx), py - (ay + t * dy)
    return ex * ex + ey * ey


@dataclass(frozen=True)
class ReflexVertex:
    point: Point2
    boundary: int  # -1 for the outer boundary, else obstacle index
    vertex: int    # vertex index within that boundary


class MissionSpace:
    """Outer polygon minus open obstacle interiors.

    Derived data (reflex vertices, edge arrays, slack eps) is computed once
    at construction; instances are immutable in use.
    """

    def __init__(self, outer: Polygon, obstacles: Sequence[Polygon] = ()):
        self.outer = outer
        self.obstacles = tuple(obstacles)
        xmin, ymin, xmax, ymax = outer.bounding_box()
        self.diameter = math.hypot(xmax - xmin, ymax - ymin)
        self.eps = EPS_REL * self.diameter
        self._validate()
        self.reflex_vertices = self._find_reflex_vertices()
        self._edges = self._collect_edges()

    def _validate(self) -> None:
        for k, obs in enumerate(self.obstacles):
            for v in obs.vertices:
                if point_in_polygon(self.outer, v, self.eps) < 0:
                    raise GeometryError(f"obstacle {k} extends outside the outer boundary")
            for m in range(k + 1, len(self.obstacles)):
                other = self.obstacles[m]
                for (a, b) in obs.edges():
                    for (c, d) in other.edges():
                        if segments_intersect(a, b, c, d):
                            raise GeometryError(f"obstacles {k} and {m} overlap")
                if point_in_polygon(other, obs.vertices[0], self.eps) > 0 or \
                   point_in_polygon(obs, other.vertices[0], self.eps) > 0:
                    raise GeometryError(f"obstacles {k} and {m} are nested")

    def _find_reflex_vertices(self) -> tuple[ReflexVertex, ...]:
        # An obstacle vertex blocks visibility in the free space when the
        # obstacle's own interior angle there is convex (< pi); an outer
        # vertex blocks when the outer interior angle is reflex (> pi).
        out = []
        for k, poly in enumerate([self.outer, *self.obstacles]):
            v = poly.vertices
            n = len(v)
            for i in range(n):
                a, b, c = v[i - 1], v[i], v[(i + 1) % n]
                cross = _orient(a.x, a.y, b.x, b.y, c.x, c.y)
                if k == 0:
                    if cross < 0.0:
                        out.append(ReflexVertex(b, -1, i))
                else:
                    if cross > 0.0:
                        out.append(ReflexVertex(b, k - 1, i))
        return tuple(out)

    def _collect_edges(self) -> np.ndarray:
        segs = []
        for poly in [self.outer, *self.obstacles]:
            for a, b in poly.edges():
                segs.append((a.x, a.y, b.x, b.y))
        return np.asarray(segs, dtype=float)

    @property
    def edge_array(self) -> np.ndarray:
        """All boundary edges as an (E, 4) array of (ax, ay, bx, by)."""
        return self._edges

    def bounding_box(self) -> tuple[float, float, float, float]:
        return self.outer.bounding_box()

    def free_area(self) -> float:
        return self.outer.area - sum(o.area for o in self.obstacles)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MissionSpace):
            return NotImplemented
        return self.outer == other.outer and self.obstacles == other.obstacles

    def __repr__(self) -> str:
        return f"MissionSpace(outer={len(self.outer.vertices)} vertices, obstacles={len(self.obstacles)})"


def contains(space: MissionSpace, p: Point2) -> bool:
    """Feasibility test: inside the outer polygon and not strictly inside any obstacle.

    Boundary points (within the space's slack of any edge) are feasible.
    """
    p = Point2(float(p[0]), float(p[1]))
    if point_in_polygon(space.outer, p, space.eps) < 0:
        return False
    for obs in space.obstacles:
        if point_in_polygon(obs, p, space.eps) > 0:
            return False
    return True


def _segment_edge_params(space: MissionSpace, a: Point2, b: Point2) -> list[float]:
    """Parameters t in [0,1] where segment a+t*(b-a) meets any boundary edge."""
    ts = [0.0, 1.0]
    rx, ry = b.x - a.x, b.y - a.y
    for ex1, ey1, ex2, ey2 in space.edge_array:
        sx, sy = ex2 - ex1, ey2 - ey1
        denom = rx * sy - ry * sx
        qpx, qpy = ex1 - a.x, ey1 - a.y
        if denom != 0.0:
            t = (qpx * sy - qpy * sx) / denom
            u = (qpx * ry - qpy * rx) / denom
            if -1e-12 <= t <= 1.0 + 1e-12 and -1e-12 <= u <= 1.0 + 1e-12:
                ts.append(min(max(t, 0.0), 1.0))
        else:
            # Parallel: if collinear, the overlap endpoints partition the walk.
            if qpx * ry - qpy * rx == 0.0:
                L2 = rx * rx + ry * ry
                if L2 > 0.0:
                    for px, py in ((ex1, ey1), (ex2, ey2)):
                        t = ((px - a.x) * rx + (py - a.y) * ry) / L2
                        if 0.0 <= t <= 1.0:
                            ts.append(t)
    ts.sort()
    return ts


def line_of_sight(space: MissionSpace, a: Point2, b: Point2) -> bool:
    """True when the whole closed segment ab stays in the feasible space.

    Grazing contact with a boundary (running along an edge or touching a
    vertex) counts as visible.  Raises GeometryError if an endpoint is
    infeasible.
    """
    a = Point2(float(a[0]), float(a[1]))
    b = Point2(float(b[0]), float(b[1]))
    if not contains(space, a) or not contains(space, b):
        raise GeometryError("line_of_sight endpoint lies outside the feasible space")
    if a == b:
        return True
    ts = _segment_edge_params(space, a, b)
    for t0, t1 in zip(ts[:-1], ts[1:]):
        if t1 - t0 <= 1e-12:
            continue
        tm = 0.5 * (t0 + t1)
        mid = Point2(a.x + tm * (b.x - a.x), a.y + tm * (b.y - a.y))
        if not contains(space, mid):
            return False
    return True


def free_distance(space: MissionSpace, origin: Point2, direction: tuple[float, float],
                  max_dist: float) -> float:
    """Length of the feasible prefix of the ray origin + r*direction, r in [0, max_dist].

    The origin may sit on a boundary; the walk classifies the midpoint of
    every sub-interval between edge crossings, so grazing passes through a
    vertex do not stop the ray.
    """
    ux, uy = direction
    end = Point2(origin.x + ux * max_dist, origin.y + uy * max_dist)
    ts = _segment_edge_params(space, origin, end)
    for t0, t1 in zip(ts[:-1], ts[1:]):
        if t1 - t0 <= 1e-12:
            continue
        tm = 0.5 * (t0 + t1)
        mid = Point2(origin.x + tm * ux * max_dist, origin.y + tm * uy * max_dist)
        if not contains(space, mid):
            return t0 * max_dist
    return max_dist


def clip_move(space: MissionSpace, frm: Point2, to: Point2) -> Point2:
    """Truncate the motion frm->to at the feasible-space boundary.

    Returns `to` unchanged when the whole segment is feasible; otherwise the
    last feasible point along it, backed off by the space's slack so the
    result is strictly usable as the next start point.
    """
    frm = Point2(float(frm[0]), float(frm[1]))
    to = Point2(float(to[0]), float(to[1]))
    if frm == to:
        return frm
    dx, dy = to.x - frm.x, to.y - frm.y
    length = math.hypot(dx, dy)
    ts = _segment_edge_params(space, frm, to)
    stop_t = 1.0
    blocked = False
    for t0, t1 in zip(ts[:-1], ts[1:]):
        if t1 - t0 <= 1e-12:
            continue
        tm = 0.5 * (t0 + t1)
        mid = Point2(frm.x + tm * dx, frm.y + tm * dy)
        if not contains(space, mid):
            stop_t = t0
            blocked = True
            break
    if not blocked:
        # Near-tangential crossings can slip past the intersection solve by
        # roundoff; never hand back an infeasible endpoint.
        return to if contains(space, to) else frm
    back = max(stop_t - space.eps / length, 0.0)
    result = Point2(frm.x + back * dx, frm.y + back * dy)
    if contains(space, result):
        return result
    return frm


@dataclass(frozen=True)
class AnchorInfo:
    """Geometry of one shadow ray cast by a reflex vertex visible from a node.

    v is the reflex vertex, impact the point where the extended sight ray
    meets the boundary again.  theta folds the ray direction into [0, pi/2]
    via absolute components; sgn_nx/sgn_ny are the component signs of the
    unit normal pointing from the shadow ray into the visible region (0 when
    the normal has no component on that axis).
    """

    v: Point2
    impact: Point2
    D: float
    d: float
    theta: float
    sgn_nx: int
    sgn_ny: int
    z: float


@dataclass(frozen=True)
class VisibilityRegion:
    owner: int
    polygon: Polygon
    anchors: tuple[AnchorInfo, ...]


def _sign_with_zero(x: float, tol: float) -> int:
    if x > tol:
        return 1
    if x < -tol:
        return -1
    return 0


def compute_anchors(space: MissionSpace, s: Point2, delta: float) -> tuple[AnchorInfo, ...]:
    """Active shadow-ray anchors for a node at s with sensing radius delta.

    A reflex vertex v qualifies when it is visible from s, closer than
    delta, and the ray extending past v has a feasible stretch longer than
    the geometric slack.
    """
    s = Point2(float(s[0]), float(s[1]))
    anchors = []
    for rv in space.reflex_vertices:
        v = rv.point
        D = math.hypot(v.x - s.x, v.y - s.y)
        if D >= delta or D <= space.eps:
            continue
        if not line_of_sight(space, s, v):
            continue
        ux, uy = (v.x - s.x) / D, (v.y - s.y) / D
        # Feasible extent of the shadow ray beyond the vertex.
        max_reach = space.diameter
        d = free_distance(space, v, (ux, uy), max_reach)
        if d <= space.eps:
            continue
        impact = Point2(v.x + ux * d, v.y + uy * d)
        z = min(d, delta - D)
        if z <= 10.0 * space.eps:
            continue
        theta = math.atan2(abs(v.y - s.y), abs(v.x - s.x))
        n = _shadow_normal(space, s, delta, v, ux, uy, z)
        if n is None:
            continue
        anchors.append(AnchorInfo(
            v=v, impact=impact, D=D, d=d, theta=theta,
            sgn_nx=_sign_with_zero(n[0], 1e-12),
            sgn_ny=_sign_with_zero(n[1], 1e-12),
            z=z,
        ))
    return tuple(anchors)


def _shadow_normal(space: MissionSpace, s: Point2, delta: float, v: Point2,
                   ux: float, uy: float, z: float):
    """Unit normal of the shadow ray oriented toward the visible side.

    Probes both sides of the ray midpoint; widens the probe offset if the
    shadow wedge is thinner than the slack (near-tangent geometry).  Returns
    None when the sides cannot be distinguished.
    """
    mx, my = v.x + ux * (z / 2.0), v.y + uy * (z / 2.0)
    nx, ny = -uy, ux
    for probe in (space.eps, 10 * space.eps, 1000 * space.eps):
        vis = []
        for sign in (1.0, -1.0):
            px, py = mx + sign * probe * nx, my + sign * probe * ny
            p = Point2(px, py)
            ok = (math.hypot(px - s.x, py - s.y) <= delta and contains(space, p)
                  and line_of_sight(space, s, p))
            vis.append(ok)
        if vis[0] != vis[1]:
            if vis[0]:
                return (nx, ny)
            return (-nx, -ny)
    return None


def visibility_region(space: MissionSpace, s: Point2, delta: float,
                      angular_res: int = 720, owner: int = -1) -> VisibilityRegion:
    """Star-shaped polygon approximating the set visible from s within delta.

    Casts angular_res uniformly spaced rays plus event rays bracketing the
    direction of every boundary vertex, and truncates each at the first
    blocking edge or at the sensing radius.
    """
    s = Point2(float(s[0]), float(s[1]))
    if delta <= 0:
        raise GeometryError("delta must be positive")
    if angular_res < 64:
        raise GeometryError("angular_res must be at least 64")
    if not contains(space, s):
        raise GeometryError("viewpoint lies outside the feasible space")
    for rv in space.reflex_vertices:
        if math.hypot(rv.point.x - s.x, rv.point.y - s.y) <= space.eps:
            raise PathologicalPosition(
                f"viewpoint coincides with reflex vertex {rv.vertex} of boundary {rv.boundary}")

    angles = list(np.linspace(0.0, 2.0 * math.pi, angular_res, endpoint=False))
    for poly in [space.outer, *space.obstacles]:
        for v in poly.vertices:
            base = math.atan2(v.y - s.y, v.x - s.x)
            angles.extend((base - EPS_ANG, base, base + EPS_ANG))
    angles = sorted(a % (2.0 * math.pi) for a in angles)

    pts = []
    for ang in angles:
        ux, uy = math.cos(ang), math.sin(ang)
        r = free_distance(space, s, (ux, uy), delta)
        pts.append(Point2(s.x + ux * r, s.y + uy * r))
    # Drop consecutive duplicates (event rays collapse when unobstructed).
    dedup = [pts[0]]
    for p in pts[1:]:
        q = dedup[-1]
        if math.hypot(p.x - q.x, p.y - q.y) > 10 * space.eps:
            dedup.append(p)
    if math.hypot(dedup[0].x - dedup[-1].x, dedup[0].y - dedup[-1].y) <= 10 * space.eps and len(dedup) > 3:
        dedup.pop()
    polygon = _polygon_trusted(dedup)
    anchors = compute_anchors(space, s, delta)
    return VisibilityRegion(owner=owner, polygon=polygon, anchors=anchors)


def _polygon_trusted(pts: Sequence[Point2]) -> Polygon:
    # Sweep output is simple by construction (star-shaped, angle-sorted);
    # skip the O(n^2) simplicity check that Polygon() would run.
    poly = Polygon.__new__(Polygon)
    object.__setattr__(poly, "vertices", tuple(pts))
    return poly


# --- vectorized kernels used by the quadrature and probability paths ---

def feasible_mask(space: MissionSpace, pts: np.ndarray) -> np.ndarray:
    """Vectorized feasibility of an (M, 2) array of points (boundary not special-cased)."""
    inside = _points_in_polygon(space.outer.as_array(), pts)
    for obs in space.obstacles:
        inside &= ~_points_in_polygon(obs.as_array(), pts)
    return inside


def _points_in_polygon(verts: np.ndarray, pts: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    n = len(verts)
    j = n - 1
    for i in range(n):
        xi, yi = verts[i]
        xj, yj = verts[j]
        crosses = (yi > y) != (yj > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = xi + (y - yi) * (xj - xi) / (yj - yi)
        inside ^= crosses & (x < x_cross)
        j = i
    return inside


def visible_from(space: MissionSpace, s: Point2, pts: np.ndarray) -> np.ndarray:
    """Vectorized sight test from s to each row of pts.

    A target is blocked when its sight segment properly crosses any boundary
    edge (strict crossing on both sides); contacts through a vertex or along
    an edge do not block, matching the grazing-is-visible convention.  Agrees
    with line_of_sight except on measure-zero alignments through a vertex.
    """
    sx, sy = float(s[0]), float(s[1])
    px, py = pts[:, 0], pts[:, 1]
    E = space.edge_array
    ex1, ey1, ex2, ey2 = E[:, 0:1], E[:, 1:2], E[:, 2:3], E[:, 3:4]
    d1 = (ex2 - ex1) * (sy - ey1) - (ey2 - ey1) * (sx - ex1)
    d2 = (ex2 - ex1) * (py - ey1) - (ey2 - ey1) * (px - ex1)
    d3 = (px - sx) * (ey1 - sy) - (py - sy) * (ex1 - sx)
    d4 = (px - sx) * (ey2 - sy) - (py - sy) * (ex2 - sx)
    blocked = ((d1 * d2 < 0.0) & (d3 * d4 < 0.0)).any(axis=0)
    return ~blocked
