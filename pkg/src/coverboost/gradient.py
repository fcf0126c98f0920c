"""Analytic gradient of a node's local coverage objective.

The derivative splits into an interior part (attraction toward visible mass,
weighted by density, neighbor gaps, and sensing decay) and a boundary part
(attraction across the moving edges of the visibility set: the shadow rays
cast by reflex vertices plus the sensing-range circle wherever it is the
binding constraint).  Escape transforms act multiplicatively or additively
on the interior part only; boundary weights are never transformed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boosting import BoostSpec, RandomStream, neighbor_boost_vector, neighbor_gains, \
    p_boost_alpha, phi_boost_alpha
from .geometry import AnchorInfo, MissionSpace, Point2, compute_anchors, contains, _orient
from .objective import FieldCache, QuadratureGrid
from .sensing import DensityField, Fleet, detection_prob, hat_p_field, neighbor_set, \
    phi as phi_point

DEFAULT_LINE_SAMPLES = 129


@dataclass(frozen=True)
class GradientVector:
    """Gradient components with the interior/boundary split kept visible."""

    ex: float
    ey: float
    interior: tuple[float, float]
    boundary: tuple[float, float]

    @property
    def norm(self) -> float:
        return math.hypot(self.ex, self.ey)


def weight_w1(space: MissionSpace, fleet: Fleet, density: DensityField, i: int,
              x: Point2) -> float:
    """Interior attraction weight: density * neighbor gap * decay rate * detection.

    Callers guarantee x lies in node i's visibility set; the value is
    nonnegative because detection decreases with distance.
    """
    prm = fleet.params[i]
    s = fleet.positions[i]
    d = math.hypot(x[0] - s.x, x[1] - s.y)
    return density.value(x) * phi_point(space, fleet, i, x) * prm.lam * detection_prob(prm, d)


def weight_w2(space: MissionSpace, fleet: Fleet, density: DensityField, i: int,
              x: Point2) -> float:
    """Boundary attraction weight: density * neighbor gap * detection (nonnegative)."""
    prm = fleet.params[i]
    s = fleet.positions[i]
    d = math.hypot(x[0] - s.x, x[1] - s.y)
    return density.value(x) * phi_point(space, fleet, i, x) * detection_prob(prm, d)


# Cells closer to the node than the near-field radius are integrated on a
# subdivided lattice: the attraction kernel peaks there and a single
# cell-center sample leaves an asymmetry residual that dominates the
# gradient error for sharply decaying sensors.  The radius extends to where
# the decay has flattened (exp(-6)) when the per-cell decay is sharp, since
# the coarse/fine interface itself sheds an error ring proportional to the
# integrand slope crossing it.
NEAR_FIELD_RADIUS_CELLS = 4.0
NEAR_FIELD_SUBDIV = 8
STRIP_SUBDIV = 4
NEAR_FIELD_SHARPNESS = 0.25
NEAR_FIELD_DECAY = 6.0


def _near_field_radius(lam: float, delta: float, h: float) -> float:
    r0 = NEAR_FIELD_RADIUS_CELLS * h
    if lam * h > NEAR_FIELD_SHARPNESS:
        r0 = max(r0, NEAR_FIELD_DECAY / lam)
    return min(r0, 0.75 * delta)


def _interior_sum(cache: FieldCache, i: int, alpha_mode,
                  anchors: tuple[AnchorInfo, ...] | None = None) -> tuple[float, float]:
    grid = cache.grid
    fleet = cache.fleet
    s = fleet.positions[i]
    prm = fleet.params[i]
    h = grid.spacing
    r0 = _near_field_radius(prm.lam, prm.delta, h)

    # The refined (sub-sampled) cell set is drawn from the full lattice, not
    # just feasible-center cells: a cell whose center falls inside an
    # obstacle can still hold a feasible sliver that belongs to the integral.
    all_centers = grid.centers
    dist_full = np.hypot(all_centers[:, 0] - s.x, all_centers[:, 1] - s.y)
    refined_full = dist_full <= r0
    in_disk_full = dist_full <= prm.delta + 0.71 * h
    if in_disk_full.any():
        refined_full |= grid.edge_cut & in_disk_full
        segs = _shadow_segments(s, anchors)
        if segs:
            refined_full |= _cells_crossed(all_centers, in_disk_full, segs, 0.75 * h)
    refined_full &= in_disk_full

    coarse = cache.vis[i] & ~refined_full[grid.mask]

    ex = ey = 0.0
    pts = cache.pts[coarse]
    if len(pts):
        d = np.hypot(pts[:, 0] - s.x, pts[:, 1] - s.y)
        w1 = (cache.density_vals[coarse] * cache.phi_row(i)[coarse]
              * prm.lam * cache.p_hat[i][coarse])
        if __debug__:
            assert w1.min() >= 0.0, "interior weight went negative"
        if alpha_mode is not None:
            w1 = _alpha_values(cache, i, alpha_mode, coarse_sel=coarse) * w1
        ex += float(np.sum(w1 * (pts[:, 0] - s.x) / d) * grid.cell_area)
        ey += float(np.sum(w1 * (pts[:, 1] - s.y) / d) * grid.cell_area)

    near_mask = refined_full & (dist_full <= r0)
    strip_mask = refined_full & ~near_mask
    if near_mask.any():
        nex, ney = _near_field_sum(cache, i, near_mask, alpha_mode, NEAR_FIELD_SUBDIV)
        ex += nex
        ey += ney
    if strip_mask.any():
        nex, ney = _near_field_sum(cache, i, strip_mask, alpha_mode, STRIP_SUBDIV)
        ex += nex
        ey += ney
    return ex, ey


def _shadow_segments(s, anchors) -> list[tuple[float, float, float, float]]:
    segs = []
    if anchors:
        for a in anchors:
            ux, uy = (a.v.x - s.x) / a.D, (a.v.y - s.y) / a.D
            segs.append((a.v.x, a.v.y, a.v.x + ux * a.z, a.v.y + uy * a.z))
    return segs


def _point_seg_dist(px, py, ax, ay, bx, by) -> float:
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    if L2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = min(max(((px - ax) * dx + (py - ay) * dy) / L2, 0.0), 1.0)
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def _cells_crossed(centers: np.ndarray, candidates: np.ndarray,
                   segs: list[tuple[float, float, float, float]],
                   reach: float) -> np.ndarray:
    out = np.zeros(len(centers), dtype=bool)
    if not segs:
        return out
    idx = np.nonzero(candidates)[0]
    px, py = centers[idx, 0], centers[idx, 1]
    hit = np.zeros(len(idx), dtype=bool)
    for ax, ay, bx, by in segs:
        dx, dy = bx - ax, by - ay
        L2 = dx * dx + dy * dy
        if L2 == 0.0:
            d2 = (px - ax) ** 2 + (py - ay) ** 2
        else:
            t = np.clip(((px - ax) * dx + (py - ay) * dy) / L2, 0.0, 1.0)
            d2 = (px - (ax + t * dx)) ** 2 + (py - (ay + t * dy)) ** 2
        hit |= d2 <= reach * reach
    out[idx] = hit
    return out


def _near_field_sum(cache: FieldCache, i: int, refined_full: np.ndarray,
                    alpha_mode, m: int) -> tuple[float, float]:
    """Subdivided quadrature of the refined cells (node peak and cut strips).

    Each refined cell is tiled by an m x m midpoint sub-lattice.  The
    sub-lattice resolves feasibility, the node's own visibility, range, and
    the direction kernel; the smooth factors (density, neighbor gap, escape
    multiplier) vary on the sensing-decay scale and are held at their
    cell-center values.  The sub-cell hosting the node contributes zero (the
    direction factor is undefined there and the omitted mass vanishes with
    sub-cell area).
    """
    from .geometry import feasible_mask, visible_from

    space = cache.space
    fleet = cache.fleet
    grid = cache.grid
    s = fleet.positions[i]
    prm = fleet.params[i]
    h = grid.spacing
    sub = h / m

    cell_centers = grid.centers[refined_full]
    factors = _cell_factors(cache, i, refined_full, alpha_mode)
    if __debug__:
        assert factors.min() >= 0.0, "interior weight factor went negative"

    offs = (np.arange(m) + 0.5) * sub - 0.5 * h
    ox, oy = np.meshgrid(offs, offs)
    offsets = np.column_stack([ox.ravel(), oy.ravel()])
    pts = (cell_centers[:, None, :] + offsets[None, :, :]).reshape(-1, 2)
    fac = np.repeat(factors, len(offsets))

    keep = feasible_mask(space, pts)
    d = np.hypot(pts[:, 0] - s.x, pts[:, 1] - s.y)
    keep &= d > sub * 0.71  # drop the sub-cell hosting the node
    keep &= d <= prm.delta
    pts, d, fac = pts[keep], d[keep], fac[keep]
    if len(pts) == 0:
        return 0.0, 0.0
    vis = visible_from(space, s, pts)
    pts, d, fac = pts[vis], d[vis], fac[vis]
    if len(pts) == 0:
        return 0.0, 0.0

    w1 = fac * (prm.lam * prm.p0) * np.exp(-prm.lam * d)
    area = sub * sub
    ex = float(np.sum(w1 * (pts[:, 0] - s.x) / d) * area)
    ey = float(np.sum(w1 * (pts[:, 1] - s.y) / d) * area)
    return ex, ey


def _cell_factors(cache: FieldCache, i: int, refined_full: np.ndarray,
                  alpha_mode) -> np.ndarray:
    """Density * neighbor gap (* escape multiplier) at refined cell centers.

    Cached rows cover feasible-center cells; sliver cells (infeasible
    centers) get the same quantities evaluated directly at their centers.
    """
    grid = cache.grid
    fleet = cache.fleet
    refined_masked = refined_full[grid.mask]
    factors = np.empty(int(refined_full.sum()))

    # Positions of masked (feasible-center) refined cells within the refined list.
    masked_flags = grid.mask[refined_full]
    f_masked = cache.density_vals[refined_masked] * cache.phi_row(i)[refined_masked]
    if alpha_mode is not None:
        f_masked = _alpha_cached(cache, i, alpha_mode, refined_masked) * f_masked
    factors[masked_flags] = f_masked

    if not masked_flags.all():
        centers = grid.centers[refined_full][~masked_flags]
        dens = cache.density.values(centers)
        gap = np.ones(len(centers))
        for k in cache.neighbors[i]:
            gap *= 1.0 - hat_p_field(cache.space, fleet.positions[k], fleet.params[k], centers)
        f_sliver = dens * gap
        if alpha_mode is not None:
            kind, kk, gamma = alpha_mode
            if kind == "p":
                miss = np.ones(len(centers))
                for j in range(fleet.n):
                    miss *= 1.0 - hat_p_field(cache.space, fleet.positions[j],
                                              fleet.params[j], centers)
                f_sliver = p_boost_alpha(1.0 - miss, kk, gamma) * f_sliver
            else:
                f_sliver = phi_boost_alpha(gap, kk, gamma) * f_sliver
        factors[~masked_flags] = f_sliver
    return factors


def _alpha_cached(cache: FieldCache, i: int, alpha_mode, sel: np.ndarray) -> np.ndarray:
    kind, k, gamma = alpha_mode
    if kind == "p":
        return p_boost_alpha(cache.joint_row()[sel], k, gamma)
    return phi_boost_alpha(cache.phi_row(i)[sel], k, gamma)


def _alpha_values(cache: FieldCache, i: int, alpha_mode,
                  coarse_sel: np.ndarray | None = None) -> np.ndarray:
    """Boost multiplier on cached coarse cells."""
    return _alpha_cached(cache, i, alpha_mode, coarse_sel)


def interior_term(space: MissionSpace, fleet: Fleet, density: DensityField,
                  grid: QuadratureGrid, i: int) -> tuple[float, float]:
    """Quadrature of the attraction field over node i's visible cells."""
    cache = FieldCache(space, fleet, density, grid)
    anchors = compute_anchors(space, fleet.positions[i], fleet.params[i].delta)
    return _interior_sum(cache, i, None, anchors)


def boundary_term(space: MissionSpace, fleet: Fleet, density: DensityField, i: int,
                  anchors: tuple[AnchorInfo, ...] | None = None,
                  line_samples: int = DEFAULT_LINE_SAMPLES) -> tuple[float, float]:
    """Shadow-ray contribution, one radial integral per active anchor.

    Each anchor's integrand is smooth along the ray, so a composite Simpson
    rule with line_samples points (rounded up to odd) suffices.
    """
    prm = fleet.params[i]
    s = fleet.positions[i]
    if anchors is None:
        anchors = compute_anchors(space, s, prm.delta)
    if line_samples < 65:
        raise ValueError("line_samples must be at least 65")
    n = line_samples if line_samples % 2 == 1 else line_samples + 1
    active = [a for a in anchors if a.z > 0.0]
    if not active:
        return 0.0, 0.0
    # One point array over all rays so each neighbor costs a single sweep.
    rs, pts_list, p_list = [], [], []
    for a in active:
        ux, uy = (a.v.x - s.x) / a.D, (a.v.y - s.y) / a.D
        r = np.linspace(0.0, a.z, n)
        rs.append(r)
        pts_list.append(np.column_stack([a.v.x + ux * r, a.v.y + uy * r]))
        p_list.append(prm.p0 * np.exp(-prm.lam * (a.D + r)))
    pts = np.concatenate(pts_list)
    gap = np.ones(len(pts))
    for k in neighbor_set(fleet, i):
        gap *= 1.0 - hat_p_field(space, fleet.positions[k], fleet.params[k], pts)
    dens = density.values(pts)
    ex = ey = 0.0
    for j, a in enumerate(active):
        sl = slice(j * n, (j + 1) * n)
        w2 = dens[sl] * gap[sl] * p_list[j]
        if __debug__:
            assert w2.min() >= 0.0, "boundary weight went negative"
        integral = _simpson(w2 * rs[j], a.z / (n - 1))
        ex += a.sgn_nx * math.sin(a.theta) / a.D * integral
        ey += a.sgn_ny * math.cos(a.theta) / a.D * integral
    return ex, ey


def _simpson(y: np.ndarray, h: float) -> float:
    w = np.ones(len(y))
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float(np.sum(w * y) * h / 3.0)


HORIZON_SAMPLES = 1024


def horizon_term(space: MissionSpace, fleet: Fleet, density: DensityField, i: int,
                 samples: int = HORIZON_SAMPLES) -> tuple[float, float]:
    """Flux across the sensing-range circle where detection drops to zero.

    The visibility set is bounded by the range circle wherever sight is
    otherwise clear; that boundary moves with the node, so the derivative
    picks up density * neighbor gap * detection-at-range along the exposed
    arc.  Vanishes identically for sensors whose detection has decayed to
    nothing at the range limit.
    """
    from .geometry import feasible_mask, visible_from

    prm = fleet.params[i]
    s = fleet.positions[i]
    p_rim = prm.p0 * math.exp(-prm.lam * prm.delta)
    if p_rim == 0.0:
        return 0.0, 0.0
    dphi = 2.0 * math.pi / samples
    phi = (np.arange(samples) + 0.5) * dphi
    cos_p, sin_p = np.cos(phi), np.sin(phi)
    pts = np.column_stack([s.x + prm.delta * cos_p, s.y + prm.delta * sin_p])
    exposed = feasible_mask(space, pts)
    if exposed.any():
        idx = np.nonzero(exposed)[0]
        exposed[idx] = visible_from(space, s, pts[idx])
    if not exposed.any():
        return 0.0, 0.0
    pts = pts[exposed]
    gap = np.ones(len(pts))
    for k in neighbor_set(fleet, i):
        gap *= 1.0 - hat_p_field(space, fleet.positions[k], fleet.params[k], pts)
    w2 = density.values(pts) * gap * p_rim
    if __debug__:
        assert w2.min() >= 0.0, "horizon weight went negative"
    scale = prm.delta * dphi
    ex = float(np.sum(w2 * cos_p[exposed]) * scale)
    ey = float(np.sum(w2 * sin_p[exposed]) * scale)
    return ex, ey


def is_pathological(space: MissionSpace, s: Point2, delta: float) -> bool:
    """Positions where the local derivative is undefined.

    Coinciding with a reflex vertex, or lying on the line through two reflex
    vertices (a shadow ray tangent to a second corner), both within slack.
    """
    relevant = [rv.point for rv in space.reflex_vertices
                if math.hypot(rv.point.x - s[0], rv.point.y - s[1]) < delta]
    for v in relevant:
        if math.hypot(v.x - s[0], v.y - s[1]) <= space.eps:
            return True
    for a in range(len(relevant)):
        for b in range(a + 1, len(relevant)):
            va, vb = relevant[a], relevant[b]
            base = math.hypot(vb.x - va.x, vb.y - va.y)
            if base == 0.0:
                continue
            if abs(_orient(va.x, va.y, vb.x, vb.y, s[0], s[1])) / base <= space.eps:
                return True
    return False


def nudge_position(space: MissionSpace, s: Point2, delta: float) -> Point2:
    """Deterministic feasible offset of 10x slack away from a pathological spot."""
    step = 10.0 * space.eps
    k0 = (int(abs(s.x / space.eps)) * 7919 + int(abs(s.y / space.eps)) * 104729) % 16
    for k in range(16):
        ang = 2.0 * math.pi * ((k0 + k) % 16) / 16.0
        cand = Point2(s.x + step * math.cos(ang), s.y + step * math.sin(ang))
        if contains(space, cand) and not is_pathological(space, cand, delta):
            return cand
    return s


def local_gradient(space: MissionSpace, fleet: Fleet, density: DensityField,
                   grid: QuadratureGrid, i: int,
                   line_samples: int = DEFAULT_LINE_SAMPLES,
                   cache: FieldCache | None = None,
                   horizon_samples: int = HORIZON_SAMPLES) -> GradientVector:
    """Full analytic gradient of node i's local objective (interior + boundary).

    Pathological positions are evaluated at a deterministic nudged point; the
    node itself is not moved.
    """
    fleet, cache = _dealias(space, fleet, grid, i, cache)
    if cache is None:
        cache = FieldCache(space, fleet, density, grid)
    anchors = compute_anchors(space, fleet.positions[i], fleet.params[i].delta)
    ix, iy = _interior_sum(cache, i, None, anchors)
    bx, by = boundary_term(space, fleet, density, i, anchors, line_samples)
    hx, hy = horizon_term(space, fleet, density, i, horizon_samples)
    return GradientVector(ix + (bx + hx), iy + (by + hy), (ix, iy), (bx + hx, by + hy))


def boosted_gradient(space: MissionSpace, fleet: Fleet, density: DensityField,
                     grid: QuadratureGrid, i: int, boost: BoostSpec,
                     rng_stream: RandomStream | None = None, iteration: int = 0,
                     line_samples: int = DEFAULT_LINE_SAMPLES,
                     cache: FieldCache | None = None,
                     horizon_samples: int = HORIZON_SAMPLES) -> GradientVector:
    """Gradient with the active escape transform applied to the interior weight.

    The boundary weight is never transformed.  Additive contributions
    (pairwise repulsion, random noise) are folded into the interior part so
    the component split stays additive.
    """
    if boost.family == "none":
        return local_gradient(space, fleet, density, grid, i, line_samples, cache,
                              horizon_samples)
    fleet, cache = _dealias(space, fleet, grid, i, cache)
    if cache is None:
        cache = FieldCache(space, fleet, density, grid)

    alpha_mode = None
    if boost.family == "p_boost":
        alpha_mode = ("p", boost.k, boost.gamma)
    elif boost.family == "phi_boost":
        alpha_mode = ("phi", boost.k, boost.gamma)

    anchors = compute_anchors(space, fleet.positions[i], fleet.params[i].delta)
    ix, iy = _interior_sum(cache, i, alpha_mode, anchors)

    if boost.family == "neighbor_boost":
        gains = neighbor_gains(space, fleet, i, boost.k, boost.kj_scheme)
        bx_rep, by_rep = neighbor_boost_vector(fleet, i, gains, boost.gamma, space.eps)
        ix += bx_rep
        iy += by_rep
    elif boost.family == "random_perturb":
        if rng_stream is None:
            rng_stream = RandomStream(boost.seed)
        xi_x, xi_y = rng_stream.perturbation(i, iteration, boost.amplitude)
        ix += xi_x
        iy += xi_y

    bx, by = boundary_term(space, fleet, density, i, anchors, line_samples)
    hx, hy = horizon_term(space, fleet, density, i, horizon_samples)
    return GradientVector(ix + (bx + hx), iy + (by + hy), (ix, iy), (bx + hx, by + hy))


def _dealias(space: MissionSpace, fleet: Fleet, grid: QuadratureGrid, i: int,
             cache: FieldCache | None):
    """Swap in a nudged evaluation position when node i sits on a degenerate spot."""
    s = fleet.positions[i]
    if not is_pathological(space, s, fleet.params[i].delta):
        return fleet, cache
    moved = nudge_position(space, s, fleet.params[i].delta)
    if moved == s:
        return fleet, cache
    positions = list(fleet.positions)
    positions[i] = moved
    return fleet.with_positions(positions), None


def fleet_gradients(space: MissionSpace, fleet: Fleet, density: DensityField,
                    grid: QuadratureGrid,
                    boost_for_node=None,
                    rng_stream: RandomStream | None = None, iteration: int = 0,
                    line_samples: int = DEFAULT_LINE_SAMPLES):
    """All node gradients from one shared field snapshot.

    boost_for_node maps a node index to its active BoostSpec (or None for the
    plain gradient).  Returns (gradients, cache) so callers can reuse the
    snapshot for objective bookkeeping.
    """
    cache = FieldCache(space, fleet, density, grid)
    grads = []
    for i in range(fleet.n):
        boost = boost_for_node(i) if boost_for_node is not None else None
        if boost is None or boost.family == "none":
            grads.append(local_gradient(space, fleet, density, grid, i, line_samples, cache))
        else:
            grads.append(boosted_gradient(space, fleet, density, grid, i, boost,
                                          rng_stream, iteration, line_samples, cache))
    return grads, cache
