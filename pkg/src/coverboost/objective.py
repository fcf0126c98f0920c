"""Coverage objective evaluated by cell-center quadrature over the feasible space.

The integrand jumps across visibility shadows and sensing-range circles, so
a uniform cell-center rule is used; accuracy is controlled by refinement
rather than quadrature order.  All reductions use numpy's pairwise summation,
keeping results bit-stable for identical inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import MissionSpace, Point2, feasible_mask
from .sensing import DensityField, Fleet, hat_p_field, neighbor_set, visibility_mask


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Uniform cell-center grid over the mission bounding box.

    A cell contributes to integrals iff its center is feasible.  `centers`
    holds all cell centers as an (M, 2) array in row-major order (x fastest);
    `mask` flags the feasible ones; `edge_cut` flags cells crossed by a
    boundary edge (their area is split between feasible and infeasible or
    between visibility regimes, so gradient quadrature refines them).
    """

    origin: Point2
    spacing: float
    nx: int
    ny: int
    centers: np.ndarray
    mask: np.ndarray
    edge_cut: np.ndarray

    @property
    def cell_area(self) -> float:
        return self.spacing * self.spacing

    def shape(self) -> tuple[int, int]:
        return self.ny, self.nx

    def cell_index(self, p: Point2) -> int:
        """Row-major index of the cell containing p (clamped to the grid)."""
        ix = min(max(int((p[0] - self.origin.x) / self.spacing), 0), self.nx - 1)
        iy = min(max(int((p[1] - self.origin.y) / self.spacing), 0), self.ny - 1)
        return iy * self.nx + ix


def build_grid(space: MissionSpace, spacing: float) -> QuadratureGrid:
    xmin, ymin, xmax, ymax = space.bounding_box()
    nx = max(int(math.ceil((xmax - xmin) / spacing)), 1)
    ny = max(int(math.ceil((ymax - ymin) / spacing)), 1)
    xs = xmin + (np.arange(nx) + 0.5) * spacing
    ys = ymin + (np.arange(ny) + 0.5) * spacing
    gx, gy = np.meshgrid(xs, ys)
    centers = np.column_stack([gx.ravel(), gy.ravel()])
    mask = feasible_mask(space, centers)
    edge_cut = _edge_cut_mask(space, centers, spacing)
    return QuadratureGrid(Point2(xmin, ymin), spacing, nx, ny, centers, mask, edge_cut)


def _edge_cut_mask(space: MissionSpace, centers: np.ndarray, spacing: float) -> np.ndarray:
    reach = 0.75 * spacing
    px, py = centers[:, 0], centers[:, 1]
    out = np.zeros(len(centers), dtype=bool)
    for ax, ay, bx, by in space.edge_array:
        dx, dy = bx - ax, by - ay
        L2 = dx * dx + dy * dy
        if L2 == 0.0:
            d2 = (px - ax) ** 2 + (py - ay) ** 2
        else:
            t = np.clip(((px - ax) * dx + (py - ay) * dy) / L2, 0.0, 1.0)
            d2 = (px - (ax + t * dx)) ** 2 + (py - (ay + t * dy)) ** 2
        out |= d2 <= reach * reach
    return out


def default_grid(space: MissionSpace, fleet: Fleet, divisions: int = 20) -> QuadratureGrid:
    spacing = min(p.delta for p in fleet.params) / divisions
    return build_grid(space, spacing)


def refine_grid(space: MissionSpace, grid: QuadratureGrid, factor: int) -> QuadratureGrid:
    return build_grid(space, grid.spacing / factor)


class FieldCache:
    """Per-snapshot sensing fields on the feasible cells of a grid.

    Computes each node's visibility mask and detection row once, then serves
    the objective, the local objectives, and all gradient weights from the
    same arrays.
    """

    def __init__(self, space: MissionSpace, fleet: Fleet, density: DensityField,
                 grid: QuadratureGrid):
        self.space = space
        self.fleet = fleet
        self.density = density
        self.grid = grid
        self.pts = grid.centers[grid.mask]
        self.density_vals = density.values(self.pts)
        n = fleet.n
        m = len(self.pts)
        self.vis = np.zeros((n, m), dtype=bool)
        self.p_hat = np.zeros((n, m))
        for i in range(n):
            s, prm = fleet.positions[i], fleet.params[i]
            self.vis[i] = visibility_mask(space, s, prm.delta, self.pts)
            d = np.hypot(self.pts[:, 0] - s.x, self.pts[:, 1] - s.y)
            row = np.zeros(m)
            sel = self.vis[i]
            row[sel] = prm.p0 * np.exp(-prm.lam * d[sel])
            self.p_hat[i] = row
        self.neighbors = [neighbor_set(fleet, i) for i in range(n)]

    def phi_row(self, i: int) -> np.ndarray:
        out = np.ones(self.p_hat.shape[1])
        for k in self.neighbors[i]:
            out *= 1.0 - self.p_hat[k]
        return out

    def joint_row(self) -> np.ndarray:
        miss = np.ones(self.p_hat.shape[1])
        for k in range(self.fleet.n):
            miss *= 1.0 - self.p_hat[k]
        return 1.0 - miss

    def objective(self) -> float:
        return float(np.sum(self.density_vals * self.joint_row()) * self.grid.cell_area)

    def local_objective(self, i: int) -> float:
        sel = self.vis[i]
        vals = self.density_vals[sel] * self.phi_row(i)[sel] * self.p_hat[i][sel]
        return float(np.sum(vals) * self.grid.cell_area)

    def remainder_objective(self, i: int) -> float:
        miss = np.ones(self.p_hat.shape[1])
        for k in range(self.fleet.n):
            if k != i:
                miss *= 1.0 - self.p_hat[k]
        return float(np.sum(self.density_vals * (1.0 - miss)) * self.grid.cell_area)


def objective_H(space: MissionSpace, fleet: Fleet, density: DensityField,
                grid: QuadratureGrid) -> float:
    """Density-weighted joint detection probability integrated over the feasible space."""
    return FieldCache(space, fleet, density, grid).objective()


def local_H_i(space: MissionSpace, fleet: Fleet, density: DensityField,
              grid: QuadratureGrid, i: int) -> float:
    """Part of the objective that depends on node i's position.

    Integral of density * neighbor gap * detection over node i's visibility
    set; together with the remainder term it reconstructs the full objective
    exactly on a shared grid.
    """
    return FieldCache(space, fleet, density, grid).local_objective(i)


def tilde_H(space: MissionSpace, fleet: Fleet, density: DensityField,
            grid: QuadratureGrid, i: int) -> float:
    """Complementary objective with node i removed entirely; independent of s_i."""
    return FieldCache(space, fleet, density, grid).remainder_objective(i)


@dataclass(frozen=True, eq=False)
class Heatmap:
    """Per-cell joint detection probability; NaN marks infeasible cells."""

    grid: QuadratureGrid
    values: np.ndarray

    def as_image(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape())


def coverage_heatmap(space: MissionSpace, fleet: Fleet, grid: QuadratureGrid) -> Heatmap:
    values = np.full(grid.nx * grid.ny, np.nan)
    pts = grid.centers[grid.mask]
    if len(pts):
        miss = np.ones(len(pts))
        for i in range(fleet.n):
            miss *= 1.0 - hat_p_field(space, fleet.positions[i], fleet.params[i], pts)
        values[grid.mask] = 1.0 - miss
    return Heatmap(grid, values)


def write_heatmap_pgm(heatmap: Heatmap, path: str | Path) -> None:
    """Plain-text PGM (P2, maxval 255); infeasible cells are written as 0.

    Rows run top to bottom (largest y first) per image convention.
    """
    img = heatmap.as_image()
    levels = np.where(np.isnan(img), 0, np.rint(255.0 * np.nan_to_num(img))).astype(int)
    lines = [f"P2", f"{heatmap.grid.nx} {heatmap.grid.ny}", "255"]
    for row in levels[::-1]:
        lines.append(" ".join(str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_heatmap_csv(heatmap: Heatmap, path: str | Path) -> None:
    """Delimited dump with header x,y,P; infeasible cells carry P=nan."""
    lines = ["x,y,P"]
    centers = heatmap.grid.centers
    for (x, y), v in zip(centers, heatmap.values):
        lines.append(f"{x!r},{y!r},{v!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_heatmap_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Parse a heatmap CSV back into (centers, values) arrays."""
    rows = Path(path).read_text().strip().splitlines()
    if not rows or rows[0].strip() != "x,y,P":
        raise ValueError(f"{path}: expected header 'x,y,P'")
    data = np.array([[float(f) for f in line.split(",")] for line in rows[1:]])
    if data.ndim != 2 or data.shape[1] != 3:
        raise ValueError(f"{path}: malformed heatmap rows")
    return data[:, :2], data[:, 2]
