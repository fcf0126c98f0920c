"""Sensor models, neighbor sets, and detection probabilities.

Detection decays exponentially with distance and drops to zero outside the
visibility set (range-limited and blocked by obstacles).  Detections by
different nodes are independent, so joint and gap probabilities are plain
products over the relevant node sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import MissionSpace, Point2, visible_from


@dataclass(frozen=True)
class SensorParams:
    """Sensing radius, peak detection probability, and exponential decay rate."""

    delta: float
    p0: float
    lam: float

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if not 0.0 <= self.p0 <= 1.0:
            raise ValueError("p0 must be a probability")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")


@dataclass(frozen=True)
class Fleet:
    positions: tuple[Point2, ...]
    params: tuple[SensorParams, ...]

    def __post_init__(self):
        if len(self.positions) == 0:
            raise ValueError("fleet needs at least one node")
        if len(self.positions) != len(self.params):
            raise ValueError("positions and params length mismatch")

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def homogeneous(self) -> bool:
        return len(set(self.params)) == 1

    def with_positions(self, positions) -> "Fleet":
        pts = tuple(Point2(float(p[0]), float(p[1])) for p in positions)
        return Fleet(pts, self.params)

    def position_array(self) -> np.ndarray:
        return np.asarray(self.positions, dtype=float)


def make_fleet(positions: Sequence[Sequence[float]],
               params: SensorParams | Sequence[SensorParams]) -> Fleet:
    pts = tuple(Point2(float(p[0]), float(p[1])) for p in positions)
    if isinstance(params, SensorParams):
        return Fleet(pts, tuple([params] * len(pts)))
    return Fleet(pts, tuple(params))


class DensityField:
    """Nonnegative event-frequency weight over the mission space."""

    def value(self, x: Point2) -> float:
        raise NotImplementedError

    def values(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class UniformDensity(DensityField):
    level: float = 1.0

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("density must be nonnegative")

    def value(self, x: Point2) -> float:
        return self.level

    def values(self, pts: np.ndarray) -> np.ndarray:
        return np.full(len(pts), self.level)


@dataclass(frozen=True)
class GridDensity(DensityField):
    """Bilinear interpolation of samples on a regular lattice.

    `samples[j][i]` sits at origin + (i*spacing, j*spacing); queries outside
    the lattice clamp to the border samples.
    """

    origin: tuple[float, float]
    spacing: float
    samples: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] < 2:
            raise ValueError("grid density needs a 2-D sample lattice of at least 2x2")
        if (arr < 0).any():
            raise ValueError("density samples must be nonnegative")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")

    def value(self, x: Point2) -> float:
        return float(self.values(np.asarray([[x[0], x[1]]], dtype=float))[0])

    def values(self, pts: np.ndarray) -> np.ndarray:
        arr = np.asarray(self.samples, dtype=float)
        ny, nx = arr.shape
        gx = (pts[:, 0] - self.origin[0]) / self.spacing
        gy = (pts[:, 1] - self.origin[1]) / self.spacing
        gx = np.clip(gx, 0.0, nx - 1.0)
        gy = np.clip(gy, 0.0, ny - 1.0)
        i0 = np.minimum(gx.astype(int), nx - 2)
        j0 = np.minimum(gy.astype(int), ny - 2)
        fx = gx - i0
        fy = gy - j0
        v00 = arr[j0, i0]
        v10 = arr[j0, i0 + 1]
        v01 = arr[j0 + 1, i0]
        v11 = arr[j0 + 1, i0 + 1]
        return (v00 * (1 - fx) * (1 - fy) + v10 * fx * (1 - fy)
                + v01 * (1 - fx) * fy + v11 * fx * fy)


def detection_prob(params: SensorParams, dist: float) -> float:
    """Raw detection probability at range dist (no radius cutoff, no obstacles)."""
    if dist < 0:
        raise ValueError("distance must be nonnegative")
    return float(params.p0 * np.exp(-params.lam * dist))


def hat_p_field(space: MissionSpace, s: Point2, params: SensorParams,
                pts: np.ndarray) -> np.ndarray:
    """Effective detection probability of one node over an (M, 2) point array.

    Zero outside the closed sensing disk or where the sight segment is
    blocked; shared by every probability, objective, and gradient path so
    pointwise queries and quadrature agree bit for bit.
    """
    d = np.hypot(pts[:, 0] - s[0], pts[:, 1] - s[1])
    in_range = d <= params.delta
    out = np.zeros(len(pts))
    if in_range.any():
        idx = np.nonzero(in_range)[0]
        vis = visible_from(space, s, pts[idx])
        keep = idx[vis]
        out[keep] = params.p0 * np.exp(-params.lam * d[keep])
    return out


def visibility_mask(space: MissionSpace, s: Point2, delta: float,
                    pts: np.ndarray) -> np.ndarray:
    """Membership of each point in the node's visibility set (range and sight)."""
    d = np.hypot(pts[:, 0] - s[0], pts[:, 1] - s[1])
    mask = d <= delta
    if mask.any():
        idx = np.nonzero(mask)[0]
        mask[idx] = visible_from(space, s, pts[idx])
    return mask


def hat_p(space: MissionSpace, fleet: Fleet, i: int, x: Point2) -> float:
    """Detection probability of node i for an event at x."""
    pt = np.asarray([[x[0], x[1]]], dtype=float)
    return float(hat_p_field(space, fleet.positions[i], fleet.params[i], pt)[0])


def joint_detection(space: MissionSpace, fleet: Fleet, x: Point2) -> float:
    """Probability that at least one node detects an event at x."""
    pt = np.asarray([[x[0], x[1]]], dtype=float)
    miss = 1.0
    for i in range(fleet.n):
        miss *= 1.0 - hat_p_field(space, fleet.positions[i], fleet.params[i], pt)[0]
    return float(1.0 - miss)


def neighbor_set(fleet: Fleet, i: int) -> list[int]:
    """Indices of nodes strictly closer than twice node i's sensing radius."""
    if not 0 <= i < fleet.n:
        raise IndexError("node index out of range")
    si = fleet.positions[i]
    radius = 2.0 * fleet.params[i].delta
    out = []
    for k in range(fleet.n):
        if k == i:
            continue
        sk = fleet.positions[k]
        if np.hypot(si[0] - sk[0], si[1] - sk[1]) < radius:
            out.append(k)
    return out


def phi(space: MissionSpace, fleet: Fleet, i: int, x: Point2) -> float:
    """Probability that no neighbor of node i detects an event at x (empty product = 1)."""
    pt = np.asarray([[x[0], x[1]]], dtype=float)
    out = 1.0
    for k in neighbor_set(fleet, i):
        out *= 1.0 - hat_p_field(space, fleet.positions[k], fleet.params[k], pt)[0]
    return float(out)


def phi_field(space: MissionSpace, fleet: Fleet, i: int, pts: np.ndarray,
              hat_p_rows: dict[int, np.ndarray] | None = None) -> np.ndarray:
    """Vectorized neighbor-gap probability over an (M, 2) point array.

    hat_p_rows may carry precomputed per-node probability rows over the same
    points to avoid recomputation.
    """
    out = np.ones(len(pts))
    for k in neighbor_set(fleet, i):
        if hat_p_rows is not None and k in hat_p_rows:
            row = hat_p_rows[k]
        else:
            row = hat_p_field(space, fleet.positions[k], fleet.params[k], pts)
        out *= 1.0 - row
    return out
