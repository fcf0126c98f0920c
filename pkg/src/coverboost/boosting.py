"""Weight-transform policies used to escape local optima of the coverage objective.

Each family rescales or augments the interior attraction weight once an
equilibrium is reached: inverse-coverage scaling pulls nodes toward poorly
covered points, pairwise repulsion pushes neighbors apart, gap scaling
amplifies attraction where neighbors leave coverage holes, and a seeded
random perturbation serves as the baseline to compare against.  Boundary
weights are never transformed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import MissionSpace, line_of_sight
from .sensing import Fleet, neighbor_set

FAMILIES = ("none", "p_boost", "neighbor_boost", "phi_boost", "random_perturb")
KJ_SCHEMES = ("line_of_sight", "closest")

# Floor applied to the joint coverage before inverse exponentiation; the
# ideal transform diverges as coverage approaches zero.
P_FLOOR = 1e-3


@dataclass(frozen=True)
class BoostSpec:
    """Configuration of one escape transform.

    gamma >= 1 for production runs of the three structured families;
    gamma = 0 is accepted so identity transforms can be constructed for
    equivalence checks.  amplitude/seed apply to random_perturb only,
    kj_scheme to neighbor_boost only.
    """

    family: str = "none"
    k: float = 1.0
    gamma: int = 1
    kj_scheme: str = "closest"
    amplitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown boost family {self.family!r}")
        if self.kj_scheme not in KJ_SCHEMES:
            raise ValueError(f"unknown kj scheme {self.kj_scheme!r}")
        if self.k < 0:
            raise ValueError("gain k must be nonnegative")
        if self.gamma < 0 or self.gamma != int(self.gamma):
            raise ValueError("gamma must be a nonnegative integer")
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")

    def validate_for_run(self) -> None:
        """Stricter invariants for configured runs (identity constructions exempt)."""
        if self.family in ("p_boost", "neighbor_boost", "phi_boost") and self.gamma < 1:
            raise ValueError(f"{self.family} requires gamma >= 1")


def default_boost(family: str, seed: int = 0) -> BoostSpec:
    """Per-family defaults used by experiments and parameter sweeps."""
    if family == "p_boost":
        return BoostSpec(family="p_boost", k=100.0, gamma=4)
    if family == "neighbor_boost":
        return BoostSpec(family="neighbor_boost", k=300.0, gamma=1, kj_scheme="closest")
    if family == "phi_boost":
        return BoostSpec(family="phi_boost", k=1000.0, gamma=2)
    if family == "random_perturb":
        return BoostSpec(family="random_perturb", amplitude=30.0, seed=seed)
    if family == "none":
        return BoostSpec()
    raise ValueError(f"unknown boost family {family!r}")


def p_boost_alpha(p_at_x, k: float, gamma: int):
    """Inverse-coverage weight multiplier k * max(P, floor)^-gamma.

    Accepts scalars or arrays.  Values near full coverage map to k; the
    floor keeps the low-coverage amplification finite.
    """
    return k * np.maximum(p_at_x, P_FLOOR) ** (-float(gamma))


def phi_boost_alpha(phi_at_x, k: float, gamma: int):
    """Gap-seeking weight multiplier k * phi^gamma (scalar or array)."""
    return k * np.asarray(phi_at_x, dtype=float) ** gamma


def neighbor_gains(space: MissionSpace, fleet: Fleet, i: int, k: float,
                   scheme: str) -> list[tuple[int, float]]:
    """Per-neighbor repulsion gains under the chosen scheme.

    line_of_sight: full gain for every neighbor the node can see, zero
    otherwise.  closest: full gain only for the nearest neighbor.
    """
    if scheme not in KJ_SCHEMES:
        raise ValueError(f"unknown kj scheme {scheme!r}")
    nb = neighbor_set(fleet, i)
    if not nb:
        return []
    si = fleet.positions[i]
    if scheme == "closest":
        dists = [math.hypot(si.x - fleet.positions[j].x, si.y - fleet.positions[j].y)
                 for j in nb]
        winner = nb[int(np.argmin(dists))]
        return [(j, k if j == winner else 0.0) for j in nb]
    gains = []
    for j in nb:
        sj = fleet.positions[j]
        within = math.hypot(si.x - sj.x, si.y - sj.y) <= fleet.params[i].delta
        visible = within and line_of_sight(space, si, sj)
        gains.append((j, k if visible else 0.0))
    return gains


def neighbor_boost_vector(fleet: Fleet, i: int, gains: list[tuple[int, float]],
                          gamma: int, eps: float = 1e-12) -> tuple[float, float]:
    """Summed repulsion k_j / |s_j - s_i|^(gamma+1) * (s_i - s_j) over the gains.

    Vanishing separations are clamped to eps to avoid the singularity.
    """
    si = fleet.positions[i]
    ex = ey = 0.0
    for j, kj in gains:
        if kj == 0.0:
            continue
        sj = fleet.positions[j]
        dx, dy = si.x - sj.x, si.y - sj.y
        dist = max(math.hypot(dx, dy), eps)
        scale = kj / dist ** (gamma + 1)
        ex += scale * dx
        ey += scale * dy
    return ex, ey


class RandomStream:
    """Deterministic per-(node, iteration) noise source.

    Each draw derives an independent generator from (seed, node, iteration),
    so evaluation order and parallelism cannot change the sequence.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)

    def perturbation(self, node: int, iteration: int, amplitude: float) -> tuple[float, float]:
        xi_x, xi_y = random_perturbation(
            np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(node, iteration))),
            amplitude)
        return xi_x, xi_y


def random_perturbation(rng: np.random.Generator, amplitude: float) -> tuple[float, float]:
    """Independent uniform draws on [-amplitude, amplitude] for each axis."""
    if amplitude < 0:
        raise ValueError("amplitude must be nonnegative")
    xi = rng.uniform(-amplitude, amplitude, 2)
    return float(xi[0]), float(xi[1])
