"""Synchronous gradient-ascent loop with escape rounds and best-solution bookkeeping.

Each iteration snapshots all positions, evaluates every node's gradient
against that snapshot, then applies all moves at once (clamped and clipped
to the feasible space).  An escape round activates a weight transform at an
equilibrium, rides the transformed gradient to a new equilibrium, reverts,
re-converges, and keeps the better of the two configurations, so the final
objective value never drops below the pre-escape value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boosting import BoostSpec, RandomStream
from .geometry import MissionSpace, Point2, clip_move
from .gradient import fleet_gradients
from .objective import FieldCache, QuadratureGrid
from .sensing import DensityField, Fleet


@dataclass(frozen=True)
class OptimizerConfig:
    step: float = 1.0
    max_step_len: float = 1.5
    eps_grad: float = 0.015
    patience: int = 5
    max_iters_per_phase: int = 600
    trigger: str = "global"

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.eps_grad <= 0:
            raise ValueError("eps_grad must be positive")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if self.trigger not in ("global", "self"):
            raise ValueError("trigger must be 'global' or 'self'")


def default_config(fleet: Fleet, trigger: str = "global") -> OptimizerConfig:
    """Step sizes scaled to the fleet: displacement clamp of a tenth of the
    sensing radius and an equilibrium threshold on the natural gradient scale."""
    delta = min(p.delta for p in fleet.params)
    p0 = max(p.p0 for p in fleet.params)
    return OptimizerConfig(step=1.0, max_step_len=delta / 10.0,
                           eps_grad=1e-3 * max(p0, 1e-6) * delta,
                           patience=5, max_iters_per_phase=600, trigger=trigger)


@dataclass
class HistoryRecord:
    iteration: int
    phase: str
    round: int
    objective: float
    max_grad_norm: float


@dataclass
class RoundRecord:
    index: int
    family: str
    k: float
    gamma: int
    kj_scheme: str
    bit: int
    objective_at_equilibrium: float
    improved: bool
    boosted_converged: bool
    plain_converged: bool


@dataclass
class ProcessState:
    positions: np.ndarray
    phase: str = "plain"
    round: int = 0
    iteration: int = 0
    best_positions: np.ndarray | None = None
    best_value: float = -math.inf
    initial_equilibrium_value: float | None = None
    initial_equilibrium_positions: np.ndarray | None = None
    initial_converged: bool = True
    bit_counter: int = 0
    history: list[HistoryRecord] = field(default_factory=list)
    node_norms: list[np.ndarray] = field(default_factory=list)
    positions_log: list[np.ndarray] = field(default_factory=list)
    rounds: list[RoundRecord] = field(default_factory=list)

    @classmethod
    def from_fleet(cls, fleet: Fleet) -> "ProcessState":
        return cls(positions=fleet.position_array().copy())

    def current_fleet(self, fleet: Fleet) -> Fleet:
        return fleet.with_positions(self.positions)


def step_once(space: MissionSpace, fleet: Fleet, density: DensityField,
              grid: QuadratureGrid, config: OptimizerConfig,
              boost_for_node, state: ProcessState,
              rng: RandomStream | None = None) -> ProcessState:
    """One synchronous update: gradients from a common snapshot, clamped moves,
    feasibility-clipped positions, and a history record of the snapshot."""
    snapshot = state.current_fleet(fleet)
    grads, cache = fleet_gradients(space, snapshot, density, grid,
                                   boost_for_node, rng, state.iteration)
    norms = np.array([g.norm for g in grads])
    h_val = cache.objective()
    state.history.append(HistoryRecord(state.iteration, state.phase, state.round,
                                       h_val, float(norms.max())))
    state.node_norms.append(norms)
    state.positions_log.append(state.positions.copy())
    new_positions = state.positions.copy()
    for i, g in enumerate(grads):
        dx, dy = config.step * g.ex, config.step * g.ey
        length = math.hypot(dx, dy)
        if length > config.max_step_len:
            scale = config.max_step_len / length
            dx, dy = dx * scale, dy * scale
        src = Point2(state.positions[i, 0], state.positions[i, 1])
        dst = clip_move(space, src, Point2(src.x + dx, src.y + dy))
        if __debug__:
            from .geometry import contains
            assert contains(space, dst), f"node {i} left the feasible space"
        new_positions[i] = (dst.x, dst.y)
    state.positions = new_positions
    state.iteration += 1
    return state


def detect_equilibrium(state: ProcessState, config: OptimizerConfig,
                       node_scope="all", since: int = 0) -> bool:
    """True when the scoped gradient norms stayed under the threshold for the
    last `patience` recorded iterations (not reaching back before `since`)."""
    if len(state.node_norms) - since < config.patience:
        return False
    recent = state.node_norms[-config.patience:]
    if node_scope == "all":
        return all(float(n.max()) < config.eps_grad for n in recent)
    return all(float(n[node_scope]) < config.eps_grad for n in recent)


def _node_settled(state: ProcessState, config: OptimizerConfig, i: int, since: int) -> bool:
    return detect_equilibrium(state, config, node_scope=i, since=since)


def run_to_equilibrium(space: MissionSpace, fleet: Fleet, density: DensityField,
                       grid: QuadratureGrid, config: OptimizerConfig,
                       boost: BoostSpec | None, state: ProcessState,
                       phase: str, rng: RandomStream | None = None
                       ) -> tuple[ProcessState, int, bool]:
    """Iterate step_once until equilibrium or the per-phase iteration cap.

    In the boosted phase with the self trigger, each node switches to the
    transformed gradient only once its own plain gradient has settled;
    with the global trigger every node switches immediately (the caller
    enters the phase from a global equilibrium).
    """
    state.phase = phase
    phase_start = len(state.node_norms)
    activated = [config.trigger == "global" or phase != "boosted"] * fleet.n
    used = 0
    converged = False
    boosting = boost is not None and boost.family != "none" and phase == "boosted"

    def boost_for_node(i):
        if boosting and activated[i]:
            return boost
        return None

    while used < config.max_iters_per_phase:
        step_once(space, fleet, density, grid, config, boost_for_node, state, rng)
        used += 1
        if boosting and config.trigger == "self":
            for i in range(fleet.n):
                if not activated[i] and _node_settled(state, config, i, phase_start):
                    activated[i] = True
        if detect_equilibrium(state, config, "all", since=phase_start):
            converged = True
            break
    return state, used, converged


def _objective_at(space: MissionSpace, fleet: Fleet, density: DensityField,
                  grid: QuadratureGrid, state: ProcessState) -> float:
    return FieldCache(space, state.current_fleet(fleet), density, grid).objective()


def boosting_process(space: MissionSpace, fleet: Fleet, density: DensityField,
                     grid: QuadratureGrid, config: OptimizerConfig,
                     boost_schedule: list[BoostSpec],
                     rng: RandomStream | None = None,
                     state: ProcessState | None = None) -> ProcessState:
    """Plain ascent to an equilibrium, then one escape round per schedule entry.

    Every round: record the incumbent, ride the transformed gradient to an
    equilibrium, revert to the plain gradient, re-converge, then keep
    whichever configuration scores higher (restoring the incumbent
    otherwise).  The returned state's best value can never fall below the
    initial equilibrium value.
    """
    for spec in boost_schedule:
        spec.validate_for_run()
    if state is None:
        state = ProcessState.from_fleet(fleet)
    if rng is None:
        seeds = [b.seed for b in boost_schedule if b.family == "random_perturb"]
        rng = RandomStream(seeds[0] if seeds else 0)

    state.round = 0
    state, _, converged = run_to_equilibrium(space, fleet, density, grid, config,
                                             None, state, "plain", rng)
    state.initial_converged = converged
    h0 = _objective_at(space, fleet, density, grid, state)
    state.initial_equilibrium_value = h0
    state.initial_equilibrium_positions = state.positions.copy()
    state.best_positions = state.positions.copy()
    state.best_value = h0

    for idx, spec in enumerate(boost_schedule, start=1):
        state.round = idx
        state.bit_counter = 0
        state, used_b, conv_b = run_to_equilibrium(space, fleet, density, grid,
                                                   config, spec, state, "boosted", rng)
        state.bit_counter += used_b
        state, used_p, conv_p = run_to_equilibrium(space, fleet, density, grid,
                                                   config, None, state, "plain", rng)
        state.bit_counter += used_p
        h_eq = _objective_at(space, fleet, density, grid, state)
        improved = h_eq > state.best_value
        if improved:
            state.best_positions = state.positions.copy()
            state.best_value = h_eq
        else:
            state.positions = state.best_positions.copy()
        state.rounds.append(RoundRecord(idx, spec.family, spec.k, spec.gamma,
                                        spec.kj_scheme, state.bit_counter, h_eq,
                                        improved, conv_b, conv_p))

    state.positions = state.best_positions.copy()
    return state
