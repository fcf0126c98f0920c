"""Experiment runner: executes the escape process on a scenario and writes
history, positions, heatmaps, figures, and a summary report.

All delimited outputs format floats with repr so identical runs produce
byte-identical files; every file is written to a temporary name and renamed
into place.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .boosting import BoostSpec, RandomStream
from .objective import Heatmap, build_grid, coverage_heatmap, default_grid, \
    write_heatmap_csv, write_heatmap_pgm
from .optimizer import ProcessState, boosting_process
from .scenario import Scenario

HEATMAP_RESOLUTION = 200
NOISE_NOTE = "random_perturb noise: xi_x, xi_y iid uniform on [-amplitude, amplitude], fresh per node per iteration"


@dataclass
class RoundSummary:
    family: str
    k: float
    gamma: int
    kj_scheme: str
    bit: int
    objective: float
    improved: bool
    boosted_converged: bool
    plain_converged: bool


@dataclass
class RunReport:
    scenario: str
    boost_schedule: list[dict]
    rounds: list[RoundSummary]
    initial_objective: float
    final_objective: float
    final_positions: list[list[float]]
    initial_converged: bool
    non_convergence: bool
    wall_clock_seconds: float
    seed: int
    tool_version: str = __version__
    noise_note: str = NOISE_NOTE

    def to_json(self) -> str:
        doc = asdict(self)
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        doc = json.loads(text)
        doc["rounds"] = [RoundSummary(**r) for r in doc["rounds"]]
        return cls(**doc)


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def run_experiment(scenario: Scenario, boost_schedule: list[BoostSpec],
                   seed: int = 0, output_dir: str | Path | None = None,
                   make_figures: bool = True) -> RunReport:
    """Plain ascent to the first equilibrium, then the scheduled escape rounds.

    Writes history.csv, positions.csv, heatmaps (PGM and CSV) at the initial
    equilibrium and the final best configuration, rendered PNG figures, and
    summary.json into output_dir when given.
    """
    t0 = time.perf_counter()
    space, fleet, density = scenario.space, scenario.fleet, scenario.density
    grid = default_grid(space, fleet)
    rng = RandomStream(seed)
    state = boosting_process(space, fleet, density, grid, scenario.optimizer,
                             boost_schedule, rng)
    wall = time.perf_counter() - t0

    non_conv = (not state.initial_converged) or any(
        not (r.boosted_converged and r.plain_converged) for r in state.rounds)
    report = RunReport(
        scenario=scenario.name,
        boost_schedule=[_boost_doc(b) for b in boost_schedule],
        rounds=[RoundSummary(r.family, r.k, r.gamma, r.kj_scheme, r.bit,
                             r.objective_at_equilibrium, r.improved,
                             r.boosted_converged, r.plain_converged)
                for r in state.rounds],
        initial_objective=state.initial_equilibrium_value,
        final_objective=state.best_value,
        final_positions=[[float(x), float(y)] for x, y in state.best_positions],
        initial_converged=state.initial_converged,
        non_convergence=non_conv,
        wall_clock_seconds=wall,
        seed=seed,
    )

    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        _atomic_write(out / "history.csv", history_csv(state))
        _atomic_write(out / "positions.csv", positions_csv(state))
        _write_heatmaps(scenario, state, out, make_figures)
        _atomic_write(out / "summary.json", report.to_json())
        if make_figures:
            from . import figures
            figures.save_history(state, out / "history.png")
    return report


def _boost_doc(b: BoostSpec) -> dict:
    return {"family": b.family, "k": b.k, "gamma": b.gamma,
            "kj_scheme": b.kj_scheme, "amplitude": b.amplitude, "seed": b.seed}


def history_csv(state: ProcessState) -> str:
    lines = ["iteration,phase,round,H,max_grad_norm"]
    for rec in state.history:
        lines.append(f"{rec.iteration},{rec.phase},{rec.round},{rec.objective!r},{rec.max_grad_norm!r}")
    return "\n".join(lines) + "\n"


def positions_csv(state: ProcessState) -> str:
    lines = ["iteration,node,x,y"]
    for it, snap in enumerate(state.positions_log):
        for node, (x, y) in enumerate(snap):
            lines.append(f"{it},{node},{x!r},{y!r}")
    return "\n".join(lines) + "\n"


def _write_heatmaps(scenario: Scenario, state: ProcessState, out: Path,
                    make_figures: bool) -> None:
    space = scenario.space
    xmin, ymin, xmax, ymax = space.bounding_box()
    spacing = max(xmax - xmin, ymax - ymin) / HEATMAP_RESOLUTION
    hgrid = build_grid(space, spacing)
    snaps = {
        "heatmap_initial": state.initial_equilibrium_positions,
        "heatmap_final": state.best_positions,
    }
    for stem, positions in snaps.items():
        fleet = scenario.fleet.with_positions(positions)
        heat = coverage_heatmap(space, fleet, hgrid)
        write_heatmap_pgm(heat, out / f"{stem}.pgm")
        write_heatmap_csv(heat, out / f"{stem}.csv")
        if make_figures:
            from . import figures
            figures.save_heatmap(space, heat, fleet, out / f"{stem}.png")


@dataclass
class ComparisonRow:
    family: str
    gamma: int
    k: float
    kj_scheme: str
    bit: int
    objective: float


@dataclass
class ComparisonTable:
    scenario: str
    rows: list[ComparisonRow]

    def to_csv(self) -> str:
        lines = ["family,gamma,k,kj_scheme,BIt,H_star"]
        for r in self.rows:
            lines.append(f"{r.family},{r.gamma},{r.k!r},{r.kj_scheme},{r.bit},{r.objective!r}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        header = f"{'family':16s} {'gamma':>5s} {'k':>8s} {'scheme':>13s} {'BIt':>6s} {'H*':>12s}"
        lines = [f"scenario: {self.scenario}", header, "-" * len(header)]
        for r in self.rows:
            lines.append(f"{r.family:16s} {r.gamma:5d} {r.k:8.1f} {r.kj_scheme:>13s} "
                         f"{r.bit:6d} {r.objective:12.4f}")
        return "\n".join(lines) + "\n"


def compare_runs(reports: list[RunReport]) -> ComparisonTable:
    """Tabulate final objectives across runs of the same scenario.

    Rows sort by objective descending; ties break lexicographically on
    (family, gamma, k).  Multi-round runs aggregate: families joined with
    '+', iteration counters summed.
    """
    if not reports:
        raise ValueError("no reports to compare")
    names = {r.scenario for r in reports}
    if len(names) != 1:
        raise ValueError(f"reports mix scenarios: {sorted(names)}")
    rows = []
    for rep in reports:
        if rep.rounds:
            fam = "+".join(dict.fromkeys(r.family for r in rep.rounds))
            first = rep.rounds[0]
            rows.append(ComparisonRow(fam, first.gamma, first.k, first.kj_scheme,
                                      sum(r.bit for r in rep.rounds),
                                      rep.final_objective))
        else:
            rows.append(ComparisonRow("none", 0, 0.0, "closest", 0, rep.final_objective))
    rows.sort(key=lambda r: (-r.objective, r.family, r.gamma, r.k))
    return ComparisonTable(names.pop(), rows)
