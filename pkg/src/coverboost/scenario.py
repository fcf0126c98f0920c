"""Scenario documents: mission geometry, density, fleet, and optimizer settings.

Scenarios are JSON with vertex arrays for geometry.  Parsing validates all
geometric invariants up front and reports distinct diagnostics with location
information; serialize followed by parse reproduces the scenario exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .geometry import GeometryError, MissionSpace, Point2, Polygon, SelfIntersectionError, contains
from .optimizer import OptimizerConfig
from .sensing import DensityField, Fleet, GridDensity, SensorParams, UniformDensity, make_fleet

BUNDLED = ("general", "room", "maze", "narrow")


class ScenarioError(ValueError):
    """Invalid scenario document."""


class ScenarioFormatError(ScenarioError):
    """Structurally malformed document (missing or mistyped fields)."""


class SelfIntersectingPolygonError(ScenarioError):
    def __init__(self, where: str, edge_a: int, edge_b: int):
        self.where = where
        self.edge_a = edge_a
        self.edge_b = edge_b
        super().__init__(f"{where}: edges {edge_a} and {edge_b} intersect")


class InfeasibleStartError(ScenarioError):
    def __init__(self, node: int, position):
        self.node = node
        super().__init__(f"node {node} starts at infeasible position {tuple(position)}")


@dataclass(frozen=True)
class Scenario:
    name: str
    space: MissionSpace
    density: DensityField
    fleet: Fleet
    optimizer: OptimizerConfig


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioFormatError(f"not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ScenarioFormatError("top level must be an object")

    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise ScenarioFormatError("missing or empty 'name'")

    mission = _require(doc, "mission", dict)
    outer = _polygon(_require(mission, "outer", list), "mission.outer")
    obstacles = []
    for k, ring in enumerate(mission.get("obstacles", [])):
        obstacles.append(_polygon(ring, f"mission.obstacles[{k}]"))
    try:
        space = MissionSpace(outer, obstacles)
    except GeometryError as e:
        raise ScenarioError(f"mission geometry: {e}") from e

    density = _density(doc.get("density", {"kind": "uniform", "value": 1.0}))
    fleet = _fleet(_require(doc, "fleet", dict), space)
    optimizer = _optimizer(doc.get("optimizer", {}))
    return Scenario(name, space, density, fleet, optimizer)


def _require(doc: dict, key: str, kind):
    if key not in doc:
        raise ScenarioFormatError(f"missing '{key}'")
    val = doc[key]
    if not isinstance(val, kind):
        raise ScenarioFormatError(f"'{key}' must be a {kind.__name__}")
    return val


def _polygon(ring, where: str) -> Polygon:
    if not isinstance(ring, list) or len(ring) < 3:
        raise ScenarioFormatError(f"{where}: need at least 3 vertices")
    for v in ring:
        if not (isinstance(v, list) and len(v) == 2
                and all(isinstance(c, (int, float)) for c in v)):
            raise ScenarioFormatError(f"{where}: vertices must be [x, y] pairs")
    try:
        return Polygon(ring)
    except SelfIntersectionError as e:
        raise SelfIntersectingPolygonError(where, e.edge_a, e.edge_b) from e
    except GeometryError as e:
        raise ScenarioError(f"{where}: {e}") from e


def _density(doc) -> DensityField:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ScenarioFormatError("'density' must be an object with a 'kind'")
    if doc["kind"] == "uniform":
        return UniformDensity(float(doc.get("value", 1.0)))
    if doc["kind"] == "grid":
        try:
            return GridDensity(origin=tuple(doc["origin"]), spacing=float(doc["spacing"]),
                               samples=tuple(tuple(float(v) for v in row)
                                             for row in doc["values"]))
        except (KeyError, TypeError, ValueError) as e:
            raise ScenarioFormatError(f"grid density: {e}") from e
    raise ScenarioFormatError(f"unknown density kind {doc['kind']!r}")


def _sensor(doc, where: str) -> SensorParams:
    try:
        return SensorParams(delta=float(doc["delta"]), p0=float(doc["p0"]),
                            lam=float(doc["lambda"]))
    except (KeyError, TypeError, ValueError) as e:
        raise ScenarioFormatError(f"{where}: {e}") from e


def _fleet(doc: dict, space: MissionSpace) -> Fleet:
    positions = _require(doc, "positions", list)
    if not positions:
        raise ScenarioFormatError("fleet.positions must not be empty")
    params_doc = _require(doc, "params", (dict, list))
    if isinstance(params_doc, dict):
        params = _sensor(params_doc, "fleet.params")
    else:
        if len(params_doc) != len(positions):
            raise ScenarioFormatError("fleet.params list must match positions length")
        params = [_sensor(p, f"fleet.params[{i}]") for i, p in enumerate(params_doc)]
    fleet = make_fleet(positions, params)
    for i, p in enumerate(fleet.positions):
        if not contains(space, p):
            raise InfeasibleStartError(i, p)
    return fleet


def _optimizer(doc: dict) -> OptimizerConfig:
    if not isinstance(doc, dict):
        raise ScenarioFormatError("'optimizer' must be an object")
    known = {"step", "max_step_len", "eps_grad", "patience", "max_iters_per_phase", "trigger"}
    unknown = set(doc) - known
    if unknown:
        raise ScenarioFormatError(f"unknown optimizer fields: {sorted(unknown)}")
    defaults = OptimizerConfig()
    try:
        return OptimizerConfig(
            step=float(doc.get("step", defaults.step)),
            max_step_len=float(doc.get("max_step_len", defaults.max_step_len)),
            eps_grad=float(doc.get("eps_grad", defaults.eps_grad)),
            patience=int(doc.get("patience", defaults.patience)),
            max_iters_per_phase=int(doc.get("max_iters_per_phase", defaults.max_iters_per_phase)),
            trigger=str(doc.get("trigger", defaults.trigger)),
        )
    except ValueError as e:
        raise ScenarioFormatError(f"optimizer: {e}") from e


def serialize_scenario(scenario: Scenario) -> str:
    doc = {
        "name": scenario.name,
        "mission": {
            "outer": [[v.x, v.y] for v in scenario.space.outer.vertices],
            "obstacles": [[[v.x, v.y] for v in obs.vertices]
                          for obs in scenario.space.obstacles],
        },
        "density": _density_doc(scenario.density),
        "fleet": _fleet_doc(scenario.fleet),
        "optimizer": {
            "step": scenario.optimizer.step,
            "max_step_len": scenario.optimizer.max_step_len,
            "eps_grad": scenario.optimizer.eps_grad,
            "patience": scenario.optimizer.patience,
            "max_iters_per_phase": scenario.optimizer.max_iters_per_phase,
            "trigger": scenario.optimizer.trigger,
        },
    }
    return json.dumps(doc, indent=2) + "\n"


def _density_doc(density: DensityField) -> dict:
    if isinstance(density, UniformDensity):
        return {"kind": "uniform", "value": density.level}
    if isinstance(density, GridDensity):
        return {"kind": "grid", "origin": list(density.origin),
                "spacing": density.spacing,
                "values": [list(row) for row in density.samples]}
    raise ScenarioError(f"cannot serialize density {type(density).__name__}")


def _fleet_doc(fleet: Fleet) -> dict:
    doc = {"positions": [[p.x, p.y] for p in fleet.positions]}
    if fleet.homogeneous:
        prm = fleet.params[0]
        doc["params"] = {"delta": prm.delta, "p0": prm.p0, "lambda": prm.lam}
    else:
        doc["params"] = [{"delta": p.delta, "p0": p.p0, "lambda": p.lam}
                         for p in fleet.params]
    return doc


def load_scenario(path: str | Path) -> Scenario:
    return parse_scenario(Path(path).read_text())


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(serialize_scenario(scenario))


def bundled_scenario(name: str) -> Scenario:
    """Load one of the shipped obstacle-configuration scenarios by name."""
    if name not in BUNDLED:
        raise ScenarioError(f"unknown bundled scenario {name!r}; choose from {BUNDLED}")
    text = resources.files("coverboost.scenarios").joinpath(f"{name}.json").read_text()
    return parse_scenario(text)
