"""Multi-agent coverage control with boosted gradient ascent.

A library and CLI for placing sensor nodes in polygonal mission spaces with
obstacles so as to maximize the joint probability of detecting events, with
an escape mechanism (weight boosting) that moves the fleet out of poor local
optima without ever ending up worse than where it started.
"""

__version__ = "0.1.0"

from .boosting import BoostSpec, RandomStream, default_boost
from .geometry import (AnchorInfo, GeometryError, MissionSpace, PathologicalPosition,
                       Point2, Polygon, VisibilityRegion, clip_move, contains,
                       line_of_sight, visibility_region)
from .gradient import GradientVector, boosted_gradient, boundary_term, horizon_term, \
    interior_term, local_gradient, weight_w1, weight_w2
from .objective import Heatmap, QuadratureGrid, build_grid, coverage_heatmap, \
    default_grid, local_H_i, objective_H, tilde_H
from .optimizer import OptimizerConfig, ProcessState, boosting_process, \
    default_config, detect_equilibrium, run_to_equilibrium, step_once
from .runner import ComparisonTable, RunReport, compare_runs, run_experiment
from .scenario import Scenario, ScenarioError, bundled_scenario, load_scenario, \
    parse_scenario, save_scenario, serialize_scenario
from .sensing import DensityField, Fleet, GridDensity, SensorParams, UniformDensity, \
    detection_prob, hat_p, joint_detection, make_fleet, neighbor_set, phi
