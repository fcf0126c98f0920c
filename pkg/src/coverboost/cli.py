"""Command-line interface: run experiments, sweep parameters, check gradients,
and re-render heatmaps.

Exit codes: 0 success, 2 validation error (bad scenario or arguments),
3 completed with a non-convergence flag.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .boosting import BoostSpec, FAMILIES, default_boost
from .gradcheck import check_fleet, run_suite, summarize
from .runner import compare_runs, run_experiment
from .scenario import BUNDLED, Scenario, ScenarioError, bundled_scenario, load_scenario

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NON_CONVERGENCE = 3

KJ_ALIASES = {"los": "line_of_sight", "line_of_sight": "line_of_sight", "closest": "closest"}


def _load(arg: str) -> Scenario:
    path = Path(arg)
    if path.exists():
        return load_scenario(path)
    if arg in BUNDLED:
        return bundled_scenario(arg)
    raise ScenarioError(f"scenario {arg!r} is neither a file nor a bundled name {BUNDLED}")


def _schedule(family: str, gamma: int, k: float, kj_scheme: str, rounds: int,
              amplitude: float | None, seed: int) -> list[BoostSpec]:
    if family == "none":
        return []
    base = default_boost(family, seed=seed)
    spec = replace(base,
                   gamma=gamma if gamma is not None else base.gamma,
                   k=k if k is not None else base.k,
                   kj_scheme=KJ_ALIASES[kj_scheme],
                   amplitude=amplitude if amplitude is not None else base.amplitude,
                   seed=seed)
    spec.validate_for_run()
    return [spec] * rounds


def cmd_run(args) -> int:
    scenario = _load(args.scenario)
    if args.trigger:
        scenario = replace(scenario, optimizer=replace(scenario.optimizer, trigger=args.trigger))
    schedule = _schedule(args.boost, args.gamma, args.k, args.kj_scheme,
                         args.rounds, args.amplitude, args.seed)
    report = run_experiment(scenario, schedule, seed=args.seed, output_dir=args.out,
                            make_figures=not args.no_figures)
    print(f"scenario={report.scenario} initial H={report.initial_objective:.4f} "
          f"final H*={report.final_objective:.4f}")
    for r in report.rounds:
        print(f"  round: {r.family} gamma={r.gamma} k={r.k:g} BIt={r.bit} "
              f"H={r.objective:.4f} improved={r.improved}")
    if report.non_convergence:
        print("warning: a phase hit its iteration cap before reaching equilibrium")
        return EXIT_NON_CONVERGENCE
    return EXIT_OK


def cmd_sweep(args) -> int:
    scenario = _load(args.scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    worst = EXIT_OK
    for family in args.families.split(","):
        family = family.strip()
        if family not in FAMILIES or family == "none":
            raise ScenarioError(f"cannot sweep family {family!r}")
        gammas = [int(g) for g in args.gammas.split(",")]
        ks = [float(k) for k in args.ks.split(",")]
        if family == "random_perturb":
            gammas, ks = [1], [default_boost(family).amplitude]
        for gamma in gammas:
            for k in ks:
                run_dir = out / f"{family}_g{gamma}_k{k:g}"
                amplitude = k if family == "random_perturb" else None
                schedule = _schedule(family, gamma, k, args.kj_scheme, args.rounds,
                                     amplitude, args.seed)
                report = run_experiment(scenario, schedule, seed=args.seed,
                                        output_dir=run_dir,
                                        make_figures=not args.no_figures)
                reports.append(report)
                if report.non_convergence:
                    worst = EXIT_NON_CONVERGENCE
                print(f"{family} gamma={gamma} k={k:g}: H*={report.final_objective:.4f}")
    table = compare_runs(reports)
    (out / "comparison.csv").write_text(table.to_csv())
    (out / "comparison.txt").write_text(table.to_text())
    if not args.no_figures:
        from . import figures
        figures.save_comparison(table, out / "comparison.png")
    print(table.to_text())
    return worst


def cmd_gradcheck(args) -> int:
    if args.scenario:
        scenario = _load(args.scenario)
        rows = []
        rng = np.random.default_rng(args.seed)
        from .geometry import contains
        from .gradient import is_pathological
        xmin, ymin, xmax, ymax = scenario.space.bounding_box()
        for cfg in range(args.samples):
            positions = []
            guard = 0
            while len(positions) < scenario.fleet.n and guard < 20000:
                guard += 1
                p = (float(rng.uniform(xmin, xmax)), float(rng.uniform(ymin, ymax)))
                if not contains(scenario.space, p):
                    continue
                if is_pathological(scenario.space, p, scenario.fleet.params[0].delta):
                    continue
                if any(np.hypot(q[0] - p[0], q[1] - p[1]) < 1.0 for q in positions):
                    continue
                positions.append(p)
            fleet = scenario.fleet.with_positions(positions)
            rows.extend(check_fleet(scenario.space, fleet, scenario.density,
                                    config_id=cfg))
    else:
        rows = run_suite(args.samples, seed=args.seed)
    print(summarize(rows))
    return EXIT_OK


def cmd_render(args) -> int:
    from .objective import read_heatmap_csv
    centers, values = read_heatmap_csv(args.heatmap)
    xs = np.unique(centers[:, 0])
    ys = np.unique(centers[:, 1])
    nx, ny = len(xs), len(ys)
    if nx * ny != len(values):
        raise ScenarioError(f"{args.heatmap}: rows do not form a full grid")
    order = np.lexsort((centers[:, 0], centers[:, 1]))
    img = values[order].reshape(ny, nx)
    out_dir = Path(args.out) if args.out else Path(args.heatmap).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.heatmap).stem
    levels = np.where(np.isnan(img), 0, np.rint(255.0 * np.nan_to_num(img))).astype(int)
    lines = ["P2", f"{nx} {ny}", "255"]
    for row in levels[::-1]:
        lines.append(" ".join(str(v) for v in row))
    (out_dir / f"{stem}.pgm").write_text("\n".join(lines) + "\n")
    if not args.no_figures:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(6, 6))
        im = ax.imshow(img, origin="lower", vmin=0.0, vmax=1.0, cmap="viridis",
                       extent=(xs.min(), xs.max(), ys.min(), ys.max()))
        fig.colorbar(im, ax=ax, shrink=0.85)
        ax.set_aspect("equal")
        fig.tight_layout()
        fig.savefig(out_dir / f"{stem}.png", dpi=130)
        plt.close(fig)
    print(f"wrote {out_dir / (stem + '.pgm')}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coverboost",
                                 description="coverage control with boosted gradient ascent")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--scenario", required=True, help="scenario file or bundled name")
    run.add_argument("--boost", default="none", choices=list(FAMILIES))
    run.add_argument("--gamma", type=int, default=None)
    run.add_argument("--k", type=float, default=None)
    run.add_argument("--kj-scheme", default="closest", choices=sorted(KJ_ALIASES))
    run.add_argument("--rounds", type=int, default=1)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--trigger", choices=["global", "self"], default=None)
    run.add_argument("--amplitude", type=float, default=None,
                     help="noise amplitude (random_perturb only)")
    run.add_argument("--out", required=True)
    run.add_argument("--no-figures", action="store_true")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="run a parameter grid and compare results")
    sweep.add_argument("--scenario", required=True)
    sweep.add_argument("--families", default="p_boost,neighbor_boost,phi_boost")
    sweep.add_argument("--gammas", default="1,2,4")
    sweep.add_argument("--ks", default="100,300,500,1000")
    sweep.add_argument("--kj-scheme", default="closest", choices=sorted(KJ_ALIASES))
    sweep.add_argument("--rounds", type=int, default=1)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--out", required=True)
    sweep.add_argument("--no-figures", action="store_true")
    sweep.set_defaults(func=cmd_sweep)

    gc = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    gc.add_argument("--scenario", default=None,
                    help="scenario for random placements; omit for the built-in suite")
    gc.add_argument("--samples", type=int, default=20)
    gc.add_argument("--seed", type=int, default=2024)
    gc.set_defaults(func=cmd_gradcheck)

    render = sub.add_parser("render", help="re-emit a PGM (and PNG) from a heatmap CSV")
    render.add_argument("--heatmap", required=True)
    render.add_argument("--out", default=None)
    render.add_argument("--no-figures", action="store_true")
    render.set_defaults(func=cmd_render)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
