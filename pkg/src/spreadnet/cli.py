"""Command-line front end: ``spreadnet {degree,equilibrium,optimize,sweep,simulate}``.

Every command writes CSV files plus a ``manifest.json`` into ``--out``.
Exit codes: 0 success, 2 usage or invalid parameters, 3 infeasible,
4 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .degree import LayerSpec, StrandId, all_strands, strand_model
from .epidemic import (
    effective_rate,
    epidemic_threshold,
    evaluate_strands,
    solve_theta_exact,
    theta_approx,
)
from .errors import (
    ConvergenceError,
    InfeasibleError,
    InvalidParameterError,
    StepSizeError,
    UndefinedThresholdError,
)
from .geometry import Window, empirical_degree_histogram, sample_graph, total_variation
from .mission import get_preset, load_mission, PRESETS
from .optimizer import MissionSpec, optimize, sweep_threat, verify_original
from .simulate import SimConfig, run_sis

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 2, 3, 4

FIG10_RANGE_KM = 0.2
FIG10_DENSITIES = (25.0, 50.0, 100.0)


def fmt(x) -> str:
    """Stable text form for CSV cells."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        # shortest round-trip form: lossless and platform independent
        return repr(float(x))
    return str(x)


class Run:
    """Collects output files for one command and writes the manifest."""

    def __init__(self, command: str, args: argparse.Namespace, argv: list[str]):
        self.command = command
        self.args = args
        self.argv = argv
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: list[Path] = []
        self.started = time.perf_counter()

    def write_csv(self, name: str, header: list[str], rows) -> Path:
        path = self.out / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(x) for x in row])
        self.outputs.append(path)
        return path

    def finish(self) -> None:
        params = {k: v for k, v in sorted(vars(self.args).items()) if k not in ("func", "subparser")}
        manifest = {
            "command": self.command,
            "argv": self.argv,
            "parameters": params,
            "seed": getattr(self.args, "seed", None),
            "version": __version__,
            "outputs": [
                {"path": p.name, "sha256": hashlib.sha256(p.read_bytes()).hexdigest()}
                for p in self.outputs
            ],
            "wall_clock_s": round(time.perf_counter() - self.started, 3),
        }
        text = json.dumps(manifest, indent=2, default=str)
        (self.out / "manifest.json").write_text(text + "\n", encoding="utf-8", newline="\n")


def parse_delta_grid(text: str) -> list[float]:
    """``0.3``, ``0,0.1,0.5`` or ``start:stop:step`` (stop included)."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            n = int(round((stop - start) / step)) + 1
            return [round(start + i * step, 12) for i in range(n) if start + i * step <= stop + 1e-9]
        return [float(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad threat level grid {text!r}") from None


def _strand_name(strand: StrandId) -> str:
    return str(strand).replace(":", "_")


def _mission_from_args(args, parser) -> MissionSpec | None:
    if args.preset and args.mission:
        parser.error("--preset and --mission are mutually exclusive")
    if args.preset:
        return get_preset(args.preset)
    if args.mission:
        return load_mission(args.mission)
    return None


def _single_delta(args, parser, default: float = 0.0) -> float:
    if args.delta is None:
        return default
    values = parse_delta_grid(args.delta)
    if len(values) != 1:
        parser.error("this command takes a single threat level")
    delta = values[0]
    if not 0.0 <= delta <= 1.0:
        parser.error(f"--delta must lie in [0, 1], got {delta}")
    return delta


def _layers_from_args(args, parser, mission: MissionSpec | None, delta: float) -> list[LayerSpec]:
    """Design from --lambda/--range flags, or the optimized design of a mission."""
    if args.density:
        if args.range_m:
            ranges = [r / 1000.0 for r in args.range_m]
        elif args.range_km:
            ranges = list(args.range_km)
        else:
            parser.error("--lambda needs --range-m or --range-km")
        if len(ranges) != len(args.density):
            parser.error("--lambda and the range flag need the same number of values")
        return [LayerSpec(lam, r) for lam, r in zip(args.density, ranges)]
    if mission is None:
        parser.error("give a design (--lambda with --range-m/--range-km) or a mission (--preset/--mission)")
    result = optimize(mission.with_delta(delta), verify=False)
    return result.design.layers()


def _strands(args, num_layers: int) -> list[StrandId]:
    if not args.strand:
        return all_strands(num_layers)
    strands = [StrandId.parse(s) for s in args.strand]
    for s in strands:
        s.check_layers(num_layers)
    return strands


def cmd_degree(args, parser, run: Run) -> int:
    mission = _mission_from_args(args, parser)
    delta = _single_delta(args, parser, mission.delta if mission else 0.0)
    layers = _layers_from_args(args, parser, mission, delta)
    strands = _strands(args, len(layers))
    graph = None
    if args.empirical:
        window = Window.square(args.window_km)
        graph = sample_graph([l.density for l in layers], [l.range_km for l in layers], window, args.seed)
    summary = []
    for strand in strands:
        model = strand_model(layers, strand)
        table = model.pmf_table()
        try:
            alpha_c = epidemic_threshold(model)
        except UndefinedThresholdError:
            alpha_c = float("nan")
        row = [strand, model.mean, model.second_moment, model.k_max, alpha_c]
        name = _strand_name(strand)
        if graph is None:
            run.write_csv(f"degree_pmf_{name}.csv", ["k", "pmf"], zip(model.support, table))
        else:
            hist = empirical_degree_histogram(graph, strand)
            size = max(hist.size, table.size)
            counts = np.pad(hist, (0, size - hist.size))
            pmf = np.pad(table, (0, size - table.size))
            total = counts.sum()
            freq = counts / total if total else counts.astype(float)
            run.write_csv(
                f"degree_pmf_{name}.csv",
                ["k", "pmf", "count", "empirical"],
                zip(range(size), pmf, counts, freq),
            )
            tv = total_variation(hist, table) if total else float("nan")
            row += [int(total), float(np.dot(np.arange(size), freq)), tv]
        summary.append(row)
    header = ["strand", "mean", "second_moment", "k_max", "alpha_c"]
    if graph is not None:
        header += ["nodes", "empirical_mean", "tv_distance"]
    run.write_csv("degree_summary.csv", header, summary)
    return EXIT_OK


def cmd_equilibrium(args, parser, run: Run) -> int:
    mission = _mission_from_args(args, parser)
    if args.fig10:
        rows = []
        alphas = np.round(np.arange(1, 21) * 0.05, 10)
        for lam in FIG10_DENSITIES:
            model = strand_model([LayerSpec(lam, FIG10_RANGE_KM)], StrandId.intra(1))
            for a in alphas:
                eq = solve_theta_exact(model, float(a))
                approx = theta_approx(model, float(a))
                rows.append([lam, model.mean, a, eq.theta, approx, eq.theta - approx, eq.average_informed])
        run.write_csv(
            "fig10.csv",
            ["lambda", "mean_degree", "alpha", "theta_exact", "theta_approx", "gap", "avg_informed"],
            rows,
        )
        if not args.density and mission is None:
            return EXIT_OK
    delta = _single_delta(args, parser, mission.delta if mission else 0.0)
    layers = _layers_from_args(args, parser, mission, delta)
    alpha = effective_rate(args.gamma, delta)
    strands = _strands(args, len(layers))
    results = evaluate_strands(layers, alpha, strands)
    rows = []
    for strand in strands:
        eq = results[strand]
        if strand.kind == "combined" and sum(l.density for l in layers) <= 0:
            mean, approx = 0.0, 0.0
        else:
            model = strand_model(layers, strand)
            mean, approx = model.mean, theta_approx(model, alpha)
        rows.append([strand, delta, alpha, mean, eq.theta, approx, eq.average_informed, eq.iterations])
    run.write_csv(
        "equilibrium.csv",
        ["strand", "delta", "alpha", "mean_degree", "theta_exact", "theta_approx", "avg_informed", "iterations"],
        rows,
    )
    return EXIT_OK


def _design_header(M: int) -> list[str]:
    return [f"lambda_{m}" for m in range(1, M + 1)] + [f"r_{m}_km" for m in range(1, M + 1)]


def _require_mission(args, parser) -> MissionSpec:
    mission = _mission_from_args(args, parser)
    if mission is None:
        parser.error("give --preset or --mission")
    return mission


def cmd_optimize(args, parser, run: Run) -> int:
    mission = _require_mission(args, parser)
    delta = _single_delta(args, parser, mission.delta)
    mission = mission.with_delta(delta)
    M = mission.num_layers
    header = ["delta", "alpha"] + _design_header(M) + ["cost", "feasible", "iterations"]
    try:
        result = optimize(mission, verify=False)
    except InfeasibleError as exc:
        run.write_csv("optimize.csv", header, [[delta, mission.alpha] + [""] * (2 * M) + ["", False, 0]])
        print(f"infeasible: {exc} (constraints: {', '.join(map(str, exc.certificate))})", file=sys.stderr)
        return EXIT_INFEASIBLE
    d = result.design
    run.write_csv(
        "optimize.csv",
        header,
        [[delta, mission.alpha, *d.densities, *d.ranges_km, result.cost, result.feasible_surrogate, result.acs_iterations]],
    )
    run.write_csv("optimize_trace.csv", ["iteration", "cost"], enumerate(result.cost_trace))
    run.write_csv(
        "optimize_residuals.csv",
        ["strand", "residual"],
        [[s, v] for s, v in result.residuals.items()],
    )
    if args.verify:
        report = verify_original(result, mission)
        run.write_csv(
            "verify.csv",
            ["strand", "threshold", "theta", "avg_informed", "passed"],
            [[row.strand, row.threshold, row.theta, row.average_informed, row.passed] for row in report.rows],
        )
    return EXIT_OK


def cmd_sweep(args, parser, run: Run) -> int:
    mission = _require_mission(args, parser)
    deltas = parse_delta_grid(args.delta) if args.delta is not None else [mission.delta]
    if any(not 0.0 <= d < 1.0 for d in deltas):
        parser.error("sweep threat levels must lie in [0, 1)")
    rows = sweep_threat(mission, deltas, jobs=args.jobs)
    M = mission.num_layers
    out = []
    for row in rows:
        if row.result is None:
            out.append([row.delta, row.alpha] + [""] * (2 * M) + ["", False, 0])
        else:
            d = row.result.design
            out.append([row.delta, row.alpha, *d.densities, *d.ranges_km, row.result.cost,
                        row.result.feasible_surrogate, row.result.acs_iterations])
    run.write_csv("sweep.csv", ["delta", "alpha"] + _design_header(M) + ["cost", "feasible", "iterations"], out)
    if not any(row.feasible for row in rows):
        print("every threat level is infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_simulate(args, parser, run: Run) -> int:
    mission = _mission_from_args(args, parser)
    delta = _single_delta(args, parser, mission.delta if mission else 0.0)
    layers = _layers_from_args(args, parser, mission, delta)
    alpha = effective_rate(args.gamma, delta)
    strand = StrandId.parse(args.strand[0]) if args.strand else StrandId.intra(1)
    strand.check_layers(len(layers))
    config = SimConfig(
        slots=args.slots,
        burn_in=args.burn_in,
        trials=args.trials,
        seed=args.seed,
        dt=args.dt,
        initial_fraction=args.initial_fraction,
    )
    side = args.window_km if args.window_km is not None else float(np.sqrt(args.area_km2))
    graph = sample_graph([l.density for l in layers], [l.range_km for l in layers], Window.square(side), args.seed)
    result = run_sis(graph, strand, alpha, config)
    mean, stderr = result.steady_state
    eq = solve_theta_exact(strand_model(layers, strand), alpha)
    traj = result.trajectories
    run.write_csv(
        "simulate_trajectory.csv",
        ["slot", "mean"] + [f"trial_{t + 1}" for t in range(traj.shape[0])],
        [[s, traj[:, s].mean(), *traj[:, s]] for s in range(traj.shape[1])],
    )
    run.write_csv(
        "simulate_summary.csv",
        ["strand", "delta", "alpha", "nodes", "trials", "restarts", "mc_mean", "mc_stderr",
         "meanfield_avg_informed", "meanfield_theta", "abs_diff"],
        [[strand, delta, alpha, result.participants, config.trials, sum(result.restarts), mean, stderr,
          eq.average_informed, eq.theta, abs(mean - eq.average_informed)]],
    )
    return EXIT_OK


def _common(seed_default: int = 0) -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", choices=sorted(PRESETS), help="bundled mission")
    common.add_argument("--mission", help="JSON mission file")
    common.add_argument("--delta", help="threat level; sweep also takes start:stop:step or a comma list")
    common.add_argument("--seed", type=int, default=seed_default)
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    return common


def _design_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="density", type=float, nargs="+", help="densities per layer, km^-2")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--range-m", type=float, nargs="+", help="ranges per layer in metres")
    group.add_argument("--range-km", type=float, nargs="+", help="ranges per layer in km")
    p.add_argument("--strand", action="append", help="intra:m, inter:m:n or combined (repeatable)")
    p.add_argument("--gamma", type=float, default=1.0, help="contact rate (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spreadnet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()

    p = sub.add_parser("degree", parents=[common], help="degree distributions per strand")
    _design_flags(p)
    p.add_argument("--empirical", action="store_true", help="also sample a deployment and compare")
    p.add_argument("--window-km", type=float, default=20.0, help="torus side for --empirical")
    p.set_defaults(func=cmd_degree, subparser=p)

    p = sub.add_parser("equilibrium", parents=[common], help="stationary informed densities")
    _design_flags(p)
    p.add_argument("--fig10", action="store_true", help="exact vs closed-form curves, r = 0.2 km")
    p.set_defaults(func=cmd_equilibrium, subparser=p)

    p = sub.add_parser("optimize", parents=[common], help="cheapest design for one threat level")
    p.add_argument("--verify", action="store_true", help="check the exact equilibrium against the targets")
    p.set_defaults(func=cmd_optimize, subparser=p)

    p = sub.add_parser("sweep", parents=[common], help="optimize over a grid of threat levels")
    p.set_defaults(func=cmd_sweep, subparser=p)

    p = sub.add_parser("simulate", parents=[common], help="Monte-Carlo SIS on a sampled deployment")
    _design_flags(p)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--slots", type=int, default=300)
    p.add_argument("--burn-in", type=int, default=100)
    p.add_argument("--dt", type=float, default=0.05, help="micro-slot length")
    p.add_argument("--initial-fraction", type=float, default=0.5)
    size = p.add_mutually_exclusive_group()
    size.add_argument("--area-km2", type=float, default=10.0, help="square torus area (default 10)")
    size.add_argument("--window-km", type=float, help="square torus side")
    p.set_defaults(func=cmd_simulate, subparser=p)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    sub = args.subparser
    if args.jobs < 1:
        sub.error("--jobs must be >= 1")
    run = Run(args.command, args, argv)
    try:
        code = args.func(args, sub, run)
    except InvalidParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConvergenceError, StepSizeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    run.finish()
    return code


if __name__ == "__main__":
    sys.exit(main())
