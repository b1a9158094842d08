"""
Command-line entry point: one subcommand per workflow.

Exit codes: 0 success, 1 input or configuration error, 2 numerical or
convergence failure, 3 file-system error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import thermal_sim
from .active_learner import InputGrid, LearnerConfig, build_surrogate, compare_init_strategies
from .committee import DELTA_VALUES, Committee
from .config import load_config, parse_overrides, parser_text
from .errors import InputError, NumericalError, SimulationError, SurrogateError, UnconvergedTableError
from .scenario import (
    ScenarioAborted, emit_comparison, emit_report, emit_sweep, load_hourly, load_pv, load_weather,
    run_baseline, run_controlled, sweep_threshold,
)

log = logging.getLogger("hvac_surrogate")

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _resolve(args):
    """Load the config with ``--set`` overrides plus the dedicated flags."""
    overrides = parse_overrides(args.set)
    if getattr(args, "seed", None) is not None:
        overrides[("scenario", "seed")] = str(args.seed)
        overrides[("learner", "seed")] = str(args.seed)
    if getattr(args, "threshold", None) is not None:
        overrides[("learner", "std_threshold")] = repr(args.threshold)
    if getattr(args, "horizon", None) is not None:
        overrides[("scenario", "horizon_hours")] = str(args.horizon)
    cfg, parser = load_config(args.config, overrides)
    text = parser_text(parser)
    log.info("effective configuration:\n%s", text)
    return cfg, text


def _out_dir(args, cfg=None):
    if args.out is not None:
        return args.out
    return cfg.output_dir if cfg is not None else "out"


def _write_text(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def _inputs(cfg):
    return load_weather(cfg.weather_path), load_pv(cfg.pv_path)


def _rel_error(pred, truth, eps=1e-9):
    return np.abs(pred - truth) / np.maximum(np.abs(truth), eps)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_poc_resistor(args) -> int:
    params = thermal_sim.ResistorParams(args.resistance, args.temp_coefficient, args.reference_temp,
                                        args.thermal_resistance)
    log.info("effective configuration: %s threshold=%g lengthscale=%g seed=%d", params, args.threshold,
             args.lengthscale, args.seed)
    out = args.out or "out/poc"
    os.makedirs(out, exist_ok=True)
    lines = []

    # 1-D: current versus voltage at fixed ambient
    volts = np.linspace(args.v_min_1d, args.v_max, args.points_1d)
    ambient = args.reference_temp
    truth_1d = thermal_sim.sweep_resistor(params, volts, ambient)
    thermal_sim.write_resistor_csv(os.path.join(out, "resistor_1d_exhaustive.csv"), truth_1d)
    grid1 = InputGrid((volts,), ("voltage",))
    cfg1 = LearnerConfig(std_threshold=args.threshold, init_strategy="spread", init_size=4,
                         lengthscale=args.lengthscale)
    t0 = time.perf_counter()
    tab1 = build_surrogate(grid1, cfg1, lambda p: thermal_sim.resistor_equilibrium(params, p[0], ambient).current)
    dt1 = time.perf_counter() - t0
    tab1.save(os.path.join(out, "resistor_1d.table"))
    err1 = _rel_error(tab1.predicted, np.array([r.current for r in truth_1d]))
    lines += [f"1d.grid_points = {grid1.size}", f"1d.simulations = {tab1.simulation_count}",
              f"1d.iterations = {tab1.iteration_count}", f"1d.converged = {tab1.converged}",
              f"1d.final_max_std = {tab1.final_max_std!r}", f"1d.max_rel_error = {float(err1.max())!r}"]

    # 2-D: current versus voltage and ambient temperature
    grid2 = InputGrid((np.linspace(args.v_min_2d, args.v_max, 50),
                       np.linspace(args.ambient_min, args.ambient_max, 50)), ("voltage", "ambient"))
    truth_2d = np.array([thermal_sim.resistor_equilibrium(params, v, a).current for v, a in grid2.points])
    with open(os.path.join(out, "resistor_2d_exhaustive.csv"), "w") as fh:
        fh.write("voltage,ambient,current\n")
        for (v, a), i in zip(grid2.points, truth_2d):
            fh.write(f"{v!r},{a!r},{i!r}\n")
    cfg2 = LearnerConfig(std_threshold=args.threshold, init_strategy="random", init_size=10, seed=args.seed,
                         lengthscale=args.lengthscale)
    t0 = time.perf_counter()
    tab2 = build_surrogate(grid2, cfg2, lambda p: thermal_sim.resistor_equilibrium(params, p[0], p[1]).current)
    dt2 = time.perf_counter() - t0
    tab2.save(os.path.join(out, "resistor_2d.table"))
    err2 = _rel_error(tab2.predicted, truth_2d)
    lines += [f"2d.grid_points = {grid2.size}", f"2d.simulations = {tab2.simulation_count}",
              f"2d.iterations = {tab2.iteration_count}", f"2d.converged = {tab2.converged}",
              f"2d.final_max_std = {tab2.final_max_std!r}", f"2d.max_rel_error = {float(err2.max())!r}"]
    _write_text(os.path.join(out, "poc_stats.txt"), "\n".join(lines) + "\n")
    _write_text(os.path.join(out, "timings.txt"),
                f"1d.build_seconds = {dt1!r}\n2d.build_seconds = {dt2!r}\n")
    print("\n".join(lines))
    return EXIT_OK


class MonolithicSimulator:
    """One-hour consumption with external temperature as the last input."""

    def __init__(self, building, reference, timestep):
        self.building, self.reference, self.timestep = building, reference, timestep

    def many(self, points):
        pts = np.atleast_2d(points)
        out = np.empty(len(pts))
        for t in np.unique(pts[:, -1]):
            rows = pts[:, -1] == t
            d = pts[rows, :-1]
            res = thermal_sim.simulate_hour_batch(self.building, self.reference + d, float(t),
                                                  np.full_like(d, self.reference), None, self.timestep)
            out[rows] = res["energy_kwh"]
        return out

    def __call__(self, point):
        return float(self.many(np.asarray(point)[None, :])[0])


def cmd_train_monolithic(args) -> int:
    cfg, text = _resolve(args)
    out = args.out or os.path.join(cfg.output_dir, "monolithic")
    os.makedirs(out, exist_ok=True)
    _write_text(os.path.join(out, "resolved_config.ini"), text)
    n = cfg.building.n_rooms
    grid = InputGrid(tuple(np.array(DELTA_VALUES) for _ in range(n)) + (np.arange(5.0, 16.0),),
                     tuple(f"delta_room{i + 1}" for i in range(n)) + ("t_ext",))
    sim = MonolithicSimulator(cfg.building, cfg.reference_setpoint, cfg.timestep)
    learner = cfg.learner if args.max_iterations is None else replace(cfg.learner,
                                                                      max_iterations=args.max_iterations)
    seeds = [args.seed_base + i for i in range(args.seeds)]
    result = compare_init_strategies(grid, learner, sim, seeds, sim.many)
    result.corner.save(os.path.join(out, "monolithic.table"))
    with open(os.path.join(out, "fig09_init_strategies.csv"), "w") as fh:
        fh.write("strategy,seed,iteration,max_std\n")
        for label, seed, table in [("corners", "", result.corner)] + [
                ("random", str(s), t) for s, t in zip(seeds, result.random)]:
            for it, s in enumerate(table.std_history):
                fh.write(f"{label},{seed},{it},{s!r}\n")
    lines = [f"grid_points = {grid.size}",
             f"corner.initial = {result.corner.simulation_count - result.corner.iteration_count}",
             f"corner.iterations = {result.corner_iterations}",
             f"corner.simulations = {result.corner.simulation_count}",
             f"corner.converged = {result.corner.converged}",
             f"random.iterations = {' '.join(map(str, result.random_iterations))}",
             f"random.median_iterations = {result.random_median!r}",
             f"corner.fraction_of_grid = {result.corner.simulation_count / grid.size!r}"]
    _write_text(os.path.join(out, "monolithic_stats.txt"), "\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def cmd_run_scenario(args) -> int:
    cfg, text = _resolve(args)
    weather, pv = _inputs(cfg)
    out = _out_dir(args, cfg)
    _write_text(os.path.join(out, "controlled", "resolved_config.ini"), text)
    committee = None
    committee_dir = os.path.join(out, "committee")
    if args.resume and os.path.exists(os.path.join(committee_dir, "manifest.json")):
        committee = Committee.load(committee_dir)
    try:
        report = run_controlled(cfg, weather, pv, committee)
    except ScenarioAborted as exc:
        emit_report(exc.partial, os.path.join(out, "controlled_partial"))
        raise
    emit_report(report, os.path.join(out, "controlled"))
    report.trained.save(committee_dir)
    s = report.committee
    print(f"controlled: {len(report.records)} h, {report.ledger.consumed.sum():.2f} kWh, "
          f"{s.models_created} models, {s.total_simulations} simulations")
    return EXIT_OK


def cmd_baseline(args) -> int:
    cfg, text = _resolve(args)
    weather, pv = _inputs(cfg)
    out = _out_dir(args, cfg)
    _write_text(os.path.join(out, "baseline", "resolved_config.ini"), text)
    report = run_baseline(cfg, weather, pv)
    emit_report(report, os.path.join(out, "baseline"))
    print(f"baseline: {len(report.records)} h, {report.ledger.consumed.sum():.2f} kWh")
    return EXIT_OK


def cmd_sweep_threshold(args) -> int:
    cfg, text = _resolve(args)
    weather, _ = _inputs(cfg)
    out = os.path.join(_out_dir(args, cfg), "sweep")
    _write_text(os.path.join(out, "resolved_config.ini"), text)
    rows = sweep_threshold(cfg, weather, args.thresholds, repeats=args.repeats)
    emit_sweep(rows, out)
    print(f"{'threshold':>10s}{'models':>8s}{'sims':>8s}{'seconds':>10s}{'max rel err':>13s}")
    for r in rows:
        print(f"{r.threshold:10.3f}{r.models:8d}{r.total_simulations:8d}{r.wall_seconds:10.2f}"
              f"{r.max_rel_error:13.4g}")
    if len(rows) > 1:
        print(f"simulation ratio first/last threshold: {rows[0].total_simulations / rows[-1].total_simulations:.2f}")
    return EXIT_OK


def cmd_report(args) -> int:
    out = args.out or "out"
    controlled = load_hourly(os.path.join(out, "controlled", "hourly.csv"), "controlled")
    baseline = load_hourly(os.path.join(out, "baseline", "hourly.csv"), "baseline")
    emit_comparison(controlled, baseline, os.path.join(out, "comparison"))
    with open(os.path.join(out, "comparison", "comparison.txt")) as fh:
        print(fh.read(), end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hvac-surrogate",
        description="Surrogate-based HVAC setpoint control for PV self-consumption.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log errors")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(p, config=True, seed=True):
        p.add_argument("--out", help="output directory (default: from config, or ./out)")
        if config:
            p.add_argument("--config", help="INI config file (default: packaged default.ini)")
            p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                           help="override one config value (repeatable)")
        if seed:
            p.add_argument("--seed", type=int, help="seed for random initial designs")

    p = sub.add_parser("poc-resistor", help="1-D and 2-D surrogates of a self-heating resistor")
    common(p, config=False)
    p.set_defaults(seed=0)
    p.add_argument("--threshold", type=float, default=0.01, help="std threshold (default 0.01)")
    p.add_argument("--lengthscale", type=float, default=0.7, help="kernel lengthscale (default 0.7)")
    p.add_argument("--resistance", type=float, default=10.0, help="ohm at the reference temperature")
    p.add_argument("--temp-coefficient", type=float, default=0.004, help="1/K")
    p.add_argument("--reference-temp", type=float, default=293.15, help="K; also the 1-D ambient")
    p.add_argument("--thermal-resistance", type=float, default=3e-4, help="K/W")
    p.add_argument("--v-min-1d", type=float, default=10.0, help="lowest 1-D voltage")
    p.add_argument("--v-min-2d", type=float, default=500.0, help="lowest 2-D voltage")
    p.add_argument("--v-max", type=float, default=10000.0, help="highest voltage")
    p.add_argument("--points-1d", type=int, default=1000, help="1-D grid size")
    p.add_argument("--ambient-min", type=float, default=273.15, help="K")
    p.add_argument("--ambient-max", type=float, default=313.15, help="K")
    p.set_defaults(func=cmd_poc_resistor)

    p = sub.add_parser("train-monolithic", help="single surrogate over setpoint deltas and external temperature")
    common(p)
    p.add_argument("--threshold", type=float, help="std threshold override")
    p.add_argument("--seeds", type=int, default=3, help="random-init runs (default 3)")
    p.add_argument("--seed-base", type=int, default=0, help="first random-init seed")
    p.add_argument("--max-iterations", type=int, help="iteration cap per build")
    p.set_defaults(func=cmd_train_monolithic)

    p = sub.add_parser("run-scenario", help="controlled arm: committee training plus PV tracking")
    common(p)
    p.add_argument("--threshold", type=float, help="std threshold override")
    p.add_argument("--horizon", type=int, help="hours to replay")
    p.add_argument("--resume", action="store_true", help="reuse a committee saved in OUT/committee")
    p.set_defaults(func=cmd_run_scenario)

    p = sub.add_parser("baseline", help="fixed-setpoint reference arm")
    common(p)
    p.add_argument("--horizon", type=int, help="hours to replay")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("sweep-threshold", help="committee training cost versus std threshold")
    common(p)
    p.add_argument("thresholds", type=float, nargs="+", help="std thresholds to try")
    p.add_argument("--horizon", type=int, help="hours of weather whose buckets are trained")
    p.add_argument("--repeats", type=int, default=1, help="timing repeats, minimum kept (default 1)")
    p.set_defaults(func=cmd_sweep_threshold)

    p = sub.add_parser("report", help="compare the controlled and baseline arms found in OUT")
    common(p, config=False, seed=False)
    p.set_defaults(func=cmd_report)
    return parser


def _configure_logging(verbose: int, quiet: bool):
    level = logging.ERROR if quiet else (logging.DEBUG if verbose > 1 else
                                         logging.INFO if verbose == 1 else logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    # the effective configuration is always echoed, whatever the verbosity
    if not quiet:
        log.setLevel(min(level, logging.INFO))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose, args.quiet)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, SimulationError, UnconvergedTableError, ScenarioAborted) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SurrogateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
