"""
End-to-end replay of a heating season window.

The controlled arm buckets each hour's external temperature, trains or reuses
the committee member for that bucket, lets the controller pick setpoints and
executes them on the thermal simulator. The baseline arm runs the same
machinery with a fixed occupied-hours setpoint. Both arms share weather, PV,
building, initial state and timestep.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from typing import Callable, Sequence

import numpy as np

from . import thermal_sim
from .committee import Committee, CommitteeStats, bucket_of, building_simulator_factory, setpoint_grid
from .config import ScenarioConfig
from .dr_controller import NIGHT, PREHEAT, HourDecision, schedule_hour
from .errors import InputError, ParseError, SurrogateError
from .metrics import EnergyLedger, compare, hourly_scr, hourly_ssr, summarize

log = logging.getLogger(__name__)

FIXED = "fixed"
REL_ERR_EPS = 1e-9  # kWh, guards zero-consumption grid points


# ---------------------------------------------------------------------------
# Input series
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HourlySeries:
    timestamps: tuple
    values: np.ndarray

    def __len__(self):
        return len(self.timestamps)

    def head(self, hours: int):
        return type(self)(self.timestamps[:hours], self.values[:hours])


class WeatherSeries(HourlySeries):
    """External temperature (°C) per hour."""


class PvSeries(HourlySeries):
    """Available PV energy (kWh) per hour."""


def _load_series(path, value_column: str, nonnegative: bool):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror}") from exc
    with fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty file", path, 1)
    header = [h.strip() for h in rows[0]]
    if header != ["timestamp_iso8601", value_column]:
        raise ParseError(f"header must be 'timestamp_iso8601,{value_column}', got {','.join(header)!r}",
                         path, 1)
    if len(rows) == 1:
        raise ParseError("no data rows", path, 2)
    stamps, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, found {len(row)}", path, lineno)
        try:
            ts = datetime.fromisoformat(row[0].strip())
        except ValueError:
            raise ParseError(f"bad timestamp {row[0]!r}", path, lineno) from None
        try:
            v = float(row[1])
        except ValueError:
            raise ParseError(f"bad value {row[1]!r}", path, lineno) from None
        if not math.isfinite(v):
            raise ParseError(f"non-finite value {row[1]!r}", path, lineno)
        if nonnegative and v < 0:
            raise ParseError(f"negative value {v}", path, lineno)
        if stamps:
            step = ts - stamps[-1]
            if step == timedelta(0):
                raise ParseError(f"duplicate timestamp {row[0]}", path, lineno)
            if step < timedelta(0):
                raise ParseError(f"timestamp {row[0]} goes backwards", path, lineno)
            if step != timedelta(hours=1):
                raise ParseError(f"gap of {step} before {row[0]} (hourly cadence required)", path, lineno)
        stamps.append(ts)
        values.append(v)
    return tuple(stamps), np.array(values)


def load_weather(path) -> WeatherSeries:
    return WeatherSeries(*_load_series(path, "temp_c", nonnegative=False))


def load_pv(path) -> PvSeries:
    return PvSeries(*_load_series(path, "pv_kwh", nonnegative=True))


def check_aligned(weather: WeatherSeries, pv: PvSeries) -> None:
    if len(weather) != len(pv):
        raise InputError(f"weather has {len(weather)} hours but PV has {len(pv)}")
    for i, (a, b) in enumerate(zip(weather.timestamps, pv.timestamps)):
        if a != b:
            raise InputError(f"timestamps differ at data line {i + 2}: {a.isoformat()} vs {b.isoformat()}")


def _horizon(config: ScenarioConfig, weather, pv):
    check_aligned(weather, pv)
    hours = len(weather) if config.horizon_hours is None else config.horizon_hours
    if hours > len(weather):
        raise InputError(f"horizon of {hours} h exceeds the {len(weather)} h series")
    return weather.head(hours), pv.head(hours)


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HourlyRecord:
    timestamp: datetime
    t_ext: float
    bucket: float
    mode: str
    setpoints: tuple
    consumed_kwh: float
    pv_kwh: float
    room_temps: tuple
    new_model: bool
    cum_models: int
    cum_sims: int
    predicted_kwh: float = float("nan")

    @property
    def exported_kwh(self) -> float:
        return max(0.0, self.pv_kwh - self.consumed_kwh)

    @property
    def imported_kwh(self) -> float:
        return max(0.0, self.consumed_kwh - self.pv_kwh)


@dataclass
class RunReport:
    arm: str
    n_rooms: int
    records: list = field(default_factory=list)
    committee: CommitteeStats = field(default_factory=lambda: CommitteeStats(0, 0, ()))
    training_seconds: float = 0.0
    simulation_seconds: float = 0.0
    lookup_seconds: float = 0.0
    decisions: int = 0
    trained: Committee | None = field(default=None, repr=False)

    @property
    def ledger(self) -> EnergyLedger:
        return EnergyLedger([r.pv_kwh for r in self.records], [r.consumed_kwh for r in self.records])


class ScenarioAborted(SurrogateError):
    """Training or simulation failed mid-run; ``partial`` holds the report so far."""

    def __init__(self, message, partial: RunReport):
        super().__init__(message)
        self.partial = partial


def initial_setpoint(policy, hour_of_day: int) -> float:
    """Setpoint the building is assumed to hold just before the first hour.

    Night and preheat hours use their scheduled setpoint; a horizon that starts
    during occupancy begins at the comfort floor so the controller's state is
    valid from the first decision.
    """
    if hour_of_day < policy.preheat_hour or hour_of_day >= policy.occupancy_end:
        return policy.night_setpoint
    if hour_of_day < policy.occupancy_start:
        return policy.preheat_setpoint
    return policy.comfort_floor


def _replay(config: ScenarioConfig, weather, pv, arm: str,
            decide: Callable[[int, datetime, float, float, thermal_sim.RoomState, tuple], tuple]) -> RunReport:
    n = config.building.n_rooms
    report = RunReport(arm, n)
    start = initial_setpoint(config.policy, weather.timestamps[0].hour) if len(weather) else 0.0
    state = thermal_sim.RoomState.uniform(n, start)
    setpoints = (start,) * n
    for h, (ts, t_ext, pv_h) in enumerate(zip(weather.timestamps, weather.values, pv.values)):
        try:
            decision, new_model, models, sims = decide(h, ts, float(t_ext), float(pv_h), state, setpoints)
            t0 = time.perf_counter()
            result = thermal_sim.simulate_hour(config.building, decision.setpoints, float(t_ext), state,
                                               config.timestep)
            report.simulation_seconds += time.perf_counter() - t0
        except SurrogateError as exc:
            raise ScenarioAborted(f"{arm} run failed at hour {h} ({ts.isoformat()}): {exc}", report) from exc
        report.records.append(HourlyRecord(
            timestamp=ts, t_ext=float(t_ext), bucket=bucket_of(t_ext).value, mode=decision.mode,
            setpoints=tuple(decision.setpoints), consumed_kwh=result.energy_kwh, pv_kwh=float(pv_h),
            room_temps=result.final_state.temperatures, new_model=new_model, cum_models=models,
            cum_sims=sims, predicted_kwh=decision.predicted_kwh))
        state = result.final_state
        setpoints = tuple(decision.setpoints)
    return report


def run_controlled(config: ScenarioConfig, weather: WeatherSeries, pv: PvSeries,
                   committee: Committee | None = None) -> RunReport:
    """Replay the horizon under the surrogate-driven controller.

    A fresh committee is created unless one is passed in (for warm restarts);
    it is trained in place and its final statistics are attached to the report.
    """
    weather, pv = _horizon(config, weather, pv)
    if committee is None:
        committee = Committee(setpoint_grid(config.building.n_rooms), config.learner)
    factory = building_simulator_factory(config.building, config.reference_setpoint, config.timestep)
    lookup = {"seconds": 0.0, "calls": 0}
    train0 = committee.training_seconds

    def decide(h, ts, t_ext, pv_h, state, setpoints):
        before = committee.models_created
        table = committee.get_or_train(t_ext, factory, when=ts.isoformat())
        t0 = time.perf_counter()
        decision = schedule_hour(ts.hour, pv_h, state.temperatures, setpoints, table, config.policy,
                                 config.allow_unconverged)
        if decision.mode not in (NIGHT, PREHEAT):
            lookup["seconds"] += time.perf_counter() - t0
            lookup["calls"] += 1
        return decision, committee.models_created > before, committee.models_created, committee.total_simulations

    try:
        report = _replay(config, weather, pv, "controlled", decide)
    except ScenarioAborted as exc:
        exc.partial.committee = committee.stats()
        raise
    report.committee = committee.stats()
    report.training_seconds = committee.training_seconds - train0
    report.lookup_seconds = lookup["seconds"]
    report.decisions = lookup["calls"]
    report.trained = committee
    return report


def run_baseline(config: ScenarioConfig, weather: WeatherSeries, pv: PvSeries) -> RunReport:
    """Replay the horizon with a constant setpoint during occupied hours.

    Night setback and morning preheat are identical to the controlled arm.
    """
    weather, pv = _horizon(config, weather, pv)
    policy = config.policy
    fixed = float(config.baseline_setpoint)

    def decide(h, ts, t_ext, pv_h, state, setpoints):
        hod = ts.hour
        if hod < policy.occupancy_start or hod >= policy.occupancy_end:
            d = schedule_hour(hod, pv_h, state.temperatures, setpoints, None, policy)
        else:
            sp = (fixed,) * len(setpoints)
            d = HourDecision(tuple(np.subtract(sp, setpoints).tolist()), sp, float("nan"), pv_h, FIXED)
        return d, False, 0, 0

    return _replay(config, weather, pv, "baseline", decide)


# ---------------------------------------------------------------------------
# Threshold sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    threshold: float
    models: int
    total_simulations: int
    wall_seconds: float
    max_rel_error: float
    max_abs_error_kwh: float


def sweep_threshold(config: ScenarioConfig, weather: WeatherSeries, thresholds: Sequence[float],
                    repeats: int = 1) -> list[SweepRow]:
    """Train a committee for every bucket of the weather horizon at each threshold.

    Wall time is the minimum over ``repeats`` runs (training only, no IO).
    Grid error is measured on the most frequent bucket by simulating its
    whole setpoint grid.
    """
    thresholds = [float(t) for t in thresholds]
    if not thresholds:
        raise InputError("need at least one threshold")
    if repeats < 1:
        raise InputError("repeats must be >= 1")
    temps = weather.values if config.horizon_hours is None else weather.values[:config.horizon_hours]
    buckets = [bucket_of(t) for t in temps]
    ordered = list(dict.fromkeys(buckets))
    counts = {b: buckets.count(b) for b in ordered}
    probe = max(ordered, key=lambda b: (counts[b], -ordered.index(b)))
    grid = setpoint_grid(config.building.n_rooms)
    factory = building_simulator_factory(config.building, config.reference_setpoint, config.timestep)
    truth = factory(probe).many(grid.points)

    rows = []
    for thr in thresholds:
        learner = replace(config.learner, std_threshold=thr)
        best = math.inf
        for _ in range(repeats):
            committee = Committee(grid, learner)
            for b in ordered:
                committee.get_or_train(b.value, factory)
            best = min(best, committee.training_seconds)
        pred = committee.members[probe].predicted
        err = np.abs(pred - truth)
        rows.append(SweepRow(thr, committee.models_created, committee.total_simulations, best,
                             float(np.max(err / np.maximum(np.abs(truth), REL_ERR_EPS))),
                             float(err.max())))
        log.info("threshold %g: %d simulations in %.2f s", thr, committee.total_simulations, best)
    return rows


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def _f(x) -> str:
    return repr(float(x))


def _write_csv(path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror}") from exc


def hourly_header(n_rooms: int) -> list[str]:
    return (["timestamp", "t_ext", "bucket", "mode"]
            + [f"setpoint_{i + 1}" for i in range(n_rooms)]
            + ["consumed_kwh", "pv_kwh", "exported_kwh", "imported_kwh"]
            + [f"room_temp_{i + 1}" for i in range(n_rooms)]
            + ["new_model", "cum_sims"])


def _summary_items(report: RunReport):
    s = summarize(report.ledger)
    stats = report.committee
    items = [("arm", report.arm), ("hours", len(report.records))]
    items += [(name, getattr(s, name)) for name in s.__dataclass_fields__]
    items += [("models_created", stats.models_created), ("total_simulations", stats.total_simulations)]
    if stats.models_created:
        items.append(("simulations_per_model", stats.total_simulations / stats.models_created))
        first = max(1, math.ceil(0.2 * len(report.records)))
        early = sum(r.new_model for r in report.records[:first])
        items.append(("models_created_first_20pct_hours", early))
    return items


def emit_report(report: RunReport, directory) -> list[str]:
    """Write the per-arm report files and return their paths.

    ``timings.txt`` holds wall-clock figures and is the only file that differs
    between identical reruns.
    """
    os.makedirs(directory, exist_ok=True)
    n = report.n_rooms
    paths = []

    def out(name):
        p = os.path.join(directory, name)
        paths.append(p)
        return p

    _write_csv(out("hourly.csv"), hourly_header(n), [
        [r.timestamp.isoformat(), _f(r.t_ext), _f(r.bucket), r.mode, *map(_f, r.setpoints),
         _f(r.consumed_kwh), _f(r.pv_kwh), _f(r.exported_kwh), _f(r.imported_kwh),
         *map(_f, r.room_temps), int(r.new_model), r.cum_sims]
        for r in report.records])
    with open(out("summary.txt"), "w") as fh:
        fh.writelines(f"{k} = {v if isinstance(v, str) else repr(v)}\n" for k, v in _summary_items(report))
    _write_csv(out("fig10_temperature.csv"), ["timestamp", "t_ext", "bucket"],
               [[r.timestamp.isoformat(), _f(r.t_ext), _f(r.bucket)] for r in report.records])
    _write_csv(out("fig11_committee.csv"), ["hour", "timestamp", "cum_models", "cum_sims"],
               [[h, r.timestamp.isoformat(), r.cum_models, r.cum_sims] for h, r in enumerate(report.records)])
    _write_csv(out("fig13_setpoints.csv"),
               ["timestamp", "mode"] + [f"setpoint_{i + 1}" for i in range(n)]
               + [f"room_temp_{i + 1}" for i in range(n)],
               [[r.timestamp.isoformat(), r.mode, *map(_f, r.setpoints), *map(_f, r.room_temps)]
                for r in report.records])
    per_sim = report.simulation_seconds / max(len(report.records), 1)
    per_lookup = report.lookup_seconds / max(report.decisions, 1)
    with open(out("timings.txt"), "w") as fh:
        fh.write(f"training_seconds = {report.training_seconds!r}\n"
                 f"simulate_hour_seconds_mean = {per_sim!r}\n"
                 f"decision_seconds_mean = {per_lookup!r}\n")
    return paths


def load_hourly(path, arm: str | None = None) -> RunReport:
    """Rebuild a report from an emitted ``hourly.csv``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty file", path, 1)
    header = rows[0]
    n = sum(h.startswith("setpoint_") for h in header)
    if header != hourly_header(n):
        raise ParseError("unexpected hourly report header", path, 1)
    report = RunReport(arm or os.path.basename(os.path.dirname(os.path.abspath(path))), n)
    models = 0
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            vals = row
            new_model = bool(int(vals[8 + 2 * n]))
            models += new_model
            report.records.append(HourlyRecord(
                timestamp=datetime.fromisoformat(vals[0]), t_ext=float(vals[1]), bucket=float(vals[2]),
                mode=vals[3], setpoints=tuple(float(v) for v in vals[4:4 + n]),
                consumed_kwh=float(vals[4 + n]), pv_kwh=float(vals[5 + n]),
                room_temps=tuple(float(v) for v in vals[8 + n:8 + 2 * n]),
                new_model=new_model, cum_models=models, cum_sims=int(vals[9 + 2 * n])))
        except (ValueError, IndexError):
            raise ParseError("malformed hourly row", path, lineno) from None
    if report.records:
        last = report.records[-1]
        report.committee = CommitteeStats(last.cum_models, last.cum_sims, ())
    return report


def emit_comparison(controlled: RunReport, baseline: RunReport, directory) -> list[str]:
    """Write the arm comparison (text and key = value) and the paired plot CSVs."""
    summary = compare(controlled.ledger, baseline.ledger)
    for a, b in zip(controlled.records, baseline.records):
        if a.timestamp != b.timestamp:
            raise InputError(f"arms diverge at {a.timestamp.isoformat()} vs {b.timestamp.isoformat()}")
    os.makedirs(directory, exist_ok=True)
    paths = [os.path.join(directory, n) for n in
             ("comparison.txt", "comparison_summary.txt", "fig12_energy_balance.csv", "fig14_ratios.csv")]
    with open(paths[0], "w") as fh:
        fh.write(summary.to_text())
    with open(paths[1], "w") as fh:
        fh.write(summary.to_keyvalue())
    _write_csv(paths[2], ["timestamp", "pv_kwh", "controlled_kwh", "baseline_kwh"],
               [[a.timestamp.isoformat(), _f(a.pv_kwh), _f(a.consumed_kwh), _f(b.consumed_kwh)]
                for a, b in zip(controlled.records, baseline.records)])
    sc, ss = hourly_scr(controlled.ledger), hourly_ssr(controlled.ledger)
    bc, bs = hourly_scr(baseline.ledger), hourly_ssr(baseline.ledger)
    _write_csv(paths[3], ["timestamp", "controlled_scr", "controlled_ssr", "baseline_scr", "baseline_ssr"],
               [[r.timestamp.isoformat(), _f(sc[i]), _f(ss[i]), _f(bc[i]), _f(bs[i])]
                for i, r in enumerate(controlled.records) if r.pv_kwh > 0])
    return paths


def emit_sweep(rows: Sequence[SweepRow], directory) -> str:
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, "fig15_threshold_sweep.csv")
    _write_csv(path, ["threshold", "models", "total_simulations", "wall_seconds", "max_rel_error",
                      "max_abs_error_kwh"],
               [[_f(r.threshold), r.models, r.total_simulations, _f(r.wall_seconds), _f(r.max_rel_error),
                 _f(r.max_abs_error_kwh)] for r in rows])
    return path
