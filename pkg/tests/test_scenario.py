import csv
from dataclasses import replace
from datetime import datetime, timedelta

import numpy as np
import pytest

from hvac_surrogate import scenario as sc
from hvac_surrogate.committee import bucket_of
from hvac_surrogate.config import load_config
from hvac_surrogate.errors import InputError, ParseError
from hvac_surrogate.metrics import summarize

START = datetime(2022, 1, 10)


def write_series(path, column, values, start=START):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp_iso8601", column])
        for i, v in enumerate(values):
            w.writerow([(start + timedelta(hours=i)).isoformat(), v])
    return str(path)


def small_config(tmp_path, temps, pv, threshold=1.0, **kw):
    cfg, _ = load_config()
    w = write_series(tmp_path / "w.csv", "temp_c", temps)
    p = write_series(tmp_path / "p.csv", "pv_kwh", pv)
    return replace(cfg, learner=replace(cfg.learner, std_threshold=threshold), weather_path=w, pv_path=p, **kw)


def load_pair(cfg):
    return sc.load_weather(cfg.weather_path), sc.load_pv(cfg.pv_path)


class TestLoaders:
    def test_shipped_series(self):
        cfg, _ = load_config()
        w, p = load_pair(cfg)
        assert len(w) == len(p) == 360
        sc.check_aligned(w, p)
        assert np.all(p.values >= 0)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("")
        with pytest.raises(ParseError) as info:
            sc.load_weather(path)
        assert info.value.line == 1

    def test_header_only(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("timestamp_iso8601,temp_c\n")
        with pytest.raises(ParseError):
            sc.load_weather(path)

    def test_duplicate_timestamp_line(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("timestamp_iso8601,temp_c\n2022-01-10T00:00:00,5\n2022-01-10T01:00:00,5\n"
                        "2022-01-10T01:00:00,6\n")
        with pytest.raises(ParseError) as info:
            sc.load_weather(path)
        assert info.value.line == 4
        assert "duplicate" in str(info.value)

    @pytest.mark.parametrize("body,line", [
        ("2022-01-10T00:00:00,5\n2022-01-10T02:00:00,5\n", 3),
        ("2022-01-10T01:00:00,5\n2022-01-10T00:00:00,5\n", 3),
        ("2022-01-10T00:00:00,abc\n", 2),
        ("2022-01-10T00:00:00,nan\n", 2),
        ("yesterday,5\n", 2),
        ("2022-01-10T00:00:00,5,7\n", 2),
    ])
    def test_bad_rows(self, tmp_path, body, line):
        path = tmp_path / "b.csv"
        path.write_text("timestamp_iso8601,temp_c\n" + body)
        with pytest.raises(ParseError) as info:
            sc.load_weather(path)
        assert info.value.line == line

    def test_negative_pv(self, tmp_path):
        with pytest.raises(ParseError):
            sc.load_pv(write_series(tmp_path / "p.csv", "pv_kwh", [1.0, -0.5]))

    def test_wrong_header(self, tmp_path):
        with pytest.raises(ParseError):
            sc.load_pv(write_series(tmp_path / "p.csv", "temp_c", [1.0]))

    def test_misaligned(self, tmp_path):
        w = sc.load_weather(write_series(tmp_path / "w.csv", "temp_c", [1.0, 2.0]))
        p = sc.load_pv(write_series(tmp_path / "p.csv", "pv_kwh", [1.0, 2.0], START + timedelta(hours=1)))
        with pytest.raises(InputError):
            sc.check_aligned(w, p)
        with pytest.raises(InputError):
            sc.check_aligned(w, p.head(1))

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError) as info:
            sc.load_weather(tmp_path / "nope.csv")
        assert "nope.csv" in str(info.value)


class TestRunControlled:
    def test_one_hour_loose(self, tmp_path):
        # hour 12 so the table is consulted
        cfg = small_config(tmp_path, [6.2], [1.5])
        w, p = load_pair(cfg)
        w = sc.WeatherSeries((START.replace(hour=12),), w.values)
        p = sc.PvSeries((START.replace(hour=12),), p.values)
        r = sc.run_controlled(cfg, w, p)
        assert r.committee.models_created == 1 and r.committee.total_simulations == 64
        assert len(r.records) == 1 and r.records[0].new_model and r.decisions == 1
        assert r.records[0].mode in ("track-pv", "no-pv-floor")

    @pytest.mark.parametrize("hour,expected", [(0, 17.0), (6, 21.0), (12, 19.0), (20, 17.0)])
    def test_initial_setpoint(self, hour, expected):
        assert sc.initial_setpoint(load_config()[0].policy, hour) == expected

    def test_constant_weather_single_model(self, tmp_path):
        cfg = small_config(tmp_path, [5.0] * 30, [0.0] * 8 + [1.0] * 10 + [0.0] * 12)
        r = sc.run_controlled(cfg, *load_pair(cfg))
        assert r.committee.models_created == 1
        assert sum(rec.new_model for rec in r.records) == 1
        assert [rec.cum_sims for rec in r.records] == [64] * 30

    def test_buckets_counted(self, tmp_path):
        temps = [3.0, 3.1, 4.0, 7.26, 7.4, 3.0]
        cfg = small_config(tmp_path, temps, [0.0] * 6)
        r = sc.run_controlled(cfg, *load_pair(cfg))
        k = len({bucket_of(t) for t in temps})
        assert r.committee.models_created == k and r.committee.total_simulations == 64 * k

    def test_horizon_limit(self, tmp_path):
        cfg = small_config(tmp_path, [5.0] * 10, [0.0] * 10, horizon_hours=4)
        assert len(sc.run_controlled(cfg, *load_pair(cfg)).records) == 4
        cfg = replace(cfg, horizon_hours=11)
        with pytest.raises(InputError):
            sc.run_controlled(cfg, *load_pair(cfg))

    def test_comfort_modes(self, tmp_path):
        cfg = small_config(tmp_path, [5.0] * 24, [0.0] * 8 + [2.0] * 10 + [0.0] * 6)
        r = sc.run_controlled(cfg, *load_pair(cfg))
        modes = [rec.mode for rec in r.records]
        assert modes[:6] == ["night"] * 6 and modes[6:8] == ["preheat"] * 2
        assert modes[18:] == ["night"] * 6
        for rec in r.records[8:18]:
            assert all(19.0 <= s <= 24.0 for s in rec.setpoints)

    def test_unconverged_aborts(self, tmp_path):
        cfg = small_config(tmp_path, [5.0] * 13, [1.0] * 13, threshold=1e-6)
        cfg = replace(cfg, learner=replace(cfg.learner, max_iterations=2))
        w, p = load_pair(cfg)
        with pytest.raises(sc.ScenarioAborted) as info:
            sc.run_controlled(cfg, w, p)
        # the first eight hours are night/preheat and finish before the refusal
        assert len(info.value.partial.records) == 8


class TestBaseline:
    def test_fixed_and_no_committee(self, tmp_path):
        cfg = small_config(tmp_path, [5.0] * 24, [1.0] * 24)
        r = sc.run_baseline(cfg, *load_pair(cfg))
        assert r.committee.models_created == 0 and r.committee.total_simulations == 0
        assert [rec.mode for rec in r.records[8:18]] == ["fixed"] * 10
        assert all(rec.setpoints == (21.0,) * 6 for rec in r.records[8:18])


class TestReports:
    def _run(self, tmp_path):
        cfg = small_config(tmp_path, list(np.linspace(2, 9, 30)),
                           [0.0] * 9 + [0.5, 1.5, 3.0, 3.5, 3.0, 1.5, 0.5] + [0.0] * 14)
        return cfg, sc.run_controlled(cfg, *load_pair(cfg)), sc.run_baseline(cfg, *load_pair(cfg))

    def test_files_and_rows(self, tmp_path):
        _, ctrl, base = self._run(tmp_path)
        paths = sc.emit_report(ctrl, tmp_path / "c")
        names = sorted(p.rsplit("/", 1)[1] for p in paths)
        assert names == sorted(["hourly.csv", "summary.txt", "fig10_temperature.csv", "fig11_committee.csv",
                                "fig13_setpoints.csv", "timings.txt"])
        rows = (tmp_path / "c" / "hourly.csv").read_text().splitlines()
        assert len(rows) == 31
        assert rows[0].split(",")[:5] == ["timestamp", "t_ext", "bucket", "mode", "setpoint_1"]
        out = sc.emit_comparison(ctrl, base, tmp_path / "cmp")
        assert len(out) == 4

    def test_determinism(self, tmp_path):
        _, ctrl, _ = self._run(tmp_path)
        _, again, _ = self._run(tmp_path)
        sc.emit_report(ctrl, tmp_path / "a")
        sc.emit_report(again, tmp_path / "b")
        for name in ("hourly.csv", "summary.txt", "fig10_temperature.csv", "fig11_committee.csv",
                     "fig13_setpoints.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_summary_recomputed_from_csv(self, tmp_path):
        _, ctrl, _ = self._run(tmp_path)
        sc.emit_report(ctrl, tmp_path / "c")
        reloaded = sc.load_hourly(tmp_path / "c" / "hourly.csv")
        assert summarize(reloaded.ledger) == summarize(ctrl.ledger)
        assert reloaded.committee.models_created == ctrl.committee.models_created
        text = (tmp_path / "c" / "summary.txt").read_text()
        assert f"consumed_kwh = {summarize(ctrl.ledger).consumed_kwh!r}" in text

    def test_ledger_identity_per_row(self, tmp_path):
        _, ctrl, _ = self._run(tmp_path)
        sc.emit_report(ctrl, tmp_path / "c")
        with open(tmp_path / "c" / "hourly.csv") as fh:
            for row in csv.DictReader(fh):
                c, p = float(row["consumed_kwh"]), float(row["pv_kwh"])
                e, i = float(row["exported_kwh"]), float(row["imported_kwh"])
                assert e >= 0 and i >= 0 and min(e, i) == 0
                assert p - e == pytest.approx(c - i, abs=4 * np.spacing(max(p, c, 1.0)))

    def test_bad_hourly(self, tmp_path):
        path = tmp_path / "hourly.csv"
        path.write_text("a,b\n")
        with pytest.raises(ParseError):
            sc.load_hourly(path)


class TestSweep:
    def test_single_threshold(self, tmp_path):
        cfg = small_config(tmp_path, [4.0, 4.1, 8.0], [0.0] * 3)
        rows = sc.sweep_threshold(cfg, sc.load_weather(cfg.weather_path), [1.0])
        assert len(rows) == 1
        r = rows[0]
        assert r.models == 2 and r.total_simulations == 128 and r.wall_seconds > 0
        path = sc.emit_sweep(rows, tmp_path)
        assert len(open(path).read().splitlines()) == 2

    def test_tighter_costs_more(self, tmp_path):
        cfg = small_config(tmp_path, [4.0, 8.0], [0.0] * 2)
        rows = sc.sweep_threshold(cfg, sc.load_weather(cfg.weather_path), [0.5, 0.05])
        assert rows[0].total_simulations <= rows[1].total_simulations
        assert rows[1].max_rel_error <= rows[0].max_rel_error + 1e-12 or rows[1].max_abs_error_kwh < 0.5

    def test_rejects_empty(self, tmp_path):
        cfg = small_config(tmp_path, [4.0], [0.0])
        with pytest.raises(InputError):
            sc.sweep_threshold(cfg, sc.load_weather(cfg.weather_path), [])
