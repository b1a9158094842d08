"""
Seeded generator of hourly winter weather and PV availability.

Temperature is a daily sinusoid (coldest before dawn) on top of a slowly
drifting daily mean, plus AR(1) noise. PV is a sine-shaped daylight bell
scaled by a per-day clear-sky factor. Output files use the same format as the
loaders in :mod:`hvac_surrogate.scenario`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class SyntheticSpec:
    days: int = 15
    start: str = "2022-01-10T00:00:00"
    mean_temp: float = 8.0
    daily_amplitude: float = 4.0
    coldest_hour: float = 5.0
    drift_sd: float = 1.5  # day-to-day change of the daily mean, °C
    noise_sd: float = 0.6
    noise_corr: float = 0.7
    sunrise: float = 8.0
    sunset: float = 18.0
    pv_peak_kwh: float = 6.0
    min_clearness: float = 0.25
    seed: int = 7

    def __post_init__(self):
        if self.days < 1:
            raise InputError("days must be >= 1")
        if not 0 <= self.sunrise < self.sunset <= 24:
            raise InputError("need 0 <= sunrise < sunset <= 24")
        if self.pv_peak_kwh < 0 or not 0 <= self.min_clearness <= 1:
            raise InputError("pv_peak_kwh must be >= 0 and min_clearness in [0, 1]")
        if not 0 <= self.noise_corr < 1:
            raise InputError("noise_corr must be in [0, 1)")


def generate(spec: SyntheticSpec):
    """Return ``(timestamps, temps_c, pv_kwh)`` for ``spec.days * 24`` hours."""
    rng = np.random.default_rng(spec.seed)
    hours = spec.days * 24
    t0 = datetime.fromisoformat(spec.start)
    stamps = [t0 + timedelta(hours=h) for h in range(hours)]
    hod = np.arange(hours) % 24

    daily_mean = spec.mean_temp + np.cumsum(rng.normal(0.0, spec.drift_sd, spec.days))
    daily_mean -= daily_mean.mean() - spec.mean_temp
    mean_h = np.repeat(daily_mean, 24)
    cycle = -spec.daily_amplitude * np.cos(2 * np.pi * (hod - spec.coldest_hour) / 24.0)
    noise = np.empty(hours)
    scale = spec.noise_sd * np.sqrt(1 - spec.noise_corr ** 2)
    noise[0] = rng.normal(0.0, spec.noise_sd)
    for h in range(1, hours):
        noise[h] = spec.noise_corr * noise[h - 1] + rng.normal(0.0, scale)
    temps = np.round(mean_h + cycle + noise, 2)

    clear = rng.uniform(spec.min_clearness, 1.0, spec.days)
    mid = hod + 0.5  # energy of an hour is taken at its midpoint
    phase = (mid - spec.sunrise) / (spec.sunset - spec.sunrise)
    bell = np.where((phase > 0) & (phase < 1), np.sin(np.pi * np.clip(phase, 0, 1)) ** 2, 0.0)
    pv = np.round(spec.pv_peak_kwh * np.repeat(clear, 24) * bell, 4)
    return stamps, temps, pv


def write_series(path, header: str, stamps, values) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header.split(","))
        for ts, v in zip(stamps, values):
            writer.writerow([ts.isoformat(), repr(float(v))])


def write_files(spec: SyntheticSpec, weather_path, pv_path) -> None:
    stamps, temps, pv = generate(spec)
    write_series(weather_path, "timestamp_iso8601,temp_c", stamps, temps)
    write_series(pv_path, "timestamp_iso8601,pv_kwh", stamps, pv)
