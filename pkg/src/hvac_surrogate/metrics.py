"""
Self-consumption (SCR) and self-sufficiency (SSR) accounting.

With no storage, every hour splits into::

    exported = max(0, produced - consumed)
    imported = max(0, consumed - produced)
    self-consumed = produced - exported = consumed - imported

and over a window ``SCR = sum(self-consumed) / sum(produced)`` and
``SSR = sum(self-consumed) / sum(consumed)``. The mean of hourly ratios is a
different quantity and is reported separately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, UndefinedMetricError


@dataclass(frozen=True)
class EnergyLedger:
    """Hourly energy flows in kWh."""

    produced: np.ndarray
    consumed: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.produced, dtype=float).ravel()
        c = np.asarray(self.consumed, dtype=float).ravel()
        if p.shape != c.shape:
            raise InputError(f"{p.size} produced values but {c.size} consumed values")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(c))):
            raise InputError("energies must be finite")
        if np.any(p < 0) or np.any(c < 0):
            raise InputError("energies must be non-negative")
        object.__setattr__(self, "produced", p)
        object.__setattr__(self, "consumed", c)

    @classmethod
    def from_hours(cls, produced, consumed) -> "EnergyLedger":
        return cls(np.asarray(produced, dtype=float), np.asarray(consumed, dtype=float))

    def __len__(self) -> int:
        return self.produced.size

    @property
    def exported(self) -> np.ndarray:
        return np.maximum(self.produced - self.consumed, 0.0)

    @property
    def imported(self) -> np.ndarray:
        return np.maximum(self.consumed - self.produced, 0.0)

    @property
    def self_consumed(self) -> np.ndarray:
        return np.minimum(self.produced, self.consumed)

    def window(self, start: int, stop: int) -> "EnergyLedger":
        return EnergyLedger(self.produced[start:stop], self.consumed[start:stop])


def scr(ledger: EnergyLedger) -> float:
    """Window self-consumption rate; undefined when nothing was produced."""
    total = ledger.produced.sum()
    if not total > 0:
        raise UndefinedMetricError("SCR undefined: no production in the window")
    return float(ledger.self_consumed.sum() / total)


def ssr(ledger: EnergyLedger) -> float:
    """Window self-sufficiency rate; undefined when nothing was consumed."""
    total = ledger.consumed.sum()
    if not total > 0:
        raise UndefinedMetricError("SSR undefined: no consumption in the window")
    return float(ledger.self_consumed.sum() / total)


def hourly_scr(ledger: EnergyLedger) -> np.ndarray:
    """Per-hour SCR, NaN in hours without production."""
    p = ledger.produced
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(p > 0, ledger.self_consumed / np.where(p > 0, p, 1.0), np.nan)


def hourly_ssr(ledger: EnergyLedger) -> np.ndarray:
    """Per-hour SSR, NaN in hours without consumption."""
    c = ledger.consumed
    return np.where(c > 0, ledger.self_consumed / np.where(c > 0, c, 1.0), np.nan)


def _daylight_mean(values, produced):
    mask = (produced > 0) & np.isfinite(values)
    return float(values[mask].mean()) if mask.any() else float("nan")


@dataclass(frozen=True)
class ArmSummary:
    consumed_kwh: float
    produced_kwh: float
    exported_kwh: float
    imported_kwh: float
    scr: float
    ssr: float
    mean_hourly_scr: float
    mean_hourly_ssr: float


def summarize(ledger: EnergyLedger) -> ArmSummary:
    """Totals plus window and daylight-hour-mean ratios (NaN when undefined)."""
    def safe(fn):
        try:
            return fn(ledger)
        except UndefinedMetricError:
            return float("nan")
    return ArmSummary(
        consumed_kwh=float(ledger.consumed.sum()),
        produced_kwh=float(ledger.produced.sum()),
        exported_kwh=float(ledger.exported.sum()),
        imported_kwh=float(ledger.imported.sum()),
        scr=safe(scr),
        ssr=safe(ssr),
        mean_hourly_scr=_daylight_mean(hourly_scr(ledger), ledger.produced),
        mean_hourly_ssr=_daylight_mean(hourly_ssr(ledger), ledger.produced),
    )


def _pct(new, old):
    return float("nan") if old == 0 else 100.0 * (new - old) / old


@dataclass(frozen=True)
class ComparisonSummary:
    controlled: ArmSummary
    baseline: ArmSummary

    @property
    def consumption_delta_pct(self) -> float:
        return _pct(self.controlled.consumed_kwh, self.baseline.consumed_kwh)

    @property
    def scr_delta_pct(self) -> float:
        return _pct(self.controlled.scr, self.baseline.scr)

    @property
    def ssr_delta_pct(self) -> float:
        return _pct(self.controlled.ssr, self.baseline.ssr)

    def items(self) -> list[tuple[str, float]]:
        rows = []
        for arm in ("controlled", "baseline"):
            summary = getattr(self, arm)
            for name in ArmSummary.__dataclass_fields__:
                rows.append((f"{arm}.{name}", getattr(summary, name)))
        rows += [("delta.consumption_pct", self.consumption_delta_pct),
                 ("delta.scr_pct", self.scr_delta_pct),
                 ("delta.ssr_pct", self.ssr_delta_pct)]
        return rows

    def to_keyvalue(self) -> str:
        return "".join(f"{k} = {v!r}\n" for k, v in self.items())

    def to_text(self) -> str:
        c, b = self.controlled, self.baseline
        lines = [
            f"{'':28s}{'controlled':>14s}{'baseline':>14s}",
            f"{'consumption (kWh)':28s}{c.consumed_kwh:14.2f}{b.consumed_kwh:14.2f}",
            f"{'SCR, window sum':28s}{c.scr:14.4f}{b.scr:14.4f}",
            f"{'SSR, window sum':28s}{c.ssr:14.4f}{b.ssr:14.4f}",
            f"{'SCR, daylight hourly mean':28s}{c.mean_hourly_scr:14.4f}{b.mean_hourly_scr:14.4f}",
            f"{'SSR, daylight hourly mean':28s}{c.mean_hourly_ssr:14.4f}{b.mean_hourly_ssr:14.4f}",
            f"consumption change: {self.consumption_delta_pct:+.2f} %",
        ]
        return "\n".join(lines) + "\n"


def compare(controlled: EnergyLedger, baseline: EnergyLedger) -> ComparisonSummary:
    if len(controlled) != len(baseline):
        raise InputError(f"horizon mismatch: {len(controlled)} vs {len(baseline)} hours")
    return ComparisonSummary(summarize(controlled), summarize(baseline))
