"""
Hourly setpoint policy that steers predicted consumption toward available PV.

Each occupied hour the controller enumerates every per-room delta
combination, looks up its predicted consumption in the surrogate table of the
current temperature bucket, keeps those close to the PV forecast and picks
the one that heats the coldest rooms most.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .active_learner import SurrogateTable
from .committee import DELTA_VALUES
from .errors import InputError, UnconvergedTableError

NIGHT = "night"
PREHEAT = "preheat"
TRACK_PV = "track-pv"
NO_PV_FLOOR = "no-pv-floor"


@dataclass(frozen=True)
class ComfortPolicy:
    """Comfort bounds and daily schedule of the controller (°C, hour of day)."""

    comfort_floor: float = 19.0
    comfort_ceiling: float = 24.0
    night_setpoint: float = 17.0
    preheat_hour: int = 6
    preheat_boost: float = 2.0
    occupancy_start: int = 8
    occupancy_end: int = 18
    pv_match_band: float = 0.10
    pv_epsilon: float = 0.1  # kWh

    def __post_init__(self):
        if not self.night_setpoint <= self.comfort_floor <= self.comfort_ceiling:
            raise InputError("need night_setpoint <= comfort_floor <= comfort_ceiling")
        if not 0 <= self.preheat_hour < self.occupancy_start < self.occupancy_end <= 24:
            raise InputError("need 0 <= preheat_hour < occupancy_start < occupancy_end <= 24")
        if self.preheat_boost < 0 or self.comfort_floor + self.preheat_boost > self.comfort_ceiling:
            raise InputError("preheat boost must keep the setpoint within [floor, ceiling]")
        if self.pv_match_band < 0 or self.pv_epsilon <= 0:
            raise InputError("pv_match_band must be >= 0 and pv_epsilon > 0")

    @property
    def preheat_setpoint(self) -> float:
        return self.comfort_floor + self.preheat_boost

    def clamp(self, values):
        return np.clip(np.asarray(values, dtype=float), self.comfort_floor, self.comfort_ceiling)


@dataclass(frozen=True)
class Action:
    delta: tuple
    setpoints: tuple


@dataclass(frozen=True)
class HourDecision:
    delta: tuple
    setpoints: tuple
    predicted_kwh: float
    pv_available: float
    mode: str


def _options(state, policy: ComfortPolicy, deltas):
    """Per-room ``(delta, setpoint)`` options after clamping and de-duplication."""
    lo, hi = policy.comfort_floor, policy.comfort_ceiling
    per_room = []
    for s in np.asarray(state, dtype=float).tolist():
        options = {}
        for d in sorted(deltas, key=lambda v: (abs(v), v)):
            options.setdefault(min(max(s + d, lo), hi), float(d))
        per_room.append(sorted((d, sp) for sp, d in options.items()))
    return per_room


def _indexed_options(table: SurrogateTable, per_room):
    """Flat table indices of every option combination, lexicographic in delta.

    Each room's few deltas are located on the table axis once; combinations
    are then indexed by mixed-radix arithmetic instead of a per-point search.
    """
    grid = table.grid
    flat = np.zeros((), dtype=np.intp)
    for axis, opts in enumerate(per_room):
        pos = grid.index_axis(axis, [d for d, _ in opts])
        flat = (flat[..., None] * grid.shape[axis] + pos).astype(np.intp)
    return flat.ravel()


def feasible_actions(state: Sequence[float], policy: ComfortPolicy,
                     deltas: Sequence[float] = DELTA_VALUES) -> list[Action]:
    """Distinct setpoint vectors reachable from ``state`` in one hour.

    Each room's candidate setpoint ``state + delta`` is clamped to the comfort
    range. When clamping makes several deltas land on the same setpoint, the
    one with the smallest magnitude represents them. Actions come out in
    lexicographic order of their delta vectors.
    """
    per_room = _options(state, policy, deltas)
    return [Action(tuple(d for d, _ in combo), tuple(sp for _, sp in combo))
            for combo in itertools.product(*per_room)]


def _lookup(table: SurrogateTable, deltas):
    return table.predicted[table.grid.index_of(np.asarray(deltas, dtype=float))]


def select_action(table: SurrogateTable, pv_available: float, room_temps: Sequence[float],
                  state: Sequence[float], policy: ComfortPolicy,
                  allow_unconverged: bool = False) -> HourDecision:
    """Choose the occupied-hour action for the given PV availability.

    Candidates whose predicted consumption lies within ``pv_match_band`` of
    the PV energy survive (the closest ones when none do). Among them the
    largest delta for the coldest room wins, then for the next coldest, and
    so on; equal room temperatures keep room-index order. Remaining ties go
    to the lower predicted consumption.

    Parameters
    ----------
    table : SurrogateTable
        Grid of per-room deltas to predicted consumption (kWh).
    pv_available : float
        PV energy expected over the hour (kWh).
    room_temps : sequence of float
        Current room temperatures, used only for the coldest-first priority.
    state : sequence of float
        Current per-room setpoints.
    policy : ComfortPolicy
    allow_unconverged : bool
        Accept a table that stopped before its std threshold.

    Returns
    -------
    HourDecision
        Mode ``no-pv-floor`` when there is no PV, else ``track-pv``.
    """
    n = len(state)
    if len(room_temps) != n:
        raise InputError(f"{len(room_temps)} room temperatures for {n} rooms")
    if table.grid.dim != n:
        raise InputError(f"table has {table.grid.dim} inputs but the building has {n} rooms")
    if not table.converged and not allow_unconverged:
        raise UnconvergedTableError(
            f"surrogate table stopped at max std {table.final_max_std:.4g} above its threshold")
    st = np.asarray(state, dtype=float)
    if np.any(st < policy.comfort_floor) or np.any(st > policy.comfort_ceiling):
        raise InputError(f"setpoint state {st.tolist()} outside the comfort range")
    pv = float(pv_available)
    if not pv > 0:
        floor = np.full(n, policy.comfort_floor)
        delta = floor - st
        try:
            predicted = float(_lookup(table, delta[None, :])[0])
        except InputError:
            predicted = float("nan")
        return HourDecision(tuple(delta.tolist()), tuple(floor.tolist()), predicted, pv, NO_PV_FLOOR)

    per_room = _options(st, policy, DELTA_VALUES)
    predicted = table.predicted[_indexed_options(table, per_room)]
    gap = np.abs(predicted - pv)
    inside = np.flatnonzero(gap <= policy.pv_match_band * max(pv, policy.pv_epsilon))
    if inside.size == 0:
        inside = np.flatnonzero(gap == gap.min())
    choice = np.unravel_index(inside, tuple(len(opts) for opts in per_room))
    delta = [np.array([d for d, _ in opts])[c] for opts, c in zip(per_room, choice)]
    # np.lexsort treats its last key as primary, so the coldest room goes last
    order = np.argsort(np.asarray(room_temps, dtype=float), kind="stable")
    k = np.lexsort([predicted[inside]] + [-delta[r] for r in order[::-1]])[0]
    picked = [per_room[r][int(choice[r][k])] for r in range(n)]
    return HourDecision(tuple(d for d, _ in picked), tuple(sp for _, sp in picked),
                        float(predicted[inside[k]]), pv, TRACK_PV)


def schedule_hour(hour_of_day: int, pv_available: float, room_temps: Sequence[float],
                  state: Sequence[float], table: SurrogateTable | None, policy: ComfortPolicy,
                  allow_unconverged: bool = False) -> HourDecision:
    """Dispatch on the hour: night setback, morning preheat, or PV tracking."""
    if not 0 <= hour_of_day < 24:
        raise InputError(f"hour_of_day must be in [0, 24), got {hour_of_day}")
    n = len(state)
    st = np.asarray(state, dtype=float)
    if hour_of_day < policy.preheat_hour or hour_of_day >= policy.occupancy_end:
        sp = np.full(n, policy.night_setpoint)
        return HourDecision(tuple((sp - st).tolist()), tuple(sp.tolist()), float("nan"),
                            float(pv_available), NIGHT)
    if hour_of_day < policy.occupancy_start:
        sp = np.full(n, policy.preheat_setpoint)
        return HourDecision(tuple((sp - st).tolist()), tuple(sp.tolist()), float("nan"),
                            float(pv_available), PREHEAT)
    if table is None:
        raise InputError("occupied hours need a surrogate table")
    return select_action(table, pv_available, room_temps, st, policy, allow_unconverged)
