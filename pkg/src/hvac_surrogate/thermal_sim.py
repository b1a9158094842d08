"""
Ground-truth simulators.

Two physical models live here:

* A self-heating thermo-resistor driven by a voltage source. Its resistance
  follows ``R_eq = R * (1 + alpha * (T - T_ref))`` and the dissipated power
  heats it through a lumped thermal resistance to ambient, so the steady
  state is the fixed point ``T = T_amb + R_th * V**2 / R_eq(T)``.

* A multi-room building where each room is a well-mixed air volume heated by
  an on/off heater under a hysteresis thermostat. Per room, explicit Euler on

      m * c_v * dT/dt = P_heat * on - UA * (T - T_ext) - mdot * c_v * (T - T_ext)

  No mechanical work is exchanged (constant-volume air).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    InputError,
    InvalidParamsError,
    NumericalBlowupError,
    SolverFailureError,
)

AIR_DENSITY = 1.2  # kg/m3
AIR_CV = 718.0  # J/(kg K), isochoric
SECONDS_PER_HOUR = 3600.0
J_PER_KWH = 3.6e6

# |T| above this (in degC) is treated as a diverged integration
_BLOWUP_LIMIT = 1.0e4
# thermostat flips located inside one Euler step before the remainder runs unswitched
_MAX_SWITCHES_PER_STEP = 4


# ---------------------------------------------------------------------------
# Thermo-resistor
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResistorParams:
    """Self-heating resistor.

    Parameters
    ----------
    resistance : float
        Intrinsic resistance at the reference temperature (ohm).
    temp_coefficient : float
        Temperature coefficient of resistance (1/K).
    reference_temp : float
        Temperature at which the resistance equals ``resistance`` (K).
    thermal_resistance : float
        Lumped thermal resistance between the resistor and ambient (K/W).
    """

    resistance: float = 10.0
    temp_coefficient: float = 0.004
    reference_temp: float = 293.15
    thermal_resistance: float = 3.0e-4

    def __post_init__(self):
        if not self.resistance > 0:
            raise InvalidParamsError("resistance must be > 0")
        if self.thermal_resistance < 0:
            raise InvalidParamsError("thermal_resistance must be >= 0")
        if self.temp_coefficient < 0:
            raise InvalidParamsError("temp_coefficient must be >= 0")

    def equivalent_resistance(self, temperature):
        return self.resistance * (1.0 + self.temp_coefficient * (temperature - self.reference_temp))


@dataclass(frozen=True)
class ResistorEquilibrium:
    voltage: float
    current: float
    resistance: float
    heatport_temp: float


def _fixed_point_residual(params, voltage, ambient, temp):
    return temp - ambient - params.thermal_resistance * voltage**2 / params.equivalent_resistance(temp)


def resistor_equilibrium(params: ResistorParams, voltage: float, ambient_temp: float,
                         max_iter: int = 200) -> ResistorEquilibrium:
    """Steady state of the self-heating resistor.

    Solves ``T = ambient + R_th * V**2 / R_eq(T)`` with a Newton iteration
    safeguarded by a shrinking bracket; a step that leaves the bracket is
    replaced by bisection.

    Parameters
    ----------
    params : ResistorParams
    voltage : float
        Applied voltage (V), must be >= 0.
    ambient_temp : float
        Ambient temperature (K).

    Returns
    -------
    ResistorEquilibrium

    Raises
    ------
    InvalidParamsError
        If the resistance is non-positive at ambient temperature.
    SolverFailureError
        If the relative residual is not below 1e-9 after ``max_iter`` steps.
    """
    if voltage < 0 or not math.isfinite(voltage):
        raise InputError(f"voltage must be finite and >= 0, got {voltage}")
    r_amb = params.equivalent_resistance(ambient_temp)
    if not r_amb > 0:
        raise InvalidParamsError(
            f"equivalent resistance {r_amb:g} ohm is not positive at ambient {ambient_temp:g} K")

    if voltage == 0.0 or params.thermal_resistance == 0.0:
        temp = float(ambient_temp)
        r_eq = r_amb
        return ResistorEquilibrium(float(voltage), voltage / r_eq, r_eq, temp)

    # residual is increasing in T; f(lo) < 0 and f(hi) >= 0 because R_eq(T) >= R_eq(amb) for T >= amb
    lo = float(ambient_temp)
    hi = lo + params.thermal_resistance * voltage**2 / r_amb
    temp = hi
    scale = max(abs(hi), 1.0)
    dres_coeff = params.thermal_resistance * voltage**2 * params.resistance * params.temp_coefficient
    for _ in range(max_iter):
        res = _fixed_point_residual(params, voltage, ambient_temp, temp)
        if abs(res) <= 1e-13 * scale:
            break
        if res > 0:
            hi = temp
        else:
            lo = temp
        deriv = 1.0 + dres_coeff / params.equivalent_resistance(temp) ** 2
        candidate = temp - res / deriv
        if not lo < candidate < hi:
            candidate = 0.5 * (lo + hi)
        if candidate == temp:
            break
        temp = candidate
    res = _fixed_point_residual(params, voltage, ambient_temp, temp)
    if abs(res) > 1e-9 * max(abs(temp), 1.0):
        raise SolverFailureError(
            f"resistor fixed point did not converge at V={voltage:g} (residual {res:.3e})")
    r_eq = params.equivalent_resistance(temp)
    return ResistorEquilibrium(float(voltage), voltage / r_eq, r_eq, temp)


def sweep_resistor(params: ResistorParams, voltages: Sequence[float],
                   ambient_temp: float) -> list[ResistorEquilibrium]:
    """Apply :func:`resistor_equilibrium` to every voltage in order."""
    voltages = list(voltages)
    if not voltages:
        raise InputError("voltage sweep is empty")
    out = []
    for i, v in enumerate(voltages):
        try:
            out.append(resistor_equilibrium(params, float(v), ambient_temp))
        except (SolverFailureError, InvalidParamsError, InputError) as exc:
            raise type(exc)(f"sweep element {i} (V={v}): {exc}") from exc
    return out


def write_resistor_csv(path, results: Sequence[ResistorEquilibrium]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["voltage", "current", "resistance", "heatport_temp"])
        for r in results:
            writer.writerow([repr(r.voltage), repr(r.current), repr(r.resistance), repr(r.heatport_temp)])


# ---------------------------------------------------------------------------
# Building
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RoomParams:
    """Lumped thermal parameters of one room (SI units).

    ``ua`` aggregates the convective coefficient times the envelope area.
    """

    air_mass: float
    c_v: float
    ua: float
    mdot: float
    heater_power: float
    hysteresis: float = 0.5

    def __post_init__(self):
        for name in ("air_mass", "c_v", "ua", "heater_power"):
            if not getattr(self, name) > 0:
                raise InvalidParamsError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.mdot < 0:
            raise InvalidParamsError(f"mdot must be >= 0, got {self.mdot}")
        if not 0 < self.hysteresis <= 2:
            raise InvalidParamsError(f"hysteresis must be in (0, 2], got {self.hysteresis}")

    @classmethod
    def from_geometry(cls, volume, h_c, area, mdot, heater_power, hysteresis=0.5,
                      c_v=AIR_CV, density=AIR_DENSITY):
        """Fold room volume and envelope area into air mass and UA."""
        return cls(air_mass=density * volume, c_v=c_v, ua=h_c * area, mdot=mdot,
                   heater_power=heater_power, hysteresis=hysteresis)

    @property
    def capacitance(self) -> float:
        return self.air_mass * self.c_v

    @property
    def loss_coefficient(self) -> float:
        """Total W/K to outdoors (envelope plus ventilation)."""
        return self.ua + self.mdot * self.c_v


@dataclass(frozen=True)
class BuildingModel:
    rooms: tuple[RoomParams, ...]

    def __post_init__(self):
        object.__setattr__(self, "rooms", tuple(self.rooms))
        if len(self.rooms) < 1:
            raise InvalidParamsError("a building needs at least one room")

    @property
    def n_rooms(self) -> int:
        return len(self.rooms)

    def _arrays(self):
        cap = np.array([r.capacitance for r in self.rooms])
        ua = np.array([r.ua for r in self.rooms])
        vent = np.array([r.mdot * r.c_v for r in self.rooms])
        power = np.array([r.heater_power for r in self.rooms])
        band = np.array([r.hysteresis for r in self.rooms])
        return cap, ua, vent, power, band


@dataclass(frozen=True)
class RoomState:
    temperatures: tuple[float, ...]
    heater_on: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "temperatures", tuple(float(t) for t in self.temperatures))
        object.__setattr__(self, "heater_on", tuple(bool(h) for h in self.heater_on))
        if len(self.temperatures) != len(self.heater_on):
            raise InputError("temperatures and heater_on differ in length")

    @classmethod
    def uniform(cls, n_rooms: int, temperature: float, heater_on: bool = False) -> "RoomState":
        return cls((temperature,) * n_rooms, (heater_on,) * n_rooms)


@dataclass(frozen=True)
class HourResult:
    """Outcome of one simulated hour.

    The per-room joule breakdowns satisfy, up to rounding,
    ``C * (T_end - T_start) = heater - losses - ventilation``.
    """

    energy_kwh: float
    final_state: RoomState
    heater_j: tuple[float, ...] = field(default=())
    losses_j: tuple[float, ...] = field(default=())
    ventilation_j: tuple[float, ...] = field(default=())


def _steps_per_hour(timestep: float) -> int:
    if not timestep > 0:
        raise InputError(f"timestep must be > 0, got {timestep}")
    n = SECONDS_PER_HOUR / timestep
    steps = int(round(n))
    if steps < 1 or abs(n - steps) > 1e-9 * n:
        raise InputError(f"timestep {timestep} s does not divide one hour")
    return steps


def simulate_hour_batch(building: BuildingModel, setpoints, external_temp, start_temps,
                        start_on=None, timestep: float = 60.0):
    """Vectorized hour simulation over a batch of independent scenarios.

    Parameters
    ----------
    building : BuildingModel
    setpoints : array_like, shape (B, n_rooms)
    external_temp : float or array_like, shape (B,)
    start_temps : array_like, shape (B, n_rooms) or (n_rooms,)
    start_on : array_like of bool, optional
        Initial heater states, same shape as ``start_temps``; default all off.
    timestep : float
        Euler step in seconds; must divide 3600.

    Returns
    -------
    dict
        ``energy_kwh`` (B,), ``temps`` (B, n), ``on`` (B, n), and the joule
        breakdowns ``heater_j``, ``losses_j``, ``ventilation_j`` (B, n).
    """
    steps = _steps_per_hour(timestep)
    cap, ua, vent, power, band = building._arrays()
    n = building.n_rooms
    sp = np.atleast_2d(np.asarray(setpoints, dtype=float))
    if sp.shape[-1] != n:
        raise InputError(f"expected {n} setpoints per row, got {sp.shape[-1]}")
    batch = sp.shape[0]
    t_ext = np.broadcast_to(np.asarray(external_temp, dtype=float), (batch,))[:, None]
    temps = np.array(np.broadcast_to(np.asarray(start_temps, dtype=float), (batch, n)))
    if start_on is None:
        on = np.zeros((batch, n), dtype=bool)
    else:
        on = np.array(np.broadcast_to(np.asarray(start_on, dtype=bool), (batch, n)))
    if not (np.all(np.isfinite(sp)) and np.all(np.isfinite(t_ext)) and np.all(np.isfinite(temps))):
        raise InputError("setpoints, external temperature and start temperatures must be finite")

    low = sp - band
    high = sp + band
    heater_j = np.zeros((batch, n))
    losses_j = np.zeros((batch, n))
    vent_j = np.zeros((batch, n))
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for _ in range(steps):
            on = np.where(temps < low, True, np.where(temps > high, False, on))
            remaining = np.full((batch, n), float(timestep))
            # An Euler segment ends early where it crosses the band edge; the
            # heater flips there and the rest of the step is a new segment.
            for segment in range(_MAX_SWITCHES_PER_STEP + 1):
                q_heat = power * on
                dt_ext = temps - t_ext
                q_loss = ua * dt_ext
                q_vent = vent * dt_ext
                rate = (q_heat - q_loss - q_vent) / cap
                end = temps + rate * remaining
                if segment < _MAX_SWITCHES_PER_STEP:
                    cross_off = on & (rate > 0) & (end > high)
                    cross_on = ~on & (rate < 0) & (end < low)
                    cross = cross_off | cross_on
                else:
                    cross = np.zeros_like(on)
                if cross.any():
                    edge = np.where(cross_off, high, low)
                    tau = np.where(cross, (edge - temps) / np.where(cross, rate, 1.0), remaining)
                    tau = np.clip(tau, 0.0, remaining)
                else:
                    tau = remaining
                heater_j += q_heat * tau
                losses_j += q_loss * tau
                vent_j += q_vent * tau
                temps = temps + rate * tau
                remaining = remaining - tau
                on = np.where(cross, ~on, on)
                if not cross.any():
                    break
    if not np.all(np.isfinite(temps)) or np.any(np.abs(temps) > _BLOWUP_LIMIT):
        raise NumericalBlowupError(
            f"room temperature diverged with timestep {timestep} s; reduce the timestep")
    return {
        "energy_kwh": heater_j.sum(axis=1) / J_PER_KWH,
        "temps": temps,
        "on": on,
        "heater_j": heater_j,
        "losses_j": losses_j,
        "ventilation_j": vent_j,
    }


def simulate_hour(building: BuildingModel, setpoints: Sequence[float], external_temp: float,
                  start: RoomState, timestep: float = 60.0) -> HourResult:
    """Simulate one hour of the building under fixed per-room setpoints.

    The thermostat switches a room's heater on when its temperature drops
    below ``setpoint - hysteresis`` and off when it exceeds
    ``setpoint + hysteresis``; otherwise the previous state is kept. Within an
    Euler step the crossing instant is located on the linear segment, so the
    heater switches at the band edge rather than at the next step boundary.
    """
    if len(setpoints) != building.n_rooms:
        raise InputError(f"expected {building.n_rooms} setpoints, got {len(setpoints)}")
    if len(start.temperatures) != building.n_rooms:
        raise InputError("start state does not match the number of rooms")
    out = simulate_hour_batch(building, [list(setpoints)], external_temp,
                              [list(start.temperatures)], [list(start.heater_on)], timestep)
    final = RoomState(tuple(out["temps"][0]), tuple(out["on"][0]))
    return HourResult(
        energy_kwh=float(out["energy_kwh"][0]),
        final_state=final,
        heater_j=tuple(out["heater_j"][0]),
        losses_j=tuple(out["losses_j"][0]),
        ventilation_j=tuple(out["ventilation_j"][0]),
    )


def simulate_horizon(building: BuildingModel, setpoint_schedule, external_series,
                     start: RoomState, timestep: float = 60.0) -> list[HourResult]:
    """Chain :func:`simulate_hour`, carrying the room state across hours."""
    schedule = [list(row) for row in setpoint_schedule]
    series = list(external_series)
    if len(schedule) != len(series):
        raise InputError(
            f"schedule has {len(schedule)} hours but external series has {len(series)}")
    results = []
    state = start
    for row, t_ext in zip(schedule, series):
        hour = simulate_hour(building, row, t_ext, state, timestep)
        results.append(hour)
        state = hour.final_state
    return results
