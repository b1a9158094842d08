"""Shared fixtures-by-function for the test suite."""

import numpy as np

from hvac_surrogate import thermal_sim as ts
from hvac_surrogate.active_learner import InputGrid

SINGLE_ROOM = ts.RoomParams(air_mass=1.2 * 45.0, c_v=ts.AIR_CV, ua=30.0, mdot=0.005, heater_power=2000.0)


def single_room_grid():
    """Reference setpoint 0..3 °C (0.25 steps) by external temperature 0..15 °C (0.5 steps)."""
    return InputGrid((np.linspace(0.0, 3.0, 13), np.linspace(0.0, 15.0, 31)), ("t_ref", "t_ext"))


def resistor_grid_2d():
    return InputGrid((np.linspace(500.0, 10000.0, 50), np.linspace(273.15, 313.15, 50)),
                     ("voltage", "ambient"))


class SingleRoomSimulator:
    """One hour of a single room that starts at its setpoint, heater off."""

    def __init__(self, room=SINGLE_ROOM, timestep=60.0):
        self.building = ts.BuildingModel((room,))
        self.timestep = timestep

    def many(self, points):
        pts = np.atleast_2d(points)
        out = np.empty(len(pts))
        for t_ext in np.unique(pts[:, 1]):
            rows = pts[:, 1] == t_ext
            sp = pts[rows, :1]
            out[rows] = ts.simulate_hour_batch(self.building, sp, float(t_ext), sp, None,
                                               self.timestep)["energy_kwh"]
        return out

    def __call__(self, point):
        return float(self.many(np.asarray(point)[None, :])[0])
