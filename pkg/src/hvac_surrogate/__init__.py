"""Surrogate models of building heating for PV-aware setpoint control."""

from .active_learner import InputGrid, LearnerConfig, SurrogateTable, build_surrogate
from .committee import Committee, bucket_of
from .dr_controller import ComfortPolicy, schedule_hour, select_action
from .metrics import EnergyLedger, compare, scr, ssr
from .thermal_sim import BuildingModel, RoomParams, RoomState, simulate_hour

__version__ = "0.1.0"

__all__ = [
    "BuildingModel", "ComfortPolicy", "Committee", "EnergyLedger", "InputGrid", "LearnerConfig", "RoomParams",
    "RoomState", "SurrogateTable", "bucket_of", "build_surrogate", "compare", "schedule_hour", "scr",
    "select_action", "simulate_hour", "ssr",
]
