"""
A committee of surrogate tables, one per half-degree external-temperature bucket.

External temperature is not a surrogate input. Each member maps the
per-room setpoint deltas to the consumption of one hour at its bucket
temperature, and is trained the first time that bucket is needed.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import thermal_sim
from .active_learner import InputGrid, LearnerConfig, SurrogateTable, build_surrogate
from .errors import InputError, ParseError

log = logging.getLogger(__name__)

DELTA_VALUES = (-1.0, 0.0, 1.0, 2.0)
MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1


@dataclass(frozen=True, order=True)
class TempBucket:
    """External-temperature bucket stored exactly as integer half-degrees."""

    half_degrees: int

    @property
    def value(self) -> float:
        return self.half_degrees / 2.0

    @property
    def label(self) -> str:
        return f"{self.value:+.1f}"

    def __str__(self):
        return f"{self.value:.1f}"


def bucket_of(raw_temp: float) -> TempBucket:
    """Nearest multiple of 0.5 °C; exact quarter-degree ties round up.

    >>> bucket_of(12.25).value
    12.5
    """
    t = float(raw_temp)
    if not math.isfinite(t):
        raise InputError(f"temperature must be finite, got {raw_temp!r}")
    return TempBucket(int(math.floor(2.0 * t + 0.5)))


def setpoint_grid(n_rooms: int, deltas=DELTA_VALUES) -> InputGrid:
    """Grid of per-room setpoint deltas shared by every committee member."""
    return InputGrid(tuple(np.asarray(deltas, dtype=float) for _ in range(n_rooms)),
                     tuple(f"delta_room{i + 1}" for i in range(n_rooms)))


class BucketSimulator:
    """One-hour consumption of the building at a fixed external temperature.

    Rooms start at ``reference_setpoint`` with heaters off; a grid point is the
    vector of per-room deltas added to that reference.
    """

    def __init__(self, building: thermal_sim.BuildingModel, external_temp: float,
                 reference_setpoint: float = 21.0, timestep: float = 60.0):
        self.building = building
        self.external_temp = float(external_temp)
        self.reference_setpoint = float(reference_setpoint)
        self.timestep = timestep

    def many(self, deltas) -> np.ndarray:
        d = np.atleast_2d(np.asarray(deltas, dtype=float))
        start = np.full_like(d, self.reference_setpoint)
        out = thermal_sim.simulate_hour_batch(self.building, self.reference_setpoint + d,
                                              self.external_temp, start, None, self.timestep)
        return out["energy_kwh"]

    def __call__(self, delta) -> float:
        return float(self.many([delta])[0])


def building_simulator_factory(building, reference_setpoint=21.0, timestep=60.0):
    def factory(bucket: TempBucket):
        return BucketSimulator(building, bucket.value, reference_setpoint, timestep)
    return factory


@dataclass(frozen=True)
class CreationEvent:
    when: str
    bucket: float
    simulations: int
    iterations: int
    converged: bool
    models_created: int
    total_simulations: int


@dataclass(frozen=True)
class CommitteeStats:
    models_created: int
    total_simulations: int
    log: tuple


@dataclass
class Committee:
    """Lazily-trained map from :class:`TempBucket` to :class:`SurrogateTable`."""

    grid: InputGrid
    config: LearnerConfig
    members: dict = field(default_factory=dict)
    models_created: int = 0
    total_simulations: int = 0
    log: list = field(default_factory=list)
    archived_logs: list = field(default_factory=list)
    training_seconds: float = 0.0

    def __contains__(self, raw_temp) -> bool:
        return bucket_of(raw_temp) in self.members

    def __len__(self) -> int:
        return len(self.members)

    def get_or_train(self, raw_temp: float, simulator_factory: Callable, when=None) -> SurrogateTable:
        """Return the member for ``raw_temp``'s bucket, training it on first use.

        ``simulator_factory(bucket)`` must return a callable mapping one grid
        point to an output; a ``many`` attribute, if present, is used to run the
        initial design as a batch. ``when`` labels the creation-log entry.
        """
        bucket = bucket_of(raw_temp)
        table = self.members.get(bucket)
        if table is not None:
            return table
        sim = simulator_factory(bucket)
        t0 = time.perf_counter()
        table = build_surrogate(self.grid, self.config, sim, getattr(sim, "many", None))
        self.training_seconds += time.perf_counter() - t0
        self.members[bucket] = table
        self.models_created += 1
        self.total_simulations += table.simulation_count
        self.log.append(CreationEvent(
            when="" if when is None else str(when),
            bucket=bucket.value,
            simulations=table.simulation_count,
            iterations=table.iteration_count,
            converged=table.converged,
            models_created=self.models_created,
            total_simulations=self.total_simulations,
        ))
        log.info("trained bucket %s: %d simulations (%s)", bucket, table.simulation_count,
                 "converged" if table.converged else "unconverged")
        self._check_counters()
        return table

    def _check_counters(self):
        total = sum(t.simulation_count for t in self.members.values())
        assert total == self.total_simulations, "committee simulation counter out of sync"
        assert len(self.members) == self.models_created, "committee model counter out of sync"

    def stats(self) -> CommitteeStats:
        return CommitteeStats(self.models_created, self.total_simulations, tuple(self.log))

    def invalidate(self) -> None:
        """Drop every member and reset counters; the creation log is archived."""
        if self.log:
            self.archived_logs.append(list(self.log))
        self.members.clear()
        self.log = []
        self.models_created = 0
        self.total_simulations = 0
        self.training_seconds = 0.0

    # -- persistence -------------------------------------------------------

    @staticmethod
    def member_filename(bucket: TempBucket) -> str:
        return f"bucket_{bucket.label}C.table"

    def save(self, directory) -> None:
        os.makedirs(directory, exist_ok=True)
        members = []
        for bucket in sorted(self.members):
            name = self.member_filename(bucket)
            self.members[bucket].save(os.path.join(directory, name))
            members.append({"half_degrees": bucket.half_degrees, "file": name})
        manifest = {
            "version": MANIFEST_VERSION,
            "grid": self.grid.to_dict(),
            "config": asdict(self.config),
            "models_created": self.models_created,
            "total_simulations": self.total_simulations,
            "members": members,
            "log": [asdict(e) for e in self.log],
            "archived_logs": [[asdict(e) for e in lg] for lg in self.archived_logs],
        }
        with open(os.path.join(directory, MANIFEST_NAME), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, directory) -> "Committee":
        path = os.path.join(directory, MANIFEST_NAME)
        with open(path) as fh:
            try:
                manifest = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad manifest: {exc.msg}", path, exc.lineno) from None
        if manifest.get("version") != MANIFEST_VERSION:
            raise ParseError(f"unsupported manifest version {manifest.get('version')!r}", path)
        committee = cls(InputGrid.from_dict(manifest["grid"]), LearnerConfig(**manifest["config"]))
        for entry in manifest["members"]:
            committee.members[TempBucket(int(entry["half_degrees"]))] = SurrogateTable.load(
                os.path.join(directory, entry["file"]))
        committee.models_created = manifest["models_created"]
        committee.total_simulations = manifest["total_simulations"]
        committee.log = [CreationEvent(**e) for e in manifest["log"]]
        committee.archived_logs = [[CreationEvent(**e) for e in lg] for lg in manifest["archived_logs"]]
        committee._check_counters()
        return committee
