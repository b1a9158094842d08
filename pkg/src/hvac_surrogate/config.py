"""
INI configuration for building, policy, learner and scenario settings.

Relative file paths in ``[scenario]`` resolve against the directory of the
config file. Command-line overrides use ``section.key=value`` strings.
"""

from __future__ import annotations

import configparser
import io
import os
from dataclasses import dataclass, fields
from importlib import resources

from .active_learner import LearnerConfig
from .dr_controller import ComfortPolicy
from .errors import ConfigError, InputError
from .thermal_sim import AIR_CV, AIR_DENSITY, BuildingModel, RoomParams


def default_config_path() -> str:
    return str(resources.files("hvac_surrogate") / "data" / "default.ini")


@dataclass(frozen=True)
class ScenarioConfig:
    building: BuildingModel
    policy: ComfortPolicy
    learner: LearnerConfig
    weather_path: str
    pv_path: str
    horizon_hours: int | None = None
    baseline_setpoint: float = 21.0
    reference_setpoint: float = 21.0
    timestep: float = 60.0
    output_dir: str = "out"
    seed: int = 0
    allow_unconverged: bool = False


def _get(parser, section, key, conv, default=None, required=False):
    if not parser.has_option(section, key):
        if required:
            raise ConfigError(f"missing [{section}] {key}")
        return default
    raw = parser.get(section, key).strip()
    if raw == "" or raw.lower() == "none":
        return default
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {conv.__name__}") from None


def _bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _lengthscale(raw: str):
    return raw if raw == "ml" else float(raw)


def _room(parser, section) -> RoomParams:
    volume = _get(parser, section, "volume", float)
    air_mass = _get(parser, section, "air_mass", float)
    if air_mass is None:
        if volume is None:
            raise ConfigError(f"[{section}] needs volume or air_mass")
        air_mass = AIR_DENSITY * volume
    return RoomParams(
        air_mass=air_mass,
        c_v=_get(parser, section, "c_v", float, AIR_CV),
        ua=_get(parser, section, "ua", float, required=True),
        mdot=_get(parser, section, "mdot", float, 0.0),
        heater_power=_get(parser, section, "heater_power", float, required=True),
        hysteresis=_get(parser, section, "hysteresis", float, 0.5),
    )


def parse_overrides(pairs) -> dict:
    """``["learner.std_threshold=0.02", ...]`` to ``{("learner", "std_threshold"): "0.02"}``."""
    out = {}
    for item in pairs or ():
        key, sep, value = item.partition("=")
        section, dot, option = key.strip().rpartition(".")
        if not sep or not dot or not section or not option:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        out[(section, option)] = value.strip()
    return out


def read_parser(path, overrides=None) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for (section, option), value in (overrides or {}).items():
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, option, value)
    return parser


def load_config(path=None, overrides=None) -> tuple[ScenarioConfig, configparser.ConfigParser]:
    """Parse a config file (the packaged default when ``path`` is None).

    Returns the typed config and the resolved parser, whose text form is the
    effective configuration echoed by the command-line tool.
    """
    path = default_config_path() if path is None else str(path)
    parser = read_parser(path, overrides)
    base = os.path.dirname(os.path.abspath(path))
    try:
        room_sections = sorted((s for s in parser.sections() if s.startswith("room.")),
                               key=lambda s: int(s.split(".", 1)[1]))
    except ValueError:
        raise ConfigError("room sections must be named room.<integer>") from None
    if not room_sections:
        raise ConfigError(f"{path}: no [room.N] sections")
    try:
        building = BuildingModel(tuple(_room(parser, s) for s in room_sections))
        policy_kwargs = {}
        for f in fields(ComfortPolicy):
            conv = int if f.type in ("int", int) else float
            value = _get(parser, "policy", f.name, conv)
            if value is not None:
                policy_kwargs[f.name] = value
        policy = ComfortPolicy(**policy_kwargs)
        learner = LearnerConfig(
            std_threshold=_get(parser, "learner", "std_threshold", float, 0.01),
            init_strategy=_get(parser, "learner", "init_strategy", str, "corners"),
            init_size=_get(parser, "learner", "init_size", int),
            seed=_get(parser, "learner", "seed", int, 0),
            max_iterations=_get(parser, "learner", "max_iterations", int),
            lengthscale=_get(parser, "learner", "lengthscale", _lengthscale, 4.0),
            jitter=_get(parser, "learner", "jitter", float, 1e-8),
        )

        def rel(p):
            return p if os.path.isabs(p) else os.path.join(base, p)

        cfg = ScenarioConfig(
            building=building,
            policy=policy,
            learner=learner,
            weather_path=rel(_get(parser, "scenario", "weather", str, required=True)),
            pv_path=rel(_get(parser, "scenario", "pv", str, required=True)),
            horizon_hours=_get(parser, "scenario", "horizon_hours", int),
            baseline_setpoint=_get(parser, "scenario", "baseline_setpoint", float, 21.0),
            reference_setpoint=_get(parser, "scenario", "reference_setpoint", float, 21.0),
            timestep=_get(parser, "scenario", "timestep", float, 60.0),
            output_dir=_get(parser, "scenario", "output_dir", str, "out"),
            seed=_get(parser, "scenario", "seed", int, 0),
            allow_unconverged=_get(parser, "scenario", "allow_unconverged", _bool, False),
        )
    except ConfigError:
        raise
    except InputError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if cfg.horizon_hours is not None and cfg.horizon_hours < 1:
        raise ConfigError("horizon_hours must be >= 1")
    return cfg, parser


def parser_text(parser: configparser.ConfigParser) -> str:
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
