"""A committee of per-temperature surrogates, trained lazily.

Each member maps the six rooms' setpoint deltas (-1, 0, +1, +2 °C around a
21 °C reference) to the building's consumption over the next hour, for one
half-degree band of outdoor temperature. Members are trained only when the
weather first visits their band.
"""

from dataclasses import replace

from hvac_surrogate import scenario
from hvac_surrogate.committee import Committee, bucket_of, building_simulator_factory, setpoint_grid
from hvac_surrogate.config import load_config

cfg, _ = load_config()
weather = scenario.load_weather(cfg.weather_path).head(24)
factory = building_simulator_factory(cfg.building, cfg.reference_setpoint, cfg.timestep)

for threshold in (1.0, 0.05, 0.01):
    committee = Committee(setpoint_grid(cfg.building.n_rooms), replace(cfg.learner, std_threshold=threshold))
    for stamp, t in zip(weather.timestamps, weather.values):
        committee.get_or_train(t, factory, when=stamp.isoformat())
    s = committee.stats()
    print(f"threshold {threshold:<5} {s.models_created} models, {s.total_simulations:5d} simulations, "
          f"{committee.training_seconds:5.1f} s")

# With a threshold of 1.0 the learner never iterates, so each member costs
# exactly its 2**6 corner simulations.
print("buckets visited:", sorted({bucket_of(t).value for t in weather.values}))
first = committee.log[0]
print(f"first member: {first.bucket} °C at {first.when}, {first.simulations} simulations")
