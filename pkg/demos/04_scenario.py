"""Two days of PV-aware control against a fixed setpoint.

The controller keeps rooms between 19 and 24 °C while occupied, and at each
hour picks the setpoint change whose predicted consumption best matches the
PV forecast, favouring the coldest room. The baseline simply holds 21 °C.
Both share the night setback and the morning preheat.

For the full 15-day run use the command line instead::

    hvac-surrogate run-scenario --out out
    hvac-surrogate baseline --out out
    hvac-surrogate report --out out
"""

from dataclasses import replace

from hvac_surrogate import scenario
from hvac_surrogate.config import load_config
from hvac_surrogate.metrics import compare

cfg, _ = load_config()
cfg = replace(cfg, horizon_hours=48)
weather, pv = scenario.load_weather(cfg.weather_path), scenario.load_pv(cfg.pv_path)

controlled = scenario.run_controlled(cfg, weather, pv)
baseline = scenario.run_baseline(cfg, weather, pv)
print(compare(controlled.ledger, baseline.ledger).to_text())

print("hour  mode          PV kWh  used kWh  setpoints")
for r in controlled.records[24:48]:
    sp = " ".join(f"{s:4.1f}" for s in r.setpoints)
    print(f"{r.timestamp:%H:%M}  {r.mode:12s}  {r.pv_kwh:6.2f}  {r.consumed_kwh:8.2f}  {sp}")
print(f"\n{controlled.committee.models_created} surrogates trained with "
      f"{controlled.committee.total_simulations} one-hour simulations")
