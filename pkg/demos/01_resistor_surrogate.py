"""Surrogate of a self-heating resistor.

A resistor's resistance grows with its temperature and its temperature grows
with the power it dissipates, so the current at a given voltage is the fixed
point of a small nonlinear system. We treat that solver as an expensive
black box and let the active learner decide which voltages to evaluate.

Run with ``python demos/01_resistor_surrogate.py``.
"""

import numpy as np

from hvac_surrogate import thermal_sim as ts
from hvac_surrogate.active_learner import InputGrid, LearnerConfig, build_surrogate

params = ts.ResistorParams()

# One input: voltage from 10 V to 10 kV at a fixed 20 °C ambient.
volts = np.linspace(10.0, 10000.0, 1000)
grid = InputGrid((volts,), ("voltage",))
calls = []


def simulate(point):
    calls.append(point[0])
    return ts.resistor_equilibrium(params, point[0], 293.15).current


config = LearnerConfig(std_threshold=0.01, init_strategy="spread", init_size=4, lengthscale=0.7)
table = build_surrogate(grid, config, simulate)

truth = np.array([r.current for r in ts.sweep_resistor(params, volts, 293.15)])
rel = np.abs(table.predicted - truth) / truth
print(f"grid points         {grid.size}")
print(f"solver calls        {table.simulation_count}  ({table.iteration_count} chosen by the learner)")
print(f"max relative error  {100 * rel.max():.3f} %")
print("max std per iteration:", " ".join(f"{s:.3f}" for s in table.std_history))
print("voltages the learner asked for:", ", ".join(f"{v:.0f}" for v in calls[4:]))

# Two inputs: voltage and ambient temperature on a 50 x 50 grid.
grid2 = InputGrid((np.linspace(500.0, 10000.0, 50), np.linspace(273.15, 313.15, 50)), ("voltage", "ambient"))
cfg2 = LearnerConfig(std_threshold=0.01, init_strategy="random", init_size=10, seed=0, lengthscale=0.7)
table2 = build_surrogate(grid2, cfg2, lambda p: ts.resistor_equilibrium(params, p[0], p[1]).current)
truth2 = np.array([ts.resistor_equilibrium(params, v, a).current for v, a in grid2.points])
rel2 = np.abs(table2.predicted - truth2) / truth2
print(f"\n2-D: {table2.simulation_count} of {grid2.size} points simulated, "
      f"max relative error {100 * rel2.max():.3f} %")
