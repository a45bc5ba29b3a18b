"""
Delivery ratio against the number of blackholes
===============================================

A reduced version of the attacker sweep: 50 nodes, 20 s, three seeds.
The full-size sweep is ``anctsim experiment attackers``.
"""

from anctsim import ScenarioConfig
from anctsim.experiments import aggregate, attacker_sweep_spec, points_csv, run_sweep

base = ScenarioConfig(node_count=50, area_width=700, area_height=700, sim_duration=20.0, flow_count=5)
spec = attacker_sweep_spec(base, counts=(0, 3, 6, 9), seeds=(1, 2, 3))
rows = run_sweep(spec, workers=1)
print(points_csv(aggregate(rows, "attackers"), "attackers"))
