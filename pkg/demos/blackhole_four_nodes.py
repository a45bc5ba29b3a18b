"""
A blackhole next to the source
==============================

Four nodes: S, a blackhole B, an honest relay A and the destination D.
B answers every route request at once with a forged reply.
"""

from anctsim import Simulation
from anctsim.core import ScenarioConfig

positions = [(0, 0), (200, 100), (200, -100), (400, 0)]
base = ScenarioConfig(node_count=4, area_width=1000, area_height=1000, speed=0.0, flow_pairs=((0, 3),),
                      attack_kind="blackhole", attacker_count=1, attackers=(1,), sim_duration=20.0)

for protocol in ("baseline_aodv", "anct"):
    # The positions are shifted into the area; only distances matter.
    sim = Simulation(base.replace(protocol=protocol), positions=[(x + 300, y + 300) for x, y in positions])
    sim.run()
    s = sim.summary()
    print(f"{protocol:14s} PDR={s.pdr:.3f}  dropped by attacker={s.drops_attacker}")

# Under ANCT the forged signature fails at S; trust in B falls by 0.1 per
# forgery until it reaches the threshold on the fifth.
for row in sim.trust_trace:
    if (row.observer, row.neighbor) == (0, 1):
        print(f"t={row.time:6.3f}s  tc={float(row.tc):.1f}  malicious={row.malicious}")
