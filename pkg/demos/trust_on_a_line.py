"""
Watching trust evolve on a three-node line
==========================================

S - A - D with one constant-bit-rate flow.  Every few seconds the route
expires and S rediscovers it; each reply lets S re-evaluate A.
"""

from anctsim import ScenarioConfig, Simulation

cfg = ScenarioConfig(node_count=3, area_width=1000, area_height=200, speed=0.0, flow_pairs=((0, 2),),
                     sim_duration=20.0, loss_probability=0.0)
sim = Simulation(cfg, positions=[(100, 100), (300, 100), (500, 100)])
sim.run()

print("PDR:", sim.summary().pdr)

# The first reply only reflects the route request (SR = 2).  Later replies
# carry a dozen data packets in P_R while A sent S just two frames, so the
# success-ratio penalty applies; the passed verification still nets +0.05.
for row in sim.trust_trace:
    if (row.observer, row.neighbor) == (0, 1):
        sr = "-" if row.sr is None else f"{float(row.sr):.3f}"
        print(f"t={row.time:6.3f}s  fc={row.fc:3d}  sr={sr}  tc={float(row.tc):.2f}")
