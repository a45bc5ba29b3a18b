from collections import Counter

import pytest

from anctsim import ScenarioConfig, Simulation
from anctsim.core import PacketKind, seconds_to_us


def static_config(n, **overrides):
    """Static, lossless, contention-free scenario for hand-built topologies."""
    base = dict(
        node_count=n,
        area_width=5000.0,
        area_height=5000.0,
        speed=0.0,
        loss_probability=0.0,
        contention_mean=0.0,
        flow_pairs=(),
        cipher="test",
        sim_duration=30.0,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


def static_sim(positions, **overrides):
    positions = list(positions)
    return Simulation(static_config(len(positions), **overrides), positions=positions)


def line(n, spacing=200.0, y=100.0):
    return [(100.0 + i * spacing, y) for i in range(n)]


def advance(sim, seconds):
    sim.run_until(sim.now + seconds_to_us(seconds))


class FrameTally:
    """Omniscient per-link frame counter, fed by the engine's delivery hook."""

    def __init__(self, sim):
        self.frames = Counter()  # (receiver, sender) -> frames delivered
        self.rreps = []  # (receiver, sender, p_r, route, frames_so_far)
        self.to_dest = Counter()  # (dest, source) -> RREQ copies + data frames
        sim.frame_observers.append(self)

    def __call__(self, now, sender, receiver, frame):
        self.frames[(receiver, sender)] += 1
        if frame.kind is PacketKind.RREP:
            self.rreps.append((receiver, sender, frame.p_r, frame.route, self.frames[(receiver, sender)]))
        if frame.destination == receiver and frame.kind in (PacketKind.RREQ, PacketKind.DATA):
            self.to_dest[(receiver, frame.source)] += 1


@pytest.fixture
def tally_factory():
    return FrameTally
