"""Deterministic discrete-event core: event queue, link model, CBR traffic
and metrics."""

from __future__ import annotations

import enum
import heapq
import math
import random
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import mobility
from .adversary import ATTACKER_CLASSES, FloodingNode, build_profiles
from .core import (
    Packet,
    PacketKind,
    ScenarioConfig,
    US_PER_SECOND,
    seconds_to_us,
    us_to_seconds,
    validate_config,
)
from .crypto import KeyStore
from .routing import Node

SPEED_OF_LIGHT = 3e8
DROP_CAUSES = ("attacker", "link_loss", "queue", "no_route")

# Independent RNG stream per subsystem.
STREAM_SETUP, STREAM_MOBILITY, STREAM_CHANNEL, STREAM_TRAFFIC, STREAM_ADVERSARY = range(5)


def stream_rng(seed: int, stream: int) -> random.Random:
    state = np.random.SeedSequence(seed, spawn_key=(stream,)).generate_state(4, np.uint32)
    return random.Random(int.from_bytes(state.tobytes(), "little"))


class EventKind(enum.IntEnum):
    FRAME_DELIVERY = 0
    MOBILITY_TICK = 1
    TRAFFIC_TICK = 2
    TIMER_EXPIRY = 3
    FLOOD_TICK = 4


FRAME_DELIVERY = EventKind.FRAME_DELIVERY


class Event(NamedTuple):
    time: int  # microseconds
    seq: int
    kind: EventKind
    payload: tuple


class EventQueue:
    """Min-heap ordered by (time, seq); seq is assigned at scheduling."""

    def __init__(self):
        self._heap = []
        self._seq = 0

    def push(self, time: int, kind: EventKind, payload: tuple) -> None:
        heapq.heappush(self._heap, (time, self._seq, kind, payload))
        self._seq += 1

    def pop(self) -> Event:
        return Event._make(heapq.heappop(self._heap))

    def peek_time(self) -> Optional[int]:
        return self._heap[0][0] if self._heap else None

    def __len__(self):
        return len(self._heap)


def transmission_delay(size_bytes: int, capacity_bps: float) -> float:
    """Seconds to put ``size_bytes`` on a ``capacity_bps`` channel."""
    return size_bytes * 8 / capacity_bps


@dataclass
class Metrics:
    data_sent: int = 0
    data_delivered: int = 0
    data_dropped_by: dict = field(default_factory=lambda: {c: 0 for c in DROP_CAUSES})
    control_bytes_sent: int = 0
    control_packets_sent: int = 0
    delays_us: list = field(default_factory=list)
    hop_counts: list = field(default_factory=list)
    attacker_drops: Counter = field(default_factory=Counter)
    per_flow: dict = field(default_factory=dict)

    def flow(self, source: int, dest: int) -> dict:
        key = (source, dest)
        stats = self.per_flow.get(key)
        if stats is None:
            stats = self.per_flow[key] = {"sent": 0, "delivered": 0, **{c: 0 for c in DROP_CAUSES}}
        return stats

    @property
    def pdr(self) -> float:
        return self.data_delivered / self.data_sent if self.data_sent else 0.0

    def conserved(self) -> bool:
        return self.data_sent == self.data_delivered + sum(self.data_dropped_by.values())


@dataclass(frozen=True)
class Summary:
    seed: int
    protocol: str
    attack: str
    attackers: int
    speed: float
    pdr: float
    mean_delay_ms: Optional[float]
    ctrl_bytes: int
    ctrl_packets: int
    drops_attacker: int
    drops_link: int
    drops_queue: int
    drops_noroute: int

    CSV_COLUMNS = ("seed", "protocol", "attack", "attackers", "speed", "pdr", "mean_delay_ms",
                   "ctrl_bytes", "drops_attacker", "drops_link", "drops_queue", "drops_noroute")

    def csv_row(self) -> str:
        delay = "" if self.mean_delay_ms is None else f"{self.mean_delay_ms:.6f}"
        return ",".join([
            str(self.seed), self.protocol, self.attack, str(self.attackers), f"{self.speed:g}",
            f"{self.pdr:.6f}", delay, str(self.ctrl_bytes), str(self.drops_attacker),
            str(self.drops_link), str(self.drops_queue), str(self.drops_noroute),
        ])


def collect(metrics: Metrics, cfg: ScenarioConfig) -> Summary:
    delays = metrics.delays_us
    mean_delay = sum(delays) / len(delays) / 1000.0 if delays else None
    d = metrics.data_dropped_by
    return Summary(cfg.rng_seed, cfg.protocol.value, cfg.attack_kind.value, cfg.attacker_count,
                   cfg.speed, metrics.pdr, mean_delay, metrics.control_bytes_sent,
                   metrics.control_packets_sent, d["attacker"], d["link_loss"], d["queue"],
                   d["no_route"])


@dataclass
class TrustTraceRow:
    time: float
    observer: int
    neighbor: int
    fc: int
    tc: object  # Fraction
    sr: object  # Fraction or None
    malicious: bool
    verified: bool
    penalised: bool

    def csv(self) -> str:
        sr = "" if self.sr is None else f"{float(self.sr):.6f}"
        return (f"{self.time:.6f},{self.observer},{self.neighbor},{self.fc},"
                f"{float(self.tc):.6f},{sr},{int(self.malicious)}")


TRUST_TRACE_HEADER = "time,observer,neighbor,fc,tc,sr,malicious"


class Simulation:
    """One run of a scenario.

    ``positions`` pins initial coordinates (``{node: (x, y)}`` or a list);
    together with ``speed = 0`` this gives hand-built static topologies.
    """

    def __init__(self, cfg: ScenarioConfig, positions=None, trace_positions: bool = False):
        cfg = validate_config(cfg)
        self.cfg = cfg
        self.keys = KeyStore(cfg.rng_seed, cfg.cipher)
        self.queue = EventQueue()
        self.now = 0
        self.draining = False
        self.metrics = Metrics()
        self.trust_trace: list = []
        self.position_trace: Optional[list] = [] if trace_positions else None
        self.frame_observers: list = []
        self.delivered_payloads: dict = {}
        self.sent_payloads: dict = {}
        self.record_payloads = False

        self.rng_setup = stream_rng(cfg.rng_seed, STREAM_SETUP)
        self.rng_mobility = stream_rng(cfg.rng_seed, STREAM_MOBILITY)
        self.rng_channel = stream_rng(cfg.rng_seed, STREAM_CHANNEL)
        self.rng_traffic = stream_rng(cfg.rng_seed, STREAM_TRAFFIC)
        self.rng_adversary = stream_rng(cfg.rng_seed, STREAM_ADVERSARY)

        self.flows, self.attackers = self._choose_roles()
        self.profiles = {p.node: p for p in build_profiles(cfg.attack_kind, self.attackers, cfg.flood_rate)}

        self.walkers = mobility.init_positions(cfg, self.rng_mobility)
        if positions is not None:
            items = positions.items() if isinstance(positions, dict) else enumerate(positions)
            for node, (x, y) in items:
                w = self.walkers[node]
                self.walkers[node] = w.__class__(node, mobility.Position(x, y), mobility.Position(x, y),
                                                 w.speed, w.pause_until)
        self.pos = np.array([[w.current.x, w.current.y] for w in self.walkers], dtype=float)
        self.adj: list = []
        self.adj_sets: list = []
        self._refresh_adjacency()

        self.nodes = []
        for i in range(cfg.node_count):
            profile = self.profiles.get(i)
            cls = ATTACKER_CLASSES[profile.kind] if profile else None
            self.nodes.append(cls(i, self, profile) if cls else Node(i, self))

        n = cfg.node_count
        self.busy_until = [0] * n
        self.tx_queue = [deque() for _ in range(n)]
        self.outstanding: dict = {}
        self._uid = 0
        self._tick_us = seconds_to_us(cfg.mobility_tick)
        self._end_us = seconds_to_us(cfg.sim_duration)
        self._tx_us_cache: dict = {}
        self._handlers: dict = {
            EventKind.FRAME_DELIVERY: self._on_frame,
            EventKind.MOBILITY_TICK: self._on_mobility,
            EventKind.TRAFFIC_TICK: self._on_traffic,
            EventKind.TIMER_EXPIRY: self._on_timer,
            EventKind.FLOOD_TICK: self._on_flood,
        }
        self._started = False

    # -- setup -----------------------------------------------------------

    def _choose_roles(self):
        cfg = self.cfg
        rng = self.rng_setup
        order = list(range(cfg.node_count))
        rng.shuffle(order)
        if cfg.flow_pairs is not None:
            flows = list(cfg.flow_pairs)
            endpoints = {n for pair in flows for n in pair}
            pool = [n for n in order if n not in endpoints]
        else:
            flows = [(order[2 * i], order[2 * i + 1]) for i in range(cfg.flow_count)]
            pool = order[2 * cfg.flow_count:]
        if cfg.attackers is not None:
            attackers = list(cfg.attackers)
        else:
            # Prefix of a fixed permutation, so attacker sets nest as the count grows.
            attackers = pool[:cfg.attacker_count]
        return flows, attackers

    def _refresh_adjacency(self) -> None:
        self.adj = mobility.adjacency(self.pos, self.cfg.radio_range)
        self.adj_sets = [set(a) for a in self.adj]
        # Propagation delay to each current neighbor, in microseconds.
        self.adj_prop = []
        for i, row in enumerate(self.adj):
            if row:
                d = np.hypot(*(self.pos[row] - self.pos[i]).T)
                us = np.rint(d / SPEED_OF_LIGHT * US_PER_SECOND).astype(int).tolist()
                self.adj_prop.append(dict(zip(row, us)))
            else:
                self.adj_prop.append({})

    # -- net facade used by nodes --------------------------------------

    def in_range(self, a: int, b: int) -> bool:
        return b in self.adj_sets[a]

    def next_uid(self) -> int:
        self._uid += 1
        return self._uid

    def set_timer(self, delay_us: int, node: int, tag: str, args: tuple) -> None:
        self.queue.push(self.now + max(int(delay_us), 0), EventKind.TIMER_EXPIRY, (node, tag, args))

    def trace_trust(self, observer: int, update) -> None:
        e = update.entry
        self.trust_trace.append(TrustTraceRow(us_to_seconds(self.now), observer, update.neighbor, e.fc,
                                              e.tc, update.sr, e.malicious, update.verified,
                                              update.penalised))

    def data_delivered(self, frame: Packet, plaintext: bytes) -> None:
        self._settle(frame)
        m = self.metrics
        m.data_delivered += 1
        m.delays_us.append(self.now - frame.created_us)
        m.hop_counts.append(frame.hops)
        m.flow(frame.source, frame.destination)["delivered"] += 1
        if self.record_payloads:
            self.delivered_payloads[frame.uid] = plaintext

    def data_dropped(self, frame: Packet, cause: str, attacker: Optional[int] = None) -> None:
        self._settle(frame)
        self.metrics.data_dropped_by[cause] += 1
        self.metrics.flow(frame.source, frame.destination)[cause] += 1
        if attacker is not None:
            self.metrics.attacker_drops[attacker] += 1

    def _settle(self, frame: Packet) -> None:
        try:
            del self.outstanding[frame.uid]
        except KeyError:
            raise RuntimeError(f"data packet {frame.uid} accounted twice") from None

    # -- link model --------------------------------------------------------

    def _tx_us(self, size: int) -> int:
        v = self._tx_us_cache.get(size)
        if v is None:
            v = self._tx_us_cache[size] = seconds_to_us(transmission_delay(size, self.cfg.channel_capacity))
        return v

    def propagation_us(self, a: int, b: int) -> int:
        us = self.adj_prop[a].get(b)
        if us is None:
            dx, dy = self.pos[a] - self.pos[b]
            us = seconds_to_us(math.hypot(dx, dy) / SPEED_OF_LIGHT)
        return us

    def _contention_us(self, sender: int) -> int:
        mean = self.cfg.contention_mean
        if mean <= 0:
            return 0
        now = self.now
        busy_until = self.busy_until
        busy = sum(1 for j in self.adj[sender] if busy_until[j] > now)
        if not busy:
            return 0
        penalty = self.rng_channel.expovariate(1.0 / (mean * busy))
        return seconds_to_us(min(penalty, self.cfg.contention_cap))

    def transmit(self, frame: Packet, sender: int, receivers) -> Optional[int]:
        """Queue ``frame`` at ``sender`` for ``receivers`` (one shared
        transmission).  Returns the end-of-transmission time, or None if the
        transmit queue was full."""
        now = self.now
        q = self.tx_queue[sender]
        while q and q[0] <= now:
            q.popleft()
        is_data = frame.kind is PacketKind.DATA
        if len(q) >= self.cfg.queue_cap:
            if is_data:
                self.data_dropped(frame, "queue")
            return None
        size = frame.size_bytes
        start = max(now, self.busy_until[sender])
        end = start + self._tx_us(size) + self._contention_us(sender)
        self.busy_until[sender] = end
        q.append(end)
        if not is_data:
            self.metrics.control_bytes_sent += size
            self.metrics.control_packets_sent += 1
        loss = self.cfg.loss_probability
        rnd = self.rng_channel.random
        if is_data:
            frame = frame.hop(sender, hops=frame.hops + 1)
        prop = self.adj_prop[sender]
        push = self.queue.push
        for r in receivers:
            if loss > 0 and rnd() < loss:
                if is_data:
                    self.data_dropped(frame, "link_loss")
                continue
            push(end + prop[r], FRAME_DELIVERY, (r, sender, frame))
        return end

    def broadcast(self, sender: int, frame: Packet) -> None:
        node = self.nodes[sender]
        receivers = self.adj[sender]
        if node.secure:
            bad = node.table.malicious
            if bad:
                receivers = [r for r in receivers if r not in bad]
        self.transmit(frame, sender, receivers)

    def unicast(self, sender: int, to: int, frame: Packet) -> bool:
        if to not in self.adj_sets[sender]:
            if frame.kind is PacketKind.DATA:
                self.data_dropped(frame, "no_route")
            return False
        return self.transmit(frame, sender, (to,)) is not None

    def tunnel(self, sender: int, to: int, frame: Packet) -> None:
        if frame.kind is PacketKind.DATA:
            frame = frame.hop(sender, hops=frame.hops + 1)
        latency = max(seconds_to_us(self.cfg.wormhole_latency), 1)
        self.queue.push(self.now + latency, EventKind.FRAME_DELIVERY, (to, sender, frame))

    # -- traffic -----------------------------------------------------------

    def inject_data(self, source: int, dest: int) -> Packet:
        uid = self.next_uid()
        payload = self.rng_traffic.randbytes(self.cfg.packet_size)
        frame = Packet(PacketKind.DATA, uid, source, dest, source, 0, payload=payload, uid=uid,
                       created_us=self.now)
        self.metrics.data_sent += 1
        self.metrics.flow(source, dest)["sent"] += 1
        self.outstanding[uid] = (source, dest)
        if self.record_payloads:
            self.sent_payloads[uid] = payload
        self.nodes[source].originate_data(frame)
        return frame

    # -- event handlers ----------------------------------------------------

    def _on_frame(self, payload) -> None:
        receiver, sender, frame = payload
        if self.draining and frame.kind is not PacketKind.DATA:
            return
        for obs in self.frame_observers:
            obs(self.now, sender, receiver, frame)
        self.nodes[receiver].receive(frame, sender)

    def _on_mobility(self, payload) -> None:
        (t_prev,) = payload
        cfg = self.cfg
        if cfg.speed > 0:
            rng = self.rng_mobility
            walkers = self.walkers
            for i, w in enumerate(walkers):
                w = walkers[i] = mobility.advance(w, t_prev, self.now, rng, cfg)
                self.pos[i, 0] = w.current.x
                self.pos[i, 1] = w.current.y
            self._refresh_adjacency()
        if self.position_trace is not None:
            t = us_to_seconds(self.now)
            self.position_trace.extend((t, i, x, y) for i, (x, y) in enumerate(self.pos.tolist()))
        nxt = self.now + self._tick_us
        if nxt < self._end_us:
            self.queue.push(nxt, EventKind.MOBILITY_TICK, (self.now,))

    def _on_traffic(self, payload) -> None:
        source, dest, period = payload
        self.inject_data(source, dest)
        nxt = self.now + period
        if nxt < self._end_us:
            self.queue.push(nxt, EventKind.TRAFFIC_TICK, payload)

    def _on_timer(self, payload) -> None:
        node, tag, args = payload
        self.nodes[node].on_timer(tag, args)

    def _on_flood(self, payload) -> None:
        (node,) = payload
        attacker = self.nodes[node]
        attacker.flooder_tick(self.rng_adversary)
        nxt = self.now + attacker.flood_interval_us()
        if nxt < self._end_us:
            self.queue.push(nxt, EventKind.FLOOD_TICK, payload)

    # -- driver ------------------------------------------------------------

    def start(self) -> None:
        """Schedule the periodic events (idempotent)."""
        if self._started:
            return
        self._started = True
        cfg = self.cfg
        if self.position_trace is not None:
            self.position_trace.extend((0.0, i, x, y) for i, (x, y) in enumerate(self.pos.tolist()))
        if self._tick_us < self._end_us:
            self.queue.push(self._tick_us, EventKind.MOBILITY_TICK, (0,))
        period = max(seconds_to_us(1.0 / cfg.cbr_rate), 1)
        start = seconds_to_us(cfg.flow_start)
        for s, d in self.flows:
            if start < self._end_us:
                self.queue.push(start, EventKind.TRAFFIC_TICK, (s, d, period))
        for node in self.attackers:
            if isinstance(self.nodes[node], FloodingNode):
                self.queue.push(0, EventKind.FLOOD_TICK, (node,))

    def run_until(self, t_us: int) -> None:
        """Process every event with time < ``t_us``."""
        self.start()
        heap = self.queue._heap
        pop = heapq.heappop
        handlers = self._handlers
        while heap and heap[0][0] < t_us:
            time, _, kind, payload = pop(heap)
            self.now = time
            handlers[kind](payload)
        self.now = max(self.now, t_us)

    def run(self) -> Metrics:
        self.run_until(self._end_us)
        # Drain: let data frames already in flight land; nothing new starts.
        self.draining = True
        drain_end = self._end_us + seconds_to_us(self.cfg.drain_time)
        queue = self.queue
        while len(queue) and queue.peek_time() <= drain_end:
            ev = queue.pop()
            if ev.kind is EventKind.FRAME_DELIVERY:
                self.now = ev.time
                self._on_frame(ev.payload)
        # Whatever is still buffered or in flight never arrived.
        for source, dest in self.outstanding.values():
            self.metrics.data_dropped_by["no_route"] += 1
            self.metrics.flow(source, dest)["no_route"] += 1
        self.outstanding.clear()
        return self.metrics

    def summary(self) -> Summary:
        return collect(self.metrics, self.cfg)

    def trust_trace_csv(self) -> str:
        return TRUST_TRACE_HEADER + "\n" + "".join(r.csv() + "\n" for r in self.trust_trace)

    def position_trace_csv(self) -> str:
        import io
        buf = io.StringIO()
        mobility.write_position_trace(self.position_trace or [], buf)
        return buf.getvalue()


def run(cfg: ScenarioConfig, **kwargs) -> Metrics:
    return Simulation(cfg, **kwargs).run()
