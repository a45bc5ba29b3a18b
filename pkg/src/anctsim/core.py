"""Shared domain types: node ids, simulation time, positions, packets, routes
and the scenario configuration with its text file format."""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Optional

NodeId = int

# Simulation time is kept as integer microseconds so event ordering is exact.
US_PER_SECOND = 1_000_000

HEADER_BYTES = 48
SIGNATURE_ENTRY_BYTES = 8
MAC_TAG_BYTES = 16


def seconds_to_us(seconds: float) -> int:
    return int(round(seconds * US_PER_SECOND))


def us_to_seconds(t_us: int) -> float:
    return t_us / US_PER_SECOND


class ConfigError(ValueError):
    """Raised when a scenario violates one of its invariants."""


class AttackKind(str, enum.Enum):
    NONE = "none"
    BLACKHOLE = "blackhole"
    FLOODING = "flooding"
    WORMHOLE = "wormhole"


class Protocol(str, enum.Enum):
    ANCT = "anct"
    BASELINE_AODV = "baseline_aodv"


class PacketKind(enum.Enum):
    RREQ = "Rreq"
    RREP = "Rrep"
    DATA = "Data"


@dataclass(frozen=True)
class Position:
    x: float
    y: float


def distance(a: Position, b: Position) -> float:
    """Euclidean distance in meters."""
    return math.hypot(a.x - b.x, a.y - b.y)


@dataclass(frozen=True)
class Packet:
    kind: PacketKind
    seq: int
    source: NodeId
    destination: NodeId
    originator_of_hop: NodeId
    route_id: int
    hop_record: tuple = ()
    # Selected route on an RREP; source route on a data frame.
    route: tuple = ()
    p_r: int = 0
    mac_tag: Optional[bytes] = None
    signatures: tuple = ()
    payload: bytes = b""
    # Engine bookkeeping, not part of the frame size.
    uid: int = 0
    created_us: int = 0
    hops: int = 0

    @property
    def size_bytes(self) -> int:
        return packet_size_bytes(self.kind, len(self.signatures), self.mac_tag is not None, len(self.payload))

    def hop(self, sender: NodeId, **changes) -> "Packet":
        """Copy of this frame as retransmitted by ``sender``."""
        return dataclasses.replace(self, originator_of_hop=sender, **changes)


def packet_size_bytes(kind: PacketKind, n_signatures: int, has_mac: bool, payload_len: int) -> int:
    size = HEADER_BYTES + SIGNATURE_ENTRY_BYTES * n_signatures + payload_len
    if has_mac:
        size += MAC_TAG_BYTES
    return size


@dataclass
class RouteEntry:
    destination: NodeId
    next_hop: NodeId
    full_path: tuple
    route_id: int
    established_at: int  # microseconds
    valid: bool = True


# ---------------------------------------------------------------------------
# Scenario configuration


@dataclass(frozen=True)
class ScenarioConfig:
    node_count: int = 100
    area_width: float = 1000.0
    area_height: float = 1000.0
    radio_range: float = 250.0
    sim_duration: float = 50.0
    channel_capacity: float = 2e6
    packet_size: int = 512
    cbr_rate: float = 4.0
    # None means "draw flow_count random disjoint pairs from the seed".
    flow_pairs: Optional[tuple] = None
    flow_count: int = 10
    flow_start: float = 0.0
    speed: float = 10.0
    pause_time: float = 5.0
    rng_seed: int = 1
    delta1: float = 0.1
    delta2: float = 0.05
    s_min: float = 0.5
    t_trust: float = 0.5
    tc_initial: float = 1.0
    rrep_timeout: float = 1.0
    rrep_window: float = 0.05
    max_retries: int = 5
    retry_backoff: float = 2.0
    route_lifetime: float = 3.0
    source_buffer: int = 64
    attacker_count: int = 0
    attack_kind: AttackKind = AttackKind.NONE
    attackers: Optional[tuple] = None
    flood_rate: float = 50.0
    wormhole_latency: float = 1e-6
    wormhole_drops_data: bool = True
    protocol: Protocol = Protocol.ANCT
    cipher: str = "aes"
    mobility_tick: float = 0.1
    loss_probability: float = 0.01
    contention_mean: float = 0.5e-3
    contention_cap: float = 20e-3
    queue_cap: int = 50
    drain_time: float = 1.0

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
_CIPHERS = ("aes", "test")


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def validate_config(cfg: ScenarioConfig) -> ScenarioConfig:
    """Return ``cfg`` (with enum fields normalised) if every invariant holds.

    Raises ConfigError naming the first violated invariant.
    """
    cfg = cfg.replace(attack_kind=AttackKind(cfg.attack_kind), protocol=Protocol(cfg.protocol))
    _check(cfg.node_count >= 2, "node_count must be >= 2")
    _check(cfg.area_width > 0, "area_width must be > 0")
    _check(cfg.area_height > 0, "area_height must be > 0")
    _check(cfg.radio_range > 0, "radio_range must be > 0")
    _check(cfg.sim_duration > 0, "sim_duration must be > 0")
    _check(cfg.channel_capacity > 0, "channel_capacity must be > 0")
    _check(cfg.packet_size > 0, "packet_size must be > 0")
    _check(cfg.cbr_rate > 0, "cbr_rate must be > 0")
    _check(cfg.speed >= 0, "speed must be >= 0")
    _check(cfg.pause_time >= 0, "pause_time must be >= 0")
    _check(0 <= cfg.rng_seed < 2**64, "rng_seed must be a 64-bit unsigned integer")
    _check(cfg.delta1 > 0, "delta1 must be > 0")
    _check(cfg.delta2 > 0, "delta2 must be > 0")
    _check(cfg.delta2 < cfg.delta1, "delta2 must be < delta1")
    _check(0 < cfg.s_min <= 1, "s_min must be in (0, 1]")
    _check(cfg.rrep_timeout > 0, "rrep_timeout must be > 0")
    _check(0 <= cfg.rrep_window < cfg.rrep_timeout, "rrep_window must be in [0, rrep_timeout)")
    _check(cfg.max_retries >= 0, "max_retries must be >= 0")
    _check(cfg.retry_backoff >= 0, "retry_backoff must be >= 0")
    _check(cfg.route_lifetime > 0, "route_lifetime must be > 0")
    _check(cfg.source_buffer >= 1, "source_buffer must be >= 1")
    _check(cfg.mobility_tick > 0, "mobility_tick must be > 0")
    _check(0 <= cfg.loss_probability <= 1, "loss_probability must be in [0, 1]")
    _check(cfg.contention_mean >= 0, "contention_mean must be >= 0")
    _check(cfg.contention_cap >= 0, "contention_cap must be >= 0")
    _check(cfg.queue_cap >= 1, "queue_cap must be >= 1")
    _check(cfg.drain_time >= 0, "drain_time must be >= 0")
    _check(cfg.cipher in _CIPHERS, f"cipher must be one of {_CIPHERS}")
    _check(cfg.wormhole_latency > 0, "wormhole_latency must be > 0")
    _check(0 <= cfg.attacker_count < cfg.node_count, "attacker_count must be < node_count")
    if cfg.attack_kind is AttackKind.NONE:
        _check(cfg.attacker_count == 0, "attacker_count must be 0 when attack_kind is none")
    if cfg.attack_kind is AttackKind.FLOODING:
        _check(cfg.flood_rate > 0, "flood_rate must be > 0")
    if cfg.attack_kind is AttackKind.WORMHOLE:
        _check(cfg.attacker_count % 2 == 0, "wormhole attackers need a partner (attacker_count must be even)")

    nodes = range(cfg.node_count)
    if cfg.flow_pairs is not None:
        pairs = tuple((int(s), int(d)) for s, d in cfg.flow_pairs)
        for s, d in pairs:
            _check(s in nodes and d in nodes, "flow endpoints must be valid node ids")
            _check(s != d, "flow source and destination must differ")
        cfg = cfg.replace(flow_pairs=pairs)
    else:
        _check(cfg.flow_count >= 0, "flow_count must be >= 0")
        _check(2 * cfg.flow_count + cfg.attacker_count <= cfg.node_count,
               "not enough nodes for flow_count disjoint pairs plus attackers")
    if cfg.attackers is not None:
        attackers = tuple(int(a) for a in cfg.attackers)
        _check(len(attackers) == cfg.attacker_count, "attackers list length must equal attacker_count")
        _check(len(set(attackers)) == len(attackers), "attackers must be distinct")
        _check(all(a in nodes for a in attackers), "attackers must be valid node ids")
        cfg = cfg.replace(attackers=attackers)
        if cfg.flow_pairs is not None:
            endpoints = {n for pair in cfg.flow_pairs for n in pair}
            _check(not endpoints & set(attackers), "flow endpoints must be non-attackers")
    elif cfg.flow_pairs is not None:
        endpoints = {n for pair in cfg.flow_pairs for n in pair}
        _check(cfg.node_count - len(endpoints) >= cfg.attacker_count,
               "flow endpoints must be non-attackers (not enough free nodes)")
    return cfg


# ---------------------------------------------------------------------------
# Scenario file format: ``key = value`` lines, ``#`` comments.


def _format_value(value) -> str:
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ", ".join(f"{a}-{b}" for a, b in value)
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(name: str, text: str):
    text = text.strip()
    default = _FIELDS[name].default
    try:
        if name == "flow_pairs":
            if text.lower() == "none":
                return None
            pairs = []
            for item in text.split(","):
                s, d = item.strip().split("-")
                pairs.append((int(s), int(d)))
            return tuple(pairs)
        if name == "attackers":
            if text.lower() == "none":
                return None
            return tuple(int(v) for v in text.split(",") if v.strip())
        if name == "attack_kind":
            return AttackKind(text)
        if name == "protocol":
            return Protocol(text)
        if isinstance(default, bool):
            if text.lower() not in ("true", "false", "1", "0"):
                raise ValueError(text)
            return text.lower() in ("true", "1")
        if isinstance(default, int):
            return int(text, 0)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {text!r}") from exc


def apply_overrides(cfg: ScenarioConfig, items: dict) -> ScenarioConfig:
    """Apply ``{key: text_value}`` overrides; unknown keys are an error."""
    changes = {}
    for key, text in items.items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key: {key}")
        changes[key] = _parse_value(key, text)
    return cfg.replace(**changes)


def parse_scenario(text: str, base: Optional[ScenarioConfig] = None) -> ScenarioConfig:
    items = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key: {key}")
        if key in items:
            raise ConfigError(f"line {lineno}: duplicate key {key}")
        items[key] = value
    return apply_overrides(base or ScenarioConfig(), items)


def serialize_scenario(cfg: ScenarioConfig) -> str:
    lines = [f"{name} = {_format_value(getattr(cfg, name))}" for name in _FIELDS]
    return "\n".join(lines) + "\n"


def load_scenario(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())
