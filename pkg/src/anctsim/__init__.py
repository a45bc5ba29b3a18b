"""Discrete-event MANET simulator for assured-neighbor trust routing with
counter-mode link protection."""

from .core import (
    AttackKind,
    ConfigError,
    Packet,
    PacketKind,
    Position,
    Protocol,
    RouteEntry,
    ScenarioConfig,
    distance,
    load_scenario,
    parse_scenario,
    serialize_scenario,
    validate_config,
)
from .engine import Metrics, Simulation, Summary, collect, run

__all__ = [
    "AttackKind", "ConfigError", "Packet", "PacketKind", "Position", "Protocol", "RouteEntry",
    "ScenarioConfig", "distance", "load_scenario", "parse_scenario", "serialize_scenario",
    "validate_config", "Metrics", "Simulation", "Summary", "collect", "run",
]

__version__ = "0.1.0"
