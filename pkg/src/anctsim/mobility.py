"""Random waypoint mobility and disk-graph connectivity snapshots."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import NodeId, Position, ScenarioConfig, US_PER_SECOND


@dataclass(frozen=True)
class WaypointState:
    node: NodeId
    current: Position
    target: Position
    speed: float
    pause_until: int  # microseconds; the node is paused while t < pause_until


def _uniform_position(cfg: ScenarioConfig, rng) -> Position:
    return Position(rng.uniform(0.0, cfg.area_width), rng.uniform(0.0, cfg.area_height))


def init_positions(cfg: ScenarioConfig, rng) -> list:
    """I.i.d. uniform placement and first targets, in node-id order."""
    states = []
    for node in range(cfg.node_count):
        current = _uniform_position(cfg, rng)
        target = _uniform_position(cfg, rng)
        states.append(WaypointState(node, current, target, cfg.speed, 0))
    return states


def advance(state: WaypointState, t_from: int, t_to: int, rng, cfg: ScenarioConfig) -> WaypointState:
    """Move ``state`` from ``t_from`` to ``t_to`` (microseconds).

    The node travels in a straight line at constant speed; on arrival it
    pauses ``cfg.pause_time`` seconds and then draws a fresh uniform target.
    """
    if t_to < t_from:
        raise ValueError("cannot advance backwards in time")
    if state.speed <= 0:
        return state
    now = t_from
    while now < t_to:
        if now < state.pause_until:
            if t_to <= state.pause_until:
                return state
            now = state.pause_until
            state = replace(state, target=_uniform_position(cfg, rng))
            continue
        cx, cy = state.current.x, state.current.y
        dx, dy = state.target.x - cx, state.target.y - cy
        dist = math.hypot(dx, dy)
        travel_us = dist / state.speed * US_PER_SECOND
        remaining = t_to - now
        if travel_us > remaining:
            frac = remaining / travel_us
            return replace(state, current=Position(cx + dx * frac, cy + dy * frac))
        # Arrival lands on a microsecond boundary for exact bookkeeping.
        arrive = now + max(int(math.ceil(travel_us)), 0)
        pause_us = int(round(cfg.pause_time * US_PER_SECOND))
        state = replace(state, current=state.target, pause_until=arrive + pause_us)
        now = arrive
        if now >= t_to:
            return state
    return state


def adjacency(positions: np.ndarray, radio_range: float) -> list:
    """Neighbor lists (sorted node ids) of the disk graph, boundary inclusive."""
    diff = positions[:, None, :] - positions[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    within = d2 <= radio_range * radio_range
    np.fill_diagonal(within, False)
    return [np.flatnonzero(row).tolist() for row in within]


def neighbors(positions, radio_range: float) -> dict:
    """Adjacency for ``[(node, Position), ...]`` as ``{node: set(neighbors)}``."""
    ids = [n for n, _ in positions]
    arr = np.array([[p.x, p.y] for _, p in positions], dtype=float).reshape(-1, 2)
    lists = adjacency(arr, radio_range) if len(ids) else []
    return {ids[i]: {ids[j] for j in row} for i, row in enumerate(lists)}


def write_position_trace(rows, fh) -> None:
    """Write ``time,node,x,y`` CSV rows."""
    fh.write("time,node,x,y\n")
    for t, node, x, y in rows:
        fh.write(f"{t:.6f},{node},{x:.3f},{y:.3f}\n")
