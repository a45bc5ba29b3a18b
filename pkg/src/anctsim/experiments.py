"""Parameter sweeps and the two canned delivery-ratio experiments."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from statistics import fmean
from typing import Optional

from .core import AttackKind, Protocol, ScenarioConfig, validate_config
from .engine import Simulation, Summary

VARY_FIELDS = {"attackers": "attacker_count", "speed": "speed"}
DEFAULT_ATTACKER_COUNTS = (0, 5, 10, 15, 20, 25)
DEFAULT_SPEEDS = (10.0, 20.0, 30.0, 40.0, 50.0)
DEFAULT_SEEDS = tuple(range(1, 11))
PROTOCOLS = (Protocol.ANCT, Protocol.BASELINE_AODV)


@dataclass(frozen=True)
class SweepSpec:
    base: ScenarioConfig
    vary: str
    values: tuple
    seeds: tuple
    protocols: tuple = PROTOCOLS

    def __post_init__(self):
        if self.vary not in VARY_FIELDS:
            raise ValueError(f"vary must be one of {sorted(VARY_FIELDS)}")
        if not self.values:
            raise ValueError("vary list must be non-empty")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if not self.protocols:
            raise ValueError("protocols must be non-empty")

    def configs(self) -> list:
        """One validated config per (value, protocol, seed), in that nesting."""
        key = VARY_FIELDS[self.vary]
        out = []
        for value in self.values:
            for protocol in self.protocols:
                for seed in self.seeds:
                    cfg = self.base.replace(**{key: value}, protocol=Protocol(protocol), rng_seed=seed)
                    out.append(validate_config(cfg))
        return out


def run_one(cfg: ScenarioConfig) -> Summary:
    sim = Simulation(cfg)
    sim.run()
    return sim.summary()


def run_sweep(spec: SweepSpec, workers: Optional[int] = None, runner=run_one) -> list:
    """Summaries in ``spec.configs()`` order, however many workers run them."""
    configs = spec.configs()
    workers = workers if workers is not None else (os.cpu_count() or 1)
    if workers <= 1 or len(configs) <= 1:
        return [runner(cfg) for cfg in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(runner, configs))


@dataclass(frozen=True)
class PointStat:
    protocol: str
    x: float
    mean_pdr: float
    min_pdr: float
    max_pdr: float
    n: int


def aggregate(rows, vary: str) -> list:
    """Mean/min/max PDR per (protocol, x); independent of row order."""
    groups: dict = {}
    for r in rows:
        x = r.attackers if vary == "attackers" else r.speed
        groups.setdefault((r.protocol, x), []).append(r.pdr)
    stats = []
    for (protocol, x), pdrs in sorted(groups.items()):
        stats.append(PointStat(protocol, x, fmean(pdrs), min(pdrs), max(pdrs), len(pdrs)))
    return stats


def rows_csv(rows) -> str:
    lines = [",".join(Summary.CSV_COLUMNS)]
    lines += [r.csv_row() for r in rows]
    return "\n".join(lines) + "\n"


def points_csv(stats, vary: str) -> str:
    lines = [f"protocol,{vary},mean_pdr,min_pdr,max_pdr,runs"]
    for s in stats:
        lines.append(f"{s.protocol},{s.x:g},{s.mean_pdr:.6f},{s.min_pdr:.6f},{s.max_pdr:.6f},{s.n}")
    return "\n".join(lines) + "\n"


def attacker_sweep_spec(base: Optional[ScenarioConfig] = None, counts=DEFAULT_ATTACKER_COUNTS,
                        seeds=DEFAULT_SEEDS, speed: float = 10.0) -> SweepSpec:
    """Delivery ratio against blackhole attacker count at fixed speed."""
    base = (base or ScenarioConfig()).replace(attack_kind=AttackKind.BLACKHOLE, speed=speed)
    return SweepSpec(base, "attackers", tuple(counts), tuple(seeds))


def mobility_sweep_spec(base: Optional[ScenarioConfig] = None, speeds=DEFAULT_SPEEDS,
                        seeds=DEFAULT_SEEDS, attackers: int = 10) -> SweepSpec:
    """Delivery ratio against node speed with a fixed set of blackholes."""
    base = (base or ScenarioConfig()).replace(attack_kind=AttackKind.BLACKHOLE, attacker_count=attackers)
    return SweepSpec(base, "speed", tuple(speeds), tuple(seeds))


def attacker_sweep_experiment(workers=None, **kwargs) -> str:
    spec = attacker_sweep_spec(**kwargs)
    return points_csv(aggregate(run_sweep(spec, workers), spec.vary), spec.vary)


def mobility_sweep_experiment(workers=None, **kwargs) -> str:
    spec = mobility_sweep_spec(**kwargs)
    return points_csv(aggregate(run_sweep(spec, workers), spec.vary), spec.vary)
