"""Counters, run summaries and neighbour-discovery metrics."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Mapping, Sequence

Pair = tuple[int, int]


@dataclass(slots=True)
class CounterSet:
    sends: int = 0
    receptions: int = 0
    drops_collision: int = 0
    drops_busy: int = 0
    drops_mismatch: int = 0
    duplicates: int = 0
    retunes: int = 0
    tx_dropped: int = 0
    deliver_starts: int = 0
    in_flight: int = 0

    def __add__(self, other: CounterSet) -> CounterSet:
        return CounterSet(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    @property
    def drops(self) -> int:
        return self.drops_collision + self.drops_busy + self.drops_mismatch

    def as_dict(self) -> dict[str, int]:
        return asdict(self)


def rollup(parts: Iterable[CounterSet]) -> CounterSet:
    total = CounterSet()
    for p in parts:
        total = total + p
    return total


@dataclass
class RunSummary:
    num_nodes: int
    num_interfaces: int
    duration_us: int
    counters: dict[Pair, CounterSet]
    neighbor_tables: dict[int, tuple[int, ...]]
    ever_heard: dict[int, tuple[int, ...]]
    events_executed: int = 0
    wall_clock_s: float = field(default=0.0, compare=False)

    def node_counters(self, node: int) -> CounterSet:
        return rollup(self.counters[(node, i)] for i in range(self.num_interfaces))

    def totals(self) -> CounterSet:
        return rollup(self.counters.values())

    def discovered_pairs(self) -> set[Pair]:
        return {(obs, nb) for obs, table in self.neighbor_tables.items() for nb in table}

    def json_lines(self) -> list[str]:
        out = []
        for node in range(self.num_nodes):
            rec = {"record": "node", "node": node, **self.node_counters(node).as_dict()}
            rec["neighbors"] = list(self.neighbor_tables.get(node, ()))
            out.append(json.dumps(rec, sort_keys=True))
        glob = {
            "record": "global",
            "num_nodes": self.num_nodes,
            "num_interfaces": self.num_interfaces,
            "duration_us": self.duration_us,
            "events_executed": self.events_executed,
            "wall_clock_s": round(self.wall_clock_s, 6),
            **self.totals().as_dict(),
        }
        out.append(json.dumps(glob, sort_keys=True))
        return out

    def text(self) -> str:
        t = self.totals()
        lines = [
            f"nodes={self.num_nodes} interfaces={self.num_interfaces} duration={self.duration_us}us "
            f"events={self.events_executed} wall={self.wall_clock_s:.3f}s",
            f"sends={t.sends} receptions={t.receptions} collisions={t.drops_collision} "
            f"busy={t.drops_busy} mismatch={t.drops_mismatch} duplicates={t.duplicates} "
            f"retunes={t.retunes} tx_dropped={t.tx_dropped}",
        ]
        for node in range(self.num_nodes):
            c = self.node_counters(node)
            nbrs = ",".join(map(str, self.neighbor_tables.get(node, ()))) or "-"
            lines.append(
                f"  node {node}: s={c.sends} r={c.receptions} coll={c.drops_collision} "
                f"dup={c.duplicates} tune={c.retunes} neighbors={nbrs}"
            )
        return "\n".join(lines)


def ideal_relation(
    positions: Sequence[tuple[float, float]],
    radio_range: float,
    tx_channels: Mapping[int, Iterable[int]],
    rx_channels: Mapping[int, Iterable[int]],
) -> set[Pair]:
    """Brute-force the (observer, neighbour) pairs that can ever hear each other.

    A pair qualifies when the two nodes are within range and the neighbour
    transmits on at least one channel the observer listens on.
    """
    ideal = set()
    for obs, (xo, yo) in enumerate(positions):
        listen = set(rx_channels.get(obs, ()))
        for nb, (xn, yn) in enumerate(positions):
            if nb == obs or math.hypot(xo - xn, yo - yn) > radio_range:
                continue
            if listen & set(tx_channels.get(nb, ())):
                ideal.add((obs, nb))
    return ideal


def discovery_completeness(summary: RunSummary | Iterable[Pair], ideal: set[Pair]) -> float:
    if not ideal:
        return 1.0
    found = summary.discovered_pairs() if isinstance(summary, RunSummary) else set(summary)
    return len(found & ideal) / len(ideal)
