"""Scenario documents: loading, validation, serialisation and running.

Scenario files are YAML. Example::

    num_nodes: 8
    num_interfaces: 3
    positions: {grid: {cols: 4, spacing: 50}}
    hello: {enabled: true}
    policy: {type: static_map, map: {7: 0}, fallback: 1}
    duration_ms: 30000
    seed: 1
"""

from __future__ import annotations

import io
import math
import random
import time
from contextlib import ExitStack
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from . import policy as pol
from .engine import Engine, ms_to_us
from .hello import HelloConfig, HelloProtocol
from .radio import (
    DEFAULT_BITRATE,
    DEFAULT_NUM_CHANNELS,
    DEFAULT_PROPAGATION_US,
    DEFAULT_RANGE_M,
    Medium,
    Position,
    airtime_us,
)
from .stats import Pair, RunSummary, ideal_relation
from .trace import Topology, TraceWriter

DEFAULT_NUM_INTERFACES = 3
DEFAULT_DURATION_MS = 10_000


class ConfigError(ValueError):
    """Invalid scenario document; the message names the offending key."""


@dataclass(frozen=True)
class Grid:
    cols: int
    spacing: float


@dataclass(frozen=True)
class RandomPlacement:
    width: float
    height: float


Placement = tuple[tuple[float, float], ...] | Grid | RandomPlacement


@dataclass(frozen=True)
class Broadcast:
    node: int
    at_ms: int
    size_bytes: int = 64


@dataclass(frozen=True)
class ScenarioConfig:
    num_nodes: int
    num_interfaces: int = DEFAULT_NUM_INTERFACES
    num_channels: int = DEFAULT_NUM_CHANNELS
    radio_range: float = DEFAULT_RANGE_M
    bitrate: int = DEFAULT_BITRATE
    propagation_delay_us: int = DEFAULT_PROPAGATION_US
    positions: Placement | None = None
    tuning: tuple[int, ...] | None = None
    tuning_overrides: Mapping[int, tuple[int, ...]] = field(default_factory=dict)
    hello: HelloConfig = field(default_factory=HelloConfig)
    policy: pol.ChannelPolicy = field(default_factory=pol.Default)
    broadcasts: tuple[Broadcast, ...] = ()
    duration_ms: int = DEFAULT_DURATION_MS
    seed: int = 0
    trace_path: str | None = None

    @property
    def duration_us(self) -> int:
        return ms_to_us(self.duration_ms)

    def resolved_positions(self) -> list[Position]:
        p = self.positions
        if isinstance(p, Grid):
            return [Position((i % p.cols) * p.spacing, (i // p.cols) * p.spacing) for i in range(self.num_nodes)]
        if isinstance(p, RandomPlacement):
            rng = random.Random(f"mcsim/placement/{self.seed}")
            return [Position(rng.uniform(0, p.width), rng.uniform(0, p.height)) for _ in range(self.num_nodes)]
        if p is None:
            return [Position(0.0, 0.0)]
        return [Position(x, y) for x, y in p]

    def initial_channels(self) -> list[tuple[int, ...]]:
        base = self.tuning or tuple(i % self.num_channels for i in range(self.num_interfaces))
        return [self.tuning_overrides.get(n, base) for n in range(self.num_nodes)]

    def topology(self) -> Topology:
        return Topology(
            positions=[(p.x, p.y) for p in self.resolved_positions()],
            radio_range=self.radio_range,
            num_interfaces=self.num_interfaces,
            propagation_delay=self.propagation_delay_us,
            durations={
                "HELLO": airtime_us(self.hello.size_bytes, self.bitrate),
                **{"DATA": airtime_us(b.size_bytes, self.bitrate) for b in self.broadcasts[:1]},
            },
            horizon=self.duration_us,
        )


# --- parsing ----------------------------------------------------------------

_TOP_KEYS = {
    "num_nodes", "num_interfaces", "num_channels", "radio_range", "bitrate",
    "propagation_delay_us", "positions", "tuning", "hello", "policy",
    "broadcasts", "duration_ms", "seed", "trace_path",
}
_HELLO_KEYS = {"enabled", "interval_ms", "jitter_ms", "allowed_loss", "size_bytes"}


def _int(value: Any, key: str, lo: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(f"{key}: must be >= {lo}, got {value}")
    return value


def _num(value: Any, key: str, lo: float | None = None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{key}: expected a finite number, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(f"{key}: must be >= {lo}, got {value}")
    return float(value)


def _mapping(value: Any, key: str, allowed: set[str] | None = None) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{key}: expected a mapping, got {type(value).__name__}")
    if allowed is not None:
        unknown = sorted(set(map(str, value)) - allowed)
        if unknown:
            raise ConfigError(f"{key}.{unknown[0]}: unknown key" if key else f"{unknown[0]}: unknown key")
    return value


def _node_key(raw: Any, key: str) -> int:
    if isinstance(raw, str) and raw.isdigit():
        raw = int(raw)
    return _int(raw, key, 0)


def _channel(value: Any, key: str, num_channels: int) -> int:
    ch = _int(value, key, 0)
    if ch >= num_channels:
        raise ConfigError(f"{key}: channel {ch} out of range (num_channels={num_channels})")
    return ch


def _node(value: int, key: str, num_nodes: int) -> int:
    if value >= num_nodes:
        raise ConfigError(f"{key}: node {value} out of range (num_nodes={num_nodes})")
    return value


def _channel_list(value: Any, key: str, num_ifaces: int, num_channels: int) -> tuple[int, ...]:
    if isinstance(value, int) and not isinstance(value, bool):
        value = [value] * num_ifaces
    if not isinstance(value, list) or len(value) != num_ifaces:
        raise ConfigError(f"{key}: expected a channel or a list of {num_ifaces} channels")
    return tuple(_channel(c, f"{key}[{i}]", num_channels) for i, c in enumerate(value))


def _parse_positions(value: Any, num_nodes: int) -> Placement | None:
    if value is None:
        if num_nodes == 1:
            return None
        raise ConfigError("positions: required when num_nodes > 1 (explicit list, grid or random)")
    if isinstance(value, list):
        if len(value) != num_nodes:
            raise ConfigError(f"positions: expected {num_nodes} entries, got {len(value)}")
        pts = []
        for i, p in enumerate(value):
            if not isinstance(p, (list, tuple)) or len(p) != 2:
                raise ConfigError(f"positions[{i}]: expected [x, y]")
            pts.append((_num(p[0], f"positions[{i}].x"), _num(p[1], f"positions[{i}].y")))
        return tuple(pts)
    value = _mapping(value, "positions", {"grid", "random"})
    if len(value) != 1:
        raise ConfigError("positions: give exactly one of grid or random")
    if "grid" in value:
        g = _mapping(value["grid"], "positions.grid", {"cols", "spacing"})
        for k in ("cols", "spacing"):
            if k not in g:
                raise ConfigError(f"positions.grid.{k}: missing")
        return Grid(_int(g["cols"], "positions.grid.cols", 1), _num(g["spacing"], "positions.grid.spacing", 0))
    r = _mapping(value["random"], "positions.random", {"width", "height"})
    for k in ("width", "height"):
        if k not in r:
            raise ConfigError(f"positions.random.{k}: missing")
    return RandomPlacement(_num(r["width"], "positions.random.width", 0), _num(r["height"], "positions.random.height", 0))


def _parse_policy(value: Any, num_nodes: int, num_channels: int) -> pol.ChannelPolicy:
    if value is None:
        return pol.Default()
    if isinstance(value, str):
        value = {"type": value}
    value = _mapping(value, "policy")
    kind = value.get("type")
    allowed = {
        "default": {"type"},
        "explicit_stamp": {"type", "channel"},
        "static_map": {"type", "map", "fallback"},
        "header_driven": {"type", "stamps"},
    }
    if kind not in allowed:
        raise ConfigError(f"policy.type: expected one of {sorted(allowed)}, got {kind!r}")
    _mapping(value, "policy", allowed[kind])
    if kind == "default":
        return pol.Default()
    if kind == "explicit_stamp":
        if "channel" not in value:
            raise ConfigError("policy.channel: missing")
        return pol.ExplicitStamp(_channel(value["channel"], "policy.channel", num_channels))

    def node_channels(raw: Any, key: str) -> dict[int, int]:
        out = {}
        for k, v in _mapping(raw or {}, key).items():
            n = _node(_node_key(k, key), key, num_nodes)
            out[n] = _channel(v, f"{key}.{n}", num_channels)
        return dict(sorted(out.items()))

    if kind == "static_map":
        if "fallback" not in value:
            raise ConfigError("policy.fallback: missing")
        return pol.StaticMap(node_channels(value.get("map"), "policy.map"),
                             _channel(value["fallback"], "policy.fallback", num_channels))
    return pol.HeaderDriven(node_channels(value.get("stamps"), "policy.stamps"))


def parse_scenario(doc: Any) -> ScenarioConfig:
    doc = _mapping(doc, "", _TOP_KEYS)
    if "num_nodes" not in doc:
        raise ConfigError("num_nodes: missing")
    n = _int(doc["num_nodes"], "num_nodes", 1)
    ni = _int(doc.get("num_interfaces", DEFAULT_NUM_INTERFACES), "num_interfaces", 1)
    nc = _int(doc.get("num_channels", DEFAULT_NUM_CHANNELS), "num_channels", 1)
    bitrate = _int(doc.get("bitrate", DEFAULT_BITRATE), "bitrate", 1)

    tuning, overrides = None, {}
    if doc.get("tuning") is not None:
        t = _mapping(doc["tuning"], "tuning", {"default", "nodes"})
        if "default" in t:
            tuning = _channel_list(t["default"], "tuning.default", ni, nc)
        for k, v in _mapping(t.get("nodes") or {}, "tuning.nodes").items():
            node = _node(_node_key(k, "tuning.nodes"), "tuning.nodes", n)
            overrides[node] = _channel_list(v, f"tuning.nodes.{node}", ni, nc)
        overrides = dict(sorted(overrides.items()))

    h = _mapping(doc.get("hello") or {}, "hello", _HELLO_KEYS)
    enabled = h.get("enabled", False)
    if not isinstance(enabled, bool):
        raise ConfigError(f"hello.enabled: expected true/false, got {enabled!r}")
    hello = HelloConfig(
        enabled=enabled,
        interval_ms=_int(h.get("interval_ms", 1000), "hello.interval_ms", 1),
        jitter_ms=_int(h.get("jitter_ms", 100), "hello.jitter_ms", 0),
        allowed_loss=_int(h.get("allowed_loss", 3), "hello.allowed_loss", 1),
        size_bytes=_int(h.get("size_bytes", 64), "hello.size_bytes", 1),
    )
    if hello.interval_us <= airtime_us(hello.size_bytes, bitrate):
        raise ConfigError("hello.interval_ms: interval must exceed the Hello airtime")

    broadcasts = []
    raw_b = doc.get("broadcasts") or []
    if not isinstance(raw_b, list):
        raise ConfigError("broadcasts: expected a list")
    for i, b in enumerate(raw_b):
        key = f"broadcasts[{i}]"
        b = _mapping(b, key, {"node", "at_ms", "size_bytes"})
        for k in ("node", "at_ms"):
            if k not in b:
                raise ConfigError(f"{key}.{k}: missing")
        broadcasts.append(Broadcast(
            _node(_int(b["node"], f"{key}.node", 0), f"{key}.node", n),
            _int(b["at_ms"], f"{key}.at_ms", 0),
            _int(b.get("size_bytes", 64), f"{key}.size_bytes", 1),
        ))
    if len({b.size_bytes for b in broadcasts}) > 1:
        raise ConfigError("broadcasts: all broadcasts must share one size_bytes")

    trace_path = doc.get("trace_path")
    if trace_path is not None and not isinstance(trace_path, str):
        raise ConfigError("trace_path: expected a string")

    return ScenarioConfig(
        num_nodes=n,
        num_interfaces=ni,
        num_channels=nc,
        radio_range=_num(doc.get("radio_range", DEFAULT_RANGE_M), "radio_range", 0),
        bitrate=bitrate,
        propagation_delay_us=_int(doc.get("propagation_delay_us", DEFAULT_PROPAGATION_US), "propagation_delay_us", 0),
        positions=_parse_positions(doc.get("positions"), n),
        tuning=tuning,
        tuning_overrides=overrides,
        hello=hello,
        policy=_parse_policy(doc.get("policy"), n, nc),
        broadcasts=tuple(broadcasts),
        duration_ms=_int(doc.get("duration_ms", DEFAULT_DURATION_MS), "duration_ms", 0),
        seed=_int(doc.get("seed", 0), "seed", 0),
        trace_path=trace_path,
    )


def load_scenario(text: str) -> ScenarioConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"document: not valid YAML ({exc})") from exc
    return parse_scenario(doc if doc is not None else {})


def load_scenario_file(path: str | Path) -> ScenarioConfig:
    return load_scenario(Path(path).read_text())


def to_document(cfg: ScenarioConfig) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "num_nodes": cfg.num_nodes,
        "num_interfaces": cfg.num_interfaces,
        "num_channels": cfg.num_channels,
        "radio_range": cfg.radio_range,
        "bitrate": cfg.bitrate,
        "propagation_delay_us": cfg.propagation_delay_us,
    }
    p = cfg.positions
    if isinstance(p, Grid):
        doc["positions"] = {"grid": {"cols": p.cols, "spacing": p.spacing}}
    elif isinstance(p, RandomPlacement):
        doc["positions"] = {"random": {"width": p.width, "height": p.height}}
    elif p is not None:
        doc["positions"] = [[x, y] for x, y in p]
    if cfg.tuning is not None or cfg.tuning_overrides:
        t: dict[str, Any] = {}
        if cfg.tuning is not None:
            t["default"] = list(cfg.tuning)
        if cfg.tuning_overrides:
            t["nodes"] = {n: list(ch) for n, ch in cfg.tuning_overrides.items()}
        doc["tuning"] = t
    h = cfg.hello
    doc["hello"] = {"enabled": h.enabled, "interval_ms": h.interval_ms, "jitter_ms": h.jitter_ms,
                    "allowed_loss": h.allowed_loss, "size_bytes": h.size_bytes}
    policy = cfg.policy
    if isinstance(policy, pol.ExplicitStamp):
        doc["policy"] = {"type": "explicit_stamp", "channel": policy.channel}
    elif isinstance(policy, pol.StaticMap):
        doc["policy"] = {"type": "static_map", "map": dict(policy.mapping), "fallback": policy.fallback}
    elif isinstance(policy, pol.HeaderDriven):
        doc["policy"] = {"type": "header_driven", "stamps": dict(policy.stamps)}
    else:
        doc["policy"] = {"type": "default"}
    if cfg.broadcasts:
        doc["broadcasts"] = [{"node": b.node, "at_ms": b.at_ms, "size_bytes": b.size_bytes} for b in cfg.broadcasts]
    doc["duration_ms"] = cfg.duration_ms
    doc["seed"] = cfg.seed
    if cfg.trace_path is not None:
        doc["trace_path"] = cfg.trace_path
    return doc


def dump_scenario(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(to_document(cfg), sort_keys=False)


# --- running ----------------------------------------------------------------


def channel_sets(cfg: ScenarioConfig) -> tuple[dict[int, set[int]], dict[int, set[int]]]:
    """Per-node transmit and listen channels right after start-up tuning."""
    tx, rx = {}, {}
    for node, chans in enumerate(cfg.initial_channels()):
        listen = set(chans)
        for _, ch in pol.initial_retunes(cfg.policy, node, cfg.num_interfaces):
            listen = {ch}
        rx[node] = listen
        if isinstance(cfg.policy, pol.ExplicitStamp):
            tx[node] = {cfg.policy.channel}
        elif isinstance(cfg.policy, pol.StaticMap):
            tx[node] = {cfg.policy.channel_for(node)}
        else:
            tx[node] = set(listen)
    return tx, rx


def ideal_neighbors(cfg: ScenarioConfig) -> set[Pair]:
    if not cfg.hello.enabled:
        return set()
    tx, rx = channel_sets(cfg)
    pts = [(p.x, p.y) for p in cfg.resolved_positions()]
    return ideal_relation(pts, cfg.radio_range, tx, rx)


class Simulation:
    """One run of a scenario: engine, medium and Hello protocol wired together."""

    def __init__(self, cfg: ScenarioConfig, trace: TraceWriter | None = None, log_deliveries: bool = False) -> None:
        self.config = cfg
        self.engine = Engine(cfg.seed)
        self.trace = trace if trace is not None else TraceWriter(keep=True)
        self.medium = Medium(
            self.engine,
            cfg.resolved_positions(),
            cfg.num_interfaces,
            cfg.num_channels,
            cfg.radio_range,
            cfg.bitrate,
            cfg.propagation_delay_us,
            initial_channels=cfg.initial_channels(),
            trace=self.trace,
            log_deliveries=log_deliveries,
        )
        self.hello = HelloProtocol(self.engine, self.medium, cfg.hello, cfg.policy)
        self._started = False

    def start(self) -> None:
        if self._started:
            return
        self._started = True
        self.medium.announce_tuning()
        for node in range(self.config.num_nodes):
            for i, ch in pol.initial_retunes(self.config.policy, node, self.config.num_interfaces):
                self.medium.retune(self.medium.ifaces[node][i], ch)
        self.hello.start()
        for b in self.config.broadcasts:
            self.engine.schedule(ms_to_us(b.at_ms), "Broadcast", self.hello.broadcast_all_channels, b.node, b.size_bytes)

    def run(self, until_us: int | None = None) -> RunSummary:
        t0 = time.perf_counter()
        self.start()
        self.engine.run_until(self.config.duration_us if until_us is None else until_us)
        return self.summary(time.perf_counter() - t0)

    def summary(self, wall: float = 0.0) -> RunSummary:
        return RunSummary(
            num_nodes=self.config.num_nodes,
            num_interfaces=self.config.num_interfaces,
            duration_us=self.engine.now,
            counters={k: replace(v) for k, v in self.medium.counters.items()},
            neighbor_tables={n: self.hello.neighbors(n) for n in range(self.config.num_nodes)},
            ever_heard={n: tuple(sorted(s)) for n, s in enumerate(self.hello.ever_heard)},
            events_executed=self.engine.executed,
            wall_clock_s=wall,
        )


@dataclass
class RunResult:
    summary: RunSummary
    simulation: Simulation
    trace_text: str | None = None


def build_and_run(cfg: ScenarioConfig, keep_trace: bool = False, log_deliveries: bool = False) -> RunResult:
    """Run ``cfg`` to completion.

    The trace goes to ``cfg.trace_path`` when set; with ``keep_trace`` (or no
    path) it is also returned as text.
    """
    with ExitStack() as stack:
        stream = None
        if cfg.trace_path is not None:
            stream = stack.enter_context(open(cfg.trace_path, "w", encoding="ascii", newline="\n"))
        keep = keep_trace or stream is None
        buf = io.StringIO() if keep else None
        writer = TraceWriter(stream if stream is not None else buf)
        if stream is not None and buf is not None:
            writer = _TeeWriter(stream, buf)
        sim = Simulation(cfg, writer, log_deliveries=log_deliveries)
        summary = sim.run()
    return RunResult(summary, sim, buf.getvalue() if buf is not None else None)


class _TeeWriter(TraceWriter):
    def __init__(self, *streams: io.TextIOBase) -> None:
        super().__init__()
        self.streams = streams

    def emit(self, record) -> None:
        line = record.format() + "\n"
        for s in self.streams:
            s.write(line)
        self.count += 1
