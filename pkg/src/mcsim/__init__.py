"""Deterministic simulator of Hello broadcasting over multi-channel, multi-interface radios."""

from .engine import Engine
from .hello import HelloConfig, HelloProtocol
from .policy import Default, ExplicitStamp, HeaderDriven, StaticMap
from .radio import Medium, Outcome, Packet, Position
from .scenario import (
    ConfigError,
    ScenarioConfig,
    Simulation,
    build_and_run,
    dump_scenario,
    ideal_neighbors,
    load_scenario,
    load_scenario_file,
)
from .stats import RunSummary, discovery_completeness
from .trace import TraceRecord, audit, parse_line

__all__ = [
    "ConfigError", "Default", "Engine", "ExplicitStamp", "HeaderDriven", "HelloConfig",
    "HelloProtocol", "Medium", "Outcome", "Packet", "Position", "RunSummary",
    "ScenarioConfig", "Simulation", "StaticMap", "TraceRecord", "audit", "build_and_run",
    "discovery_completeness", "dump_scenario", "ideal_neighbors", "load_scenario",
    "load_scenario_file", "parse_line",
]
