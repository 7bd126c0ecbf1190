import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import run_records
from mcsim import policy as pol
from mcsim.hello import HelloConfig
from mcsim.scenario import (
    Broadcast,
    ConfigError,
    Grid,
    RandomPlacement,
    ScenarioConfig,
    build_and_run,
    dump_scenario,
    load_scenario,
)


def test_minimal_document_defaults():
    cfg = load_scenario("num_nodes: 1")
    assert cfg.num_interfaces == 3
    assert cfg.num_channels == 16
    assert cfg.policy == pol.Default()
    assert cfg.hello.enabled is False
    assert (cfg.hello.interval_ms, cfg.hello.jitter_ms, cfg.hello.allowed_loss) == (1000, 100, 3)
    assert cfg.radio_range == 250.0 and cfg.bitrate == 2_000_000 and cfg.propagation_delay_us == 1


@pytest.mark.parametrize("doc, needle", [
    ("num_nodes: 5\npositions: {grid: {cols: 5, spacing: 10}}\npolicy: {type: static_map, map: {7: 0}, fallback: 1}",
     "node 7 out of range"),
    ("num_nodes: 1\nnum_channels: 2\npolicy: {type: explicit_stamp, channel: 5}", "policy.channel"),
    ("num_nodes: 1\ncolour: blue", "colour"),
    ("num_nodes: 1\nhello: {enabled: true, period: 3}", "hello.period"),
    ("num_nodes: 2", "positions"),
    ("num_nodes: 2\npositions: [[0, 0]]", "positions"),
    ("num_nodes: 0", "num_nodes"),
    ("num_interfaces: 2", "num_nodes"),
    ("num_nodes: 1\nnum_channels: 4\ntuning: {default: [0, 1, 9]}", "tuning.default[2]"),
    ("num_nodes: 1\ntuning: {nodes: {3: 0}}", "tuning.nodes"),
    ("num_nodes: 1\nhello: {interval_ms: 0}", "hello.interval_ms"),
    ("num_nodes: 1\nhello: {allowed_loss: 0}", "hello.allowed_loss"),
    ("num_nodes: 1\npolicy: {type: magic}", "policy.type"),
    ("num_nodes: 1\nbroadcasts: [{node: 2, at_ms: 0}]", "broadcasts[0].node"),
    ("num_nodes: 1\nradio_range: .nan", "radio_range"),
    ("num_nodes: true", "num_nodes"),
    ("num_nodes: [", "YAML"),
])
def test_validation_errors_name_the_key(doc, needle):
    with pytest.raises(ConfigError, match=needle.replace("[", r"\[").replace("]", r"\]")):
        load_scenario(doc)


def test_all_design_constants_overridable():
    cfg = load_scenario(
        "num_nodes: 1\nradio_range: 100\nbitrate: 1000000\npropagation_delay_us: 3\n"
        "hello: {enabled: true, interval_ms: 500, jitter_ms: 10, allowed_loss: 2, size_bytes: 32}\n"
    )
    assert (cfg.radio_range, cfg.bitrate, cfg.propagation_delay_us) == (100.0, 1_000_000, 3)
    assert cfg.hello == HelloConfig(True, 500, 10, 2, 32)


def test_position_generators():
    grid = ScenarioConfig(num_nodes=5, positions=Grid(2, 10.0)).resolved_positions()
    assert [(p.x, p.y) for p in grid] == [(0, 0), (10, 0), (0, 10), (10, 10), (0, 20)]
    rnd = ScenarioConfig(num_nodes=4, positions=RandomPlacement(100, 50), seed=3)
    pts = rnd.resolved_positions()
    assert pts == rnd.resolved_positions()
    assert all(0 <= p.x <= 100 and 0 <= p.y <= 50 for p in pts)


channels = st.integers(0, 3)
policies = st.one_of(
    st.just(pol.Default()),
    st.builds(pol.ExplicitStamp, channels),
    st.builds(pol.StaticMap, st.dictionaries(st.integers(0, 3), channels, max_size=3).map(lambda d: dict(sorted(d.items()))), channels),
    st.builds(pol.HeaderDriven, st.dictionaries(st.integers(0, 3), channels, max_size=3).map(lambda d: dict(sorted(d.items())))),
)
coords = st.floats(-1e4, 1e4, allow_nan=False)
placements = st.one_of(
    st.tuples(*[st.tuples(coords, coords)] * 4),
    st.builds(Grid, st.integers(1, 4), st.floats(0, 500, allow_nan=False)),
    st.builds(RandomPlacement, st.floats(0, 500, allow_nan=False), st.floats(0, 500, allow_nan=False)),
)


@settings(max_examples=80, deadline=None)
@given(
    placements, policies,
    st.none() | st.tuples(channels, channels),
    st.dictionaries(st.integers(0, 3), st.tuples(channels, channels), max_size=2),
    st.builds(HelloConfig, st.booleans(), st.integers(1, 5000), st.integers(0, 200), st.integers(1, 5), st.integers(1, 64)),
    st.lists(st.builds(Broadcast, st.integers(0, 3), st.integers(0, 1000), st.just(64)), max_size=2),
    st.integers(0, 2**63), st.integers(0, 10**6), st.none() | st.just("out.tr"),
)
def test_load_dump_round_trip(placement, policy, tuning, overrides, hello, bcasts, seed, dur, trace):
    cfg = ScenarioConfig(
        num_nodes=4, num_interfaces=2, num_channels=4, radio_range=123.5, positions=placement,
        tuning=tuning, tuning_overrides=dict(sorted(overrides.items())), hello=hello, policy=policy,
        broadcasts=tuple(bcasts), duration_ms=dur, seed=seed, trace_path=trace,
    )
    assert load_scenario(dump_scenario(cfg)) == cfg


def test_split_scenario_node_7_hears_nothing(scenario_file):
    cfg = dataclasses.replace(scenario_file("split.yaml"), duration_ms=10_000)
    result = build_and_run(cfg)
    assert result.summary.node_counters(7).receptions == 0


def test_two_nodes_discover_each_other_within_1100ms():
    # first Hellos go out by t <= 100 ms (jitter); the frame lands 257 us later,
    # so both tables are populated by 100.257 ms << 1.1 s.
    cfg = ScenarioConfig(num_nodes=2, num_interfaces=1, positions=((0, 0), (100, 0)),
                         tuning=(0,), hello=HelloConfig(enabled=True), duration_ms=5000)
    from mcsim.scenario import Simulation

    for seed in range(10):
        sim = Simulation(dataclasses.replace(cfg, seed=seed))
        sim.start()
        sim.engine.run_until(1_100_000)
        assert sim.hello.neighbors(0) == (1,) and sim.hello.neighbors(1) == (0,)


def test_out_of_range_nodes_never_meet():
    cfg = ScenarioConfig(num_nodes=2, positions=((0, 0), (1000, 0)),
                         hello=HelloConfig(enabled=True), duration_ms=5000)
    summary = build_and_run(cfg).summary
    assert summary.neighbor_tables == {0: (), 1: ()}
    assert summary.ever_heard == {0: (), 1: ()}


def test_unwritable_trace_path_fails_at_startup(tmp_path):
    cfg = ScenarioConfig(num_nodes=1, trace_path=str(tmp_path / "missing" / "x.tr"))
    with pytest.raises(OSError):
        build_and_run(cfg)


def test_trace_written_to_path_matches_in_memory(tmp_path):
    cfg = ScenarioConfig(num_nodes=2, positions=((0, 0), (50, 0)), hello=HelloConfig(enabled=True),
                         duration_ms=3000, trace_path=str(tmp_path / "t.tr"))
    res = build_and_run(cfg, keep_trace=True)
    assert (tmp_path / "t.tr").read_text() == res.trace_text
    _, recs = run_records(dataclasses.replace(cfg, trace_path=None))
    assert "".join(r.format() + "\n" for r in recs) == res.trace_text


def test_receptions_bounded_by_sends():
    cfg = ScenarioConfig(num_nodes=5, positions=Grid(5, 20.0), tuning=(0, 0, 0),
                         hello=HelloConfig(enabled=True), duration_ms=5000)
    s = build_and_run(cfg).summary
    t = s.totals()
    assert t.receptions <= t.sends * (s.num_nodes - 1) * s.num_interfaces
