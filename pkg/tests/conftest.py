from __future__ import annotations

import random
import sys
from pathlib import Path

import pytest

from mcsim import policy as pol
from mcsim.hello import HelloConfig
from mcsim.scenario import ScenarioConfig, build_and_run, load_scenario_file
from mcsim.trace import parse_line

sys.path.insert(0, str(Path(__file__).parent))

SCENARIO_DIR = Path(__file__).parent / "scenarios"


def run_records(cfg: ScenarioConfig, **kw):
    result = build_and_run(cfg, keep_trace=True, **kw)
    records = [parse_line(line, i) for i, line in enumerate(result.trace_text.splitlines(True), 1)]
    return result, records


def small_random_config(seed: int) -> ScenarioConfig:
    """Dense little scenarios with short Hello intervals so frames overlap often."""
    rng = random.Random(seed)
    n = rng.randint(2, 5)
    ni = rng.randint(1, 3)
    nc = rng.randint(1, 3)
    positions = tuple((rng.uniform(0, 300), rng.uniform(0, 300)) for _ in range(n))
    choice = rng.randrange(4)
    if choice == 0:
        policy = pol.Default()
    elif choice == 1:
        policy = pol.ExplicitStamp(rng.randrange(nc))
    elif choice == 2:
        policy = pol.StaticMap({rng.randrange(n): rng.randrange(nc)}, rng.randrange(nc))
    else:
        policy = pol.HeaderDriven({0: rng.randrange(nc)} if rng.random() < 0.7 else {})
    overrides = {node: tuple(rng.randrange(nc) for _ in range(ni)) for node in range(n) if rng.random() < 0.5}
    interval = rng.randint(2, 4)
    # cap transmissions at roughly 50: n * ni copies per firing
    firings = max(1, 50 // (n * ni))
    return ScenarioConfig(
        num_nodes=n,
        num_interfaces=ni,
        num_channels=nc,
        positions=positions,
        tuning_overrides=overrides,
        hello=HelloConfig(enabled=True, interval_ms=interval, jitter_ms=1),
        policy=policy,
        duration_ms=interval * firings - 1,
        seed=seed,
    )


@pytest.fixture
def scenario_file():
    def load(name: str) -> ScenarioConfig:
        return load_scenario_file(SCENARIO_DIR / name)
    return load


ACCEPTANCE: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda k: int(k.split()[1].rstrip(":"))):
        terminalreporter.write_line(f"{name} {ACCEPTANCE[name]}")
