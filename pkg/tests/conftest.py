import copy
import json
from pathlib import Path

import numpy as np
import pytest

from catchup import scenario as scenario_mod

SCENARIO_DIR = Path(scenario_mod.__file__).parent / "scenarios"
SHIPPED = sorted(p.stem for p in SCENARIO_DIR.glob("*.json"))


def shipped_path(name):
    return SCENARIO_DIR / f"{name}.json"


def shipped(name, **schedule):
    scn = scenario_mod.load(shipped_path(name))
    return scn.with_schedule(**schedule) if schedule else scn


def raw_shipped(name):
    return json.loads(shipped_path(name).read_text())


def make_scenario(**fields):
    """Scenario from a partial raw dict; defaults as in the file format."""
    raw = {"dimension": 1, "horizon": 1.0, "initial": {"u0": [0.0], "v0": [0.0]}}
    raw.update(copy.deepcopy(fields))
    return scenario_mod.from_spec(scenario_mod.normalize(raw))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance lines, printed together at the end of the session
ACCEPTANCE = []


def record_criterion(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
