from __future__ import annotations

import numpy as np
import pytest

from hrsg_ftc import cli, harness
from hrsg_ftc.plant import DESK_DISTURBANCE, PlantParams

ACCEPTANCE_LINES: list[str] = []
_GENERATED: list[tuple[str, dict]] = []


def pytest_configure(config):
    """Record every trace produced through the harness for the one-sidedness check."""
    real = harness.run_scenario

    def recording(cfg, controller=None, measurement_hook=None):
        res = real(cfg, controller, measurement_hook)
        _GENERATED.append((controller or cfg.controller, res.trace))
        return res

    harness.run_scenario = recording
    cli.run_scenario = recording


def pytest_collection_modifyitems(items):
    # acceptance last, so the one-sidedness criterion sees the whole suite's traces
    items.sort(key=lambda item: item.path.name == "test_acceptance.py")


@pytest.fixture(autouse=True)
def _one_sided_guard():
    """Every SMC trace produced by any test must respect one-sidedness."""
    start = len(_GENERATED)
    yield
    for ctrl, tr in _GENERATED[start:]:
        if ctrl == "smc":
            bad = np.sum((tr["s"] <= 0) & (tr["u_cmd"] != 0))
            assert bad == 0, f"{bad} rows with s <= 0 and nonzero SMC input"


def generated_traces():
    return list(_GENERATED)


@pytest.fixture
def desk():
    return PlantParams()


@pytest.fixture
def desk_d():
    return DESK_DISTURBANCE


@pytest.fixture(scope="session")
def standard_runs():
    cfg = harness.standard_scenario()
    return {c: harness.run_scenario(cfg, controller=c) for c in ("smc", "pid")}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
