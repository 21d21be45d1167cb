"""Shared closed-loop runs.  Each scenario is simulated once per session."""
from __future__ import annotations

import hashlib

import pytest

from dremobs.acceptance import suite_configs
from dremobs.config import config_from_dict, preset
from dremobs.harness import run_scenario


@pytest.fixture(scope="session")
def run_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("runs")


@pytest.fixture(scope="session")
def scenario_runs(run_dir):
    """Lazily run named scenarios; returns a callable ``get(role) -> RunResult``."""
    cfgs = suite_configs()
    cfgs["excited"] = config_from_dict(preset("excited"))
    excited_ce = preset("excited")
    excited_ce["observer"]["mode"] = "certainty-equivalence"
    cfgs["excited_ce"] = config_from_dict(excited_ce)
    cache = {}

    def get(role):
        if role not in cache:
            cache[role] = run_scenario(cfgs[role], run_dir / f"{role}.csv")
        return cache[role]

    return get


@pytest.fixture(scope="session")
def canonical(scenario_runs):
    return scenario_runs("canonical")


@pytest.fixture(scope="session")
def identical_rerun(scenario_runs, run_dir):
    first = scenario_runs("coarse")
    cfg = suite_configs()["coarse"]
    second = run_scenario(cfg, run_dir / "coarse_rerun.csv")
    digest = [hashlib.sha256(r.path.read_bytes()).hexdigest() for r in (first, second)]
    return digest[0] == digest[1]


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import VERDICT_LINES

    if VERDICT_LINES:
        terminalreporter.section("acceptance criteria")
        for line in VERDICT_LINES:
            terminalreporter.write_line(line)
