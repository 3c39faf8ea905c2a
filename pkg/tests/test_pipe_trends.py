"""Trendvergleich react vs. baseline auf dem Pipe-Szenario.

Beide Missionen laufen je einmal pro Modul; Aufruf mit ``pytest -m slow``.
"""
from pathlib import Path

import numpy as np
import pytest

from app.services.mission_runner import run_mission
from app.services.scenario_loader import build_world, load_scenario
from app.utils.polyline import path_length

pytestmark = pytest.mark.slow

SCENARIO = Path(__file__).resolve().parents[1] / "scenarios" / "pipe.env"


@pytest.fixture(scope="module")
def logs():
    scenario = load_scenario(SCENARIO)
    world = build_world(scenario)
    return {
        planner: run_mission(scenario.model_copy(update={"planner": planner}), world=world)
        for planner in ("react", "baseline")
    }


@pytest.fixture(scope="module")
def scenario():
    return load_scenario(SCENARIO)


def straight_distance(scenario, nodes):
    return float(np.linalg.norm(nodes[-1] - np.asarray(scenario.anchor)))


class TestPipeTrends:
    def test_missions_complete(self, logs):
        for planner, log in logs.items():
            assert not log.summary.aborted, f"{planner}: {log.summary.abort_reason}"

    def test_react_respects_tether_limit(self, logs, scenario):
        react, baseline = logs["react"].summary, logs["baseline"].summary
        assert react.max_tether_length <= 1.1 * scenario.max_tether_length
        assert baseline.exceedance_duration > 0.0
        assert react.exceedance_duration <= 0.1 * baseline.exceedance_duration

    def test_total_time_inversion(self, logs):
        """baseline inspiziert schneller, react ist insgesamt schneller zurück"""
        react, baseline = logs["react"].summary, logs["baseline"].summary
        assert baseline.inspection_time < react.inspection_time
        assert react.total_time < baseline.total_time

    def test_react_coverage(self, logs):
        coverage = [row.coverage for row in logs["react"].rows]
        assert coverage[-1] >= 0.95
        assert all(b >= a for a, b in zip(coverage, coverage[1:]))

    def test_final_tether_geometry(self, logs, scenario):
        """react endet mit fast geradem Tether, baseline mit umschlungenem"""
        react = logs["react"]
        assert path_length(react.final_tether) <= 1.2 * straight_distance(scenario, react.final_tether)

        baseline = logs["baseline"]
        end = baseline.inspection_end_tether
        assert path_length(end) >= 2.0 * straight_distance(scenario, end)
