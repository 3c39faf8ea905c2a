"""Gemeinsame Test-Voraussetzungen.

Kleine Karten als Fixtures: leer, eine Box, ein einzelnes belegtes Voxel und
ein senkrechter Pfeiler. Alle Gitter werden über build_sdf gebaut, damit die
Tests dieselbe Kette wie die Missionen durchlaufen. Dazu eine Fabrik für
MissionSummary-Objekte.
"""
import sys
from pathlib import Path

import numpy as np
import pytest

PROJECT_ROOT = Path(__file__).resolve().parents[1]
# Der direkte pytest-Launcher nimmt, anders als ``python -m pytest``, das
# aktuelle Arbeitsverzeichnis nicht auf allen Plattformen in sys.path auf.
sys.path.insert(0, str(PROJECT_ROOT))

from app.models.geometry import Bounds, PointCloud  # noqa: E402
from app.models.mission import MissionSummary  # noqa: E402
from app.services.env_map import build_sdf, sample_box, sample_cylinder  # noqa: E402


def make_grid(points, lower=(-2.0, -2.0, -2.0), upper=(2.0, 2.0, 2.0), resolution=0.1, truncation=1.0):
    return build_sdf(PointCloud(np.asarray(points, dtype=np.float64)), Bounds(lower, upper), resolution, truncation)


@pytest.fixture
def empty_grid():
    return make_grid(np.zeros((0, 3)))


@pytest.fixture
def box_grid():
    """Box [-0.3, 0.3]^3 im Ursprung"""
    return make_grid(sample_box((-0.3, -0.3, -0.3), (0.3, 0.3, 0.3), 0.05))


@pytest.fixture
def single_voxel_grid():
    """Genau ein belegtes Voxel mit Zentrum (0.05, 0.05, 0.05)"""
    return make_grid([[0.05, 0.05, 0.05]])


@pytest.fixture
def pillar_grid():
    """Senkrechter Pfeiler (Radius 0.3) durch das ganze Gitter, Auflösung 0.05"""
    cloud = sample_cylinder((0.0, 0.0, -1.0), (0.0, 0.0, 1.0), 0.3, 2.0, 0.025)
    return make_grid(cloud, lower=(-1.5, -1.5, -1.0), upper=(1.5, 1.5, 1.0), resolution=0.05)


@pytest.fixture
def grid_factory():
    """Baut ein Gitter aus beliebigen Punkten (Argumente wie make_grid)"""
    return make_grid


@pytest.fixture
def make_summary():
    """MissionSummary mit plausiblen Werten; einzelne Felder per Keyword überschreibbar"""
    def _make(**overrides):
        values = dict(
            planner="react",
            inspection_time=8.0,
            recovery_time=2.0,
            total_time=10.0,
            final_coverage=0.75,
            max_tether_length=1.5,
            exceedance_duration=0.3,
            max_replanning_latency=0.012,
            inspection_end_tether_length=1.4,
            inspection_end_distance=1.2,
            final_tether_length=0.2,
            final_distance=0.2,
            waypoints_reached=2,
            waypoint_count=2,
        )
        values.update(overrides)
        return MissionSummary(**values)
    return _make
