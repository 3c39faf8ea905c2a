"""
Szenario laden und die simulierte Welt aufbauen.

Szenario-Dateien sind KEY=VALUE-Dateien (dotenv-Syntax, Kommentare mit #).
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from dotenv import dotenv_values
from pydantic import ValidationError

from app.models.geometry import Bounds, PointCloud, SdfGrid, TriangleMesh
from app.models.scenario import HelixSpec, Scenario
from app.services.env_map import (
    MapError,
    axis_frame,
    box_mesh,
    build_sdf,
    cylinder_mesh,
    distances_at,
    load_mesh,
    load_point_cloud,
    merge_meshes,
    sample_box,
    sample_cylinder,
)

logger = logging.getLogger(__name__)

# Schlüssel mit Dateipfaden (relativ zur Szenario-Datei)
FILE_KEYS = ("point_cloud_file", "mesh_file", "waypoint_file")


class ScenarioError(Exception):
    """Szenario-Datei fehlt, ist unlesbar oder ungültig"""


@dataclass(frozen=True)
class World:
    """Aus einem Szenario abgeleitete, unveränderliche Eingaben einer Mission"""
    cloud: PointCloud
    grid: SdfGrid
    mesh: TriangleMesh
    waypoints: np.ndarray
    # Strukturachse, auf die die Kamera blickt (None: Blick in Fahrtrichtung des Ziels)
    axis_point: Optional[np.ndarray] = None
    axis_direction: Optional[np.ndarray] = None

    def look_at(self, position: np.ndarray, fallback: np.ndarray) -> np.ndarray:
        """Nächster Punkt der Strukturachse zur Position"""
        if self.axis_point is None:
            return fallback
        offset = position - self.axis_point
        return self.axis_point + float(offset @ self.axis_direction) * self.axis_direction


def load_scenario(path: Union[str, Path]) -> Scenario:
    """
    Liest und validiert eine Szenario-Datei.

    Raises:
        ScenarioError: Datei fehlt oder Inhalt ungültig
    """
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"Szenario-Datei nicht gefunden: {path}")

    raw = dotenv_values(path)
    data = {
        key.strip().lower(): value.strip()
        for key, value in raw.items()
        if value is not None and value.strip() != ""
    }
    for key in FILE_KEYS:
        if key in data and not Path(data[key]).is_absolute():
            data[key] = str((path.parent / data[key]).resolve())
    data.setdefault("name", path.stem)

    try:
        scenario = Scenario.model_validate(data)
    except ValidationError as e:
        raise ScenarioError(f"{path.name}: ungültiges Szenario\n{e}") from e
    logger.debug(f"Szenario {scenario.name} geladen ({path})")
    return scenario


def generate_helix(spec: HelixSpec) -> np.ndarray:
    """
    Wegpunkte auf einer Schraubenlinie um die Achse (center, axis).

    Beginnt bei Winkel 0 in Höhe start_height über center und steigt je
    Umdrehung um pitch; der letzte Punkt liegt genau nach `turns` Umdrehungen.
    """
    w, u, v = axis_frame(spec.axis)
    count = int(round(spec.turns * spec.points_per_turn))
    k = np.arange(count + 1, dtype=np.float64)
    angle = 2.0 * np.pi * k / spec.points_per_turn
    height = spec.start_height + spec.pitch * k / spec.points_per_turn
    center = np.asarray(spec.center, dtype=np.float64)
    return (
        center
        + height[:, None] * w
        + spec.radius * (np.cos(angle)[:, None] * u + np.sin(angle)[:, None] * v)
    )


def _obstacle_points(scenario: Scenario) -> PointCloud:
    pieces = []
    if scenario.point_cloud_file:
        pieces.append(load_point_cloud(scenario.point_cloud_file).points)
    spacing = scenario.resolution / 2.0
    for box in scenario.boxes:
        pieces.append(sample_box(box.lower, box.upper, spacing))
    for cyl in scenario.cylinders:
        pieces.append(sample_cylinder(cyl.base, cyl.axis, cyl.radius, cyl.height, spacing))
    if scenario.floor_height is not None and scenario.floor_height > scenario.bounds_lower[2]:
        upper = (scenario.bounds_upper[0], scenario.bounds_upper[1], scenario.floor_height)
        # dünne Schicht an der Bodenoberseite
        lower = (scenario.bounds_lower[0], scenario.bounds_lower[1], max(scenario.bounds_lower[2], scenario.floor_height - spacing))
        pieces.append(sample_box(lower, upper, spacing))
    if not pieces:
        return PointCloud()
    return PointCloud(np.vstack(pieces))


def _inspection_mesh(scenario: Scenario) -> TriangleMesh:
    if scenario.mesh_file:
        return load_mesh(scenario.mesh_file)
    meshes = [cylinder_mesh(c.base, c.axis, c.radius, c.height) for c in scenario.cylinders]
    meshes += [box_mesh(b.lower, b.upper) for b in scenario.boxes]
    return merge_meshes(meshes)


def build_world(scenario: Scenario) -> World:
    """
    Punktwolke, SDF, Inspektionsnetz und Wegpunkte eines Szenarios.

    Raises:
        ScenarioError: Dateien fehlen oder sind unlesbar
    """
    try:
        cloud = _obstacle_points(scenario)
        mesh = _inspection_mesh(scenario)
        if scenario.waypoint_file:
            waypoints = load_point_cloud(scenario.waypoint_file).points
        else:
            waypoints = generate_helix(scenario.helix)
        grid = build_sdf(
            cloud,
            Bounds(scenario.bounds_lower, scenario.bounds_upper),
            scenario.resolution,
            scenario.truncation,
        )
    except (MapError, FileNotFoundError) as e:
        raise ScenarioError(f"Szenario {scenario.name}: {e}") from e

    if len(waypoints) == 0:
        raise ScenarioError(f"Szenario {scenario.name}: keine Wegpunkte")

    blocked = np.flatnonzero(distances_at(grid, waypoints) < scenario.vehicle_margin)
    if len(blocked):
        logger.warning(
            f"Szenario {scenario.name}: {len(blocked)} Wegpunkte im Sicherheitsabstand "
            f"(erster Index {int(blocked[0])})"
        )

    axis_point, axis_direction = None, None
    if scenario.inspection_axis_point is not None:
        axis_point = np.asarray(scenario.inspection_axis_point, dtype=np.float64)
        axis_direction = axis_frame(scenario.inspection_axis)[0]
    elif scenario.helix_center is not None:
        axis_point = np.asarray(scenario.helix_center, dtype=np.float64)
        axis_direction = axis_frame(scenario.helix_axis)[0]

    logger.info(
        f"Welt {scenario.name}: {len(cloud)} Hindernispunkte, {len(mesh)} Dreiecke, "
        f"{len(waypoints)} Wegpunkte"
    )
    return World(
        cloud=cloud,
        grid=grid,
        mesh=mesh,
        waypoints=waypoints,
        axis_point=axis_point,
        axis_direction=axis_direction,
    )
