"""Flächenabdeckung der Inspektion.

Ein Dreieck gilt als gesehen, wenn sein Schwerpunkt in Reichweite liegt, seine
Normale zur Kamera zeigt und der Schwerpunkt im Sichtkegel liegt. Verdeckung
wird nicht geprüft.
"""
import numpy as np

from app.models.coverage import CameraModel
from app.models.geometry import TriangleMesh


def heading(yaw: float) -> np.ndarray:
    """Blickrichtung in der Horizontalen für den Gierwinkel `yaw`"""
    return np.array([np.cos(yaw), np.sin(yaw), 0.0])


def visible_triangles(position, direction, camera: CameraModel, mesh: TriangleMesh) -> set:
    """
    Indizes der Dreiecke, die von `position` mit Blickrichtung `direction` sichtbar sind.

    `direction` muss Einheitslänge haben.
    """
    if len(mesh) == 0:
        return set()
    position = np.asarray(position, dtype=np.float64).reshape(3)
    direction = np.asarray(direction, dtype=np.float64).reshape(3)

    to_triangle = mesh.centroids - position
    dist = np.linalg.norm(to_triangle, axis=1)
    in_range = dist <= camera.range
    facing = np.einsum("ij,ij->i", mesh.normals, -to_triangle) > 0.0

    cos_half = np.cos(np.radians(camera.fov / 2.0))
    safe = np.where(dist > 0.0, dist, 1.0)
    cos_angle = (to_triangle @ direction) / safe
    # Schwerpunkt exakt auf der Kamera: Winkel undefiniert, nicht sichtbar
    in_cone = (dist > 0.0) & (cos_angle >= cos_half - 1e-12)

    return set(np.flatnonzero(in_range & facing & in_cone).tolist())


class CoverageTracker:
    """Sammelt die bisher gesehenen Dreiecke einer Mission"""

    def __init__(self, mesh: TriangleMesh):
        self.mesh = mesh
        self.total = len(mesh)
        self._seen = np.zeros(self.total, dtype=bool)

    @property
    def seen(self) -> set:
        return set(np.flatnonzero(self._seen).tolist())

    @property
    def ratio(self) -> float:
        if self.total == 0:
            return 1.0
        return float(self._seen.sum()) / self.total

    def update_and_ratio(self, position, direction, camera: CameraModel) -> float:
        """Vereinigt die aktuell sichtbaren Dreiecke mit den gesehenen; liefert |gesehen| / gesamt"""
        visible = visible_triangles(position, direction, camera, self.mesh)
        if visible:
            self._seen[list(visible)] = True
        return self.ratio
