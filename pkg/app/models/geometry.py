"""Geometrische Domänentypen: Punktwolke, Dreiecksnetz, Bounding-Box und SDF-Gitter.

Alle Koordinaten in Metern. Die Typen halten numpy-Arrays und sind nach der
Konstruktion als unveränderlich zu behandeln - SdfGrid wird von beliebig
vielen Abfragen parallel gelesen.
"""
from dataclasses import dataclass, field
from typing import Iterable, Tuple

import numpy as np

from app.utils.polyline import as_points


@dataclass(frozen=True)
class Bounds:
    """Achsenparallele Box [lower, upper]"""
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=np.float64).reshape(3)
        upper = np.asarray(self.upper, dtype=np.float64).reshape(3)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def is_degenerate(self) -> bool:
        return bool(np.any(self.upper <= self.lower))

    def inflated(self, amount: float) -> "Bounds":
        return Bounds(self.lower - amount, self.upper + amount)

    def contains(self, points) -> np.ndarray:
        pts = as_points(points)
        return np.all((pts >= self.lower) & (pts <= self.upper), axis=1)


@dataclass(frozen=True)
class PointCloud:
    """Rohe Umgebungsdaten (Eingang des SDF-Aufbaus)"""
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    def __post_init__(self):
        pts = as_points(self.points)
        if not np.all(np.isfinite(pts)):
            raise ValueError("Punktwolke enthält nicht-endliche Koordinaten")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class TriangleMesh:
    """Inspektionsfläche: Vertices, Index-Tripel und nach außen zeigende Einheitsnormalen"""
    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray

    @classmethod
    def from_arrays(cls, vertices: Iterable, triangles: Iterable) -> "TriangleMesh":
        """
        Baut ein Netz und berechnet die Normalen aus der Umlaufrichtung
        (gegen den Uhrzeigersinn von außen gesehen = außen).

        Raises:
            ValueError: Index außerhalb des Bereichs oder degeneriertes Dreieck
        """
        verts = as_points(vertices)
        tris = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if len(tris) and (tris.min() < 0 or tris.max() >= len(verts)):
            raise ValueError("Dreiecksindex außerhalb des Vertex-Bereichs")
        if len(tris) == 0:
            return cls(verts, tris, np.zeros((0, 3)))
        a, b, c = verts[tris[:, 0]], verts[tris[:, 1]], verts[tris[:, 2]]
        cross = np.cross(b - a, c - a)
        norm = np.linalg.norm(cross, axis=1)
        if np.any(norm <= 1e-12):
            raise ValueError("Degeneriertes Dreieck ohne Fläche im Netz")
        return cls(verts, tris, cross / norm[:, None])

    @property
    def centroids(self) -> np.ndarray:
        if len(self.triangles) == 0:
            return np.zeros((0, 3))
        return self.vertices[self.triangles].mean(axis=1)

    def __len__(self) -> int:
        return len(self.triangles)


@dataclass(frozen=True)
class SdfGrid:
    """
    Gleichförmiges Voxelgitter mit abgeschnittenen vorzeichenbehafteten Distanzen.

    values[ix, iy, iz] gehört zum Voxelzentrum origin + (i + 0.5) * resolution.
    Belegte Voxel tragen Werte <= 0, alle Werte liegen in [-truncation, truncation].
    """
    origin: np.ndarray
    resolution: float
    values: np.ndarray
    truncation: float
    occupied_count: int = 0

    @property
    def dims(self) -> Tuple[int, int, int]:
        return tuple(int(d) for d in self.values.shape)

    @property
    def bounds(self) -> Bounds:
        upper = self.origin + np.asarray(self.dims, dtype=np.float64) * self.resolution
        return Bounds(self.origin, upper)

    def voxel_center(self, index) -> np.ndarray:
        return self.origin + (np.asarray(index, dtype=np.float64) + 0.5) * self.resolution

    def voxel_index(self, p) -> np.ndarray:
        """Index des Voxels, das p enthält (ohne Bereichsprüfung)"""
        return np.floor((np.asarray(p, dtype=np.float64) - self.origin) / self.resolution).astype(np.int64)
