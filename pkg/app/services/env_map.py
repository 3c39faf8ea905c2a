"""Umgebungskarte: Punktwolken und Netze einlesen, SDF aufbauen, Abfragen beantworten.

Der SDF-Aufbau ist eine exakte euklidische Distanztransformation über die
belegten Voxel (scipy.ndimage.distance_transform_edt). Belegte Voxel tragen
0.0 - eine Innentiefe wird nicht modelliert. Freie Voxel tragen den Abstand
zum nächsten belegten Voxelzentrum, gekappt bei `truncation`.

Alle Abfragen lesen nur; ein SdfGrid darf von beliebig vielen Threads
gleichzeitig abgefragt werden.
"""
import logging
from pathlib import Path
from typing import List, Union

import numpy as np
from scipy.ndimage import distance_transform_edt, map_coordinates

from app.models.geometry import Bounds, PointCloud, SdfGrid, TriangleMesh
from app.utils.polyline import as_points

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class MapError(Exception):
    """Fehler beim Einlesen oder Aufbauen der Umgebungskarte"""


class PointCloudFormatError(MapError):
    """Zeile einer XYZ-Datei nicht lesbar"""

    def __init__(self, path: PathLike, line_number: int, message: str):
        self.path = str(path)
        self.line_number = line_number
        super().__init__(f"{path}, Zeile {line_number}: {message}")


class MeshFormatError(MapError):
    """Zeile einer OBJ-Datei nicht lesbar"""


class InvalidGridError(MapError):
    """Ungültige Gitterparameter (Auflösung, Kappung, Bounds)"""


# ----------------------------------------------------------------------
# Dateiformate
# ----------------------------------------------------------------------

def load_point_cloud(path: PathLike) -> PointCloud:
    """
    Liest eine ASCII-XYZ-Datei ("x y z" je Zeile, Leerzeilen erlaubt).

    Raises:
        FileNotFoundError: Datei fehlt
        PointCloudFormatError: Zeile mit falscher Spaltenzahl oder keiner Zahl
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Punktwolke nicht gefunden: {path}")

    points: List[List[float]] = []
    with path.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 3:
                raise PointCloudFormatError(
                    path, line_number, f"3 Werte erwartet, {len(fields)} gefunden"
                )
            try:
                point = [float(value) for value in fields]
            except ValueError:
                raise PointCloudFormatError(path, line_number, f"keine Zahl: {line.strip()!r}")
            if not all(np.isfinite(point)):
                raise PointCloudFormatError(path, line_number, "nicht-endliche Koordinate")
            points.append(point)

    logger.debug(f"Punktwolke {path.name}: {len(points)} Punkte")
    return PointCloud(np.asarray(points, dtype=np.float64))


def load_mesh(path: PathLike) -> TriangleMesh:
    """
    Liest die OBJ-Teilmenge `v x y z` und `f i j k` (1-basiert).

    Polygone mit mehr als drei Ecken werden als Fächer trianguliert, `f 1/2/3`
    wird auf den Vertex-Index reduziert. Alle anderen Zeilen werden ignoriert.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Netz nicht gefunden: {path}")

    vertices: List[List[float]] = []
    faces: List[List[int]] = []
    with path.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            fields = line.split()
            if not fields:
                continue
            try:
                if fields[0] == "v":
                    if len(fields) < 4:
                        raise ValueError("Vertex braucht 3 Koordinaten")
                    vertices.append([float(v) for v in fields[1:4]])
                elif fields[0] == "f":
                    indices = [int(token.split("/")[0]) - 1 for token in fields[1:]]
                    if len(indices) < 3:
                        raise ValueError("Fläche braucht mindestens 3 Ecken")
                    for k in range(1, len(indices) - 1):
                        faces.append([indices[0], indices[k], indices[k + 1]])
            except ValueError as e:
                raise MeshFormatError(f"{path}, Zeile {line_number}: {e}")

    try:
        return TriangleMesh.from_arrays(vertices, faces)
    except ValueError as e:
        raise MeshFormatError(f"{path}: {e}")


# ----------------------------------------------------------------------
# SDF-Aufbau
# ----------------------------------------------------------------------

def build_sdf(cloud: PointCloud, bounds: Bounds, resolution: float, truncation: float) -> SdfGrid:
    """
    Baut das SDF-Gitter über `bounds`.

    Raises:
        InvalidGridError: resolution <= 0, truncation < resolution oder
            degenerierte Bounds
    """
    if resolution <= 0:
        raise InvalidGridError(f"Auflösung muss > 0 sein (ist {resolution})")
    if truncation < resolution:
        raise InvalidGridError(
            f"Kappung ({truncation}) muss mindestens der Auflösung ({resolution}) entsprechen"
        )
    if bounds.is_degenerate:
        raise InvalidGridError("Bounds ohne Volumen")

    extent = bounds.upper - bounds.lower
    dims = np.maximum(1, np.ceil(extent / resolution - 1e-9).astype(np.int64))
    occupied = np.zeros(tuple(dims), dtype=bool)

    if len(cloud):
        index = np.floor((cloud.points - bounds.lower) / resolution).astype(np.int64)
        inside = np.all((index >= 0) & (index < dims), axis=1)
        index = index[inside]
        occupied[index[:, 0], index[:, 1], index[:, 2]] = True
        outside = int((~inside).sum())
        if outside:
            logger.debug(f"SDF: {outside} Punkte außerhalb der Bounds verworfen")

    occupied_count = int(occupied.sum())
    if occupied_count == 0:
        if len(cloud):
            logger.warning("SDF: kein Punkt der Wolke liegt in den Bounds - Karte ist komplett frei")
        values = np.full(tuple(dims), float(truncation))
    else:
        # EDT misst den Abstand jedes True-Voxels zum nächsten False-Voxel
        distances = distance_transform_edt(~occupied, sampling=resolution)
        values = np.minimum(distances, truncation)
        values[occupied] = 0.0

    logger.info(
        f"SDF aufgebaut: {dims[0]}x{dims[1]}x{dims[2]} Voxel, "
        f"{occupied_count} belegt, Auflösung {resolution} m"
    )
    values.setflags(write=False)
    return SdfGrid(
        origin=bounds.lower.copy(),
        resolution=float(resolution),
        values=values,
        truncation=float(truncation),
        occupied_count=occupied_count,
    )


# ----------------------------------------------------------------------
# Abfragen
# ----------------------------------------------------------------------

def distances_at(grid: SdfGrid, points) -> np.ndarray:
    """Vektorisierte Variante von distance_at für (N, 3)-Punkte"""
    pts = as_points(points)
    if len(pts) == 0:
        return np.zeros(0)
    coords = (pts - grid.origin) / grid.resolution - 0.5
    values = map_coordinates(grid.values, coords.T, order=1, mode="nearest")
    outside = ~grid.bounds.contains(pts)
    if outside.any():
        values[outside] = grid.truncation
    return values


def distance_at(grid: SdfGrid, p) -> float:
    """Trilinear interpolierte Distanz; außerhalb des Gitters gilt `truncation` (frei)"""
    return float(distances_at(grid, p)[0])


def is_in_collision(grid: SdfGrid, p, margin: float) -> bool:
    """True, wenn der Punkt näher als `margin` an einem Hindernis liegt"""
    return distance_at(grid, p) < margin


def _segment_samples(a: np.ndarray, b: np.ndarray, step: float) -> np.ndarray:
    count = max(1, int(np.ceil(np.linalg.norm(b - a) / step)))
    t = np.linspace(0.0, 1.0, count + 1)[:, None]
    return a + t * (b - a)


def line_of_sight(grid: SdfGrid, a, b, margin: float) -> bool:
    """
    Prüft die Strecke [a, b] in Schritten von resolution/2, Endpunkte eingeschlossen.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    samples = _segment_samples(a, b, grid.resolution / 2.0)
    return bool(np.all(distances_at(grid, samples) >= margin))


def line_of_sight_fan(grid: SdfGrid, apex, others, margin: float) -> np.ndarray:
    """
    Sichtprüfung für mehrere Strecken mit gemeinsamem Endpunkt in einem Aufruf.

    Gleiche Semantik wie line_of_sight(apex, others[k]) je Eintrag, aber nur eine
    Interpolation über alle Stützpunkte - das hält die Tether-Sweeps schnell.
    """
    apex = np.asarray(apex, dtype=np.float64)
    ends = as_points(others)
    if len(ends) == 0:
        return np.zeros(0, dtype=bool)
    step = grid.resolution / 2.0
    counts = np.maximum(1, np.ceil(np.linalg.norm(ends - apex, axis=1) / step).astype(np.int64)) + 1
    offsets = np.concatenate(([0], np.cumsum(counts)[:-1]))
    # Parameter t je Stützpunkt: 0..1 innerhalb der jeweiligen Strecke
    local = np.arange(counts.sum()) - np.repeat(offsets, counts)
    t = local / np.repeat(counts - 1, counts)
    samples = apex + t[:, None] * (np.repeat(ends, counts, axis=0) - apex)
    clearance = np.minimum.reduceat(distances_at(grid, samples), offsets)
    return clearance >= margin


def path_is_collision_free(grid: SdfGrid, points, margin: float) -> bool:
    """Alle Segmente einer Polylinie haben Sichtlinie bei `margin`"""
    pts = as_points(points)
    if len(pts) == 0:
        return True
    if len(pts) == 1:
        return not is_in_collision(grid, pts[0], margin)
    return all(line_of_sight(grid, a, b, margin) for a, b in zip(pts[:-1], pts[1:]))


def gradients_at(grid: SdfGrid, points) -> np.ndarray:
    """Zentrale Differenzen der interpolierten Distanz, Schrittweite resolution/2"""
    pts = as_points(points)
    h = grid.resolution / 2.0
    grad = np.zeros_like(pts)
    for axis in range(3):
        offset = np.zeros(3)
        offset[axis] = h
        grad[:, axis] = (distances_at(grid, pts + offset) - distances_at(grid, pts - offset)) / (2.0 * h)
    return grad


def push_to_clearance(grid: SdfGrid, points, clearance: float, max_iter: int = 20) -> np.ndarray:
    """
    Schiebt Punkte mit Abstand < clearance entlang des SDF-Gradienten nach außen.

    Punkte ohne auswertbaren Gradienten (Plateau, Kappung) bleiben liegen.
    """
    pts = as_points(points).copy()
    for _ in range(max_iter):
        clearance_now = distances_at(grid, pts)
        low = np.flatnonzero(clearance_now < clearance)
        if len(low) == 0:
            break
        grad = gradients_at(grid, pts[low])
        norm = np.linalg.norm(grad, axis=1)
        movable = norm > 1e-6
        if not movable.any():
            break
        idx = low[movable]
        step = np.minimum((clearance - clearance_now[idx]) / norm[movable], clearance)
        pts[idx] += grad[movable] / norm[movable, None] * step[:, None]
    return pts


# ----------------------------------------------------------------------
# Primitive (Szenarien ohne externe Dateien)
# ----------------------------------------------------------------------

def sample_box(lower, upper, spacing: float) -> np.ndarray:
    """Füllt eine achsenparallele Box mit einem Punktraster (massiv)"""
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    axes = [np.arange(lo, hi + spacing * 0.5, spacing) for lo, hi in zip(lower, upper)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    return np.minimum(grid, upper)


def sample_cylinder(base, axis, radius: float, height: float, spacing: float) -> np.ndarray:
    """Füllt einen Zylinder (Basismittelpunkt, Achsrichtung, Radius, Höhe) massiv mit Punkten"""
    base = np.asarray(base, dtype=np.float64)
    w, u, v = axis_frame(axis)
    r = np.arange(-radius, radius + spacing * 0.5, spacing)
    h = np.arange(0.0, height + spacing * 0.5, spacing)
    ru, rv, hh = np.meshgrid(r, r, np.minimum(h, height), indexing="ij")
    keep = ru ** 2 + rv ** 2 <= radius ** 2
    return base + ru[keep, None] * u + rv[keep, None] * v + hh[keep, None] * w


def cylinder_mesh(base, axis, radius: float, height: float, segments: int = 48, rings: int = 24) -> TriangleMesh:
    """Mantelfläche eines Zylinders (ohne Deckel), Normalen radial nach außen"""
    base = np.asarray(base, dtype=np.float64)
    w, u, v = axis_frame(axis)
    phi = np.linspace(0.0, 2.0 * np.pi, segments, endpoint=False)
    heights = np.linspace(0.0, height, rings + 1)
    vertices = np.array([
        base + z * w + radius * (np.cos(a) * u + np.sin(a) * v)
        for z in heights for a in phi
    ])
    triangles = []
    for ring in range(rings):
        for s in range(segments):
            a = ring * segments + s
            b = ring * segments + (s + 1) % segments
            triangles.append([a, b, b + segments])
            triangles.append([a, b + segments, a + segments])
    return TriangleMesh.from_arrays(vertices, triangles)


def box_mesh(lower, upper) -> TriangleMesh:
    """Sechs Seiten einer Box, je zwei Dreiecke, Normalen nach außen"""
    lo = np.asarray(lower, dtype=np.float64)
    hi = np.asarray(upper, dtype=np.float64)
    corners = np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
    quads = [
        (0, 1, 3, 2),  # x = lo
        (4, 6, 7, 5),  # x = hi
        (0, 4, 5, 1),  # y = lo
        (2, 3, 7, 6),  # y = hi
        (0, 2, 6, 4),  # z = lo
        (1, 5, 7, 3),  # z = hi
    ]
    triangles = []
    for a, b, c, d in quads:
        triangles.append([a, b, c])
        triangles.append([a, c, d])
    return TriangleMesh.from_arrays(corners, triangles)


def merge_meshes(meshes: List[TriangleMesh]) -> TriangleMesh:
    vertices, triangles, offset = [], [], 0
    for mesh in meshes:
        vertices.append(mesh.vertices)
        triangles.append(mesh.triangles + offset)
        offset += len(mesh.vertices)
    if not vertices:
        return TriangleMesh.from_arrays([], [])
    return TriangleMesh.from_arrays(np.vstack(vertices), np.vstack(triangles))


def axis_frame(axis):
    """Orthonormales Dreibein (w, u, v) mit w entlang `axis`"""
    w = np.asarray(axis, dtype=np.float64)
    w = w / np.linalg.norm(w)
    helper = np.array([1.0, 0.0, 0.0]) if abs(w[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(w, helper)
    u /= np.linalg.norm(u)
    v = np.cross(w, u)
    return w, u, v
