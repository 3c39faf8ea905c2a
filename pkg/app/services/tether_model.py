"""Geometrisches Modell eines straffen Tethers.

Der Tether wird als Polylinie vom Anker bis zum Fahrzeug geführt. Pro Zeitschritt
wird die Fahrzeugposition angehängt und der Pfad durch Abkürzen (Sichtlinie
zwischen zwei Knoten frei -> Zwischenknoten durch eine gerade, mit δ abgetastete
Strecke ersetzen) und Ziehen (Knoten in Kollision Richtung Tether-Ende
verschieben) gestrafft, bis sich die Länge nicht mehr ändert.

Sweep-Reihenfolge: äußerer Index i läuft vom Fahrzeugende abwärts, innerer
Index j von i-1 abwärts. Die Suche nach j bricht am ersten verdeckten Knoten ab,
es sei denn, der verdeckte Knoten liegt selbst in Kollision und wurde gezogen -
dann wird er übersprungen. Ein Abbruch am ersten verdeckten Knoten hält die
Umschlingung eines Hindernisses erhalten: Sehnen zu weiter hinten liegenden,
wieder sichtbaren Knoten würden den Tether sonst über das Hindernis springen
lassen.

Reine Funktionen: update_tether verändert den übergebenen Pfad nicht.
"""
import logging
from typing import Optional

import numpy as np

from app.models.geometry import SdfGrid
from app.models.tether import TetherPath, TetherUpdate
from app.services.env_map import distances_at, is_in_collision, line_of_sight, line_of_sight_fan
from app.utils.polyline import DUPLICATE_EPS, dedupe, path_length, resample_polyline, resample_segment

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITER = 50
# Startgröße des Kandidatenfensters je Sichtprüfung; verdoppelt sich bei Erfolg
FAN_WINDOW = 8


def append_rov(path: TetherPath, p_rov) -> TetherPath:
    """
    Hängt die Fahrzeugposition als letzten Knoten an.

    Lücken größer δ werden mit δ abgetastet; eine Position, die mit dem letzten
    Knoten zusammenfällt, ändert nichts.
    """
    p_rov = np.asarray(p_rov, dtype=np.float64).reshape(3)
    last = path.nodes[-1]
    gap = float(np.linalg.norm(p_rov - last))
    if gap < DUPLICATE_EPS:
        return path
    if gap > path.spacing:
        tail = resample_segment(last, p_rov, path.spacing)[1:]
    else:
        tail = p_rov.reshape(1, 3)
    return path.with_nodes(np.vstack((path.nodes, tail)))


def _check_indices(path: TetherPath, i: int, j: int) -> None:
    if not (0 <= j < i < len(path)):
        raise IndexError(f"Ungültiges Knotenpaar i={i}, j={j} bei {len(path)} Knoten")


def check_shortcut(path: TetherPath, i: int, j: int, grid: SdfGrid, margin: float) -> bool:
    """Sichtlinie zwischen Knoten j und i frei?"""
    _check_indices(path, i, j)
    return line_of_sight(grid, path.nodes[j], path.nodes[i], margin)


def replace_nodes(path: TetherPath, i: int, j: int, spacing: Optional[float] = None) -> TetherPath:
    """
    Ersetzt die Knoten strikt zwischen j und i durch die gerade Strecke,
    abgetastet mit `spacing` (Standard: δ des Pfads).

    Die Sichtlinie muss vorher geprüft sein; die Länge nimmt nie zu.
    """
    _check_indices(path, i, j)
    if i == j + 1:
        return path
    spacing = spacing or path.spacing
    chord = resample_segment(path.nodes[j], path.nodes[i], spacing)
    return path.with_nodes(np.vstack((path.nodes[:j], chord, path.nodes[i + 1:])))


def pull_node(node, endpoint, spacing: float) -> np.ndarray:
    """Verschiebt einen Knoten um höchstens δ auf geradem Weg zum Tether-Ende"""
    node = np.asarray(node, dtype=np.float64)
    endpoint = np.asarray(endpoint, dtype=np.float64)
    delta = endpoint - node
    dist = float(np.linalg.norm(delta))
    if dist <= spacing:
        return endpoint.copy()
    return node + delta * (spacing / dist)


def compute_length(path: TetherPath) -> float:
    """Summe der Knotenabstände"""
    return path_length(path.nodes)


def _sweep(nodes: np.ndarray, grid: SdfGrid, spacing: float, margin: float) -> np.ndarray:
    """Ein äußerer Durchlauf aus Abkürzen und Ziehen"""
    i = len(nodes) - 1
    # Knoten chord_floor..chord_top liegen auf einer bereits geprüften Sehne
    chord_floor, chord_top = -1, -1
    guard = 20 * len(nodes) + 100

    while i >= 2 and guard > 0:
        guard -= 1
        best = i - 1
        j = i - 2
        if chord_floor < i <= chord_top:
            best = chord_floor
            j = chord_floor - 1

        initial_best = best
        window = FAN_WINDOW
        while j >= 0:
            lo = max(0, j - window + 1)
            candidates = np.arange(j, lo - 1, -1)
            visible = line_of_sight_fan(grid, nodes[i], nodes[candidates], margin)
            if visible.all():
                best = int(candidates[-1])
                j = lo - 1
                window *= 2
                continue

            first_blocked = int(np.argmin(visible))
            if first_blocked > 0:
                best = int(candidates[first_blocked - 1])
            blocked = int(candidates[first_blocked])

            # Verdeckter Knoten in Kollision: ziehen und überspringen
            if blocked > 0 and distances_at(grid, nodes[blocked])[0] < margin:
                moved = pull_node(nodes[blocked], nodes[-1], spacing)
                if np.linalg.norm(moved - nodes[blocked]) > DUPLICATE_EPS:
                    nodes[blocked] = moved
                    j = blocked - 1
                    window = FAN_WINDOW
                    continue
            break

        if best < initial_best:
            chord = resample_segment(nodes[best], nodes[i], spacing)
            nodes = np.vstack((nodes[:best], chord, nodes[i + 1:]))
            chord_floor, chord_top = best, best + len(chord) - 1
            i = chord_top - 1
        else:
            i -= 1

    if guard <= 0:
        logger.debug("Tether-Sweep: Schrittbegrenzung erreicht")
    return nodes


def _colliding_interior(nodes: np.ndarray, grid: SdfGrid, margin: float) -> int:
    if len(nodes) <= 2:
        return 0
    return int((distances_at(grid, nodes[1:-1]) < margin).sum())


def update_tether(
    path: TetherPath,
    p_rov,
    grid: SdfGrid,
    spacing: Optional[float] = None,
    margin: float = 0.0,
    max_iter: int = DEFAULT_MAX_ITER,
    eps: Optional[float] = None,
) -> TetherUpdate:
    """
    Berechnet P_tether(t+1) aus P_tether(t) und der neuen Fahrzeugposition.

    Konvergiert, wenn sich die Gesamtlänge zwischen zwei Durchläufen um weniger
    als eps (Standard δ/10) ändert und kein innerer Knoten mehr in Kollision liegt.

    Returns:
        TetherUpdate mit status
        - "rejected": Fahrzeugposition im Hindernis, alter Pfad unverändert
        - "not_converged": max_iter erreicht, bester Pfad
    """
    spacing = spacing or path.spacing
    eps = eps if eps is not None else spacing / 10.0
    if spacing != path.spacing:
        path = TetherPath(path.nodes, spacing)

    if is_in_collision(grid, p_rov, margin):
        logger.warning(
            f"Tether: Fahrzeugposition {np.round(p_rov, 3).tolist()} liegt im Hindernis - "
            "Update verworfen"
        )
        return TetherUpdate(path=path, status="rejected", iterations=0)

    anchor = path.nodes[0].copy()
    nodes = append_rov(path, p_rov).nodes.copy()
    length = path_length(nodes)

    for iteration in range(1, max_iter + 1):
        nodes = _sweep(nodes, grid, spacing, margin)
        nodes[0] = anchor
        new_length = path_length(nodes)
        converged = abs(length - new_length) < eps and _colliding_interior(nodes, grid, margin) == 0
        length = new_length
        if converged:
            nodes = resample_polyline(dedupe(nodes), spacing)
            return TetherUpdate(path=path.with_nodes(nodes), status="ok", iterations=iteration)

    logger.warning(f"Tether: keine Konvergenz nach {max_iter} Durchläufen (Länge {length:.3f} m)")
    nodes = resample_polyline(dedupe(nodes), spacing)
    return TetherUpdate(path=path.with_nodes(nodes), status="not_converged", iterations=max_iter)
