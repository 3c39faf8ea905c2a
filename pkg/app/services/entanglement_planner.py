"""Verhedderungsbewusster Zwei-Modi-Planer.

NORMAL: Wegpunkte der Reihe nach anfahren.
RECOVERY: Überschreitet die Tether-Länge L_max, wird rückwärts entlang des
Tethers ein Pivot-Knoten gesucht, von dem aus ein kürzester Pfad zum aktuellen
Wegpunkt den Tether innerhalb von L_max hält. Das Fahrzeug verfolgt dann den
Tether bis zum Pivot zurück und fährt von dort zum Wegpunkt.
"""
import logging
import time
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.signal import savgol_filter

from app.models.geometry import SdfGrid
from app.models.planner import (
    Mission,
    PlannerConfig,
    PlannerMode,
    PlannerState,
    RecoverySearchResult,
)
from app.models.tether import TetherPath
from app.services.env_map import distances_at, path_is_collision_free
from app.services.shortest_path import PlanningError, plan_shortest_path
from app.services.tether_model import compute_length, update_tether
from app.utils.polyline import (
    DUPLICATE_EPS,
    arc_lengths,
    as_points,
    closest_arc_length,
    dedupe,
    point_at_arc_length,
    resample_polyline,
    sample_along,
    sub_path,
)

logger = logging.getLogger(__name__)


class RecoveryUnavailableError(Exception):
    """Weder ein Pivot noch der direkte Pfad vom Fahrzeug ist planbar"""


class RefinementError(Exception):
    """Keine kollisionsfreie Verfeinerung gefunden"""

    def __init__(self, message: str, best_effort: np.ndarray):
        super().__init__(message)
        self.best_effort = best_effort


@dataclass(frozen=True)
class PivotEvaluation:
    """Vorhersage für einen einzelnen Pivot-Knoten"""
    pivot_index: int
    recovery_path: np.ndarray
    predicted_length: float
    peak_length: float

    def feasible(self, max_length: float, spacing: float) -> bool:
        return self.predicted_length <= max_length and self.peak_length <= max_length + spacing


# ----------------------------------------------------------------------
# Kleine Bausteine
# ----------------------------------------------------------------------

def reached_waypoint(p_rov, w, reach_radius: float) -> bool:
    """|p_rov - w| <= reach_radius (Rand eingeschlossen)"""
    delta = np.asarray(p_rov, dtype=np.float64) - np.asarray(w, dtype=np.float64)
    return bool(np.linalg.norm(delta) <= reach_radius)


def follow_path(path, p_rov, lookahead: float) -> np.ndarray:
    """Punkt auf dem Pfad bei Bogenlänge s* + lookahead, am Pfadende geklemmt"""
    pts = as_points(path)
    if len(pts) == 0:
        raise ValueError("follow_path braucht einen nicht leeren Pfad")
    s_star, _ = closest_arc_length(pts, p_rov)
    return point_at_arc_length(pts, s_star + lookahead)


def track_path(path, p_rov, lookahead: float, progress: float) -> Tuple[np.ndarray, float]:
    """
    follow_path mit monoton wachsendem Fortschritt.

    Der nächste Pfadpunkt wird nur im Fenster [progress, progress + 2·lookahead]
    gesucht. Pfade, die an sich selbst vorbeiführen (zurückverfolgte Windungen),
    werden so nicht abgekürzt.

    Returns:
        (Zielpunkt, neuer Fortschritt)
    """
    pts = as_points(path)
    if len(pts) == 0:
        raise ValueError("track_path braucht einen nicht leeren Pfad")
    window = sub_path(pts, progress, progress + 2.0 * lookahead)
    s_local, _ = closest_arc_length(window, p_rov)
    progress = max(progress, min(progress, arc_lengths(pts)[-1]) + s_local)
    return point_at_arc_length(pts, progress + lookahead), progress


# ----------------------------------------------------------------------
# Entwirrungssuche
# ----------------------------------------------------------------------

def _pivot_indices(n: int, stride: int) -> List[int]:
    indices = list(range(n - 1, -1, -stride))
    if indices[-1] != 0:
        indices.append(0)
    return indices


def evaluate_pivot(
    tether: TetherPath,
    i: int,
    waypoint,
    grid: SdfGrid,
    config: PlannerConfig,
) -> PivotEvaluation:
    """
    Plant vom Pivot-Knoten i zum Wegpunkt und simuliert den Tether.

    Der Tether wird auf tether[0:i+1] gekürzt (Rückverfolgung bis zum Pivot) und
    danach entlang des neuen Pfads in Schritten von prediction_stride·δ
    aktualisiert; peak_length ist das Maximum über diese Zwischenstände.

    Raises:
        PlanningError: kein Pfad vom Pivot zum Wegpunkt
    """
    nodes = tether.nodes
    if not 0 <= i < len(nodes):
        raise IndexError(f"Pivot {i} außerhalb von 0..{len(nodes) - 1}")
    pivot = nodes[i]
    segment = plan_shortest_path(config.path_query(pivot, waypoint, seed_offset=i), grid)

    # P_r1: vom Fahrzeug rückwärts bis zum Pivot, danach P_r2
    retrace = nodes[i:][::-1]
    recovery = dedupe(np.vstack((retrace, segment[1:])))

    simulated = TetherPath(nodes[: i + 1], tether.spacing)
    peak = simulated.length
    for sample in sample_along(segment, config.prediction_stride * tether.spacing)[1:]:
        result = update_tether(simulated, sample, grid, margin=config.tether_margin)
        if result.status != "rejected":
            simulated = result.path
        peak = max(peak, simulated.length)

    return PivotEvaluation(
        pivot_index=i,
        recovery_path=recovery,
        predicted_length=simulated.length,
        peak_length=peak,
    )


def de_entanglement_search(
    tether: TetherPath,
    waypoint,
    max_length: float,
    grid: SdfGrid,
    config: PlannerConfig,
) -> RecoverySearchResult:
    """
    Rückwärtssuche entlang des Tethers nach dem ersten zulässigen Pivot.

    Geprüft wird von Knoten n-1 (Fahrzeug) abwärts bis zum Anker. Ist kein Pivot
    zulässig, wird der direkte kürzeste Pfad vom Fahrzeug mit feasible=False
    zurückgegeben (L_max als weiche Grenze).

    Raises:
        RecoveryUnavailableError: auch der direkte Pfad ist nicht planbar
    """
    waypoint = np.asarray(waypoint, dtype=np.float64).reshape(3)
    n = len(tether)
    skipped: List[int] = []
    # Fehlgeschlagene Planungen je Pivot-Position innerhalb dieses Aufrufs
    failed_positions = set()
    direct: Optional[PivotEvaluation] = None
    evaluated = 0

    for i in _pivot_indices(n, config.pivot_stride):
        key = tuple(np.round(tether.nodes[i], 6))
        if key in failed_positions:
            skipped.append(i)
            continue
        try:
            evaluation = evaluate_pivot(tether, i, waypoint, grid, config)
        except PlanningError as e:
            logger.debug(f"Entwirrung: Pivot {i} übersprungen ({e})")
            failed_positions.add(key)
            skipped.append(i)
            continue
        evaluated += 1
        if i == n - 1:
            direct = evaluation
        if evaluation.feasible(max_length, tether.spacing):
            logger.info(
                f"Entwirrung: Pivot {i}/{n - 1} gewählt, vorhergesagte Länge "
                f"{evaluation.predicted_length:.2f} m ({evaluated} Pivots geprüft, "
                f"{len(skipped)} übersprungen)"
            )
            return RecoverySearchResult(
                recovery_path=evaluation.recovery_path,
                pivot_index=i,
                feasible=True,
                predicted_length=evaluation.predicted_length,
                evaluated_pivots=evaluated,
                skipped_pivots=skipped,
            )

    if direct is None:
        raise RecoveryUnavailableError(
            f"Kein Pfad vom Fahrzeug {np.round(tether.end, 3).tolist()} zum Wegpunkt "
            f"{np.round(waypoint, 3).tolist()}"
        )

    logger.warning(
        f"Entwirrung: kein Pivot hält L_max={max_length:.2f} m ein - direkter Pfad, "
        f"vorhergesagte Länge {direct.predicted_length:.2f} m (weiche Grenze)"
    )
    return RecoverySearchResult(
        recovery_path=direct.recovery_path,
        pivot_index=n - 1,
        feasible=False,
        predicted_length=direct.predicted_length,
        evaluated_pivots=evaluated,
        skipped_pivots=skipped,
    )


# ----------------------------------------------------------------------
# Verfeinerung des Rückzugspfads
# ----------------------------------------------------------------------

def _offset_from_centroid(pts: np.ndarray, distance: float) -> np.ndarray:
    """Innere Punkte senkrecht zur Pfadrichtung vom Schwerpunkt wegschieben"""
    out = pts.copy()
    if len(pts) < 3 or distance <= 0.0:
        return out
    centroid = pts.mean(axis=0)
    tangent = pts[2:] - pts[:-2]
    norm = np.linalg.norm(tangent, axis=1, keepdims=True)
    tangent = np.divide(tangent, norm, out=np.zeros_like(tangent), where=norm > DUPLICATE_EPS)
    radial = pts[1:-1] - centroid
    radial -= np.einsum("ij,ij->i", radial, tangent)[:, None] * tangent
    length = np.linalg.norm(radial, axis=1, keepdims=True)
    movable = length[:, 0] > DUPLICATE_EPS
    out[1:-1][movable] += radial[movable] / length[movable] * distance
    return out


def _perturb(pts: np.ndarray, grid: SdfGrid, margin: float, rng, samples: int) -> np.ndarray:
    """Ersetzt Punkte im Sicherheitsabstand durch zufällige freie Nachbarn"""
    out = pts.copy()
    if len(pts) < 3:
        return out
    violating = np.flatnonzero(distances_at(grid, pts[1:-1]) < margin) + 1
    for idx in violating:
        directions = rng.normal(size=(samples, 3))
        directions /= np.maximum(np.linalg.norm(directions, axis=1, keepdims=True), DUPLICATE_EPS)
        radii = rng.uniform(0.0, 2.0 * margin, size=(samples, 1))
        candidates = pts[idx] + directions * radii
        clearance = distances_at(grid, candidates)
        if clearance.max() >= margin:
            out[idx] = candidates[int(np.argmax(clearance))]
    return out


def _smooth(pts: np.ndarray, window: int) -> np.ndarray:
    """Kubische Savitzky-Golay-Glättung je Koordinate, Endpunkte fest"""
    pts = dedupe(pts)
    length = min(window, len(pts))
    if length % 2 == 0:
        length -= 1
    if length <= 3:
        return pts
    out = savgol_filter(pts, length, polyorder=3, axis=0, mode="interp")
    out[0], out[-1] = pts[0], pts[-1]
    return out


def refine_recovery_path(
    path,
    grid: SdfGrid,
    margin: float,
    rng_seed: int = 0,
    offset_gain: float = 1.0,
    max_iter: int = 25,
    window: int = 8,
    perturbation_samples: int = 20,
    spacing: Optional[float] = None,
) -> np.ndarray:
    """
    Verfeinert einen Rückzugspfad für den Fahrzeugkörper.

    Je Durchlauf: Schwerpunkt-Versatz, zufällige Störung verletzender Punkte,
    kubische Glättung. Wiederholt bis der Pfad bei `margin` kollisionsfrei ist
    oder max_iter erreicht ist. Anfangs- und Endpunkt bleiben exakt erhalten.

    Raises:
        RefinementError: keine kollisionsfreie Variante und Eingabe selbst verletzt margin
    """
    pts = as_points(path)
    if len(pts) == 0:
        raise ValueError("refine_recovery_path braucht einen nicht leeren Pfad")
    if len(pts) <= 2:
        return pts.copy()

    rng = np.random.default_rng(rng_seed)
    first, last = pts[0].copy(), pts[-1].copy()
    current = pts.copy()
    best, best_violations = pts.copy(), int((distances_at(grid, pts) < margin).sum())

    for _ in range(max_iter):
        current = _offset_from_centroid(current, offset_gain * margin)
        current = _perturb(current, grid, margin, rng, perturbation_samples)
        current = _smooth(resample_polyline(current, spacing) if spacing else current, window)
        if spacing:
            current = resample_polyline(current, spacing)
        current[0], current[-1] = first, last
        if path_is_collision_free(grid, current, margin):
            return current
        violations = int((distances_at(grid, current) < margin).sum())
        if violations < best_violations:
            best, best_violations = current.copy(), violations

    if path_is_collision_free(grid, pts, margin):
        return pts.copy()
    logger.warning(
        f"Verfeinerung: nach {max_iter} Durchläufen nicht kollisionsfrei "
        f"({best_violations} Knoten im Sicherheitsabstand)"
    )
    raise RefinementError("Keine kollisionsfreie Verfeinerung gefunden", best_effort=best)


# ----------------------------------------------------------------------
# Zwei-Modi-Schritt
# ----------------------------------------------------------------------

def advance_waypoint(state: PlannerState, mission: Mission, p_rov: np.ndarray) -> np.ndarray:
    """Ziel W[k]; bei Erreichen weiter zum nächsten Wegpunkt bzw. Mission abschließen"""
    target = mission.waypoints[state.k]
    if not reached_waypoint(p_rov, target, mission.reach_radius):
        return target.copy()
    state.k += 1
    state.events.append("waypoint_reached")
    if state.soft_limit_active:
        state.soft_limit_active = False
    if state.k >= len(mission):
        state.complete = True
        return p_rov.copy()
    return mission.waypoints[state.k].copy()


def _enter_recovery(
    state: PlannerState,
    mission: Mission,
    tether: TetherPath,
    p_rov: np.ndarray,
    grid: SdfGrid,
    config: PlannerConfig,
) -> np.ndarray:
    waypoint = mission.waypoints[state.k]
    started = time.perf_counter()
    try:
        result = de_entanglement_search(tether, waypoint, mission.max_tether_length, grid, config)
    except RecoveryUnavailableError as e:
        state.last_search_latency = time.perf_counter() - started
        logger.warning(f"Entwirrung fehlgeschlagen, fahre Wegpunkt {state.k} direkt an: {e}")
        state.events.append("search_failed")
        state.soft_limit_active = True
        return waypoint.copy()

    try:
        path = refine_recovery_path(
            result.recovery_path,
            grid,
            config.vehicle_margin,
            rng_seed=config.rng_seed + state.k,
            offset_gain=config.offset_gain,
            max_iter=config.refine_max_iter,
            window=config.smoothing_window,
            perturbation_samples=config.perturbation_samples,
            spacing=config.spacing,
        )
    except RefinementError as e:
        path = e.best_effort
    state.last_search_latency = time.perf_counter() - started

    if not result.feasible:
        state.soft_limit_active = True
        state.events.append("soft_limit")
    state.mode = PlannerMode.RECOVERY
    state.recovery_path = path
    state.path_progress = 0.0
    state.events.append("recovery_start")
    logger.info(
        f"RECOVERY für Wegpunkt {state.k}: Pivot {result.pivot_index}, "
        f"Suche {state.last_search_latency * 1000:.0f} ms"
    )
    target, state.path_progress = track_path(path, p_rov, config.lookahead, 0.0)
    return target


def step(
    state: PlannerState,
    mission: Mission,
    tether: TetherPath,
    p_rov,
    grid: SdfGrid,
    config: PlannerConfig,
) -> np.ndarray:
    """
    Ein Planertakt: liefert die Zielposition und aktualisiert `state`.

    Ereignisse des Takts stehen danach in state.events. Ist die Mission
    abgeschlossen, wird die aktuelle Position gehalten und state.complete gesetzt.
    """
    p_rov = np.asarray(p_rov, dtype=np.float64).reshape(3)
    state.events = []
    state.last_search_latency = 0.0
    if state.k >= len(mission):
        state.complete = True
        return p_rov.copy()

    if state.mode == PlannerMode.RECOVERY:
        path = state.recovery_path
        at_end = state.path_progress >= arc_lengths(path)[-1] - mission.reach_radius
        if not (at_end and reached_waypoint(p_rov, path[-1], mission.reach_radius)):
            target, state.path_progress = track_path(path, p_rov, config.lookahead, state.path_progress)
            return target
        # Pfadende erreicht: zurück in NORMAL, erneuter Einstieg frühestens im nächsten Takt
        state.mode = PlannerMode.NORMAL
        state.recovery_path = np.zeros((0, 3))
        state.path_progress = 0.0
        state.events.append("recovery_end")
        return advance_waypoint(state, mission, p_rov)

    if compute_length(tether) > mission.max_tether_length and not state.soft_limit_active:
        return _enter_recovery(state, mission, tether, p_rov, grid, config)
    return advance_waypoint(state, mission, p_rov)


class EntanglementPlanner:
    """Bündelt Mission, Karte, Konfiguration und Zustand für die Regelschleife"""

    def __init__(self, mission: Mission, grid: SdfGrid, config: PlannerConfig):
        self.mission = mission
        self.grid = grid
        self.config = config
        self.state = PlannerState()

    @property
    def complete(self) -> bool:
        return self.state.complete

    def step(self, tether: TetherPath, p_rov) -> np.ndarray:
        return step(self.state, self.mission, tether, p_rov, self.grid, self.config)
