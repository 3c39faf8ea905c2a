"""Planer-Typen: Bahnplanungsanfrage, Mission, Planerzustand und Suchergebnis"""
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np

from app.models.geometry import Bounds
from app.utils.polyline import as_points


@dataclass(frozen=True)
class PathQuery:
    """
    Anfrage an den RRT*-Planer.

    bounds=None bedeutet: SDF-Bounds, um `margin` aufgeweitet.
    """
    start: np.ndarray
    goal: np.ndarray
    margin: float
    node_spacing: float
    bounds: Optional[Bounds] = None
    max_iterations: int = 5000
    step: float = 0.25
    goal_bias: float = 0.1
    rng_seed: int = 0
    # Iterationen ohne Verbesserung nach der ersten Lösung, bevor abgebrochen wird
    patience: int = 500

    def __post_init__(self):
        object.__setattr__(self, "start", np.asarray(self.start, dtype=np.float64).reshape(3))
        object.__setattr__(self, "goal", np.asarray(self.goal, dtype=np.float64).reshape(3))
        if self.step <= 0:
            raise ValueError(f"Schrittweite muss > 0 sein (ist {self.step})")
        if not 0.0 <= self.goal_bias <= 1.0:
            raise ValueError(f"goal_bias muss in [0, 1] liegen (ist {self.goal_bias})")
        if self.margin < 0:
            raise ValueError("margin darf nicht negativ sein")
        if self.node_spacing <= 0:
            raise ValueError("node_spacing muss > 0 sein")


@dataclass(frozen=True)
class Mission:
    """Geordnete Wegpunkte W, maximale Tether-Länge L_max und Annahmeradius"""
    waypoints: np.ndarray
    max_tether_length: float
    reach_radius: float

    def __post_init__(self):
        wps = as_points(self.waypoints)
        if len(wps) == 0:
            raise ValueError("Eine Mission braucht mindestens einen Wegpunkt")
        if self.max_tether_length <= 0:
            raise ValueError("L_max muss > 0 sein")
        if self.reach_radius <= 0:
            raise ValueError("reach_radius muss > 0 sein")
        object.__setattr__(self, "waypoints", wps)

    def __len__(self) -> int:
        return len(self.waypoints)


class PlannerMode(str, Enum):
    NORMAL = "NORMAL"
    RECOVERY = "RECOVERY"


@dataclass
class PlannerState:
    """
    Zustand des Zwei-Modi-Planers. Gehört genau einer Regelschleife.

    recovery_path ist genau dann nicht leer, wenn mode == RECOVERY.
    """
    mode: PlannerMode = PlannerMode.NORMAL
    k: int = 0
    recovery_path: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    soft_limit_active: bool = False
    complete: bool = False
    # Bereits abgefahrene Bogenlänge auf recovery_path
    path_progress: float = 0.0
    # Ereignisse des letzten step()-Aufrufs (für die Missions-CSV)
    events: List[str] = field(default_factory=list)
    last_search_latency: float = 0.0


@dataclass(frozen=True)
class RecoverySearchResult:
    """
    Ergebnis der Entwirrungssuche.

    recovery_path = P_r1 (zurückverfolgter Tether ab Fahrzeug bis Pivot) ∪ P_r2
    (neu geplante Strecke Pivot -> Wegpunkt). predicted_length ist die
    simulierte Tether-Länge am Ende des Pfads.
    """
    recovery_path: np.ndarray
    pivot_index: int
    feasible: bool
    predicted_length: float
    evaluated_pivots: int = 0
    skipped_pivots: List[int] = field(default_factory=list)


@dataclass(frozen=True)
class PlannerConfig:
    """
    Parameter des Zwei-Modi-Planers.

    Der Tether wird mit tether_margin gegen die Karte geprüft, der
    Fahrzeugkörper (Rückzugspfad nach der Verfeinerung) mit vehicle_margin.
    """
    spacing: float
    tether_margin: float
    vehicle_margin: float
    lookahead: float = 0.3
    offset_gain: float = 1.0
    refine_max_iter: int = 25
    smoothing_window: int = 8
    perturbation_samples: int = 20
    # Jeder wievielte Tether-Knoten als Pivot geprüft wird
    pivot_stride: int = 1
    # Abtastung der Zwischenpositionen bei der Tether-Vorhersage (Vielfaches von δ)
    prediction_stride: float = 10.0
    rrt_step: float = 0.25
    rrt_goal_bias: float = 0.1
    rrt_max_iterations: int = 5000
    rrt_patience: int = 500
    rng_seed: int = 0
    bounds: Optional[Bounds] = None
    # Stichprobenbox je Anfrage: Start und Ziel plus dieser Rand (None: ganze Karte)
    search_padding: Optional[float] = None

    def __post_init__(self):
        if self.spacing <= 0:
            raise ValueError("δ muss > 0 sein")
        if self.tether_margin < 0 or self.vehicle_margin < 0:
            raise ValueError("Sicherheitsabstände dürfen nicht negativ sein")
        if self.lookahead <= 0:
            raise ValueError("lookahead muss > 0 sein")
        if self.pivot_stride < 1:
            raise ValueError("pivot_stride muss >= 1 sein")
        if self.smoothing_window < 4:
            raise ValueError("Glättungsfenster braucht mindestens 4 Knoten (kubischer Fit)")

    def path_query(self, start, goal, seed_offset: int = 0) -> PathQuery:
        """RRT*-Anfrage mit den Planerparametern (Tether-Abstand)"""
        bounds = self.bounds
        if bounds is None and self.search_padding is not None:
            corners = np.vstack((np.asarray(start, dtype=np.float64), np.asarray(goal, dtype=np.float64)))
            bounds = Bounds(corners.min(axis=0), corners.max(axis=0)).inflated(self.search_padding)
        return PathQuery(
            start=start,
            goal=goal,
            margin=self.tether_margin,
            node_spacing=self.spacing,
            bounds=bounds,
            max_iterations=self.rrt_max_iterations,
            step=self.rrt_step,
            goal_bias=self.rrt_goal_bias,
            rng_seed=self.rng_seed + seed_offset,
            patience=self.rrt_patience,
        )
