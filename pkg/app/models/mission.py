"""Fahrzeugzustand und Missionsprotokoll"""
from dataclasses import dataclass, field, replace
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel

Phase = Literal["inspection", "return"]


@dataclass(frozen=True)
class VehicleState:
    """Position (m), Gierwinkel (rad) und Stellgrenzen des kinematischen Fahrzeugmodells"""
    position: np.ndarray
    yaw: float = 0.0
    max_speed: float = 0.5
    max_yaw_rate: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64).reshape(3))
        if self.max_speed <= 0 or self.max_yaw_rate <= 0:
            raise ValueError("Stellgrenzen müssen > 0 sein")

    def moved(self, position, yaw: float) -> "VehicleState":
        return replace(self, position=np.asarray(position, dtype=np.float64), yaw=yaw)


@dataclass(frozen=True)
class MissionRow:
    """Eine Zeile je Simulationstakt"""
    time: float
    phase: Phase
    position: np.ndarray
    target: np.ndarray
    tether_length: float
    mode: str
    coverage: float
    soft_limit: bool
    events: str = ""
    latency: float = 0.0


class MissionSummary(BaseModel):
    """Kennzahlen einer Mission (aus den Zeilen ableitbar)"""
    planner: str
    inspection_time: float
    recovery_time: float
    total_time: float
    final_coverage: float
    max_tether_length: float
    exceedance_duration: float
    max_replanning_latency: float
    inspection_end_tether_length: float
    inspection_end_distance: float
    final_tether_length: float
    final_distance: float
    waypoints_reached: int
    waypoint_count: int
    aborted: bool = False
    abort_reason: str = ""


@dataclass
class MissionLog:
    """Zeilen, Zusammenfassung und Tether-Schnappschüsse einer Mission"""
    rows: List[MissionRow] = field(default_factory=list)
    summary: Optional[MissionSummary] = None
    final_tether: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    inspection_end_tether: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    def __len__(self) -> int:
        return len(self.rows)
