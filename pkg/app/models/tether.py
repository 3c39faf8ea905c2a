"""Tether-Zustand: Polylinie vom festen Anker bis zum Fahrzeug"""
from dataclasses import dataclass
from typing import Literal

import numpy as np

from app.utils.polyline import as_points, path_length

TetherStatus = Literal["ok", "rejected", "not_converged"]


@dataclass(frozen=True)
class TetherPath:
    """
    Knoten 0 ist der Anker, der letzte Knoten das Fahrzeugende.

    `spacing` ist die Auflösung δ, mit der begradigte Abschnitte abgetastet werden.
    """
    nodes: np.ndarray
    spacing: float

    def __post_init__(self):
        nodes = as_points(self.nodes)
        if len(nodes) == 0:
            raise ValueError("Ein Tether braucht mindestens den Ankerknoten")
        if self.spacing <= 0:
            raise ValueError(f"Knotenabstand muss > 0 sein (ist {self.spacing})")
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def anchored(cls, anchor, spacing: float) -> "TetherPath":
        return cls(np.asarray(anchor, dtype=np.float64).reshape(1, 3), spacing)

    @property
    def anchor(self) -> np.ndarray:
        return self.nodes[0]

    @property
    def end(self) -> np.ndarray:
        return self.nodes[-1]

    @property
    def length(self) -> float:
        return path_length(self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def with_nodes(self, nodes) -> "TetherPath":
        return TetherPath(nodes, self.spacing)


@dataclass(frozen=True)
class TetherUpdate:
    """Ergebnis von update_tether: neuer Pfad plus Status statt Exception"""
    path: TetherPath
    status: TetherStatus = "ok"
    iterations: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "ok"
