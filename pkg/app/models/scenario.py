"""
Szenario-Modell.

Ein Szenario wird aus einer flachen KEY=VALUE-Datei geladen (siehe
docs/scenario_format.md). Vektoren werden als "x,y,z" geschrieben, Listen von
Primitiven mit ";" getrennt. Relative Dateipfade gelten relativ zur
Szenario-Datei und werden vom Loader aufgelöst.
"""
from typing import Annotated, List, Literal, Optional, Tuple

from pydantic import BaseModel, BeforeValidator, Field, model_validator


def _parse_floats(value, count: Optional[int] = None) -> Tuple[float, ...]:
    if isinstance(value, str):
        value = [p.strip() for p in value.split(",") if p.strip()]
    try:
        values = tuple(float(v) for v in value)
    except TypeError:
        raise ValueError(f"Ungültiger Vektor: {value!r}")
    if count is not None and len(values) != count:
        raise ValueError(f"Erwartet {count} Zahlen, erhalten {len(values)}")
    return values


def _parse_vector(value):
    return _parse_floats(value, 3)


def _parse_list(value):
    """'a;b;c' -> ['a', 'b', 'c']; leere Einträge werden ignoriert"""
    if value is None:
        return []
    if isinstance(value, str):
        return [item.strip() for item in value.split(";") if item.strip()]
    return value


Vec3 = Annotated[Tuple[float, float, float], BeforeValidator(_parse_vector)]


class BoxPrimitive(BaseModel):
    """Achsparalleler Quader, angegeben als 'lx,ly,lz,ux,uy,uz'"""
    lower: Vec3
    upper: Vec3

    @model_validator(mode="before")
    @classmethod
    def from_text(cls, data):
        if isinstance(data, str):
            values = _parse_floats(data, 6)
            return {"lower": values[:3], "upper": values[3:]}
        return data

    @model_validator(mode="after")
    def check_extent(self):
        if any(u <= lo for lo, u in zip(self.lower, self.upper)):
            raise ValueError(f"Quader {self.lower} -> {self.upper}: obere Ecke muss größer sein")
        return self


class CylinderPrimitive(BaseModel):
    """Zylinder, angegeben als 'bx,by,bz,ax,ay,az,radius,height' (Basis, Achse, Maße)"""
    base: Vec3
    axis: Vec3 = (0.0, 0.0, 1.0)
    radius: float = Field(gt=0.0)
    height: float = Field(gt=0.0)

    @model_validator(mode="before")
    @classmethod
    def from_text(cls, data):
        if isinstance(data, str):
            values = _parse_floats(data, 8)
            return {"base": values[:3], "axis": values[3:6], "radius": values[6], "height": values[7]}
        return data

    @model_validator(mode="after")
    def check_axis(self):
        if sum(a * a for a in self.axis) <= 0.0:
            raise ValueError("Zylinderachse darf nicht null sein")
        return self


class HelixSpec(BaseModel):
    """Schraubenlinie um eine Strukturachse als Wegpunktquelle"""
    center: Vec3
    axis: Vec3 = (0.0, 0.0, 1.0)
    radius: float = Field(gt=0.0)
    pitch: float = Field(gt=0.0)
    turns: float = Field(default=3.0, gt=0.0)
    points_per_turn: int = Field(default=12, ge=3)
    start_height: float = 0.0


class Scenario(BaseModel):
    """Vollständige Konfiguration einer simulierten Inspektionsmission"""
    name: str = "scenario"

    # Karte
    point_cloud_file: Optional[str] = None
    boxes: Annotated[List[BoxPrimitive], BeforeValidator(_parse_list)] = []
    cylinders: Annotated[List[CylinderPrimitive], BeforeValidator(_parse_list)] = []
    mesh_file: Optional[str] = None
    bounds_lower: Vec3
    bounds_upper: Vec3
    resolution: float = Field(default=0.05, gt=0.0)
    truncation: float = Field(default=1.0, gt=0.0)
    # Meeresboden: massive Schicht von bounds_lower.z bis zu dieser Höhe (nicht Teil des Inspektionsnetzes)
    floor_height: Optional[float] = None

    # Anker, Start, Wegpunkte
    anchor: Vec3
    start: Vec3
    start_yaw: float = 0.0
    waypoint_file: Optional[str] = None
    helix_center: Optional[Vec3] = None
    helix_axis: Vec3 = (0.0, 0.0, 1.0)
    helix_radius: float = Field(default=0.8, gt=0.0)
    helix_pitch: float = Field(default=0.3, gt=0.0)
    helix_turns: float = Field(default=3.0, gt=0.0)
    helix_points_per_turn: int = Field(default=12, ge=3)
    helix_start_height: float = 0.0
    # Kamera blickt auf den nächsten Punkt dieser Achse (Standard: Helix-Achse)
    inspection_axis_point: Optional[Vec3] = None
    inspection_axis: Optional[Vec3] = None

    # Tether und Planer
    max_tether_length: float = Field(default=10.0, gt=0.0)
    spacing: float = Field(default=0.1, gt=0.0)
    tether_margin: float = Field(default=0.05, ge=0.0)
    vehicle_margin: float = Field(default=0.15, ge=0.0)
    reach_radius: float = Field(default=0.15, gt=0.0)
    lookahead: float = Field(default=0.3, gt=0.0)
    offset_gain: float = Field(default=1.0, ge=0.0)
    refine_max_iter: int = Field(default=25, ge=1)
    pivot_stride: int = Field(default=1, ge=1)
    rrt_step: Optional[float] = Field(default=None, gt=0.0)
    rrt_goal_bias: float = Field(default=0.1, ge=0.0, le=1.0)
    rrt_max_iterations: int = Field(default=5000, ge=1)
    rrt_patience: int = Field(default=500, ge=1)
    return_length_factor: float = Field(default=1.2, ge=1.0)
    # RRT*-Stichproben nur in der Box um Start und Ziel plus diesem Rand (leer: ganze Karte)
    search_padding: Optional[float] = Field(default=None, gt=0.0)

    # Kamera
    camera_fov: float = Field(default=70.0, gt=0.0, lt=180.0)
    camera_range: float = Field(default=1.2, gt=0.0)

    # Simulation
    dt: float = Field(default=0.1, gt=0.0)
    max_speed: float = Field(default=0.5, gt=0.0)
    max_yaw_rate: float = Field(default=1.0, gt=0.0)
    waypoint_timeout: float = Field(default=120.0, gt=0.0)
    planner: Literal["react", "baseline"] = "react"
    rng_seed: int = 0

    @model_validator(mode="after")
    def validate_sources(self):
        """
        Prüft die Kombination der Quellen.

        - Wegpunkte: genau eine Quelle (waypoint_file ODER helix_center)
        - Bounds: obere Ecke in jeder Achse größer als die untere
        """
        has_file = self.waypoint_file is not None
        has_helix = self.helix_center is not None
        if has_file == has_helix:
            raise ValueError("Genau eine Wegpunktquelle angeben: 'waypoint_file' ODER 'helix_center'")
        if any(u <= lo for lo, u in zip(self.bounds_lower, self.bounds_upper)):
            raise ValueError("'bounds_upper' muss in jeder Achse größer als 'bounds_lower' sein")
        if (self.inspection_axis_point is None) != (self.inspection_axis is None):
            raise ValueError("'inspection_axis_point' und 'inspection_axis' nur gemeinsam angeben")
        return self

    @property
    def helix(self) -> Optional[HelixSpec]:
        if self.helix_center is None:
            return None
        return HelixSpec(
            center=self.helix_center,
            axis=self.helix_axis,
            radius=self.helix_radius,
            pitch=self.helix_pitch,
            turns=self.helix_turns,
            points_per_turn=self.helix_points_per_turn,
            start_height=self.helix_start_height,
        )

    @property
    def effective_rrt_step(self) -> float:
        return self.rrt_step if self.rrt_step is not None else 5.0 * self.resolution
