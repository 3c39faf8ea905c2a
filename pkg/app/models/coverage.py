"""Kameramodell für die Abdeckungsauswertung"""
from pydantic import BaseModel, Field


class CameraModel(BaseModel):
    """Kegelförmiges Sichtfeld mit voller Öffnung `fov` (Grad) und Reichweite `range` (m)"""
    fov: float = Field(default=70.0, gt=0.0, lt=180.0)
    range: float = Field(default=1.2, gt=0.0)

    model_config = {"frozen": True}
