"""Kinematisches Fahrzeugmodell erster Ordnung (ersetzt MPC und Fahrdynamik)"""
import math
from typing import Optional

import numpy as np

from app.models.mission import VehicleState
from app.utils.polyline import DUPLICATE_EPS


def wrap_angle(angle: float) -> float:
    """Winkel auf [-pi, pi)"""
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


def step_vehicle(state: VehicleState, p_target, look_at: Optional[np.ndarray], dt: float) -> VehicleState:
    """
    Bewegt das Fahrzeug um höchstens max_speed·dt Richtung p_target und dreht den
    Gierwinkel um höchstens max_yaw_rate·dt Richtung look_at.

    Liegt das Ziel näher als ein Schritt, wird es exakt erreicht.
    """
    if dt <= 0:
        raise ValueError(f"dt muss > 0 sein (ist {dt})")
    p_target = np.asarray(p_target, dtype=np.float64).reshape(3)
    delta = p_target - state.position
    dist = float(np.linalg.norm(delta))
    reach = state.max_speed * dt
    if dist <= reach:
        position = p_target.copy()
    else:
        position = state.position + delta * (reach / dist)

    yaw = state.yaw
    if look_at is not None:
        view = np.asarray(look_at, dtype=np.float64)[:2] - position[:2]
        if np.linalg.norm(view) > DUPLICATE_EPS:
            error = wrap_angle(math.atan2(view[1], view[0]) - yaw)
            limit = state.max_yaw_rate * dt
            yaw = wrap_angle(yaw + max(-limit, min(limit, error)))
    return state.moved(position, yaw)
