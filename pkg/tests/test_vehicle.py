"""Tests für das kinematische Fahrzeugmodell"""
import math

import numpy as np
import pytest

from app.models.mission import VehicleState
from app.services.vehicle import step_vehicle, wrap_angle


@pytest.fixture
def vehicle():
    return VehicleState(position=(0, 0, 0), yaw=0.0, max_speed=0.5, max_yaw_rate=1.0)


class TestStepVehicle:
    def test_speed_is_limited(self, vehicle):
        moved = step_vehicle(vehicle, (1, 0, 0), None, 0.1)
        np.testing.assert_allclose(moved.position, [0.05, 0, 0])

    def test_close_target_is_reached_exactly(self, vehicle):
        moved = step_vehicle(vehicle, (0.03, 0.01, 0), None, 0.1)
        np.testing.assert_allclose(moved.position, [0.03, 0.01, 0])

    def test_yaw_rate_is_limited(self, vehicle):
        moved = step_vehicle(vehicle, (0, 0, 0), np.array([0.0, 1.0, 0.0]), 0.1)
        assert moved.yaw == pytest.approx(0.1)

    def test_yaw_turns_the_short_way_across_pi(self):
        state = VehicleState(position=(0, 0, 0), yaw=3.1)
        look_at = np.array([math.cos(-3.1), math.sin(-3.1), 0.0])
        moved = step_vehicle(state, (0, 0, 0), look_at, 0.1)
        assert moved.yaw == pytest.approx(-3.1, abs=1e-9)

    def test_no_look_at_keeps_yaw(self, vehicle):
        assert step_vehicle(vehicle, (1, 0, 0), None, 0.1).yaw == 0.0

    def test_original_state_is_unchanged(self, vehicle):
        step_vehicle(vehicle, (1, 0, 0), None, 0.1)
        np.testing.assert_array_equal(vehicle.position, [0, 0, 0])

    @pytest.mark.parametrize("dt", [0.0, -0.1])
    def test_invalid_dt(self, vehicle, dt):
        with pytest.raises(ValueError):
            step_vehicle(vehicle, (1, 0, 0), None, dt)

    def test_invalid_limits(self):
        with pytest.raises(ValueError):
            VehicleState(position=(0, 0, 0), max_speed=0.0)


class TestWrapAngle:
    @pytest.mark.parametrize(
        "angle, expected",
        [(0.0, 0.0), (math.pi, -math.pi), (3 * math.pi / 2, -math.pi / 2), (-3 * math.pi / 2, math.pi / 2)],
    )
    def test_wraps_into_range(self, angle, expected):
        assert wrap_angle(angle) == pytest.approx(expected)
