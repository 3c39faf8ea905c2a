"""
Simulierte Inspektionsmission.

Je Takt: Tether aktualisieren -> Abdeckung auswerten -> Planer -> Protokollzeile
-> Fahrzeug bewegen. Nach dem letzten Wegpunkt folgt die Rückkehr zum Start,
die als Recovery-Zeit verbucht wird.

Planer:
- react: verhedderungsbewusster Zwei-Modi-Planer; Rückkehr mit enger
  Längengrenze, damit der Tether vollständig entwirrt wird
- baseline: fährt die Wegpunkte ohne Rücksicht auf den Tether ab und verfolgt
  zur Rückkehr den straffen Tether rückwärts, auf Inspektionsabstand nach außen versetzt
"""
import logging
import time
from typing import Callable, Optional, Union

import numpy as np

from app.models.coverage import CameraModel
from app.models.geometry import SdfGrid
from app.models.mission import MissionLog, MissionRow, MissionSummary, VehicleState
from app.models.planner import Mission, PlannerConfig, PlannerMode, PlannerState
from app.models.scenario import Scenario
from app.models.tether import TetherPath
from app.services.coverage_eval import CoverageTracker, heading
from app.services.entanglement_planner import EntanglementPlanner, advance_waypoint, track_path
from app.services.env_map import distances_at, path_is_collision_free, push_to_clearance
from app.services.scenario_loader import World, build_world
from app.services.tether_model import update_tether
from app.services.vehicle import step_vehicle
from app.utils.polyline import arc_lengths, dedupe, path_length, resample_polyline

logger = logging.getLogger(__name__)


def planner_config(scenario: Scenario) -> PlannerConfig:
    """Planerparameter aus dem Szenario"""
    return PlannerConfig(
        spacing=scenario.spacing,
        tether_margin=scenario.tether_margin,
        vehicle_margin=scenario.vehicle_margin,
        lookahead=scenario.lookahead,
        offset_gain=scenario.offset_gain,
        refine_max_iter=scenario.refine_max_iter,
        pivot_stride=scenario.pivot_stride,
        rrt_step=scenario.effective_rrt_step,
        rrt_goal_bias=scenario.rrt_goal_bias,
        rrt_max_iterations=scenario.rrt_max_iterations,
        rrt_patience=scenario.rrt_patience,
        rng_seed=scenario.rng_seed,
        search_padding=scenario.search_padding,
    )


def return_length_bound(scenario: Scenario) -> float:
    """Längengrenze der react-Rückkehr: knapp über dem Abstand Anker -> Start"""
    direct = float(np.linalg.norm(np.subtract(scenario.start, scenario.anchor)))
    return max(scenario.return_length_factor * direct, direct + 2.0 * scenario.spacing)


class BaselinePlanner:
    """Wegpunktfolge ohne Tether-Berücksichtigung: Ziel W[k], weiter bei Erreichen"""

    def __init__(self, mission: Mission):
        self.mission = mission
        self.state = PlannerState()

    @property
    def complete(self) -> bool:
        return self.state.complete

    def step(self, tether: TetherPath, p_rov) -> np.ndarray:
        p_rov = np.asarray(p_rov, dtype=np.float64)
        self.state.events = []
        if self.state.k >= len(self.mission):
            self.state.complete = True
            return p_rov.copy()
        return advance_waypoint(self.state, self.mission, p_rov)


class RetracePlanner:
    """Fährt einen festen Pfad ab (Rückkehr der Baseline entlang des Tethers)"""

    def __init__(self, path, reach_radius: float, lookahead: float):
        self.path = dedupe(path)
        self.reach_radius = reach_radius
        self.lookahead = lookahead
        self.state = PlannerState(mode=PlannerMode.RECOVERY, recovery_path=self.path)
        self._total = float(arc_lengths(self.path)[-1])

    @property
    def complete(self) -> bool:
        return self.state.complete

    def step(self, tether: TetherPath, p_rov) -> np.ndarray:
        p_rov = np.asarray(p_rov, dtype=np.float64)
        self.state.events = []
        if self.state.complete:
            return p_rov.copy()
        end = self.path[-1]
        at_end = self.state.path_progress >= self._total - self.reach_radius
        if at_end and np.linalg.norm(p_rov - end) <= self.reach_radius:
            self.state.mode = PlannerMode.NORMAL
            self.state.recovery_path = np.zeros((0, 3))
            self.state.k = 1
            self.state.complete = True
            self.state.events.append("recovery_end")
            return p_rov.copy()
        target, self.state.path_progress = track_path(
            self.path, p_rov, self.lookahead, self.state.path_progress
        )
        return target


def inspection_standoff(grid: SdfGrid, waypoints) -> float:
    """Median-Abstand der Wegpunkte zur Struktur, unterhalb der Kappung"""
    clearance = distances_at(grid, waypoints)
    if len(clearance) == 0:
        return 0.0
    return float(min(np.median(clearance), grid.truncation - grid.resolution))


def retrace_path(tether: TetherPath, start, grid: SdfGrid, clearance: float, spacing: float) -> np.ndarray:
    """
    Rückweg der Baseline: Tether rückwärts bis zum Anker, dann zum Start.

    Die Knoten liegen nur `tether_margin` vor der Struktur; sie werden entlang
    des SDF-Gradienten knapp über `clearance` hinausgeschoben und neu abgetastet,
    bis der Pfad bei `clearance` frei ist (höchstens drei Durchläufe).
    """
    start = np.asarray(start, dtype=np.float64).reshape(3)
    path = np.vstack((tether.nodes[::-1], start))
    # Sehnen zwischen den Stützpunkten liegen etwas näher an der Struktur
    target = clearance + 0.1 * spacing
    for _ in range(3):
        path = push_to_clearance(grid, resample_polyline(path, spacing), target)
        path[-1] = start
        if path_is_collision_free(grid, path, clearance):
            break
    else:
        logger.warning(f"Rückweg unterschreitet stellenweise den Abstand {clearance:.2f} m")
    return dedupe(path)


Planner = Union[EntanglementPlanner, BaselinePlanner, RetracePlanner]


def _initial_tether(scenario: Scenario, world: World) -> TetherPath:
    tether = TetherPath.anchored(scenario.anchor, scenario.spacing)
    update = update_tether(tether, scenario.start, world.grid, margin=scenario.tether_margin)
    return update.path


def _return_planner(scenario: Scenario, world: World, config: PlannerConfig, tether: TetherPath) -> Planner:
    start = np.asarray(scenario.start, dtype=np.float64)
    if scenario.planner == "react":
        mission = Mission(start.reshape(1, 3), return_length_bound(scenario), scenario.reach_radius)
        return EntanglementPlanner(mission, world.grid, config)
    # Rückweg im Inspektionsabstand, mindestens δ über vehicle_margin
    # (die Lookahead-Verfolgung schneidet Kurven an)
    clearance = max(scenario.vehicle_margin + scenario.spacing, inspection_standoff(world.grid, world.waypoints))
    path = retrace_path(tether, start, world.grid, clearance, scenario.spacing)
    return RetracePlanner(path, scenario.reach_radius, scenario.lookahead)


def _summarize(
    scenario: Scenario,
    log: MissionLog,
    inspection_ticks: int,
    waypoints_reached: int,
    waypoint_count: int,
    aborted: bool,
    abort_reason: str,
) -> MissionSummary:
    dt = scenario.dt
    anchor = np.asarray(scenario.anchor, dtype=np.float64)
    lengths = np.array([row.tether_length for row in log.rows]) if log.rows else np.zeros(0)
    latencies = [row.latency for row in log.rows]
    final_position = log.rows[-1].position if log.rows else np.asarray(scenario.start, dtype=np.float64)

    inspection_tether = log.inspection_end_tether if len(log.inspection_end_tether) else log.final_tether
    inspection_end = inspection_tether[-1] if len(inspection_tether) else final_position

    return MissionSummary(
        planner=scenario.planner,
        inspection_time=round(inspection_ticks * dt, 6),
        recovery_time=round((len(log.rows) - inspection_ticks) * dt, 6),
        total_time=round(len(log.rows) * dt, 6),
        final_coverage=log.rows[-1].coverage if log.rows else 0.0,
        max_tether_length=float(lengths.max()) if len(lengths) else 0.0,
        exceedance_duration=round(dt * int((lengths > scenario.max_tether_length).sum()), 6),
        max_replanning_latency=max(latencies) if latencies else 0.0,
        inspection_end_tether_length=path_length(inspection_tether),
        inspection_end_distance=float(np.linalg.norm(inspection_end - anchor)),
        final_tether_length=path_length(log.final_tether),
        final_distance=float(np.linalg.norm(final_position - anchor)),
        waypoints_reached=waypoints_reached,
        waypoint_count=waypoint_count,
        aborted=aborted,
        abort_reason=abort_reason,
    )


def run_mission(
    scenario: Scenario,
    world: Optional[World] = None,
    on_tick: Optional[Callable[[int, int], None]] = None,
) -> MissionLog:
    """
    Simuliert die Mission eines Szenarios mit dem konfigurierten Planer.

    Args:
        scenario: validiertes Szenario
        world: vorab aufgebaute Welt (sonst aus dem Szenario)
        on_tick: Fortschritts-Callback (Takt, erreichte Wegpunkte)

    Returns:
        MissionLog; ein Abbruch (Zeitlimit je Wegpunkt) steht in summary.aborted
    """
    world = world or build_world(scenario)
    config = planner_config(scenario)
    camera = CameraModel(fov=scenario.camera_fov, range=scenario.camera_range)
    dt = scenario.dt

    inspection = Mission(world.waypoints, scenario.max_tether_length, scenario.reach_radius)
    planner: Planner
    if scenario.planner == "react":
        planner = EntanglementPlanner(inspection, world.grid, config)
    else:
        planner = BaselinePlanner(inspection)

    tether = _initial_tether(scenario, world)
    vehicle = VehicleState(
        position=scenario.start,
        yaw=scenario.start_yaw,
        max_speed=scenario.max_speed,
        max_yaw_rate=scenario.max_yaw_rate,
    )
    tracker = CoverageTracker(world.mesh)
    log = MissionLog()

    phase = "inspection"
    inspection_ticks = 0
    waypoints_reached = 0
    last_k, last_progress = 0, 0.0
    aborted, abort_reason = False, ""
    logger.info(f"Mission {scenario.name} ({scenario.planner}): {len(inspection)} Wegpunkte")

    tick = 0
    while True:
        update = update_tether(tether, vehicle.position, world.grid, margin=scenario.tether_margin)
        if update.status != "rejected":
            tether = update.path
        coverage = tracker.update_and_ratio(vehicle.position, heading(vehicle.yaw), camera)

        started = time.perf_counter()
        target = planner.step(tether, vehicle.position)
        latency = time.perf_counter() - started

        now = round((tick + 1) * dt, 9)
        state = planner.state
        log.rows.append(MissionRow(
            time=now,
            phase=phase,
            position=vehicle.position.copy(),
            target=np.asarray(target, dtype=np.float64).copy(),
            tether_length=tether.length,
            mode=state.mode.value,
            coverage=coverage,
            soft_limit=state.soft_limit_active,
            events=";".join(state.events),
            latency=latency,
        ))
        tick += 1
        if on_tick is not None:
            on_tick(tick, waypoints_reached + state.k)

        if state.k != last_k:
            last_k, last_progress = state.k, now

        if planner.complete:
            if phase == "inspection":
                phase = "return"
                inspection_ticks = tick
                waypoints_reached = len(inspection)
                log.inspection_end_tether = tether.nodes.copy()
                logger.info(f"Inspektion beendet nach {now:.1f} s, Rückkehr zum Start")
                planner = _return_planner(scenario, world, config, tether)
                last_k, last_progress = 0, now
            else:
                break
        elif now - last_progress > scenario.waypoint_timeout:
            aborted = True
            label = f"Wegpunkt {state.k}" if phase == "inspection" else "Startposition"
            abort_reason = f"{label} nach {scenario.waypoint_timeout:.0f} s nicht erreicht ({phase})"
            if phase == "inspection":
                inspection_ticks = tick
                waypoints_reached = state.k
                log.inspection_end_tether = tether.nodes.copy()
            logger.error(f"Mission {scenario.name} abgebrochen: {abort_reason}")
            break

        look_at = world.look_at(vehicle.position, fallback=np.asarray(target, dtype=np.float64))
        vehicle = step_vehicle(vehicle, target, look_at, dt)

    log.final_tether = tether.nodes.copy()
    log.summary = _summarize(
        scenario, log, inspection_ticks, waypoints_reached, len(inspection), aborted, abort_reason
    )
    logger.info(
        f"Mission {scenario.name} ({scenario.planner}) beendet: {log.summary.total_time:.1f} s, "
        f"Abdeckung {log.summary.final_coverage:.1%}, max. Tether {log.summary.max_tether_length:.2f} m"
    )
    return log
