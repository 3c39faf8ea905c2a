"""Kollisionsfreie kürzeste Wege über der SDF-Karte (RRT* mit Nachglättung).

Ablauf je Anfrage:
1. Start und Ziel prüfen, freie Sichtlinie direkt als gerade Strecke zurückgeben.
2. RRT* mit Zielbias und Rewiring im Radius γ·(log n / n)^(1/3), γ = 2·step.
   Nach der ersten Lösung wird abgebrochen, sobald `patience` Iterationen
   keine Verbesserung bringen.
3. Gierige Sichtlinien-Abkürzung des Baumpfads, danach Abtastung mit δ.

Deterministisch für einen festen Seed; ohne gemeinsamen Zustand zwischen
Aufrufen, unabhängige Anfragen dürfen parallel laufen.
"""
import logging
import math
from typing import List

import numpy as np

from app.models.geometry import SdfGrid
from app.models.planner import PathQuery
from app.services.env_map import distance_at, line_of_sight, line_of_sight_fan
from app.utils.polyline import DUPLICATE_EPS, as_points, path_length, resample_polyline

logger = logging.getLogger(__name__)

__all__ = [
    "PlanningError",
    "EndpointInCollisionError",
    "UnreachableWithinBudgetError",
    "plan_shortest_path",
    "simplify_path",
    "path_length",
]


class PlanningError(Exception):
    """Kein Pfad berechenbar"""


class EndpointInCollisionError(PlanningError):
    """Start oder Ziel liegt innerhalb des Sicherheitsabstands"""


class UnreachableWithinBudgetError(PlanningError):
    """Innerhalb von max_iterations kein Pfad gefunden"""


def simplify_path(points, grid: SdfGrid, margin: float) -> np.ndarray:
    """Gierige Abkürzung: vom aktuellen Punkt zum entferntesten sichtbaren Punkt"""
    pts = as_points(points)
    if len(pts) <= 2:
        return pts.copy()
    out = [pts[0]]
    k = 0
    while k < len(pts) - 1:
        visible = line_of_sight_fan(grid, pts[k], pts[k + 1:], margin)
        ahead = np.flatnonzero(visible)
        # Nachbarn im Baum sind immer verbunden, auch bei Rundungsgrenzfällen
        m = k + 1 + int(ahead[-1]) if len(ahead) else k + 1
        out.append(pts[m])
        k = m
    return np.asarray(out)


def plan_shortest_path(query: PathQuery, grid: SdfGrid) -> np.ndarray:
    """
    Plant einen kollisionsfreien Pfad von query.start nach query.goal.

    Returns:
        (N, 3)-Polylinie, Start und Ziel exakt enthalten, Abstand der Knoten <= δ

    Raises:
        EndpointInCollisionError: Start oder Ziel näher als margin am Hindernis
        UnreachableWithinBudgetError: kein Pfad nach max_iterations
    """
    start, goal, margin = query.start, query.goal, query.margin
    for name, point in (("Start", start), ("Ziel", goal)):
        if distance_at(grid, point) < margin:
            raise EndpointInCollisionError(
                f"{name} {np.round(point, 3).tolist()} liegt im Sicherheitsabstand ({margin} m)"
            )

    if np.linalg.norm(goal - start) < DUPLICATE_EPS:
        return start.reshape(1, 3).copy()
    if line_of_sight(grid, start, goal, margin):
        return resample_polyline([start, goal], query.node_spacing)

    raw = _rrt_star(query, grid)
    simplified = simplify_path(raw, grid, margin)
    logger.debug(
        f"RRT*: Rohpfad {path_length(raw):.3f} m, vereinfacht {path_length(simplified):.3f} m"
    )
    return resample_polyline(simplified, query.node_spacing)


def _rrt_star(query: PathQuery, grid: SdfGrid) -> np.ndarray:
    bounds = query.bounds or grid.bounds.inflated(query.margin)
    rng = np.random.default_rng(query.rng_seed)
    step, margin, goal = query.step, query.margin, query.goal
    gamma = 2.0 * step

    capacity = query.max_iterations + 1
    nodes = np.empty((capacity, 3))
    cost = np.empty(capacity)
    parent = np.full(capacity, -1, dtype=np.int64)
    children: List[List[int]] = [[]]
    nodes[0] = query.start
    cost[0] = 0.0
    count = 1

    goal_links: List[int] = []
    best_cost = math.inf
    last_improvement = 0

    for iteration in range(query.max_iterations):
        if rng.random() < query.goal_bias:
            sample = goal
        else:
            sample = rng.uniform(bounds.lower, bounds.upper)

        dist_all = np.linalg.norm(nodes[:count] - sample, axis=1)
        nearest = int(np.argmin(dist_all))
        direction = sample - nodes[nearest]
        dist = float(dist_all[nearest])
        if dist < DUPLICATE_EPS:
            continue
        new = nodes[nearest] + direction * min(1.0, step / dist)
        if distance_at(grid, new) < margin:
            continue

        radius = gamma * (math.log(count + 1) / (count + 1)) ** (1.0 / 3.0)
        dist_new = np.linalg.norm(nodes[:count] - new, axis=1)
        near = np.flatnonzero(dist_new <= radius)
        candidates = np.union1d(near, [nearest])
        via = cost[candidates] + dist_new[candidates]

        chosen = -1
        for c in candidates[np.argsort(via, kind="stable")]:
            if line_of_sight(grid, nodes[c], new, margin):
                chosen = int(c)
                break
        if chosen < 0:
            continue

        idx = count
        nodes[idx] = new
        cost[idx] = cost[chosen] + dist_new[chosen]
        parent[idx] = chosen
        children.append([])
        children[chosen].append(idx)
        count += 1

        # Rewiring: Nachbarn über den neuen Knoten günstiger erreichbar?
        for c in near:
            c = int(c)
            if c == chosen:
                continue
            candidate_cost = cost[idx] + dist_new[c]
            if candidate_cost + 1e-12 < cost[c] and line_of_sight(grid, new, nodes[c], margin):
                children[parent[c]].remove(c)
                parent[c] = idx
                children[idx].append(c)
                _propagate_cost(c, candidate_cost, nodes, cost, children)

        if np.linalg.norm(goal - new) <= step and line_of_sight(grid, new, goal, margin):
            goal_links.append(idx)

        if goal_links:
            current = min(cost[g] + np.linalg.norm(goal - nodes[g]) for g in goal_links)
            if current + 1e-9 < best_cost:
                best_cost = current
                last_improvement = iteration
            elif iteration - last_improvement > query.patience:
                break

    if not goal_links:
        raise UnreachableWithinBudgetError(
            f"Kein Pfad nach {query.max_iterations} Iterationen "
            f"({np.round(query.start, 3).tolist()} -> {np.round(goal, 3).tolist()})"
        )

    last = min(goal_links, key=lambda g: cost[g] + np.linalg.norm(goal - nodes[g]))
    chain = []
    node = last
    while node >= 0:
        chain.append(nodes[node])
        node = int(parent[node])
    chain.reverse()
    chain.append(goal)
    return np.asarray(chain)


def _propagate_cost(root: int, root_cost: float, nodes, cost, children) -> None:
    cost[root] = root_cost
    stack = [root]
    while stack:
        node = stack.pop()
        for child in children[node]:
            cost[child] = cost[node] + float(np.linalg.norm(nodes[child] - nodes[node]))
            stack.append(child)
