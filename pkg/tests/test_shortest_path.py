"""Tests für die RRT*-Bahnplanung"""
import numpy as np
import pytest
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

import app.services.shortest_path as shortest_path
from app.models.geometry import Bounds
from app.models.planner import PathQuery
from app.services.env_map import distances_at, path_is_collision_free, sample_box, sample_cylinder
from app.services.shortest_path import (
    EndpointInCollisionError,
    PlanningError,
    UnreachableWithinBudgetError,
    path_length,
    plan_shortest_path,
    simplify_path,
)

MARGIN = 0.05
SPACING = 0.1


def query(start, goal, **kwargs):
    params = dict(margin=MARGIN, node_spacing=SPACING, max_iterations=3000, patience=300, rng_seed=1)
    params.update(kwargs)
    return PathQuery(start=start, goal=goal, **params)


def max_gap(points):
    return float(np.linalg.norm(np.diff(points, axis=0), axis=1).max())


@pytest.fixture
def wall_grid(grid_factory):
    """Dünne Wand in der Ebene x = 0, |y| <= 0.5, über die volle Höhe"""
    wall = sample_box((-0.025, -0.5, -1.0), (0.025, 0.5, 1.0), 0.025)
    return grid_factory(wall, lower=(-1, -1, -1), upper=(1, 1, 1), resolution=0.05)


def grid_dijkstra_length(grid, start, goal, margin, step, extent):
    """Kürzester Weg über freie Zellen eines 8-Nachbarschaftsgitters in der Ebene z = start.z"""
    coords = np.arange(-extent, extent + step / 2.0, step)
    n = len(coords)
    xs, ys = np.meshgrid(coords, coords, indexing="ij")
    cells = np.column_stack((xs.ravel(), ys.ravel(), np.full(n * n, start[2])))
    free = distances_at(grid, cells) >= margin
    index = np.arange(n * n).reshape(n, n)
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    rows, cols, weights = [], [], []
    for dx, dy in ((1, 0), (0, 1), (1, 1), (1, -1)):
        valid = (ii + dx < n) & (jj + dy >= 0) & (jj + dy < n)
        a = index[ii[valid], jj[valid]]
        b = index[ii[valid] + dx, jj[valid] + dy]
        keep = free[a] & free[b]
        rows.append(a[keep])
        cols.append(b[keep])
        weights.append(np.full(int(keep.sum()), step * np.hypot(dx, dy)))
    graph = csr_matrix(
        (np.concatenate(weights), (np.concatenate(rows), np.concatenate(cols))), shape=(n * n, n * n)
    )
    source = int(np.argmin(np.linalg.norm(cells - start, axis=1)))
    target = int(np.argmin(np.linalg.norm(cells - goal, axis=1)))
    return float(dijkstra(graph, directed=False, indices=source)[target])


@pytest.fixture
def pillar_035_grid(grid_factory):
    """Senkrechter Zylinder (Radius 0.35) über die volle Gitterhöhe"""
    cloud = sample_cylinder((0.0, 0.0, -1.0), (0.0, 0.0, 1.0), 0.35, 2.0, 0.025)
    return grid_factory(cloud, lower=(-1.5, -1.5, -1.0), upper=(1.5, 1.5, 1.0), resolution=0.05)


class TestDirectPaths:
    def test_free_line_of_sight_is_straight(self, empty_grid):
        path = plan_shortest_path(query((-1, 0, 0), (1, 0.5, 0)), empty_grid)
        np.testing.assert_allclose(path[0], [-1, 0, 0])
        np.testing.assert_allclose(path[-1], [1, 0.5, 0])
        assert path_length(path) == pytest.approx(np.hypot(2.0, 0.5))
        assert max_gap(path) <= SPACING + 1e-9

    def test_identical_endpoints(self, empty_grid):
        path = plan_shortest_path(query((0.2, 0.2, 0.2), (0.2, 0.2, 0.2)), empty_grid)
        assert path.shape == (1, 3)


class TestObstacles:
    def test_path_around_box_is_collision_free(self, box_grid):
        start, goal = np.array([-1.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0])
        path = plan_shortest_path(query(start, goal), box_grid)
        np.testing.assert_allclose(path[0], start)
        np.testing.assert_allclose(path[-1], goal)
        assert path_is_collision_free(box_grid, path, MARGIN)
        assert max_gap(path) <= SPACING + 1e-9
        assert 2.0 < path_length(path) < 2.6

    def test_path_around_thin_wall_is_near_optimal(self, wall_grid):
        """Länge nahe dem analytischen Umweg über die Wandkante"""
        start, goal = (-0.6, 0.0, 0.0), (0.6, 0.0, 0.0)
        path = plan_shortest_path(query(start, goal, step=0.15), wall_grid)
        assert path_is_collision_free(wall_grid, path, MARGIN)
        lower = 2.0 * np.hypot(0.6, 0.5)
        assert lower <= path_length(path) <= 2.0 * np.hypot(0.6, 0.8)

    def test_deterministic_for_fixed_seed(self, box_grid):
        first = plan_shortest_path(query((-1, 0, 0), (1, 0, 0), rng_seed=5), box_grid)
        second = plan_shortest_path(query((-1, 0, 0), (1, 0, 0), rng_seed=5), box_grid)
        np.testing.assert_array_equal(first, second)

    def test_local_bounds_are_respected(self, box_grid):
        """Stichproben nur in der vorgegebenen Box: der Pfad verlässt sie nicht"""
        bounds = Bounds((-1.2, -1.0, -0.2), (1.2, 1.0, 0.2))
        path = plan_shortest_path(query((-1, 0, 0), (1, 0, 0), bounds=bounds), box_grid)
        assert np.all(bounds.inflated(1e-9).contains(path))

    def test_length_close_to_grid_dijkstra(self, pillar_035_grid):
        """Um den Zylinder höchstens 20 % länger als der Gitter-Dijkstra bei halber Auflösung"""
        start, goal = np.array([-1.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0])
        bounds = Bounds((-1.4, -1.4, -0.2), (1.4, 1.4, 0.2))
        path = plan_shortest_path(query(start, goal, bounds=bounds), pillar_035_grid)
        assert path_is_collision_free(pillar_035_grid, path, MARGIN)
        oracle = grid_dijkstra_length(pillar_035_grid, start, goal, MARGIN, pillar_035_grid.resolution / 2, 1.4)
        assert np.isfinite(oracle)
        assert abs(path_length(path) - oracle) <= 0.2 * oracle

    def test_simplified_path_not_longer_than_tree_path(self, box_grid, mocker):
        spy = mocker.spy(shortest_path, "simplify_path")
        plan_shortest_path(query((-1, 0, 0), (1, 0, 0)), box_grid)
        assert spy.call_count == 1
        raw = spy.call_args.args[0]
        assert path_length(spy.spy_return) <= path_length(raw) + 1e-9


class TestFailures:
    def test_start_in_collision(self, box_grid):
        with pytest.raises(EndpointInCollisionError):
            plan_shortest_path(query((0, 0, 0), (1, 1, 1)), box_grid)

    def test_goal_in_collision(self, box_grid):
        with pytest.raises(EndpointInCollisionError):
            plan_shortest_path(query((1, 1, 1), (0.29, 0, 0)), box_grid)

    def test_enclosed_start_is_unreachable(self, grid_factory):
        """Start in einer geschlossenen Hohlbox: Budget erschöpft"""
        slabs = [
            ((-0.5, -0.5, -0.5), (-0.4, 0.5, 0.5)),
            ((0.4, -0.5, -0.5), (0.5, 0.5, 0.5)),
            ((-0.5, -0.5, -0.5), (0.5, -0.4, 0.5)),
            ((-0.5, 0.4, -0.5), (0.5, 0.5, 0.5)),
            ((-0.5, -0.5, -0.5), (0.5, 0.5, -0.4)),
            ((-0.5, -0.5, 0.4), (0.5, 0.5, 0.5)),
        ]
        shell = np.vstack([sample_box(lo, hi, 0.025) for lo, hi in slabs])
        grid = grid_factory(shell, lower=(-1, -1, -1), upper=(1, 1, 1), resolution=0.05)
        with pytest.raises(UnreachableWithinBudgetError) as exc:
            plan_shortest_path(query((0, 0, 0), (0.8, 0.8, 0.8), max_iterations=300), grid)
        assert isinstance(exc.value, PlanningError)

    @pytest.mark.parametrize(
        "kwargs",
        [{"step": 0.0}, {"goal_bias": 1.5}, {"margin": -0.1}, {"node_spacing": 0.0}],
    )
    def test_invalid_query(self, kwargs):
        with pytest.raises(ValueError):
            query((0, 0, 0), (1, 0, 0), **kwargs)


class TestSimplifyPath:
    def test_collinear_points_collapse(self, empty_grid):
        points = np.array([[0, 0, 0], [0.1, 0.1, 0], [0.2, 0, 0], [0.5, 0, 0]])
        simplified = simplify_path(points, empty_grid, MARGIN)
        np.testing.assert_allclose(simplified, [[0, 0, 0], [0.5, 0, 0]])

    def test_detour_is_kept_around_obstacle(self, box_grid):
        points = np.array([[-1, 0, 0], [-1, 0.8, 0], [1, 0.8, 0], [1, 0, 0]])
        simplified = simplify_path(points, box_grid, MARGIN)
        assert path_is_collision_free(box_grid, simplified, MARGIN)
        assert len(simplified) >= 3
