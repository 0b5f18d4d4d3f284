import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskfield.geometry import (
    FrenetCoord,
    GeometryError,
    GridSpec,
    PathGeometry,
    cell_to_world,
    mean_curvature,
    points_in_polygon,
    polygon_is_simple,
    project_frenet,
    rasterize_footprint,
    world_to_cell,
)

from conftest import make_car


def straight_path(length=10.0, n=11):
    xs = np.linspace(0, length, n)
    return PathGeometry(np.stack([xs, np.zeros(n)], axis=1))


class TestProjectFrenet:
    def test_axis_aligned(self):
        fc = project_frenet((3.0, 2.0), straight_path())
        assert fc.s == pytest.approx(3.0, abs=1e-12)
        assert fc.d == pytest.approx(2.0, abs=1e-12)
        assert fc.in_domain

    def test_beyond_end_clamps(self):
        fc = project_frenet((12.0, 0.0), straight_path())
        assert fc.s == pytest.approx(10.0, abs=1e-12)
        assert not fc.in_domain

    def test_behind_start_clamps(self):
        fc = project_frenet((-1.0, 0.5), straight_path())
        assert fc.s == 0.0
        assert not fc.in_domain

    def test_sign_flips_under_reflection(self):
        path = straight_path()
        up = project_frenet((4.0, 1.5), path)
        down = project_frenet((4.0, -1.5), path)
        assert up.d == pytest.approx(-down.d)
        assert up.d > 0  # left of +x direction is +y

    def test_quarter_circle_center(self):
        # CCW quarter circle of radius 5 about the origin; the circle
        # center is on the left of the path, so d is positive and equals
        # the apothem of the chord (within chord sagitta of 5).
        theta = np.linspace(0.0, math.pi / 2.0, 50)
        path = PathGeometry(np.stack([5 * np.cos(theta), 5 * np.sin(theta)], axis=1))
        fc = project_frenet((0.0, 0.0), path)
        assert fc.in_domain
        assert fc.d > 0
        assert fc.d == pytest.approx(5.0, abs=0.01)
        # cross-check against dense sampling of the polyline
        dense_s = np.linspace(0, path.total_length, 20000)
        dense_pts = np.array([path.point_at(s) for s in dense_s])
        dists = np.hypot(dense_pts[:, 0], dense_pts[:, 1])
        assert abs(fc.d) == pytest.approx(dists.min(), abs=1e-4)

    @settings(max_examples=40, deadline=None)
    @given(
        frac=st.floats(0.1, 0.9),
        offset=st.floats(-0.9, 0.9),
        bend=st.floats(-0.02, 0.02),
    )
    def test_recovers_constructed_coordinates(self, frac, offset, bend):
        # gently curved path: headings accumulate a small per-step bend
        headings = np.cumsum(np.full(40, bend))
        steps = np.stack([np.cos(headings), np.sin(headings)], axis=1)
        pts = np.concatenate([[[0.0, 0.0]], np.cumsum(steps, axis=0)])
        path = PathGeometry(pts)
        s_true = frac * path.total_length
        point = path.point_at(s_true) + offset * path.normal_at(s_true)
        fc = project_frenet(point, path)
        seg = float(path.seg_len.max())
        assert fc.s == pytest.approx(s_true, abs=seg)
        assert fc.d == pytest.approx(offset, abs=seg)


class TestMeanCurvature:
    def test_collinear_zero(self):
        assert mean_curvature([[0, 0], [1, 0], [2, 0], [5, 0]]) == 0.0

    def test_two_points_zero(self):
        assert mean_curvature([[0, 0], [1, 1]]) == 0.0

    def test_circle_radius_five(self):
        theta = np.linspace(0, 2 * math.pi, 65)[:-1]
        poly = np.stack([5 * np.cos(theta), 5 * np.sin(theta)], axis=1)
        assert mean_curvature(poly) == pytest.approx(0.2, rel=0.02)

    def test_repeated_points_contribute_zero(self):
        assert mean_curvature([[0, 0], [1, 0], [1, 0], [2, 0]]) == 0.0

    def test_rigid_invariance(self):
        rng = np.random.default_rng(3)
        pts = np.cumsum(rng.normal(size=(12, 2)), axis=0)
        ang = 0.77
        rot = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
        moved = pts @ rot.T + np.array([4.0, -7.0])
        assert mean_curvature(moved) == pytest.approx(mean_curvature(pts), rel=1e-9)


class TestPathGeometry:
    def test_cum_arclength_strictly_increasing(self):
        path = straight_path(10, 11)
        assert np.all(np.diff(path.cum_s) > 0)
        assert path.total_length == pytest.approx(10.0)

    def test_duplicate_vertices_dropped(self):
        path = PathGeometry([[0, 0], [1, 0], [1, 0], [2, 0]], speeds=[1, 2, 3, 4])
        assert len(path.points) == 3
        assert len(path.speeds) == 3
        assert np.all(np.diff(path.cum_s) > 0)

    def test_single_point_degenerate(self):
        path = PathGeometry([[3, 4]])
        assert path.is_degenerate
        assert path.total_length == 0.0

    def test_speed_interpolation(self):
        path = PathGeometry([[0, 0], [10, 0]], speeds=[0.0, 10.0])
        assert path.speed_at(5.0) == pytest.approx(5.0)
        assert path.speed_at(0.0) == 0.0

    def test_no_speeds_gives_zero(self):
        assert straight_path().speed_at(3.0) == 0.0


class TestGrid:
    def test_validation(self):
        with pytest.raises(GeometryError):
            GridSpec(center=(0, 0), resolution=0.0)
        with pytest.raises(GeometryError):
            GridSpec(center=(0, 0), extent=-1.0)
        with pytest.raises(GeometryError):
            GridSpec(center=(0, 0), extent=10000.0, resolution=0.01)

    def test_default_shape(self):
        grid = GridSpec(center=(0, 0))
        assert grid.shape == (400, 400)

    def test_center_maps_to_center_cell(self):
        grid = GridSpec(center=(3.0, -2.0), extent=5.0, resolution=0.5)
        row, col, inside = world_to_cell((3.0, -2.0), grid)
        assert inside and row == grid.n // 2 and col == grid.n // 2

    def test_corner_point_maps_to_corner_cell(self):
        grid = GridSpec(center=(0, 0), extent=5.0, resolution=0.5)
        row, col, inside = world_to_cell((-4.99, -4.99), grid)
        assert inside and (row, col) == (0, 0)

    def test_round_trip_quantization(self):
        grid = GridSpec(center=(1.0, 2.0), extent=8.0, resolution=0.25, orientation=0.3)
        rng = np.random.default_rng(7)
        for _ in range(50):
            p = grid.center + rng.uniform(-7, 7, size=2)
            row, col, inside = world_to_cell(p, grid)
            assert inside
            back = cell_to_world((row, col), grid)
            delta = grid.world_to_grid(p) - grid.world_to_grid(back)
            assert np.all(np.abs(delta) <= grid.resolution / 2 + 1e-12)

    def test_out_of_grid_flagged(self):
        grid = GridSpec(center=(0, 0), extent=5.0, resolution=0.5)
        _, _, inside = world_to_cell((100.0, 0.0), grid)
        assert not inside


class TestRasterizeFootprint:
    def brute_force(self, agent, grid, inflation):
        half_l = agent.length / 2 + inflation
        half_w = agent.width / 2 + inflation
        ch, sh = math.cos(agent.heading), math.sin(agent.heading)
        out = set()
        for row in range(grid.n):
            for col in range(grid.n):
                x, y = cell_to_world((row, col), grid)
                u = ch * (x - agent.x) + sh * (y - agent.y)
                v = -sh * (x - agent.x) + ch * (y - agent.y)
                if abs(u) <= half_l and abs(v) <= half_w:
                    out.add((row, col))
        return out

    def test_matches_brute_force(self):
        grid = GridSpec(center=(0, 0), extent=6.0, resolution=0.5)
        rng = np.random.default_rng(11)
        for _ in range(12):
            agent = make_car(
                x=float(rng.uniform(-4, 4)),
                y=float(rng.uniform(-4, 4)),
                heading=float(rng.uniform(0, 2 * math.pi)),
                length=float(rng.uniform(1, 5)),
                width=float(rng.uniform(0.5, 2.5)),
            )
            inflation = float(rng.uniform(0, 1))
            got = {tuple(c) for c in rasterize_footprint(agent, grid, inflation)}
            assert got == self.brute_force(agent, grid, inflation)

    def test_cell_count_for_aligned_box_on_corner(self):
        # 4 m x 2 m box centered on a cell corner at 0.25 m resolution:
        # cell centers at +-(0.125 + k*0.25) give 16 columns x 8 rows
        grid = GridSpec(center=(0, 0), extent=5.0, resolution=0.25)
        agent = make_car(x=0.0, y=0.0, heading=0.0, length=4.0, width=2.0)
        assert len(rasterize_footprint(agent, grid, 0.0)) == 128

    def test_outside_grid_empty(self):
        grid = GridSpec(center=(0, 0), extent=5.0, resolution=0.5)
        agent = make_car(x=100.0, y=100.0)
        assert len(rasterize_footprint(agent, grid, 0.0)) == 0

    def test_inflation_monotone(self):
        grid = GridSpec(center=(0, 0), extent=6.0, resolution=0.25)
        agent = make_car(x=1.0, y=-0.5, heading=0.4)
        small = {tuple(c) for c in rasterize_footprint(agent, grid, 0.0)}
        big = {tuple(c) for c in rasterize_footprint(agent, grid, 1.0)}
        assert small <= big


class TestPolygons:
    def test_even_odd_square(self):
        square = np.array([[0, 0], [2, 0], [2, 2], [0, 2]])
        pts = np.array([[1, 1], [3, 1], [-0.1, 0.5], [1.99, 1.99]])
        got = points_in_polygon(pts, square)
        assert list(got) == [True, False, False, True]

    def test_simple_polygon_check(self):
        square = [[0, 0], [2, 0], [2, 2], [0, 2]]
        bowtie = [[0, 0], [2, 2], [2, 0], [0, 2]]
        assert polygon_is_simple(np.array(square))
        assert not polygon_is_simple(np.array(bowtie))


def test_frenet_coord_is_plain_record():
    fc = FrenetCoord(1.0, -2.0, True)
    assert (fc.s, fc.d, fc.in_domain) == (1.0, -2.0, True)
